"""Neural collaborative-filtering bandits with a meta-learner (Meta-Ban)."""

__version__ = "0.1.0"
