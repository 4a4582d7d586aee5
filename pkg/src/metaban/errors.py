class StateError(RuntimeError):
    """An operation was invoked on learner or policy state that violates its preconditions."""


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""
