from .base import ArmSet, Environment, Feedback, Round, normalize_rows, regret_of
from .classification import ClassificationEnv, classification_arms, load_labeled_csv
from .ratings import RatingEnv, RatingSpec, ingest_ratings, power_svd
from .synthetic import SyntheticEnv, SyntheticSpec, expected_rewards, synthetic_step

__all__ = [
    "ArmSet",
    "ClassificationEnv",
    "Environment",
    "Feedback",
    "RatingEnv",
    "RatingSpec",
    "Round",
    "SyntheticEnv",
    "SyntheticSpec",
    "classification_arms",
    "expected_rewards",
    "ingest_ratings",
    "load_labeled_csv",
    "normalize_rows",
    "power_svd",
    "regret_of",
    "synthetic_step",
]
