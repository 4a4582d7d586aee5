from .base import Decision, Policy, select_arm
from .linucb import LinUCB, LinUCBConfig
from .metaban import MetaBan, MetaBanConfig
from .neural_ucb import NeuralUCB, NeuralUCBConfig
from .ucb import UcbConfig, meta_ucb, user_ucb_term

__all__ = [
    "Decision",
    "LinUCB",
    "LinUCBConfig",
    "MetaBan",
    "MetaBanConfig",
    "NeuralUCB",
    "NeuralUCBConfig",
    "Policy",
    "UcbConfig",
    "meta_ucb",
    "select_arm",
    "user_ucb_term",
]
