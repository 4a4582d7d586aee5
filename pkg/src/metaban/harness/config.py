"""Experiment configuration: JSON loading, validation and object factories.

A minimal config names only the environment and the policies::

    {"env": {"kind": "synthetic", "family": "quadratic"},
     "policies": [{"name": "metaban"}, {"name": "linucb", "alpha": 0.1}]}

Policy entries carry flat hyperparameters; each key is routed to whichever
nested settings object (training, grouping, confidence bound) owns it.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..envs import ClassificationEnv, RatingSpec, SyntheticEnv, SyntheticSpec, ingest_ratings
from ..errors import ConfigError
from ..grouping import GroupConfig
from ..learners import TrainConfig
from ..policy import (
    LinUCB,
    LinUCBConfig,
    MetaBan,
    MetaBanConfig,
    NeuralUCB,
    NeuralUCBConfig,
    UcbConfig,
)

POLICY_NAMES = ("metaban", "neuucb-one", "neuucb-ind", "linucb")
ENV_KINDS = ("synthetic", "ratings", "classification")
ALPHA_GRID = (0.001, 0.01, 0.1, 1.0)
LAMBDA_GRID = (0.01, 0.1, 1.0)

# Flat keys accepted by Meta-Ban, mapped to the nested object that owns them.
_UCB_KEYS = {"beta": "beta", "z": "z", "c": "c", "delta": "delta", "C": "C"}
_GROUP_KEYS = {"nu": "nu", "gamma": "gamma"}
_TRAIN_KEYS = {
    "eta1": "eta1", "J1": "J1", "minibatch": "minibatch", "fraction": "fraction",
    "eps1": "eps1", "eps2": "eps2", "snapshot_mode": "snapshot_mode",
    "stop_at_target": "stop_at_target", "eta1_normalize": "normalize",
}
_METABAN_TOP = {f.name for f in dataclasses.fields(MetaBanConfig)} - {"train", "group", "ucb"}


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


@dataclass(frozen=True)
class PolicySpec:
    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    @property
    def key(self) -> str:
        return self.label or self.name

    def with_params(self, **updates) -> "PolicySpec":
        return PolicySpec(self.name, {**self.params, **updates}, self.label)


@dataclass(frozen=True)
class ExperimentConfig:
    env: dict
    policies: tuple[PolicySpec, ...]
    horizon: int = 1000
    runs: int = 10
    seed: int = 0
    out: str = "results"
    jobs: int = 1
    alpha_grid: tuple[float, ...] = ALPHA_GRID
    lambda_grid: tuple[float, ...] = LAMBDA_GRID
    nu_values: tuple[float, ...] = (1.1, 5.0)

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.env.get("kind", "synthetic") not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {self.env.get('kind')!r}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        keys = [p.key for p in self.policies]
        if len(set(keys)) != len(keys):
            raise ConfigError("policy labels must be unique")
        for p in self.policies:
            validate_policy(p)
        if not self.alpha_grid or not self.lambda_grid:
            raise ConfigError("grids must be nonempty")
        if any(nu <= 1 for nu in self.nu_values):
            raise ConfigError("every nu must be > 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _policy_from_json(raw) -> PolicySpec:
    if isinstance(raw, str):
        return PolicySpec(raw)
    if not isinstance(raw, dict) or "name" not in raw:
        raise ConfigError(f"policy entry needs a name: {raw!r}")
    params = {k: v for k, v in raw.items() if k not in ("name", "label")}
    return PolicySpec(raw["name"], params, raw.get("label"))


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = _field_names(ExperimentConfig)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "env" not in raw or "policies" not in raw:
        raise ConfigError("config must define env and policies")
    kw = dict(raw)
    kw["policies"] = tuple(_policy_from_json(p) for p in raw["policies"])
    for name in ("alpha_grid", "lambda_grid", "nu_values"):
        if name in kw:
            kw[name] = tuple(float(v) for v in kw[name])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(raw)


def metaban_config(params: dict) -> MetaBanConfig:
    top, train, group, ucb = {}, {}, {}, {}
    for key, value in params.items():
        if key in _TRAIN_KEYS:
            train[_TRAIN_KEYS[key]] = value
        elif key in _GROUP_KEYS:
            group[_GROUP_KEYS[key]] = value
        elif key in _UCB_KEYS:
            ucb[_UCB_KEYS[key]] = value
        elif key == "eps1_ucb":
            ucb["eps1"] = value
        elif key in _METABAN_TOP:
            top[key] = value
        else:
            raise ConfigError(f"unknown metaban parameter {key!r}")
    if "eps1" in train:
        ucb.setdefault("eps1", train["eps1"])
    try:
        return MetaBanConfig(
            train=TrainConfig(**train), group=GroupConfig(**group), ucb=UcbConfig(**ucb), **top
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"metaban: {exc}") from None


def _simple_config(cls, params: dict, label: str):
    unknown = set(params) - _field_names(cls)
    if unknown:
        raise ConfigError(f"unknown {label} parameters: {sorted(unknown)}")
    try:
        return cls(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: {exc}") from None


def validate_policy(spec: PolicySpec) -> None:
    if spec.name not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {spec.name!r}; expected one of {POLICY_NAMES}")
    _policy_settings(spec)


def _policy_settings(spec: PolicySpec):
    if spec.name == "metaban":
        return metaban_config(spec.params)
    if spec.name == "linucb":
        return _simple_config(LinUCBConfig, spec.params, spec.name)
    return _simple_config(NeuralUCBConfig, spec.params, spec.name)


def build_policy(spec: PolicySpec, env, seed: int):
    settings = _policy_settings(spec)
    if spec.name == "metaban":
        return MetaBan(env.users, env.dim, settings, seed=seed)
    if spec.name == "linucb":
        return LinUCB(env.users, env.dim, settings, seed=seed)
    variant = spec.name.split("-")[1].upper()
    return NeuralUCB(env.users, env.dim, variant, settings, seed=seed)


def build_env(env_cfg: dict, seed: int):
    params = {k: v for k, v in env_cfg.items() if k != "kind"}
    kind = env_cfg.get("kind", "synthetic")
    try:
        if kind == "synthetic":
            return SyntheticEnv(SyntheticSpec(**{**params, "seed": seed}))
        if kind == "ratings":
            return ingest_ratings(RatingSpec(**{**params, "seed": seed}))
        paths = params.pop("paths", None)
        if not paths:
            raise ConfigError("classification env needs a list of CSV paths")
        return ClassificationEnv.from_csv(paths, seed=seed, **params)
    except TypeError as exc:
        raise ConfigError(f"{kind} environment: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{kind} environment: {exc}") from None
