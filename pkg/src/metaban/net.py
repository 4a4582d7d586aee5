"""Bias-free fully-connected ReLU network with a scalar output.

    f(x) = W_L relu(W_{L-1} relu(... relu(W_1 x)))

Parameters live in one flat float64 vector laid out as the row-major
concatenation of W_1, ..., W_L. Every helper here works on that layout so
gradient vectors can be added to parameter vectors directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    width: int
    depth: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.depth < 2:
            raise ValueError(f"depth must be >= 2, got {self.depth}")
        if self.seed < 0:
            raise ValueError(f"seed must be unsigned, got {self.seed}")

    @property
    def shapes(self) -> list[tuple[int, int]]:
        d, m = self.input_dim, self.width
        return [(m, d)] + [(m, m)] * (self.depth - 2) + [(1, m)]

    @property
    def num_params(self) -> int:
        d, m, L = self.input_dim, self.width, self.depth
        return m * d + (L - 2) * m * m + m

    @property
    def offsets(self) -> list[int]:
        out = [0]
        for r, c in self.shapes:
            out.append(out[-1] + r * c)
        return out


class NetworkParams:
    """Immutable parameter vector for a network of a given config.

    ``flat`` is a read-only float64 array of length ``config.num_params``;
    ``layers`` are read-only reshaped views into it.
    """

    __slots__ = ("config", "flat")

    def __init__(self, config: NetworkConfig, flat):
        flat = np.array(flat, dtype=np.float64, copy=True).reshape(-1)
        if flat.size != config.num_params:
            raise ValueError(
                f"expected {config.num_params} parameters, got {flat.size}"
            )
        if not np.all(np.isfinite(flat)):
            raise FloatingPointError("parameters must be finite")
        flat.flags.writeable = False
        object.__setattr__(self, "config", config)
        object.__setattr__(self, "flat", flat)

    def __setattr__(self, name, value):
        raise AttributeError("NetworkParams is immutable")

    @classmethod
    def from_layers(cls, config: NetworkConfig, layers) -> "NetworkParams":
        if len(layers) != config.depth:
            raise ValueError(f"expected {config.depth} layers, got {len(layers)}")
        for W, shape in zip(layers, config.shapes):
            if np.shape(W) != shape:
                raise ValueError(f"layer shape {np.shape(W)} != expected {shape}")
        return cls(config, np.concatenate([np.ravel(W) for W in layers]))

    @property
    def layers(self) -> list[np.ndarray]:
        return unflatten(self.flat, self.config)

    def replace_flat(self, flat) -> "NetworkParams":
        return NetworkParams(self.config, flat)

    def __len__(self):
        return self.flat.size

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return self.config.shapes == other.config.shapes and np.array_equal(
            self.flat, other.flat
        )

    def __hash__(self):
        return hash((tuple(self.config.shapes), self.flat.tobytes()))

    def __repr__(self):
        return (
            f"NetworkParams(d={self.config.input_dim}, m={self.config.width}, "
            f"L={self.config.depth}, norm={np.linalg.norm(self.flat):.4g})"
        )


def unflatten(flat: np.ndarray, config: NetworkConfig) -> list[np.ndarray]:
    """Split a flat vector (or a stack of them, shape (..., p)) into layer views."""
    offs = config.offsets
    lead = flat.shape[:-1]
    return [
        flat[..., offs[i] : offs[i + 1]].reshape(*lead, *shape)
        for i, shape in enumerate(config.shapes)
    ]


def init_params(cfg: NetworkConfig) -> NetworkParams:
    """Hidden layers ~ N(0, 2/m) entrywise, output layer ~ N(0, 1/m)."""
    rng = np.random.default_rng(cfg.seed)
    m = cfg.width
    layers = []
    for l, shape in enumerate(cfg.shapes):
        var = 1.0 / m if l == cfg.depth - 1 else 2.0 / m
        layers.append(rng.normal(0.0, np.sqrt(var), size=shape))
    return NetworkParams.from_layers(cfg, layers)


def _check_input(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != params.config.input_dim:
        raise ValueError(
            f"input dimension {X.shape[-1]} != network input_dim {params.config.input_dim}"
        )
    return X


def _forward_cache(layers, X):
    acts = [X]
    pre = []
    h = X
    for W in layers[:-1]:
        z = h @ W.T
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    out = (h @ layers[-1].T)[..., 0]
    return out, acts, pre


def forward(params: NetworkParams, x) -> float:
    x = _check_input(params, x)
    if x.ndim != 1:
        raise ValueError("forward takes a single vector; use forward_batch")
    return float(forward_batch(params, x[None, :])[0])


def forward_batch(params: NetworkParams, X) -> np.ndarray:
    X = _check_input(params, np.atleast_2d(X))
    out, _, _ = _forward_cache(params.layers, X)
    return out


def _backward(layers, acts, pre, coef) -> np.ndarray:
    """Sum over rows of coef[n] * d f(x_n) / d theta, as a flat vector."""
    grads = [None] * len(layers)
    grads[-1] = (coef @ acts[-1])[None, :]
    delta = coef[:, None] * layers[-1]
    for l in range(len(layers) - 2, -1, -1):
        delta = delta * (pre[l] > 0.0)
        grads[l] = delta.T @ acts[l]
        if l:
            delta = delta @ layers[l]
    return np.concatenate([g.ravel() for g in grads])


def gradient(params: NetworkParams, x) -> np.ndarray:
    """Analytic d f(x) / d theta in the flat layout (ReLU'(0) taken as 0)."""
    x = _check_input(params, x)
    if x.ndim != 1:
        raise ValueError("gradient takes a single vector; use sample_gradients")
    layers = params.layers
    _, acts, pre = _forward_cache(layers, x[None, :])
    return _backward(layers, acts, pre, np.ones(1))


def sample_gradients(params: NetworkParams, X) -> np.ndarray:
    """Per-row gradients, shape (N, p)."""
    X = _check_input(params, np.atleast_2d(X))
    layers = params.layers
    _, acts, pre = _forward_cache(layers, X)
    n = X.shape[0]
    grads = [None] * len(layers)
    grads[-1] = acts[-1]
    delta = np.broadcast_to(layers[-1], (n, layers[-1].shape[1]))
    for l in range(len(layers) - 2, -1, -1):
        delta = delta * (pre[l] > 0.0)
        grads[l] = (delta[:, :, None] * acts[l][:, None, :]).reshape(n, -1)
        if l:
            delta = delta @ layers[l]
    return np.concatenate(grads, axis=1)


def squared_loss_grad(
    params: NetworkParams, X, r, weights=None
) -> tuple[float, np.ndarray]:
    """Loss 0.5 * sum w_n (f(x_n) - r_n)^2 over rows and its flat gradient."""
    X = _check_input(params, np.atleast_2d(X))
    return loss_grad_flat(params.flat, params.config, X, r, weights)


def loss_grad_flat(flat, config: NetworkConfig, X, r, weights=None):
    """Same as ``squared_loss_grad`` on a raw flat vector; no validation."""
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    layers = unflatten(flat, config)
    out, acts, pre = _forward_cache(layers, X)
    resid = out - r
    if weights is None:
        return 0.5 * float(resid @ resid), _backward(layers, acts, pre, resid)
    wr = np.asarray(weights, dtype=np.float64) * resid
    return 0.5 * float(wr @ resid), _backward(layers, acts, pre, wr)


def param_distance(a: NetworkParams, b: NetworkParams) -> float:
    if a.config.shapes != b.config.shapes:
        raise ValueError("parameter shapes differ")
    return float(np.linalg.norm(a.flat - b.flat))


# Stacked evaluation: K parameter vectors at once, shape (K, p).


def forward_stacked(flats: np.ndarray, config: NetworkConfig, X) -> np.ndarray:
    """Evaluate every parameter row on every input row -> (K, N)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    layers = unflatten(np.atleast_2d(flats), config)
    h = np.einsum("kmd,nd->knm", layers[0], X)
    for W in layers[1:-1]:
        h = np.einsum("kij,knj->kni", W, np.maximum(h, 0.0))
    return np.einsum("kj,knj->kn", layers[-1][:, 0, :], np.maximum(h, 0.0))


def paired_forward_gradient(
    flats: np.ndarray, config: NetworkConfig, X
) -> tuple[np.ndarray, np.ndarray]:
    """Row k of ``flats`` evaluated at row k of ``X``: outputs (K,) and gradients (K, p)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    flats = np.atleast_2d(flats)
    k = X.shape[0]
    layers = unflatten(flats, config)
    acts = [X]
    pre = []
    h = X
    for W in layers[:-1]:
        z = np.einsum("kij,kj->ki", W, h)
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    out = np.einsum("kj,kj->k", layers[-1][:, 0, :], h)
    grads = [None] * len(layers)
    grads[-1] = acts[-1]
    delta = layers[-1][:, 0, :]
    for l in range(len(layers) - 2, -1, -1):
        delta = delta * (pre[l] > 0.0)
        grads[l] = (delta[:, :, None] * acts[l][:, None, :]).reshape(k, -1)
        if l:
            delta = np.einsum("ki,kij->kj", delta, layers[l])
    return out, np.concatenate(grads, axis=1)


def loss_grad_stacked(flats: np.ndarray, config: NetworkConfig, X, r, w):
    """Weighted squared losses and gradients for K parameter rows at once.

    ``X`` has shape (K, N, d) and ``r``, ``w`` shape (K, N); row k of
    ``flats`` sees only its own slice. Zero weights act as padding.
    Returns losses (K,) and gradients (K, p).
    """
    layers = unflatten(flats, config)
    acts = [X]
    active = []
    h = X
    # in-place activation keeps the (K, N, m) temporaries to a minimum
    for W in layers[:-1]:
        h = h @ W.transpose(0, 2, 1)
        np.maximum(h, 0.0, out=h)
        active.append(h > 0.0)
        acts.append(h)
    out = (h @ layers[-1].transpose(0, 2, 1))[..., 0]
    resid = out - r
    wr = w * resid
    K = flats.shape[0]
    grads = [None] * len(layers)
    grads[-1] = (wr[:, None, :] @ acts[-1]).reshape(K, -1)
    delta = wr[:, :, None] * layers[-1]
    for l in range(len(layers) - 2, -1, -1):
        delta *= active[l]
        grads[l] = (delta.transpose(0, 2, 1) @ acts[l]).reshape(K, -1)
        if l:
            delta = delta @ layers[l]
    return 0.5 * np.einsum("kn,kn->k", wr, resid), np.concatenate(grads, axis=1)

