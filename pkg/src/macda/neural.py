"""Dense networks with hand-written reverse-mode gradients.

Everything works on float64 row batches: inputs are ``(batch, features)``
arrays (a 1-D input is treated as a batch of one and returned 1-D).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from macda.errors import DimensionError

LEAKY_SLOPE = 0.01
CHECKPOINT_FORMAT = "macda-checkpoint/1"


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x > 0, 1.0, slope)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class Mlp:
    """Affine layers with Leaky-ReLU between them; the last layer is linear.

    ``params`` alternates weight ``(in, out)`` and bias ``(out,)`` arrays and is
    updated in place by the optimisers.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 slope: float = LEAKY_SLOPE):
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        self.slope = slope
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x):
        h, single = _as_batch(x)
        if h.shape[1] != self.sizes[0]:
            raise DimensionError(f"expected {self.sizes[0]} input features, got {h.shape[1]}")
        cache = []
        for layer in range(self.n_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            z = h @ W + b
            cache.append((h, z))
            h = leaky_relu(z, self.slope) if layer < self.n_layers - 1 else z
        return (h[0] if single else h), (cache, single)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
        """Parameter gradients and input gradient for upstream ``grad_out``."""
        layers, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != (layers[-1][1].shape[0], self.sizes[-1]):
            raise DimensionError(f"upstream gradient has shape {g.shape}")
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for layer in reversed(range(self.n_layers)):
            h, z = layers[layer]
            if layer < self.n_layers - 1:
                g = g * leaky_relu_grad(z, self.slope)
            W = self.params[2 * layer]
            grads[2 * layer] = h.T @ g
            grads[2 * layer + 1] = g.sum(axis=0)
            g = g @ W.T
        return grads, (g[0] if single else g)


def softmax_policy(logits, mask=None, temperature: float = 1.0) -> np.ndarray:
    """Masked softmax; masked entries get exactly zero probability."""
    z = np.asarray(logits, dtype=np.float64) / temperature
    if mask is None:
        mask = np.ones(z.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != z.shape:
        raise DimensionError("mask and logits differ in shape")
    if not mask.any():
        raise ValueError("every action is masked")
    shifted = np.where(mask, z - z[mask].max(), -np.inf)
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / e.sum()


class AttentionHead:
    """Scaled dot-product attention of one agent over the other agents.

    ``x_i = sum_j a_ij * LeakyReLU(V g_j)`` with ``a_i = softmax_j(q_i . k_j / sqrt(dk))``,
    ``q_i = g_i W_q``, ``k_j = g_j W_k``.
    """

    def __init__(self, embed_dim: int, key_dim: int, value_dim: int,
                 rng: np.random.Generator | None = None, slope: float = LEAKY_SLOPE):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(embed_dim)
        self.W_q = rng.uniform(-bound, bound, (embed_dim, key_dim))
        self.W_k = rng.uniform(-bound, bound, (embed_dim, key_dim))
        self.V = rng.uniform(-bound, bound, (embed_dim, value_dim))
        self.slope = slope

    @property
    def params(self) -> list[np.ndarray]:
        return [self.W_q, self.W_k, self.V]

    def forward(self, g_self, g_others):
        """``g_self`` (B, E), ``g_others`` (B, M, E) -> (x (B, Dv), weights (B, M))."""
        g_self = np.asarray(g_self, dtype=np.float64)
        g_others = np.asarray(g_others, dtype=np.float64)
        E = self.W_q.shape[0]
        if g_self.ndim != 2 or g_others.ndim != 3 or g_self.shape[1] != E or g_others.shape[2] != E \
                or g_others.shape[0] != g_self.shape[0]:
            raise DimensionError("attention inputs do not match the head dimensions")
        scale = 1.0 / np.sqrt(self.W_q.shape[1])
        B, M, _ = g_others.shape
        flat = g_others.reshape(B * M, E)
        q = g_self @ self.W_q
        k = (flat @ self.W_k).reshape(B, M, -1)
        v_pre = (flat @ self.V).reshape(B, M, -1)
        v = leaky_relu(v_pre, self.slope)
        logits = np.matmul(k, q[:, :, None])[:, :, 0] * scale
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        x = np.matmul(w[:, None, :], v)[:, 0, :]
        return x, w, (g_self, g_others, q, k, v_pre, v, w, scale)

    def backward(self, cache, grad_x):
        """Return ([dW_q, dW_k, dV], d_g_self, d_g_others)."""
        g_self, g_others, q, k, v_pre, v, w, scale = cache
        B, M, E = g_others.shape
        d_w = np.matmul(v, grad_x[:, :, None])[:, :, 0]
        d_v = w[:, :, None] * grad_x[:, None, :]
        d_vpre = d_v * leaky_relu_grad(v_pre, self.slope)
        d_logits = w * (d_w - (w * d_w).sum(axis=1, keepdims=True))
        d_q = np.matmul(d_logits[:, None, :], k)[:, 0, :] * scale
        d_k = d_logits[:, :, None] * q[:, None, :] * scale
        flat = g_others.reshape(B * M, E)
        d_k_flat = d_k.reshape(B * M, -1)
        d_vpre_flat = d_vpre.reshape(B * M, -1)
        dWq = g_self.T @ d_q
        dWk = flat.T @ d_k_flat
        dV = flat.T @ d_vpre_flat
        d_self = d_q @ self.W_q.T
        d_others = (d_vpre_flat @ self.V.T + d_k_flat @ self.W_k.T).reshape(B, M, E)
        return [dWq, dWk, dV], d_self, d_others


def attention_mix(g_self, g_other, head: AttentionHead) -> tuple[np.ndarray, np.ndarray]:
    """Mix the other agents' embeddings into agent ``i``'s view.

    ``g_other`` is one embedding (two-agent case, weight exactly 1) or a
    ``(M, E)`` stack. Returns the mixed vector and the attention weights.
    """
    g_self = np.asarray(g_self, dtype=np.float64)
    g_other = np.asarray(g_other, dtype=np.float64)
    if g_other.ndim == 1:
        g_other = g_other[None, :]
    x, w, _ = head.forward(g_self[None, :], g_other[None, :, :])
    return x[0], w[0]


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, frozen: Sequence[int] = ()):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.frozen = frozenset(frozen)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]):
        """Descend along ``grads`` (one array per parameter, in order)."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if i in self.frozen:
                continue
            m, v = self.m[i], self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            denom = v / c2
            np.sqrt(denom, out=denom)
            denom += self.eps
            np.divide(m, denom, out=denom)
            denom *= self.lr / c1
            p -= denom


class Sgd:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, frozen: Sequence[int] = ()):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.frozen = frozenset(frozen)

    def step(self, grads: Sequence[np.ndarray]):
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if i not in self.frozen:
                p -= self.lr * g


def make_optimizer(name: str, params, lr: float, frozen: Sequence[int] = ()):
    if name == "adam":
        return Adam(params, lr, frozen=frozen)
    if name == "sgd":
        return Sgd(params, lr, frozen=frozen)
    raise ValueError(f"unknown optimizer {name!r}")


def save_checkpoint(path, arrays: dict[str, np.ndarray]):
    """Write a JSON shape header line followed by little-endian float64 data."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    header = json.loads(head)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a checkpoint: {path}")
    out, offset = {}, 0
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        out[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
        offset += 8 * count
    if offset != len(body):
        raise ValueError(f"checkpoint {path} has {len(body) - offset} trailing bytes")
    return out
