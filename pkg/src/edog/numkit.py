"""Small numerical toolkit used by every trained model.

Matrices are plain ``float64`` numpy arrays. Randomness comes only from
:func:`rng`, which wraps numpy's PCG64 generator seeded through a
``SeedSequence`` built from an integer seed plus a tuple of labels. Labels are
hashed with BLAKE2b so the same (seed, labels) produces the same stream on
every platform and Python version.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _label_word(label) -> int:
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def _seed_sequence(seed: int, labels) -> np.random.SeedSequence:
    seed = int(seed)
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    # split the 64-bit seed into two 32-bit words so large seeds stay distinct
    words = [seed & 0xFFFFFFFF, seed >> 32]
    words.extend(_label_word(label) for label in labels)
    return np.random.SeedSequence(words)


def rng(seed: int, *labels) -> np.random.Generator:
    """PCG64 stream for ``seed``, optionally split into a labeled substream."""
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, labels)))


def substream_seed(seed: int, *labels) -> int:
    """Derive an independent 63-bit integer seed from ``seed`` and ``labels``."""
    state = _seed_sequence(seed, labels).generate_state(2, dtype=np.uint32)
    return ((int(state[1]) << 32) | int(state[0])) & 0x7FFFFFFFFFFFFFFF


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DomainError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def stable_sigmoid(x):
    """Logistic function that never overflows. Works on scalars and arrays."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    z = np.exp(v - v.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def cross_entropy(p, y: int) -> float:
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < p.shape[-1]:
        raise DomainError(f"class id {y} out of range for {p.shape[-1]} classes")
    return float(-np.log(max(p[y], PROB_FLOOR)))


def binary_cross_entropy(p, label):
    """Elementwise -[y log p + (1-y) log(1-p)] with the probability floor."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return -(label * np.log(p) + (1.0 - label) * np.log1p(-p))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def glorot_uniform(gen: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param, dtype=np.float64), np.zeros_like(param, dtype=np.float64))


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """Bias-corrected Adam update. Mutates ``state`` and returns the new param."""
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise DomainError(f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.t += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = state.m / (1.0 - ADAM_BETA1 ** state.t)
    v_hat = state.v / (1.0 - ADAM_BETA2 ** state.t)
    return param - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    return param - lr * grad


@dataclass
class Adam:
    """Adam over a named bundle of parameters."""

    lr: float
    states: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> dict:
        out = {}
        for name, value in params.items():
            state = self.states.get(name)
            if state is None:
                state = self.states[name] = AdamState.like(value)
            out[name] = adam_step(value, grads[name], state, self.lr)
        return out


def finite_diff_grad(f: Callable[[np.ndarray], float], at: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    at = np.array(at, dtype=np.float64)
    grad = np.zeros_like(at)
    flat = at.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(at)
        flat[i] = orig - h
        down = f(at)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
