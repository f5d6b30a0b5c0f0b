"""Dense float64 primitives with hand-derived backward passes, plus Adam.

Every forward here is a pure function of its inputs; backward passes take
whatever the forward returned (or cached) and the upstream gradient. All
arrays are C-contiguous float64 so checkpoints round-trip bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ValidationError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BCE_CLAMP = 1e-12


def as_dense(values) -> np.ndarray:
    """Coerce to a C-contiguous float64 array."""
    return np.ascontiguousarray(values, dtype=np.float64)


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y[i, j] = sum_k x[i, k] * w[k, j] + b[j]."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(
            f"affine: input {tuple(x.shape)} does not conform to weight {tuple(w.shape)}"
        )
    if b.shape != (w.shape[1],):
        raise DimensionError(
            f"affine: bias {tuple(b.shape)} does not conform to weight {tuple(w.shape)}"
        )
    return x @ w + b


def affine_backward(grad_out, x, w):
    """Returns (dx, dw, db) for y = x @ w + b."""
    dx = grad_out @ w.T
    dw = x.T @ grad_out
    db = grad_out.sum(axis=0)
    return dx, dw, db


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad_out, y):
    """y must be sigmoid(x)."""
    return grad_out * y * (1.0 - y)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(grad_out, y):
    """y must be tanh(x)."""
    return grad_out * (1.0 - y * y)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(grad_out, y):
    """y must be softmax(logits); returns gradient w.r.t. logits."""
    inner = (grad_out * y).sum(axis=-1, keepdims=True)
    return y * (grad_out - inner)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(
            f"hadamard: operands {tuple(a.shape)} and {tuple(b.shape)} differ"
        )
    return a * b


def hadamard_backward(grad_out, a, b):
    return grad_out * b, grad_out * a


def bce_loss(predicted: np.ndarray, targets) -> float:
    """Mean negative log-probability of the true class.

    predicted: (n, 2) rows of class probabilities, targets: n labels in {0, 1}.
    Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
    """
    targets = np.asarray(targets)
    if predicted.ndim != 2 or predicted.shape[1] != 2:
        raise DimensionError(
            f"bce_loss: predicted {tuple(predicted.shape)} is not (n, 2)"
        )
    if targets.shape != (predicted.shape[0],):
        raise DimensionError(
            f"bce_loss: targets {tuple(targets.shape)} do not match predicted {tuple(predicted.shape)}"
        )
    if not np.isin(targets, (0, 1)).all():
        raise ValidationError(f"bce_loss: labels must be 0 or 1, got {targets!r}")
    picked = predicted[np.arange(len(targets)), targets]
    picked = np.clip(picked, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(np.log(picked)))


def bce_backward(predicted: np.ndarray, targets) -> np.ndarray:
    """Gradient of bce_loss w.r.t. the predicted probabilities."""
    targets = np.asarray(targets)
    n = predicted.shape[0]
    picked = predicted[np.arange(n), targets]
    grad = np.zeros_like(predicted)
    inside = (picked > BCE_CLAMP) & (picked < 1.0 - BCE_CLAMP)
    rows = np.arange(n)[inside]
    grad[rows, targets[inside]] = -1.0 / (n * picked[inside])
    return grad


def dropout_mask(shape, rate: float, rng_seed: int) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout: rate must be in [0, 1), got {rate}")
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def dropout(x: np.ndarray, rate: float, rng_seed: int, training: bool) -> np.ndarray:
    """Inverted dropout; identity at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, rng_seed)


class ParameterSet:
    """Named float64 parameter arrays with per-parameter Adam state."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, array) -> None:
        if name in self._arrays:
            raise ValidationError(f"parameter {name!r} already exists")
        arr = as_dense(array)
        self._arrays[name] = arr
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._arrays[name]
        except KeyError:
            raise ValidationError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def names(self):
        return list(self._arrays)

    def moment1(self, name: str) -> np.ndarray:
        return self._m[name]

    def moment2(self, name: str) -> np.ndarray:
        return self._v[name]

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, arr in self._arrays.items():
            out._arrays[name] = arr.copy()
            out._m[name] = self._m[name].copy()
            out._v[name] = self._v[name].copy()
        out.step_count = self.step_count
        return out


def adam_step(params: ParameterSet, gradients: dict, learning_rate: float,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              eps: float = ADAM_EPS) -> ParameterSet:
    """One bias-corrected Adam update, in place; returns params."""
    for name in gradients:
        if name not in params:
            raise ValidationError(f"unknown parameter {name!r} in gradients")
    params.step_count += 1
    t = params.step_count
    for name in params.names():
        g = gradients.get(name)
        theta = params[name]
        if g is None:
            g = np.zeros_like(theta)
        else:
            g = np.asarray(g, dtype=np.float64)
            if g.shape != theta.shape:
                raise DimensionError(
                    f"adam_step: gradient {tuple(g.shape)} does not match "
                    f"parameter {name!r} {tuple(theta.shape)}"
                )
        m = params.moment1(name)
        v = params.moment2(name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        theta -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return params


def global_grad_norm(gradients: dict) -> float:
    total = 0.0
    for g in gradients.values():
        total += float(np.sum(np.asarray(g) ** 2))
    return float(np.sqrt(total))


def clip_by_global_norm(gradients: dict, max_norm: float) -> dict:
    """Scales all gradients so their joint L2 norm is at most max_norm."""
    norm = global_grad_norm(gradients)
    if norm <= max_norm or norm == 0.0:
        return gradients
    scale = max_norm / norm
    return {name: g * scale for name, g in gradients.items()}
