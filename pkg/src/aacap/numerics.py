"""Dense linear algebra, activations, loss, Adam, and a gradient checker.

Everything runs in float64 on plain numpy arrays: the models here are tiny,
so determinism and checkable gradients matter more than speed. Probabilities
are floored at PROB_FLOOR before any log so a pathological output can never
produce an infinite loss.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ShapeError

PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class ParameterGroup:
    """One learnable array plus its gradient and Adam state."""

    name: str
    value: np.ndarray
    gradient: np.ndarray = field(default=None)  # type: ignore[assignment]
    adam_m: np.ndarray = field(default=None)  # type: ignore[assignment]
    adam_v: np.ndarray = field(default=None)  # type: ignore[assignment]
    step_count: int = 0

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.gradient is None:
            self.gradient = np.zeros_like(self.value)
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.value)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.value)
        for label, arr in (("gradient", self.gradient), ("adam_m", self.adam_m),
                           ("adam_v", self.adam_v)):
            if arr.shape != self.value.shape:
                raise ShapeError(
                    f"{self.name}: {label} shape {arr.shape} != value shape {self.value.shape}")

    def zero_grad(self):
        self.gradient.fill(0.0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check naming both operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return a @ b


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax of a vector (max-subtracted). -inf entries get weight 0."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = x - np.max(x)
    exps = np.exp(shifted)
    return exps / exps.sum()


def log_softmax(x: np.ndarray) -> np.ndarray:
    """log(softmax(x)) without forming intermediate tiny probabilities."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("log_softmax of an empty vector")
    shifted = x - np.max(x)
    return shifted - np.log(np.exp(shifted).sum())


def cross_entropy(predicted: np.ndarray, target_index: int) -> float:
    """-ln(predicted[target_index]) with the probability floored at PROB_FLOOR.

    `predicted` must be a probability vector (sums to 1 within 1e-6).
    """
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    if not 0 <= target_index < predicted.size:
        raise ValueError(
            f"target index {target_index} out of range for {predicted.size} classes")
    total = predicted.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"predicted probabilities sum to {total!r}, not 1")
    return float(-np.log(max(predicted[target_index], PROB_FLOOR)))


def adam_step(group: ParameterGroup, learning_rate: float) -> ParameterGroup:
    """Standard Adam update in place; increments step_count, clears the gradient."""
    g = group.gradient
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"{group.name}: non-finite gradient entries")
    group.step_count += 1
    t = group.step_count
    group.adam_m *= ADAM_BETA1
    group.adam_m += (1.0 - ADAM_BETA1) * g
    group.adam_v *= ADAM_BETA2
    group.adam_v += (1.0 - ADAM_BETA2) * g * g
    m_hat = group.adam_m / (1.0 - ADAM_BETA1 ** t)
    v_hat = group.adam_v / (1.0 - ADAM_BETA2 ** t)
    group.value -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    group.zero_grad()
    return group


def finite_diff_check(loss_fn: Callable[[], float], group: ParameterGroup,
                      epsilon: float = 1e-5) -> float:
    """Compare group.gradient against central differences of loss_fn.

    Returns max over entries of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    loss_fn must be deterministic; it is evaluated twice up front to verify that.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    if abs(loss_fn() - loss_fn()) != 0.0:
        raise ValueError("loss_fn is not deterministic")
    if group.value.size == 0:
        return 0.0
    worst = 0.0
    flat_value = group.value.ravel()
    flat_grad = group.gradient.ravel()
    for idx in range(flat_value.size):
        saved = flat_value[idx]
        flat_value[idx] = saved + epsilon
        loss_plus = loss_fn()
        flat_value[idx] = saved - epsilon
        loss_minus = loss_fn()
        flat_value[idx] = saved
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        analytic = flat_grad[idx]
        rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, rel)
    return worst
