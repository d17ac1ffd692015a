"""Finite-difference kernel: directional derivatives, time derivatives along the flow, Lie brackets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DifferentiationError
from .system_core import FD_BASE_STEP, SystemDefinition, as_vector, eval_g, eval_jacobian


def nested_step(depth: int) -> float:
    """Difference step for a field that already contains ``depth`` nested differences.

    Each nesting level costs roughly half the significant digits, so the step
    grows with depth: base**(1 / (1 + depth/2)).
    """
    return float(FD_BASE_STEP ** (1.0 / (1.0 + 0.5 * depth)))


@dataclass(frozen=True)
class MatrixField:
    evaluator: Callable[[np.ndarray, float], np.ndarray]
    rows: int
    cols: int
    recommended_step: float = float(FD_BASE_STEP)
    is_constant: bool = False
    depth: int = 0

    def __post_init__(self):
        if not self.recommended_step > 0:
            raise ValueError("recommended_step must be positive")

    def __call__(self, x, eps: float) -> np.ndarray:
        return np.asarray(self.evaluator(as_vector(x), eps), dtype=float).reshape(self.rows, self.cols)

    @classmethod
    def constant(cls, value) -> "MatrixField":
        value = np.array(value, dtype=float, ndmin=2)
        value.setflags(write=False)
        return cls(lambda x, eps: value, value.shape[0], value.shape[1], is_constant=True)


def directional_derivative(F: MatrixField, x, v, eps: float, step: Optional[float] = None) -> np.ndarray:
    """(DF)(x) v by a central difference along the unit direction of v, acting column-wise."""
    x = as_vector(x)
    v = np.asarray(v, dtype=float).reshape(-1)
    if F.is_constant:
        return np.zeros((F.rows, F.cols))
    norm = np.linalg.norm(v)
    if not np.isfinite(norm):
        raise DifferentiationError(f"direction is not finite: {v}")
    if norm == 0.0:
        return np.zeros((F.rows, F.cols))
    u = v / norm
    h = F.recommended_step if step is None else step
    for _ in range(2):
        fp = F(x + h * u, eps)
        fm = F(x - h * u, eps)
        d = (fp - fm) / (2.0 * h)
        if np.all(np.isfinite(d)):
            return d * norm
        h *= 0.5
    raise DifferentiationError(f"non-finite field values near x={x} along {u}")


def field_time_derivative(sys: SystemDefinition, F: MatrixField, x, eps: float) -> np.ndarray:
    """dF/dt = (DF) g along the flow of the system."""
    if F.is_constant:
        return np.zeros((F.rows, F.cols))
    x = as_vector(x)
    return directional_derivative(F, x, eval_g(sys, x, eps), eps)


def lie_bracket(sys: SystemDefinition, a: MatrixField, x, eps: float) -> np.ndarray:
    """[a, g] = (Dg) a - (Da) g for a single-column field a."""
    if a.cols != 1 or a.rows != sys.dim:
        raise ValueError(f"lie_bracket needs a ({sys.dim} x 1) field, got {a.rows} x {a.cols}")
    x = as_vector(x)
    av = a(x, eps)[:, 0]
    return eval_jacobian(sys, x, eps) @ av - field_time_derivative(sys, a, x, eps)[:, 0]


def vector_field(sys: SystemDefinition) -> MatrixField:
    """The system's own vector field g as a single-column MatrixField."""
    return MatrixField(lambda x, eps: eval_g(sys, x, eps).reshape(-1, 1), sys.dim, 1)
