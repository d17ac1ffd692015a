"""Fast-slow ODE systems: vector fields, Jacobians, spectra and a fixed-step integrator.

State vectors are always ordered (slow block, fast block): ``x = (y, z)`` with
``y`` of length ``m`` and ``z`` of length ``n``.  The full vector field is

    g(x) = (eps * g1(y, z, eps), g2(y, z, eps))

in the fast time ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    DifferentiationError,
    DivergenceError,
    EvaluationDomainError,
    PreconditionError,
    SpectrumError,
)

FD_BASE_STEP = np.cbrt(np.finfo(float).eps)

VectorMap = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
JacobianMap = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class StatePoint:
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        z = np.atleast_1d(np.asarray(self.z, dtype=float)).copy()
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise ValueError(f"state point has non-finite entries: y={y}, z={z}")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.z])

    @classmethod
    def from_vector(cls, x, m: int) -> "StatePoint":
        x = np.asarray(x, dtype=float)
        return cls(x[:m], x[m:])


StateLike = Union[StatePoint, Sequence[float], np.ndarray]


def as_vector(x: StateLike) -> np.ndarray:
    if type(x) is np.ndarray and x.ndim == 1 and x.dtype == float:
        return x
    if isinstance(x, StatePoint):
        return x.vector
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True)
class SystemDefinition:
    """A fast-slow vector field with ``m`` slow and ``n`` fast components.

    ``domain_K`` is the compact slow domain as ``(lower, upper)`` arrays of
    length ``m``; ``fast_box`` bounds the fast variables for root searches
    and is configuration, not something the theory fixes.
    """

    m: int
    n: int
    g1: VectorMap
    g2: VectorMap
    jacobian: Optional[JacobianMap] = None
    domain_K: tuple = ((0.0,), (1.0,))
    fast_box: tuple = ((-1.0,), (1.0,))
    name: str = "system"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"need m >= 1 and n >= 1, got m={self.m}, n={self.n}")
        lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in self.domain_K)
        if lo.shape != (self.m,) or hi.shape != (self.m,) or np.any(lo >= hi):
            raise ValueError(f"domain_K must be a nonempty box in R^{self.m}")
        flo, fhi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in self.fast_box)
        if flo.shape != (self.n,) or fhi.shape != (self.n,) or np.any(flo >= fhi):
            raise ValueError(f"fast_box must be a nonempty box in R^{self.n}")
        object.__setattr__(self, "domain_K", (lo, hi))
        object.__setattr__(self, "fast_box", (flo, fhi))

    @property
    def dim(self) -> int:
        return self.m + self.n

    @property
    def fast_box_center(self) -> np.ndarray:
        return 0.5 * (self.fast_box[0] + self.fast_box[1])

    @property
    def fast_box_extent(self) -> float:
        return float(np.max(self.fast_box[1] - self.fast_box[0]))

    def split(self, x: np.ndarray):
        return x[: self.m], x[self.m:]


def eval_g(sys: SystemDefinition, x: StateLike, eps: float) -> np.ndarray:
    x = as_vector(x)
    m = sys.m
    out = np.empty(m + sys.n)
    out[:m] = sys.g1(x[:m], x[m:], eps)
    out[:m] *= eps
    out[m:] = sys.g2(x[:m], x[m:], eps)
    if not np.isfinite(out).all():
        part = "g1" if not np.isfinite(out[:m]).all() else "g2"
        raise EvaluationDomainError(f"{part} is not finite at y={x[:m]}, z={x[m:]}, eps={eps}: {out}")
    return out


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with steps ``cbrt(u) * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(func(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = FD_BASE_STEP * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(func(xp)) - np.asarray(func(xm))) / (xp[i] - xm[i])
    return jac


def eval_jacobian(sys: SystemDefinition, x: StateLike, eps: float) -> np.ndarray:
    x = as_vector(x)
    if sys.jacobian is not None:
        y, z = sys.split(x)
        jac = np.asarray(sys.jacobian(y, z, eps), dtype=float).reshape(sys.dim, sys.dim)
    else:
        jac = fd_jacobian(lambda v: eval_g(sys, v, eps), x)
    if not np.all(np.isfinite(jac)):
        raise DifferentiationError(f"Jacobian has non-finite entries at x={x}, eps={eps}")
    return jac


def fast_spectrum(sys: SystemDefinition, y, z, eps: float) -> np.ndarray:
    """Real parts of the eigenvalues of the fast block D_z g2."""
    x = np.concatenate([np.atleast_1d(y), np.atleast_1d(z)]).astype(float)
    block = eval_jacobian(sys, x, eps)[sys.m:, sys.m:]
    try:
        eigs = np.linalg.eigvals(block)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigenvalue solver failed: {exc}", block=block) from exc
    return np.sort(eigs.real)


def critical_point(sys: SystemDefinition, y, z0=None, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve g2(y, z, 0) = 0 for z by Newton's method."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = sys.fast_box_center.copy() if z0 is None else np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    for _ in range(max_iter):
        x = np.concatenate([y, z])
        r = eval_g(sys, x, 0.0)[sys.m:]
        if np.max(np.abs(r)) < tol:
            return z
        jac = eval_jacobian(sys, x, 0.0)[sys.m:, sys.m:]
        dz = np.linalg.solve(jac, -r)
        z = z + dz
        if np.max(np.abs(dz)) < 1e-15:
            return z
    raise PreconditionError(f"no critical point found at y={y}")


def check_tangency_lemma(sys: SystemDefinition, y, h0_slope, z=None) -> float:
    """Frobenius norm of (Dg)_0 [I_m; D_y h0] at (y, h0(y)) with eps = 0.

    On the critical manifold the leading-order Jacobian annihilates its
    tangent space, so the result should vanish up to the accuracy of the
    supplied slope.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if z is None:
        z = critical_point(sys, y)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    x = np.concatenate([y, z])
    defect = np.max(np.abs(eval_g(sys, x, 0.0)[sys.m:]))
    if defect > 1e-10:
        raise PreconditionError(f"base point ({y}, {z}) is not on the critical manifold: |g2| = {defect:.3e}")
    slope = np.asarray(h0_slope, dtype=float).reshape(sys.n, sys.m)
    tangent = np.vstack([np.eye(sys.m), slope])
    return float(np.linalg.norm(eval_jacobian(sys, x, 0.0) @ tangent))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    xs: np.ndarray
    m: int

    def __post_init__(self):
        if len(self.times) != len(self.xs):
            raise ValueError("times and states must have equal lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def y(self) -> np.ndarray:
        return self.xs[:, : self.m]

    @property
    def z(self) -> np.ndarray:
        return self.xs[:, self.m:]

    @property
    def states(self) -> list:
        return [StatePoint.from_vector(x, self.m) for x in self.xs]

    def __len__(self):
        return len(self.times)


def stable_step(sys: SystemDefinition, x: StateLike, eps: float, safety: float = 0.5) -> float:
    """Largest step satisfying ``dt <= safety / max|fast spectrum|`` at ``x``."""
    x = as_vector(x)
    y, z = sys.split(x)
    rate = np.max(np.abs(fast_spectrum(sys, y, z, eps)))
    return safety / max(rate, 1e-12)


def integrate(sys: SystemDefinition, x0: StateLike, eps: float, t_end: float, dt: float) -> Trajectory:
    """Classical fixed-step RK4 in fast time; the last step is shortened to hit ``t_end``."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = as_vector(x0).copy()
    eval_g(sys, x, eps)
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    times = np.empty(n_steps + 1)
    xs = np.empty((n_steps + 1, x.size))
    times[0] = 0.0
    xs[0] = x
    m, g1, g2 = sys.m, sys.g1, sys.g2
    buf = np.empty(x.size)

    def f(v):
        out = buf.copy()
        out[:m] = g1(v[:m], v[m:], eps)
        out[:m] *= eps
        out[m:] = g2(v[:m], v[m:], eps)
        return out

    t = 0.0
    for i in range(1, n_steps + 1):
        h = min(dt, t_end - t)
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # NaN fails the comparison as well
        if not x.dot(x) <= 1e24:
            raise DivergenceError(f"trajectory diverged after t={t}", last_time=t)
        t = i * dt if i < n_steps else t_end
        times[i] = t
        xs[i] = x
    return Trajectory(times, xs, sys.m)
