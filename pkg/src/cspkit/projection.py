"""Linear projection of initial conditions onto a CSP manifold along CSP fibers.

Two schemes:

* ``fiber_search``: find the base point p on the manifold whose linearized
  fiber p + span(A_1(p)) passes through x0.
* ``vertical_base``: freeze the direction at the manifold point with the
  same slow coordinate as x0 and intersect that line with the manifold.

Quality is measured dynamically: after the fast transient, the slow
coordinates of the trajectories from x0 and from its projected base differ
only by the base-point mismatch carried along the slow flow.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .engine import BasisStack, evaluate_basis
from .errors import DivergenceError, DomainError, ProjectionError
from .manifold import CspmTable, eval_psi
from .system_core import StatePoint, SystemDefinition, as_vector, fast_spectrum, integrate

FIBER_SEARCH = "fiber_search"
VERTICAL_BASE = "vertical_base"
SCHEMES = (FIBER_SEARCH, VERTICAL_BASE)

_TOL = 1e-13
_MAX_ITER = 50


@dataclass(frozen=True)
class ProjectionResult:
    base: StatePoint
    scheme: str
    amplitude: np.ndarray
    iterations: int
    residual: float
    trace: list = field(default_factory=list, repr=False, compare=False)

    def to_record(self, x0, slow_phase_error=None) -> dict:
        return {
            "x0": [float(v) for v in as_vector(x0)],
            "scheme": self.scheme,
            "base": [float(v) for v in self.base.vector],
            "amplitude": [float(v) for v in np.atleast_1d(self.amplitude)],
            "residual": float(self.residual),
            "slow_phase_error": None if slow_phase_error is None else float(slow_phase_error),
        }


def _fast_columns(basis: BasisStack, point: np.ndarray, eps: float) -> np.ndarray:
    A, _ = evaluate_basis(basis, point, eps)
    return A[:, : basis.n]


def _on_graph(cspm: CspmTable, y: np.ndarray) -> np.ndarray:
    if not cspm.contains(y):
        raise DomainError(f"base candidate y={y} left the manifold grid")
    return np.concatenate([y, eval_psi(cspm, y)])


def _newton(residual, u0, trace):
    """Newton with a forward-difference Jacobian for small dense systems."""
    u = np.array(u0, dtype=float)
    for it in range(1, _MAX_ITER + 1):
        r = residual(u)
        trace.append((u.copy(), float(np.max(np.abs(r)))))
        if np.max(np.abs(r)) < _TOL:
            return u, it - 1, float(np.max(np.abs(r)))
        jac = np.empty((r.size, u.size))
        for j in range(u.size):
            h = 1e-7 * max(1.0, abs(u[j]))
            up = u.copy()
            up[j] += h
            jac[:, j] = (residual(up) - r) / h
        du = np.linalg.solve(jac, -r)
        u = u + du
        if np.max(np.abs(du)) < 1e-15:
            r = residual(u)
            return u, it, float(np.max(np.abs(r)))
    r = residual(u)
    if np.max(np.abs(r)) < 1e-9:
        return u, _MAX_ITER, float(np.max(np.abs(r)))
    raise ProjectionError("projection Newton iteration did not converge", trace=trace)


def project_fiber_search(x0, cspm: CspmTable, basis: BasisStack, eps: float) -> ProjectionResult:
    """Solve x0 = (y_p, psi(y_p)) + A_1(y_p, psi(y_p)) a for (y_p, a)."""
    x0 = as_vector(x0)
    m = cspm.m
    trace = []

    def residual(u):
        p = _on_graph(cspm, u[:m])
        return p + _fast_columns(basis, p, eps) @ u[m:] - x0

    y_start = x0[:m]
    if not cspm.contains(y_start):
        raise ProjectionError(f"x0 slow part {y_start} outside the manifold grid")
    a_start = x0[m:] - eval_psi(cspm, y_start)
    try:
        u, its, res = _newton(residual, np.concatenate([y_start, a_start]), trace)
    except (DomainError, np.linalg.LinAlgError) as exc:
        raise ProjectionError(f"fiber search failed: {exc}", trace=trace) from exc
    base = _on_graph(cspm, u[:m])
    return ProjectionResult(StatePoint(base[:m], base[m:]), FIBER_SEARCH, u[m:], its, res, trace)


def project_vertical_base(x0, cspm: CspmTable, basis: BasisStack, eps: float) -> ProjectionResult:
    """Intersect x0 - span(A_1(p)) with the manifold graph, p = (y0, psi(y0))."""
    x0 = as_vector(x0)
    m = cspm.m
    y0 = x0[:m]
    if not cspm.contains(y0):
        raise ProjectionError(f"x0 slow part {y0} outside the manifold grid")
    p = _on_graph(cspm, y0)
    cols = _fast_columns(basis, p, eps)
    trace = []

    def residual(a):
        pt = x0 - cols @ a
        if not cspm.contains(pt[:m]):
            raise DomainError(f"intersection candidate {pt} left the manifold grid")
        return pt[m:] - eval_psi(cspm, pt[:m])

    try:
        a, its, res = _newton(residual, x0[m:] - p[m:], trace)
    except (DomainError, np.linalg.LinAlgError) as exc:
        raise ProjectionError(f"no intersection inside the grid: {exc}", trace=trace) from exc
    pt = x0 - cols @ a
    base = _on_graph(cspm, pt[:m])
    return ProjectionResult(StatePoint(base[:m], base[m:]), VERTICAL_BASE, a, its, res, trace)


def project(x0, cspm: CspmTable, basis: BasisStack, eps: float, scheme: str) -> ProjectionResult:
    if scheme == FIBER_SEARCH:
        return project_fiber_search(x0, cspm, basis, eps)
    if scheme == VERTICAL_BASE:
        return project_vertical_base(x0, cspm, basis, eps)
    raise ValueError(f"unknown projection scheme {scheme!r}; choose from {SCHEMES}")


def _step_for(sys: SystemDefinition, points, eps: float, safety: float) -> float:
    rate = max(np.max(np.abs(fast_spectrum(sys, *sys.split(as_vector(p)), eps))) for p in points)
    return safety / max(rate, 1e-12)


def slow_phase_error(sys: SystemDefinition, x0, base, eps: float, horizon: float = 5.0,
                     dt: float = None, tail: float = 0.2) -> float:
    """Max slow-coordinate gap over the last ``tail`` fraction of a slow-time ``horizon``.

    Integrates both points to fast time horizon/eps (horizon itself when
    eps = 0).  If a trajectory leaves domain_K the window is truncated with
    a warning and the partial result is returned.
    """
    x0 = as_vector(x0)
    base = as_vector(base)
    t_end = horizon / eps if eps > 0 else horizon
    if dt is None:
        dt = _step_for(sys, (x0, base), eps, 0.5)
    try:
        ta = integrate(sys, x0, eps, t_end, dt)
        tb = integrate(sys, base, eps, t_end, dt)
    except DivergenceError as exc:
        raise ProjectionError(f"trajectory diverged: {exc}") from exc
    lo, hi = sys.domain_K
    inside = np.all((ta.y >= lo) & (ta.y <= hi) & (tb.y >= lo) & (tb.y <= hi), axis=1)
    last = len(inside) if inside.all() else int(np.argmin(inside))
    if last < len(inside):
        warnings.warn(f"trajectory left domain_K at t={ta.times[last]:.4g}; horizon truncated")
    if last < 2:
        raise ProjectionError("trajectory left domain_K immediately")
    start = int(np.floor((1.0 - tail) * (last - 1)))
    gap = np.linalg.norm(ta.y[start:last] - tb.y[start:last], axis=1)
    return float(np.max(gap))


def shooting_base(sys: SystemDefinition, x0, cspm: CspmTable, eps: float, t_final: float = None,
                  dt: float = None) -> StatePoint:
    """True fiber base point by shooting: match the post-transient slow coordinate.

    Candidates are points (y, psi(y)) of ``cspm``; the base is the candidate
    whose trajectory has the same slow coordinate as the trajectory of x0
    once the fast transient has died out (fast time ``t_final``).
    """
    x0 = as_vector(x0)
    m = sys.m
    if dt is None:
        dt = _step_for(sys, (x0,), eps, 0.1)
    if t_final is None:
        rate = np.min(np.abs(fast_spectrum(sys, *sys.split(x0), eps)))
        t_final = 40.0 / max(rate, 1e-12)
    target = integrate(sys, x0, eps, t_final, dt).y[-1]

    def gap(y):
        p = _on_graph(cspm, np.atleast_1d(y))
        return integrate(sys, p, eps, t_final, dt).y[-1] - target

    if m == 1:
        lo, hi = cspm.axes[0][0], cspm.axes[0][-1]
        y0 = float(np.clip(x0[0], lo, hi))
        width = 0.05 * (hi - lo)
        a, b = max(lo, y0 - width), min(hi, y0 + width)
        while gap(a)[0] * gap(b)[0] > 0:
            if a == lo and b == hi:
                raise ProjectionError("shooting could not bracket the fiber base")
            width *= 2
            a, b = max(lo, y0 - width), min(hi, y0 + width)
        y = np.array([brentq(lambda v: gap(v)[0], a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)])
    else:
        sol = least_squares(gap, x0[:m], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        y = sol.x
    base = _on_graph(cspm, y)
    return StatePoint(base[:m], base[m:])


def write_projection_json(records, path) -> None:
    with open(path, "w") as fh:
        json.dump(list(records), fh, indent=2)
