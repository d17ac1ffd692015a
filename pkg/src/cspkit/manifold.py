"""CSP manifolds: solving B^1_(q) g = 0 node by node and interpolating the result.

For q >= 1 the fast row B^1_(q) is frozen at the order-(q-1) manifold,
(y, psi_(q-1)(y)), and only the vector field is evaluated at the unknown z.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .engine import BasisStack
from .errors import DomainError, ManifoldSolveError
from .system_core import SystemDefinition, eval_g, eval_jacobian

NEWTON_TOL = 1e-12
STEP_TOL = 1e-13
MAX_NEWTON = 50


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid over the slow domain; ``lo``/``hi``/``nodes`` are per slow axis."""

    lo: tuple
    hi: tuple
    nodes: tuple

    @classmethod
    def uniform(cls, lo, hi, nodes) -> "GridSpec":
        lo = tuple(np.atleast_1d(np.asarray(lo, dtype=float)).tolist())
        hi = tuple(np.atleast_1d(np.asarray(hi, dtype=float)).tolist())
        nodes = tuple(int(k) for k in np.broadcast_to(np.atleast_1d(nodes), (len(lo),)))
        return cls(lo, hi, nodes)

    @classmethod
    def over_domain(cls, sys: SystemDefinition, nodes=64) -> "GridSpec":
        return cls.uniform(sys.domain_K[0], sys.domain_K[1], nodes)

    def axes(self) -> tuple:
        return tuple(np.linspace(a, b, k) for a, b, k in zip(self.lo, self.hi, self.nodes))


def _as_axes(grid, m: int) -> tuple:
    if isinstance(grid, GridSpec):
        axes = grid.axes()
    elif m == 1 and np.ndim(grid) == 1:
        axes = (np.asarray(grid, dtype=float),)
    else:
        axes = tuple(np.asarray(a, dtype=float) for a in grid)
    if len(axes) != m:
        raise ValueError(f"grid has {len(axes)} axes, system has m={m}")
    for a in axes:
        if a.size < 4 or np.any(np.diff(a) <= 0):
            raise ValueError("each grid axis needs >= 4 strictly increasing nodes")
    return axes


def _end_conditions(x: np.ndarray, values: np.ndarray):
    """Clamped ends with slopes from quartic fits through the five outermost nodes.

    Beats not-a-knot by close to an order of magnitude in the end intervals,
    where not-a-knot has its largest error.
    """
    if x.size < 5:
        return "not-a-knot"
    flat = values.reshape(x.size, -1)
    left = np.polyfit(x[:5] - x[0], flat[:5], 4)[-2]
    right = np.polyfit(x[-5:] - x[-1], flat[-5:], 4)[-2]
    shape = values.shape[1:]
    return (1, left.reshape(shape)), (1, right.reshape(shape))


@dataclass(frozen=True, eq=False)
class CspmTable:
    """z = psi_(q)(y, eps) sampled on a tensor grid, with cubic interpolation."""

    order: int
    axes: tuple
    values: np.ndarray
    eps: float
    residuals: np.ndarray
    parent: Optional["CspmTable"] = None
    sys: Optional[SystemDefinition] = None
    basis: Optional[BasisStack] = None
    _interp: object = field(default=None, repr=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        shape = tuple(a.size for a in axes)
        values = np.asarray(self.values, dtype=float).reshape(shape + (-1,))
        object.__setattr__(self, "values", values)
        if len(axes) == 1:
            interp = CubicSpline(axes[0], values, axis=0, bc_type=_end_conditions(axes[0], values))
        else:
            interp = RegularGridInterpolator(axes, values, method="cubic")
        object.__setattr__(self, "_interp", interp)

    @property
    def m(self) -> int:
        return len(self.axes)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def nodes(self) -> np.ndarray:
        return np.array(list(itertools.product(*self.axes)), dtype=float).reshape(-1, self.m)

    @property
    def node_values(self) -> np.ndarray:
        return self.values.reshape(-1, self.n)

    def contains(self, y) -> bool:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return all(a[0] <= v <= a[-1] for a, v in zip(self.axes, y))

    def resolve(self, y) -> np.ndarray:
        """Solve the CSP condition directly at y instead of interpolating."""
        if self.sys is None or self.basis is None:
            return eval_psi(self, y)
        return solve_cspm_point(self.sys, self.basis, self.parent, y, self.eps, z0=eval_psi(self, y))


def eval_psi(table: CspmTable, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (table.m,):
        raise ValueError(f"expected a slow point of length {table.m}, got {y.shape}")
    if not table.contains(y):
        raise DomainError(f"y={y} outside the table hull {[(a[0], a[-1]) for a in table.axes]}")
    if table.m == 1:
        idx = np.flatnonzero(table.axes[0] == y[0])
        if idx.size:
            return table.values[idx[0]].copy()
        return np.asarray(table._interp(y[0]), dtype=float).reshape(table.n)
    return np.asarray(table._interp(y[None, :])[0], dtype=float).reshape(table.n)


def frozen_fast_row(sys: SystemDefinition, basis: BasisStack, psi_prev: Optional[CspmTable], y, eps) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if basis.level == 0:
        z_freeze = sys.fast_box_center
    else:
        if psi_prev is None:
            raise ValueError(f"order {basis.level} needs the order-{basis.level - 1} table")
        z_freeze = eval_psi(psi_prev, y)
    _, B = basis.frame(np.concatenate([y, z_freeze]), eps)
    return B[: basis.n]


def solve_cspm_point(sys: SystemDefinition, basis: BasisStack, psi_prev: Optional[CspmTable], y, eps: float,
                     z0=None, tol: float = NEWTON_TOL) -> np.ndarray:
    """Newton solve of B^1_(q)(y, psi_(q-1)(y)) g(y, z) = 0 for z."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    row = frozen_fast_row(sys, basis, psi_prev, y, eps)
    if z0 is not None:
        z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    elif psi_prev is not None:
        z = eval_psi(psi_prev, y)
    else:
        z = sys.fast_box_center.copy()
    cap = 0.5 * sys.fast_box_extent
    history = []
    for _ in range(MAX_NEWTON):
        x = np.concatenate([y, z])
        r = row @ eval_g(sys, x, eps)
        res = float(np.max(np.abs(r)))
        history.append(res)
        if res < tol:
            return z
        jac = row @ eval_jacobian(sys, x, eps)[:, sys.m:]
        try:
            dz = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise ManifoldSolveError(f"singular Newton matrix at y={y}", y=y, last_iterate=z,
                                     residuals=history) from exc
        size = np.linalg.norm(dz)
        if size > cap:
            dz *= cap / size
        z = z + dz
        if size < STEP_TOL:
            x = np.concatenate([y, z])
            res = float(np.max(np.abs(row @ eval_g(sys, x, eps))))
            history.append(res)
            if res < max(tol, 1e3 * np.finfo(float).eps):
                return z
            break
    raise ManifoldSolveError(f"Newton did not converge at y={y} (order {basis.level}, eps={eps})",
                             y=y, last_iterate=z, residuals=history)


def _residual(sys, basis, psi_prev, y, z, eps) -> float:
    row = frozen_fast_row(sys, basis, psi_prev, y, eps)
    return float(np.max(np.abs(row @ eval_g(sys, np.concatenate([y, z]), eps))))


def build_cspm(sys: SystemDefinition, basis: BasisStack, grid, eps: float) -> CspmTable:
    """Tables for orders 0..basis.level, each chained to its parent; returns the top one."""
    axes = _as_axes(grid, sys.m)
    nodes = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, sys.m)
    for node in nodes:
        if np.any(node < sys.domain_K[0] - 1e-12) or np.any(node > sys.domain_K[1] + 1e-12):
            raise DomainError(f"grid node {node} outside domain_K")
    table = None
    for level in basis.chain():
        values = np.empty((len(nodes), sys.n))
        residuals = np.empty(len(nodes))
        failed = []
        for i, y in enumerate(nodes):
            try:
                values[i] = solve_cspm_point(sys, level, table, y, eps)
                residuals[i] = _residual(sys, level, table, y, values[i], eps)
            except ManifoldSolveError as exc:
                failed.append((tuple(y), str(exc)))
        if failed:
            raise ManifoldSolveError(f"{len(failed)} node(s) failed at order {level.level}",
                                     failed_nodes=failed)
        table = CspmTable(level.level, axes, values, eps, residuals, parent=table, sys=sys, basis=level)
    return table


def table_from_function(func, grid, m: int, eps: float = 0.0, order: int = 0) -> CspmTable:
    """Tabulate a known graph z = func(y); useful for exact manifolds in tests."""
    axes = _as_axes(grid, m)
    nodes = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, m)
    values = np.array([np.atleast_1d(func(y)) for y in nodes], dtype=float)
    return CspmTable(order, axes, values, eps, np.zeros(len(nodes)))


def psi_slope(table: CspmTable, y, h: float = 1e-3) -> np.ndarray:
    """D_y psi (n x m) by fourth-order central differences of ``table.resolve``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    slope = np.empty((table.n, table.m))
    for j in range(table.m):
        e = np.zeros(table.m)
        e[j] = h
        if not (table.contains(y - 2 * e) and table.contains(y + 2 * e)):
            raise DomainError(f"y={y} too close to the table boundary for a slope")
        f = [table.resolve(y + k * e) for k in (-2, -1, 1, 2)]
        slope[:, j] = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    return slope


def invariance_defect(sys: SystemDefinition, table: CspmTable, y, eps: float, h: float = 1e-3) -> float:
    """|| g2(y, psi) - eps (D psi) g1(y, psi) ||, zero for an invariant graph."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = table.resolve(y)
    slope = psi_slope(table, y, h)
    x = np.concatenate([y, z])
    g = eval_g(sys, x, eps)
    # eval_g already scales the slow part by eps
    return float(np.linalg.norm(g[sys.m:] - slope @ g[: sys.m]))


def write_cspm_csv(table: CspmTable, path) -> None:
    m, n = table.m, table.n
    header = [f"y{i}" for i in range(m)] + [f"z{i}" for i in range(n)] + ["order", "eps", "residual"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for y, z, r in zip(table.nodes, table.node_values, table.residuals.reshape(-1)):
            w.writerow([repr(float(v)) for v in y] + [repr(float(v)) for v in z]
                       + [table.order, repr(float(table.eps)), repr(float(r))])


def read_cspm_csv(path) -> CspmTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = sum(h.startswith("y") for h in header)
    n = sum(h.startswith("z") for h in header)
    data = np.array([[float(v) for v in r] for r in body])
    nodes, values = data[:, :m], data[:, m:m + n]
    axes = tuple(np.unique(nodes[:, j]) for j in range(m))
    return CspmTable(int(data[0, m + n]), axes, values, float(data[0, m + n + 1]), data[:, m + n + 2])
