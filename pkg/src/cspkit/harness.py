"""Experiment registry, eps sweeps and log-log order fits."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__
from .engine import TWO_STEP, build_stack, lambda_blocks
from .errors import CSPError, InsufficientDataError
from .fibers import CURRENT, extract_cspf, principal_angle
from .manifold import GridSpec, build_cspm, eval_psi, invariance_defect
from .mmh import MmhParams, mmh_A1_closed, mmh_cspm_closed, mmh_fiber_tangent, mmh_slow_series
from .projection import FIBER_SEARCH, project, shooting_base, slow_phase_error
from .systems import get_system, linear2d_slow_slope, tilted_fiber_direction

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "manifold_error",
    "invariance_defect",
    "fiber_angle",
    "lambda12_decay",
    "lambda21_decay",
    "projection_error",
    "oracle_diff",
)

DEFAULT_EPS = tuple(np.logspace(-1.5, -4.0, 7))
PROJECTION_EPS = tuple(np.logspace(-1.0, -3.0, 5))
ORACLE_EPS = tuple(np.logspace(-3.0, -4.0, 5))
MIN_POINTS = 5
ORACLE_TOL = 1e-3
LAMBDA11_SPREAD = 0.10

_WINDOWS = {"projection_error": (1e-3, 1e-1)}
_DEFAULT_WINDOW = (1e-4, 10 ** -1.5)
_DEFAULT_X0 = {"mmh": (1.0, 0.7), "tilted": (1.0, 0.3), "linear2d": (1.0, 0.8)}


@dataclass(frozen=True)
class Experiment:
    name: str
    q: int = 0
    policy: str = CURRENT
    mode: str = TWO_STEP
    scheme: str = FIBER_SEARCH
    system: str = "mmh"
    params: dict = field(default_factory=dict)
    grid: Optional[GridSpec] = None
    x0: Optional[tuple] = None
    horizon: float = 5.0

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; known: {', '.join(EXPERIMENTS)}")
        if not 0 <= self.q <= 3:
            raise ValueError(f"q must be in 0..3, got {self.q}")

    def make_system(self):
        return get_system(self.system, **dict(self.params))

    def grid_for(self, sys) -> GridSpec:
        if self.grid is not None:
            return self.grid
        return GridSpec.over_domain(sys, 33)

    def describe(self) -> dict:
        out = {"experiment": self.name, "q": self.q, "policy": self.policy, "mode": self.mode,
               "system": self.system, "params": dict(self.params)}
        if self.name == "projection_error":
            out.update(scheme=self.scheme, x0=list(self.x0 or _DEFAULT_X0.get(self.system, ())),
                       horizon=self.horizon)
        if self.grid is not None:
            out["grid"] = {"min": list(self.grid.lo), "max": list(self.grid.hi), "nodes": list(self.grid.nodes)}
        return out

    def default_eps(self) -> tuple:
        if self.name == "projection_error":
            return PROJECTION_EPS
        if self.name == "oracle_diff":
            return ORACLE_EPS
        return DEFAULT_EPS


@dataclass
class SweepTable:
    experiment: Experiment
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    slope: float = float("nan")
    r2: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def eps(self) -> np.ndarray:
        return np.array([r["eps"] for r in self.rows])

    @property
    def metric(self) -> np.ndarray:
        return np.array([r["metric"] for r in self.rows])


# ---------------------------------------------------------------------------
# references


def _slow_reference(sys):
    if sys.name == "mmh":
        p = MmhParams(sys.params["kappa"], sys.params["lambda"])
        return lambda y, eps: np.atleast_1d(mmh_slow_series(y[0], p, eps, 2))
    if sys.name == "linear2d":
        a, b = sys.params["a"], sys.params["b"]
        return lambda y, eps: np.atleast_1d(linear2d_slow_slope(a, b, eps) * y[0])
    if sys.name == "tilted":
        return lambda y, eps: np.zeros(1)
    raise CSPError(f"no slow-manifold reference for system {sys.name!r}")


def _tangent_reference(sys):
    if sys.name == "mmh":
        p = MmhParams(sys.params["kappa"], sys.params["lambda"])
        return lambda y, eps: mmh_fiber_tangent(y[0], p, eps, 2)
    if sys.name == "tilted":
        return lambda y, eps: tilted_fiber_direction(y[0], eps)
    if sys.name == "linear2d":
        return lambda y, eps: np.array([0.0, 1.0])
    raise CSPError(f"no fiber-tangent reference for system {sys.name!r}")


# ---------------------------------------------------------------------------
# metrics; each returns (metric, extra-columns)


def _manifold_error(exp, sys, grid, eps):
    table = build_cspm(sys, build_stack(sys, exp.q, exp.mode), grid, eps)
    ref = _slow_reference(sys)
    err = max(np.max(np.abs(z - ref(y, eps))) for y, z in zip(table.nodes, table.node_values))
    return float(err), {}


def _invariance_defect(exp, sys, grid, eps):
    table = build_cspm(sys, build_stack(sys, exp.q, exp.mode), grid, eps)
    h = 1e-3
    lo = np.array([a[0] for a in table.axes])
    hi = np.array([a[-1] for a in table.axes])
    interior = [y for y in table.nodes if np.all(y - 2 * h >= lo) and np.all(y + 2 * h <= hi)]
    return max(invariance_defect(sys, table, y, eps, h) for y in interior), {}


def _fiber_angle(exp, sys, grid, eps):
    stack = build_stack(sys, exp.q, exp.mode)
    table = build_cspm(sys, stack, grid, eps)
    ref = _tangent_reference(sys)
    worst = 0.0
    for y in table.nodes:
        frame = extract_cspf(stack, table, table.parent, y, eps, exp.policy)
        worst = max(worst, principal_angle(frame.columns, ref(y, eps)))
    return worst, {}


def _lambda_decay(exp, sys, grid, eps, which):
    stack = build_stack(sys, exp.q + 1, exp.mode)
    top = build_cspm(sys, stack, grid, eps)
    level = stack.at_level(exp.q)
    table = top.parent if which == "12" else top
    worst, l11 = 0.0, 0.0
    for y in table.nodes:
        blocks = lambda_blocks(sys, level, np.concatenate([y, eval_psi(table, y)]), eps)
        blk = blocks.L12 if which == "12" else blocks.L21
        worst = max(worst, float(np.linalg.norm(blk)))
        l11 = max(l11, float(np.linalg.norm(blocks.L11)))
    return worst, {"lambda11": l11}


def _projection_error(exp, sys, grid, eps):
    x0 = np.asarray(exp.x0 if exp.x0 is not None else _DEFAULT_X0[sys.name], dtype=float)
    stack = build_stack(sys, max(exp.q, 2), exp.mode)
    top = build_cspm(sys, stack, grid, eps)
    table = top
    while table.order > exp.q:
        table = table.parent
    result = project(x0, table, stack.at_level(exp.q), eps, exp.scheme)
    oracle = shooting_base(sys, x0, top, eps)
    metric = slow_phase_error(sys, oracle.vector, result.base.vector, eps, exp.horizon)
    return metric, {"base_gap": float(np.linalg.norm(result.base.y - oracle.y)),
                    "residual": float(result.residual)}


def _oracle_diff(exp, sys, grid, eps):
    if sys.name != "mmh":
        raise CSPError("oracle_diff needs the mmh system")
    if exp.q not in (1, 2):
        raise CSPError("closed forms exist for q = 1 and q = 2 only")
    p = MmhParams(sys.params["kappa"], sys.params["lambda"])
    stack = build_stack(sys, exp.q, exp.mode)
    table = build_cspm(sys, stack, grid, eps)
    psi_err, a1_err = 0.0, 0.0
    for y, z in zip(table.nodes, table.node_values):
        ref = mmh_cspm_closed(y[0], p, eps, exp.q)
        psi_err = max(psi_err, abs(z[0] - ref) / abs(ref))
        frame = extract_cspf(stack, table, table.parent, y, eps, CURRENT)
        ref_a = mmh_A1_closed(y[0], p, eps, exp.q)
        a1_err = max(a1_err, float(np.max(np.abs(frame.columns[:, 0] - ref_a) / np.abs(ref_a))))
    return max(psi_err, a1_err), {"psi_rel": psi_err, "a1_rel": a1_err}


_METRICS = {
    "manifold_error": _manifold_error,
    "invariance_defect": _invariance_defect,
    "fiber_angle": _fiber_angle,
    "lambda12_decay": lambda e, s, g, eps: _lambda_decay(e, s, g, eps, "12"),
    "lambda21_decay": lambda e, s, g, eps: _lambda_decay(e, s, g, eps, "21"),
    "projection_error": _projection_error,
    "oracle_diff": _oracle_diff,
}


def experiment_metric(exp: Experiment, eps: float, sys=None, grid=None):
    sys = exp.make_system() if sys is None else sys
    grid = exp.grid_for(sys) if grid is None else grid
    return _METRICS[exp.name](exp, sys, grid, eps)


def _check_eps(exp: Experiment, eps_list, strict: bool) -> list:
    eps = sorted((float(e) for e in eps_list), reverse=True)
    if len(eps) < MIN_POINTS:
        raise InsufficientDataError(f"a sweep needs at least {MIN_POINTS} eps values, got {len(eps)}")
    if any(a == b for a, b in zip(eps, eps[1:])):
        raise ValueError("eps values must be distinct")
    if strict:
        lo, hi = _WINDOWS.get(exp.name, _DEFAULT_WINDOW)
        bad = [e for e in eps if not (lo * (1 - 1e-9) <= e <= hi * (1 + 1e-9))]
        if bad:
            raise ValueError(f"eps values {bad} outside the {exp.name} window [{lo:g}, {hi:g}]")
    return eps


def build_id(exp: Experiment, eps_list) -> str:
    blob = json.dumps({"v": __version__, "exp": exp.describe(), "eps": [repr(e) for e in eps_list]},
                      sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def run_sweep(exp: Experiment, eps_list=None, strict: bool = True) -> SweepTable:
    """Evaluate the experiment metric at each eps and fit the log-log slope."""
    eps_list = _check_eps(exp, exp.default_eps() if eps_list is None else eps_list, strict)
    sys = exp.make_system()
    grid = exp.grid_for(sys)
    table = SweepTable(exp, meta={"build_id": build_id(exp, eps_list),
                                  "started": datetime.now(timezone.utc).isoformat()})
    for eps in eps_list:
        try:
            metric, extra = experiment_metric(exp, eps, sys, grid)
        except CSPError as exc:
            log.warning("eps=%g failed: %s", eps, exc)
            table.failures.append({"eps": eps, "reason": str(exc)})
            continue
        table.rows.append({"eps": eps, "metric": float(metric), **extra})
    table.meta["finished"] = datetime.now(timezone.utc).isoformat()
    try:
        table.slope, table.r2 = fit_order(table)
    except InsufficientDataError as exc:
        log.warning("no fit: %s", exc)
    return table


def fit_order(table) -> tuple:
    """Least-squares slope and r^2 of log(metric) against log(eps).

    Accepts a SweepTable or an iterable of (eps, metric) pairs.  Rows with a
    non-positive metric are dropped with a log notice.
    """
    if isinstance(table, SweepTable):
        pairs = [(r["eps"], r["metric"]) for r in table.rows]
    else:
        pairs = [(float(e), float(v)) for e, v in table]
    kept = [(e, v) for e, v in pairs if v > 0 and e > 0]
    if len(kept) < len(pairs):
        log.info("dropped %d non-positive metric rows before fitting", len(pairs) - len(kept))
    if len(kept) < MIN_POINTS:
        raise InsufficientDataError(f"need {MIN_POINTS} positive rows to fit, have {len(kept)}")
    x = np.log([e for e, _ in kept])
    y = np.log([v for _, v in kept])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y ** 2))) else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def slope_band(exp: Experiment) -> tuple:
    """Accepted (lower, upper) slope; upper is inf where only a lower bound applies."""
    q = exp.q
    if exp.name in ("manifold_error", "fiber_angle"):
        return q + 0.8, q + 1.5
    if exp.name in ("invariance_defect", "lambda21_decay"):
        return q + 0.8, math.inf
    if exp.name == "lambda12_decay":
        return q - 0.2, math.inf
    if exp.name == "projection_error":
        return 0.8, math.inf
    return -math.inf, math.inf


def check_table(table: SweepTable) -> tuple:
    """(passed, reasons) for the thresholds attached to the table's experiment."""
    exp = table.experiment
    reasons = []
    if exp.name == "oracle_diff":
        rows = [r for r in table.rows if r["eps"] <= 1e-3 * (1 + 1e-9)]
        if not rows:
            reasons.append("no rows at eps <= 1e-3")
        for r in rows:
            if not r["metric"] <= ORACLE_TOL:
                reasons.append(f"relative error {r['metric']:.3e} > {ORACLE_TOL:g} at eps={r['eps']:.3g}")
        return not reasons, reasons
    lo, hi = slope_band(exp)
    if not np.isfinite(table.slope):
        reasons.append("slope not available")
    elif not lo <= table.slope <= hi:
        reasons.append(f"slope {table.slope:.3f} outside [{lo:g}, {hi:g}]")
    if exp.name == "lambda12_decay" and table.rows:
        l11 = np.array([r["lambda11"] for r in table.rows])
        spread = float((l11.max() - l11.min()) / l11.max())
        if not spread < LAMBDA11_SPREAD:
            reasons.append(f"||Lambda11|| varies by {spread:.1%}")
    return not reasons, reasons


def table_report(table: SweepTable) -> dict:
    passed, reasons = check_table(table)
    return {
        "experiment": table.experiment.name,
        "params": table.experiment.describe(),
        "rows": [{k: float(v) for k, v in r.items()} for r in table.rows],
        "failures": table.failures,
        "slope": None if not np.isfinite(table.slope) else table.slope,
        "r2": None if not np.isfinite(table.r2) else table.r2,
        "pass": passed,
        "reasons": reasons,
        "meta": table.meta,
    }


def with_overrides(exp: Experiment, **changes) -> Experiment:
    return replace(exp, **{k: v for k, v in changes.items() if v is not None})


def report_csv(report: dict) -> str:
    """Sweep rows as CSV text with shortest round-trip float formatting."""
    rows = report["rows"]
    keys = ["eps", "metric"] + sorted({k for r in rows for k in r} - {"eps", "metric"})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([repr(float(r[k])) if k in r else "" for k in keys])
    return buf.getvalue()


def summary_line(report: dict) -> str:
    params = report["params"]
    label = f"{report['experiment']} q={params['q']}"
    if report["experiment"] == "oracle_diff":
        worst = max((r["metric"] for r in report["rows"]), default=float("nan"))
        stat = f"max_rel={worst:.3e}"
    else:
        slope = report["slope"]
        stat = "slope=n/a" if slope is None else f"slope={slope:.4f} r2={report['r2']:.6f}"
    status = "PASS" if report["pass"] else "FAIL"
    tail = "" if report["pass"] else " (" + "; ".join(report["reasons"]) + ")"
    return f"{status} {label} {stat}{tail}"
