"""CSP fiber frames and subspace angles."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .engine import BasisStack, evaluate_basis
from .errors import DegenerateFrameError
from .manifold import CspmTable, eval_psi
from .system_core import StatePoint

CURRENT = "current"
PREVIOUS = "previous"
RANK_TOL = 1e-8


@dataclass(frozen=True)
class FiberFrame:
    base: StatePoint
    columns: np.ndarray
    order: int
    eval_policy: str = CURRENT

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        object.__setattr__(self, "columns", cols)
        if _min_singular(cols) <= RANK_TOL:
            raise DegenerateFrameError(f"fiber frame at {self.base} is rank deficient")

    @property
    def normalized(self) -> np.ndarray:
        return self.columns / np.linalg.norm(self.columns, axis=0)


def _min_singular(cols: np.ndarray) -> float:
    norms = np.linalg.norm(cols, axis=0)
    if np.any(norms == 0):
        return 0.0
    return float(np.linalg.svd(cols / norms, compute_uv=False)[-1])


def extract_cspf(basis: BasisStack, cspm_q: CspmTable, cspm_prev, y, eps: float,
                 policy: str = CURRENT) -> FiberFrame:
    """Fast columns A_1^(q) evaluated on the order-q manifold (or order q-1 for ``previous``)."""
    if policy == CURRENT:
        table = cspm_q
    elif policy == PREVIOUS:
        table = cspm_prev if cspm_prev is not None else cspm_q
    else:
        raise ValueError(f"unknown evaluation policy {policy!r}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = eval_psi(table, y)
    A, _ = evaluate_basis(basis, np.concatenate([y, z]), eps)
    return FiberFrame(StatePoint(y, z), A[:, : basis.n], basis.level, policy)


def _orthonormal(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if _min_singular(F) <= RANK_TOL:
        raise DegenerateFrameError("frame is rank deficient")
    q, _ = np.linalg.qr(F)
    return q


def principal_angles(F1, F2) -> np.ndarray:
    """All principal angles, ascending; sine-based for small angles so tiny gaps keep full precision."""
    Q1 = _orthonormal(F1)
    Q2 = _orthonormal(F2)
    if Q1.shape != Q2.shape:
        raise ValueError(f"frames span different dimensions: {Q1.shape} vs {Q2.shape}")
    cross = Q1.T @ Q2
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), -1.0, 1.0)
    sin = np.clip(np.linalg.svd(Q2 - Q1 @ cross, compute_uv=False), 0.0, 1.0)
    # cosines come out descending and sines descending; reverse sines to pair angle by angle
    angles = np.where(cos ** 2 < 0.5, np.arccos(cos), np.arcsin(sin[::-1]))
    return np.sort(angles)


def principal_angle(F1, F2) -> float:
    """Largest principal angle between span(F1) and span(F2), in radians."""
    return float(principal_angles(F1, F2)[-1])


def write_frames_csv(frames, path) -> None:
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to write")
    m = frames[0].base.y.size
    n = frames[0].base.z.size
    dim, k = frames[0].columns.shape
    header = ([f"y{i}" for i in range(m)] + [f"z{i}" for i in range(n)]
              + [f"a{r}_{c}" for c in range(k) for r in range(dim)] + ["order", "policy"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for fr in frames:
            w.writerow([repr(float(v)) for v in fr.base.y] + [repr(float(v)) for v in fr.base.z]
                       + [repr(float(v)) for v in fr.columns.T.reshape(-1)] + [fr.order, fr.eval_policy])
