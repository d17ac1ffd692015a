"""The CSP iteration: initial basis, Lambda blocks, U/L refinement and basis updates.

Block convention: index 1 is fast (size n), index 2 is slow (size m).  The
columns of A are ordered (A_1 | A_2) = (fast | slow); the rows of B are
ordered (B^1 ; B^2).  State coordinates stay in (slow, fast) order, so with
the default start A^(0) swaps the two coordinate blocks.

Bases above level 0 are never stored on grids: a level-(q+1) basis is a
closure that rebuilds U and L from the level-q basis at whatever point it is
asked about.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import MatrixField, field_time_derivative, nested_step
from .errors import InvalidBasisError, RefinementSingularityError
from .system_core import SystemDefinition, as_vector, eval_jacobian

COND_LIMIT = 1e8

ONE_STEP = "one_step"
TWO_STEP = "two_step"


@dataclass(frozen=True)
class LambdaBlocks:
    L11: np.ndarray
    L12: np.ndarray
    L21: np.ndarray
    L22: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.L11, self.L12], [self.L21, self.L22]])

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.L11))

    @classmethod
    def from_matrix(cls, lam: np.ndarray, n: int) -> "LambdaBlocks":
        return cls(lam[:n, :n], lam[:n, n:], lam[n:, :n], lam[n:, n:])


@dataclass(frozen=True)
class RefinementMatrices:
    U: np.ndarray
    L: np.ndarray
    n: int

    @property
    def upper(self) -> np.ndarray:
        return self.U[: self.n, self.n:]

    @property
    def lower(self) -> np.ndarray:
        return self.L[self.n:, : self.n]


@dataclass(frozen=True)
class BasisStack:
    level: int
    m: int
    n: int
    frame: Callable[[np.ndarray, float], tuple]
    A_field: MatrixField
    B_field: MatrixField
    mode: str = TWO_STEP
    parent: Optional["BasisStack"] = None
    sys: Optional[SystemDefinition] = None

    def chain(self) -> list:
        """Levels 0..q, lowest first."""
        out = []
        node = self
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]

    def at_level(self, q: int) -> "BasisStack":
        if not 0 <= q <= self.level:
            raise ValueError(f"level {q} not in stack of depth {self.level}")
        return self.chain()[q]


def initial_basis(m: int, n: int, A12=None, A21=None, A22=None) -> BasisStack:
    """Constant level-0 basis with A11 = 0; defaults give the block swap."""
    A12 = np.eye(m) if A12 is None else np.array(A12, dtype=float).reshape(m, m)
    A21 = np.eye(n) if A21 is None else np.array(A21, dtype=float).reshape(n, n)
    A22 = np.zeros((n, m)) if A22 is None else np.array(A22, dtype=float).reshape(n, m)
    for name, blk in (("A12", A12), ("A21", A21)):
        if np.linalg.matrix_rank(blk) < blk.shape[0]:
            raise InvalidBasisError(f"{name} must be full rank")
    A12_inv = np.linalg.inv(A12)
    A21_inv = np.linalg.inv(A21)
    A = np.block([[np.zeros((m, n)), A12], [A21, A22]])
    B = np.block([[-A21_inv @ A22 @ A12_inv, A21_inv], [A12_inv, np.zeros((m, n))]])
    A_field = MatrixField.constant(A)
    B_field = MatrixField.constant(B)
    A_c, B_c = A_field(np.zeros(m + n), 0.0), B_field(np.zeros(m + n), 0.0)
    return BasisStack(0, m, n, lambda x, eps: (A_c, B_c), A_field, B_field)


def _lambda(sys: SystemDefinition, basis: BasisStack, A, B, x, eps) -> np.ndarray:
    lam = B @ eval_jacobian(sys, x, eps) @ A
    if not basis.A_field.is_constant:
        lam = lam - B @ field_time_derivative(sys, basis.A_field, x, eps)
    return lam


def lambda_blocks(sys: SystemDefinition, basis: BasisStack, x, eps: float) -> LambdaBlocks:
    """Blocks of B (Dg) A - B dA/dt at x."""
    x = as_vector(x)
    A, B = basis.frame(x, eps)
    return LambdaBlocks.from_matrix(_lambda(sys, basis, A, B, x, eps), basis.n)


def refinement_matrices(blocks: LambdaBlocks, point=None, level=None) -> RefinementMatrices:
    n = blocks.L11.shape[0]
    m = blocks.L22.shape[0]
    cond = blocks.condition
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise RefinementSingularityError(
            f"Lambda11 ill-conditioned (cond={cond:.3e}) at level {level}, point {point}",
            point=point, level=level, condition=cond,
        )
    upper = np.linalg.solve(blocks.L11, blocks.L12)
    lower = np.linalg.solve(blocks.L11.T, blocks.L21.T).T
    U = np.zeros((n + m, n + m))
    L = np.zeros((n + m, n + m))
    U[:n, n:] = upper
    L[n:, :n] = lower
    return RefinementMatrices(U, L, n)


def _update(A, B, R: RefinementMatrices, mode: str):
    eye = np.eye(A.shape[0])
    A_new = A @ (eye - R.U)
    B_new = (eye + R.U) @ B
    if mode == TWO_STEP:
        A_new = A_new @ (eye + R.L)
        B_new = (eye - R.L) @ B_new
    return A_new, B_new


def refine(sys: SystemDefinition, basis: BasisStack, mode: Optional[str] = None) -> BasisStack:
    """One CSP iteration; the returned basis is evaluated lazily, point by point."""
    mode = basis.mode if mode is None else mode
    if mode not in (ONE_STEP, TWO_STEP):
        raise ValueError(f"unknown refinement mode {mode!r}")
    if basis.sys is not None and basis.sys is not sys:
        raise ValueError("a basis stack must be refined with a single system")
    level = basis.level + 1

    def frame(x, eps):
        A, B = basis.frame(x, eps)
        blocks = LambdaBlocks.from_matrix(_lambda(sys, basis, A, B, x, eps), basis.n)
        return _update(A, B, refinement_matrices(blocks, point=x, level=basis.level), mode)

    depth = level - 1 + (0 if sys.jacobian is not None else 1)
    step = nested_step(depth)
    dim = basis.m + basis.n
    A_field = MatrixField(lambda x, eps: frame(x, eps)[0], dim, dim, recommended_step=step, depth=depth)
    B_field = MatrixField(lambda x, eps: frame(x, eps)[1], dim, dim, recommended_step=step, depth=depth)
    return BasisStack(level, basis.m, basis.n, frame, A_field, B_field, mode=mode, parent=basis, sys=sys)


def build_stack(sys: SystemDefinition, q: int, mode: str = TWO_STEP, **blocks) -> BasisStack:
    """initial_basis followed by q refinements."""
    basis = initial_basis(sys.m, sys.n, **blocks)
    basis = BasisStack(0, basis.m, basis.n, basis.frame, basis.A_field, basis.B_field, mode=mode, sys=sys)
    for _ in range(q):
        basis = refine(sys, basis, mode)
    return basis


def evaluate_basis(basis: BasisStack, x, eps: float):
    A, B = basis.frame(as_vector(x), eps)
    return np.array(A), np.array(B)


def duality_defect(basis: BasisStack, x, eps: float) -> float:
    A, B = evaluate_basis(basis, x, eps)
    return float(np.max(np.abs(B @ A - np.eye(A.shape[0]))))


def transformation_law_defect(sys: SystemDefinition, basis: BasisStack, x, eps: float) -> float:
    """Diagnostic: compare Lambda of the refined basis with C^-1 Lambda C - C^-1 dC/dt.

    C = (I - U)(I + L) is the point-dependent change of basis produced by one
    refinement.  Off by default in all pipelines; differentiating C adds a
    nesting level.
    """
    x = as_vector(x)
    dim = basis.m + basis.n
    eye = np.eye(dim)

    def C_of(v, e):
        A, B = basis.frame(v, e)
        R = refinement_matrices(LambdaBlocks.from_matrix(_lambda(sys, basis, A, B, v, e), basis.n))
        if basis.mode == ONE_STEP:
            return eye - R.U
        return (eye - R.U) @ (eye + R.L)

    C_field = MatrixField(C_of, dim, dim, recommended_step=nested_step(basis.level + 1))
    C = C_field(x, eps)
    A, B = basis.frame(x, eps)
    lam = _lambda(sys, basis, A, B, x, eps)
    predicted = np.linalg.solve(C, lam @ C - field_time_derivative(sys, C_field, x, eps))
    refined = refine(sys, basis)
    direct = lambda_blocks(sys, refined, x, eps).full
    return float(np.max(np.abs(predicted - direct)))
