"""cspkit: Computational Singular Perturbation for fast-slow ODEs.

The pipeline runs from a :class:`SystemDefinition` through refined CSP bases
(:func:`build_stack`) to tabulated slow manifolds (:func:`build_cspm`), fiber
frames (:func:`extract_cspf`) and linear projections of initial conditions
(:func:`project`).  :mod:`cspkit.harness` wraps it all in eps sweeps with
log-log order fits.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .system_core import (  # noqa: E402
    StatePoint, SystemDefinition, Trajectory, check_tangency_lemma, critical_point, eval_g,
    eval_jacobian, fast_spectrum, integrate, stable_step,
)
from .calculus import MatrixField, directional_derivative, lie_bracket, nested_step, vector_field  # noqa: E402
from .engine import (  # noqa: E402
    ONE_STEP, TWO_STEP, BasisStack, LambdaBlocks, build_stack, duality_defect, evaluate_basis,
    initial_basis, lambda_blocks, refine, refinement_matrices,
)
from .manifold import (  # noqa: E402
    CspmTable, GridSpec, build_cspm, eval_psi, invariance_defect, read_cspm_csv, solve_cspm_point,
    write_cspm_csv,
)
from .fibers import CURRENT, PREVIOUS, FiberFrame, extract_cspf, principal_angle, principal_angles  # noqa: E402
from .projection import (  # noqa: E402
    FIBER_SEARCH, VERTICAL_BASE, ProjectionResult, project, shooting_base, slow_phase_error,
)
from .mmh import MmhParams, mmh_system  # noqa: E402
from .systems import get_system, linear2d, tilted  # noqa: E402
