"""Global spectral method for linear PDEs on the cube [-1, 1]^3.

Chebyshev trial basis, ultraspherical test basis, CP-split operators,
boundary-condition substitution, and a recursive blocked solver (or
preconditioned GMRES) for the reduced tensor-valued linear system.
"""

from .bc import (
    BoundaryConditionError,
    BoundaryOperator,
    BoundarySet,
    ReducedSystem,
    assemble_boundary_set,
    constraint_residual,
    dirichlet,
    neumann,
    normalize_leading_identity,
    reconstruct,
    reduce,
)
from .drivers import (
    DiffusionForm,
    FaceBC,
    ProblemSpec,
    Solution,
    SolverOptions,
    StationarySolver,
    adaptive_solve,
    evolve_implicit_euler,
    inverse_iteration,
    solve_stationary,
    zero_dirichlet_boundary,
)
from .opdisc import (
    CpFactors,
    DiffOperator3,
    DiscretizedOperator,
    NotSeparableError,
    apply_operator,
    assemble_L_1d,
    build_coeff_tensor,
    closed_form_split,
    cp_decompose,
    discretize,
    discretize_separable_diffusion,
    split_operator,
)
from .presets import PRESETS, make_problem
from .tensolve import (
    GmresError,
    LaplaceLikeSystem,
    NotLaplaceLikeError,
    SchurFactor,
    SingularOperatorError,
    SolveReport,
    SolverError,
    apply_reduced_operator,
    gmres_solve,
    make_preconditioner,
    real_schur,
    solve_laplace_recursive,
    solve_reshape,
    to_laplace_like,
)
from .tensor3 import (
    BlockSplit,
    ShapeError,
    extract_block,
    insert_block,
    kron3_matvec,
    mode_matricize,
    mode_mult,
    mode_refold,
    vectorize,
)

__version__ = "0.1.0"
