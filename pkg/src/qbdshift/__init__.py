"""Shift technique for quasi-birth-death processes.

Solves the four quadratic matrix equations of a QBD level transition,
builds right/left/double-shifted problems whose spectral gap is open,
recovers the original minimal solutions from the shifted ones, and
certifies every canonical-factorization identity along the way.
"""

from .kernel import (
    ConvergenceError,
    PerronPair,
    ReducibleMatrixError,
    SingularMatrixError,
    perron_pair,
    scc_partition,
    solve_linear,
    spectral_radius,
    stein_solve,
)
from .matpoly import (
    Factorization,
    QuadMatPoly,
    RootSet,
    eval_phi,
    factorization_residual,
    h_coefficients,
    multiset_distance,
    roots,
)
from .model import (
    Classification,
    Kind,
    PerronData,
    QbdTriple,
    ValidationError,
    classify,
    complete_perron_data,
    perron_data,
    validate,
)
from .shift import (
    ShiftKind,
    ShiftTransform,
    ShiftedSolutions,
    build_double,
    build_left,
    build_right,
    recover_gr,
    reference_solution,
    shifted_gr,
    shifted_hats_nonnull,
    shifted_hats_nullrec,
    shifted_solutions,
    solve_via,
)
from .solvers import (
    SolutionSet,
    compute_w,
    derive_r_k,
    hats_from_w,
    solve_all,
    solve_hat_pair,
    solve_min_g,
    solve_min_g_oracle,
)
from .verify import (
    Certificate,
    PhasePartition,
    check_identity_suite,
    check_mmatrix,
    check_sign_property,
    phase_partition,
)

__version__ = "0.1.0"
