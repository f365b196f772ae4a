"""Limited-memory Krylov methods for ``f(A) b`` with Stieltjes functions ``f``.

Five methods are provided for Hermitian positive definite ``A``: two-pass
Lanczos, restarted Lanczos, multi-shift CG on a Zolotarev rational
approximation, and inexact shift-and-invert and extended Krylov methods
whose inner CG solves follow a relaxed tolerance schedule. The
:mod:`~stieltjes_krylov.predict` module gives a-priori matvec counts for
each of them.
"""

__version__ = "0.1.0"

from .lanczos import LanczosDecomposition, lanczos_fAb, lanczos_error_bound, two_pass_fAb
from .mscg import (
    RationalApproximation,
    min_poles_for_tolerance,
    mscg_fAb,
    multishift_cg,
    rational_approximation,
    zolotarev_inv_sqrt,
)
from .operators import (
    DiagonalOperator,
    LinearOperator,
    MatrixOperator,
    SpectralBounds,
    apply,
    make_diagonal_chebyshev,
    make_diagonal_clustered,
)
from .predict import (
    Prediction,
    convergence_factor,
    estimate_C,
    kappa_xi,
    perturbed_rate,
    predict_m_star,
    predict_restart_cycles,
    predict_total_matvecs,
    work_units,
)
from .rational import (
    InnerSolveConfig,
    extended_krylov_fAb,
    inner_tolerance_schedule,
    optimal_shift,
    si_lanczos_fAb,
)
from .report import ConvergenceError, KrylovError, MethodReport, QuadratureError, SpectrumError
from .restarted import restarted_lanczos_fAb
from .stieltjes import StieltjesFunction, integrate_measure, inv_power, inv_sqrt, log1p_over_z, point_mass

__all__ = [name for name in dir() if not name.startswith("_")]
