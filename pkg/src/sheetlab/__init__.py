"""Numerical laboratory for Brownian-sheet kernel approximations, weak-convergence
diagnostics, and the stochastic Poisson equation on the unit cube."""

from .grid import GridField, GridSpec, leq, rectangle_increment
from .rng import RngStream
from .quadrature import QuadSpec
from .kernels import (
    DonskerField,
    PoissonField,
    donsker_eval,
    kac_stroock_eval,
    sample_donsker,
    sample_kac_stroock,
    zeta,
)
from .sheet import SheetSample, sample_sheet, sheet_covariance, wiener_integral
from .integrals import (
    Integrand,
    indicator_integrand,
    integrate_against_kernel,
    integrate_restricted,
    limit_field,
)
from .convergence import (
    ConvergenceReport,
    DiagConfig,
    fdd_test,
    moment_bound_probe,
    tightness_modulus_probe,
    variance_convergence_report,
)
from .green import (
    GreenSeries,
    WosConfig,
    green_eval,
    green_integrand,
    green_l2_norm,
    green_mc_estimate,
    holder_probe,
    k_apply,
    lambda_sup,
    poincare_constant,
)
from .solver import (
    Nonlinearity,
    SolveConfig,
    SolveResult,
    psi_continuity_check,
    residual,
    solution_convergence_report,
    solve_contraction,
    solve_relaxed,
    spde_solution_sample,
)

__version__ = "0.1.0"
