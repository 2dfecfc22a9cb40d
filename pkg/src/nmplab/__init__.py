"""Explicit maximum-principle constants, checked on exact spectral models.

Models (flat tori, the zonal 3-sphere, weighted graphs) carry a complete
weighted-orthonormal eigenbasis, so heat kernels, Green functions and
Poisson solves are exact matrix functions.  On top of them the package
computes the explicit constants of the sup-bounds for subsolutions of
``Lap u >= f + div Phi``, estimates the normalized isoperimetric constant
from below, and verifies the inequalities on randomized instances.
"""

from .constants import ConstantSet, a_gamma, c0, c1, c2, constant_set, gamma_schedule, product_A
from .exceptions import ModelError, NMPError, NumericalFailure, UnsupportedOperationError, UsageError
from .harness import SuiteConfig, random_field, random_vector_field, render_report, run_suite
from .isoperimetric import (
    CstarEstimate,
    cheeger_sweep,
    estimate_cstar,
    slab_candidate,
    sobolev_ratio_ascent,
)
from .kernels import (
    KernelMatrix,
    centered_kernel,
    green_by_time_integral,
    green_function,
    green_lower_bound_check,
    heat_kernel,
    kernel_identities,
)
from .model import (
    ScalarField,
    SpectralModel,
    VectorField,
    apply_laplacian,
    build_from_spec,
    build_graph_model,
    build_torus,
    build_zonal_sphere3,
    divergence,
    divergence_weak,
    gradient,
)
from .norms import average, ess_sup, holder_star, norm_star, norm_star_vec, pos_neg_parts
from .records import VerificationRecord
from .solver import (
    ProblemInstance,
    check_moser_bound,
    check_solution_bound,
    check_theorem_A,
    generate_subsolution,
    minimize_energy,
    solve_poisson,
)

__version__ = "0.1.0"
