"""Schrodinger energy bounds: extremal potentials, stability certificates,
and radial decay estimates on quadrature-consistent finite-difference grids.
"""

from .grid import (
    Domain,
    Grid,
    GridFunction,
    apply_laplacian,
    h1_seminorm,
    inner,
    lp_norm,
)
from .inequalities import (
    DeficitReport,
    clarkson_check,
    norm_lower_triangle,
    quantitative_holder,
    reduction,
    strauss_bound,
    strauss_constant,
)
from .optimal import (
    MaxExtremal,
    MaxStabilityConstants,
    MinExtremal,
    MinStabilityConstants,
    ReciprocalPotential,
    constants_max,
    constants_min,
    embedding_constant,
    project_max_constraint,
    solve_max_extremal,
    solve_min_extremal,
    talenti_constant,
)
from .radial import (
    DecayFit,
    RadialProblem,
    comparison_check,
    decay_fit,
    linfty_bound,
    solve_semilinear_radial,
    weak_decay_bootstrap,
)
from .schrodinger import (
    AdmissibilityError,
    ConvergenceError,
    DegenerateSourceError,
    EnergyResult,
    Potential,
    SourceTerm,
    check_admissible,
    dual_norm,
    energy_difference_identity,
    energy_estimate_check,
    solve_state,
    solve_state_reciprocal,
    weighted_l2_gap,
)
from .sources import (
    constant_source,
    gaussian_source,
    indicator_region,
    make_source,
    power_tail_source,
    sine_source,
    smooth_random_field,
)
from .stability import (
    ScalingProbeResult,
    StabilityReport,
    random_max_potential,
    random_min_reciprocal,
    scaling_probe,
    verify_max_stability,
    verify_max_state_stability,
    verify_min_stability,
    verify_min_state_stability,
)

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "Grid",
    "GridFunction",
    "apply_laplacian",
    "h1_seminorm",
    "inner",
    "lp_norm",
    "DeficitReport",
    "clarkson_check",
    "norm_lower_triangle",
    "quantitative_holder",
    "reduction",
    "strauss_bound",
    "strauss_constant",
    "MaxExtremal",
    "MaxStabilityConstants",
    "MinExtremal",
    "MinStabilityConstants",
    "ReciprocalPotential",
    "constants_max",
    "constants_min",
    "embedding_constant",
    "project_max_constraint",
    "solve_max_extremal",
    "solve_min_extremal",
    "talenti_constant",
    "DecayFit",
    "RadialProblem",
    "comparison_check",
    "decay_fit",
    "linfty_bound",
    "solve_semilinear_radial",
    "weak_decay_bootstrap",
    "AdmissibilityError",
    "ConvergenceError",
    "DegenerateSourceError",
    "EnergyResult",
    "Potential",
    "SourceTerm",
    "check_admissible",
    "dual_norm",
    "energy_difference_identity",
    "energy_estimate_check",
    "solve_state",
    "solve_state_reciprocal",
    "weighted_l2_gap",
    "constant_source",
    "gaussian_source",
    "indicator_region",
    "make_source",
    "power_tail_source",
    "sine_source",
    "smooth_random_field",
    "ScalingProbeResult",
    "StabilityReport",
    "random_max_potential",
    "random_min_reciprocal",
    "scaling_probe",
    "verify_max_stability",
    "verify_max_state_stability",
    "verify_min_stability",
    "verify_min_state_stability",
    "__version__",
]
