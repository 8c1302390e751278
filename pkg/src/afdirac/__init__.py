"""Dirac operators, flows and dispersive functionals on asymptotically flat
3-manifolds with analytic metric families."""

__version__ = "0.1.0"

from .metric import (  # noqa: F401
    DecayReport,
    MetricFamily,
    MetricParams,
    MetricSample,
    Taper,
    eval_metric,
    probe_points,
    verify_assumption_A,
)
from .geometry import (  # noqa: F401
    GeometryAtPoint,
    christoffel,
    connection_B,
    dreibein,
    geometry_at,
    geometry_decay_report,
    scalar_curvature,
    spin_connection,
)
from .operators import (  # noqa: F401
    GammaSet,
    GeometryField,
    Grid,
    SpinorField,
    apply_dirac,
    build_gammas,
    build_geometry_field,
    perturbation_terms,
    scalar_laplace_beltrami,
    spectral_derivative,
    squaring_residual,
)
from .evolution import (  # noqa: F401
    Trajectory,
    dirac_initial_velocity,
    evolve_dirac,
    evolve_scalar_wave,
    evolve_squared,
    flat_propagators,
)
from .norms import (  # noqa: F401
    AdmissibleTriple,
    NormReport,
    is_admissible,
    local_smoothing_functional,
    lp_norm_Mh,
    norm_equivalence_check,
    sobolev_norm,
    strichartz_functional,
    wave_kg_smoothing_functional,
)
