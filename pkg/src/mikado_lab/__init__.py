"""Numerical laboratory for concentrated-block convex integration on the torus.

The package measures, at desk scale, the mechanism behind non-uniqueness of
weak solutions to the transport equation along divergence-free Sobolev
fields: exact exponent algebra for the admissible window, concentrated
building-block pairs with their scaling laws, the iteration that cancels a
transport defect with high-frequency corrugations, and a Lagrangian probe of
the flow-map formula the construction undermines.
"""

from .config import LabConfig, load_config
from .container import read_container, read_state, write_container, write_state
from .errors import (
    ContainerFormatError,
    MikadoLabError,
    PlacementError,
    ResolutionError,
)
from .exponents import (
    INF,
    ExponentPlan,
    RegimeLabel,
    classify_regime,
    diffusion_admissible,
    dual_exponent,
    exponent_plan,
    predicted_slopes,
)
from .grid import GridSpec, ScalarField, VectorField
from .iteration import (
    ExperimentReport,
    IterationState,
    ProbeReport,
    Schedule,
    StepRecord,
    defect_from_residual,
    initial_state,
    lagrangian_probe,
    mass_drift,
    perturbation_step,
    residual,
    run,
    step_record,
)
from .mikado import (
    MikadoPair,
    MikadoSpec,
    build_pair,
    build_theta,
    build_w,
    interaction_mean,
    place_disjoint,
    required_resolution,
)
from .profiles import BumpProfile
from .reporting import SCHEMA_TAG, FitResult, config_echo, fit_slope, write_csv
from .spectral import (
    antidivergence,
    divergence,
    gradient,
    laplacian,
    leray_project,
    lowpass,
    lp_norm,
    sobolev_seminorm,
    spatial_mean,
    time_derivative,
)

__version__ = "0.1.0"
