"""Random walks on Gromov hyperbolic spaces: drift, horofunctions and boundary contraction."""

__version__ = "0.1.0"

from .analysis import (
    boundary_inequality_sweep,
    comparison_bridge_check,
    continuity_sweep,
    furstenberg_drift,
    lazy_family,
    ldt_fit,
    point_measure,
    tilt_family,
)
from .boundary import (
    D_b,
    ChainNet,
    Horofunction,
    RayEnd,
    RealEnd,
    TreeEnd,
    VisualConfig,
    bar_D_b,
    boundary_action,
    boundary_gromov_product,
    comparison_bound_check,
    horo_action,
    horofunction_eval,
    parse_boundary_point,
    rho_b,
    tree_end,
    visual_ratio_check,
)
from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError,
    HorodriftError,
    InsufficientEscape,
    InsufficientTrials,
    InvalidAlpha,
    InvalidMeasure,
    InvalidNet,
    InvalidPair,
    InvalidPoint,
    LambdaViolation,
    SupportExplosion,
)
from .groups import (
    FiniteSupportMeasure,
    GroupMetric,
    convolution_wasserstein_check,
    convolve,
    d_G_estimate,
    in_G_lambda,
    power,
    wasserstein_alpha,
)
from .markov import (
    contraction_search,
    contraction_upper_bound,
    irreducibility_check,
    k_alpha_estimate,
    markov_apply,
    stationary_estimate,
    submultiplicativity_check,
)
from .spaces import (
    SL2,
    FreeGroupTree,
    StarSpace,
    UpperHalfPlane,
    build_space,
    calibrate_delta,
    check_hyperbolicity,
)
from .walks import drift_estimate, forward_limit, hmet_check, sample_walk

__all__ = [name for name in dir() if not name.startswith("_")]
