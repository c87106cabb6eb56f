"""Downlink multi-user rate analysis for co-located vs distributed antennas.

Closed forms, bounds, and asymptotics for MRT and ZFBF precoding over a
unit-disk cell, validated against a seeded Monte Carlo engine.
"""

__version__ = "0.1.0"

from .errors import (
    CellrateError,
    DomainError,
    EmptyInputError,
    IllConditionedError,
    InfeasibleError,
    LayoutMismatchError,
    NoInterferenceError,
    QuadratureError,
    SingularChannelError,
    SingularGeometryError,
)
from .geometry import (
    CellPoint,
    Layout,
    NeighborStats,
    ScenarioLayout,
    access_distance_cdf,
    access_distance_pdf,
    min_access_distance_cdf,
    min_access_distance_pdf,
    min_access_distance_ppf,
    nearest_antenna_stats,
    sample_min_access_distance,
    sample_scenario,
    sample_uniform_disk,
)
from .special import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    exp_e1,
    integrate_adaptive,
    upper_incomplete_gamma,
)
from .channel import (
    FadingRealization,
    LargeScaleProfile,
    hypoexp_cdf,
    hypoexp_pdf,
    large_scale_profile,
    sample_fading,
)
from .montecarlo import (
    RateEstimate,
    SimulationPlan,
    average_user_rate,
    ergodic_rate_empirical,
    substream,
)
from .mrt import (
    AsymptoticParams,
    InterferenceWeights,
    MrtSinr,
    asym_rate_mrt_ca,
    asym_rate_ub_mrt_da,
    avg_rate_ub_mrt_da,
    interference_weights,
    mrt_precoder,
    rate_mrt_ca,
    rate_mrt_da,
    rate_mrt_da_mc,
    sinr_approx_mrt_da,
    sinr_mrt_da,
    sinr_mrt_ca,
    sinr_ub_mrt_da,
)
from .zfbf import (
    ZfPrecoder,
    ZfSnr,
    asym_divergence_diagnostic,
    asym_rate_zfbf_ca,
    avg_rate_lb_zfbf_da,
    avg_rate_zfbf_ca,
    rate_lb_zfbf_da,
    rate_zfbf_ca,
    rate_zfbf_ca_approx,
    zf_precoder,
    zf_snr,
)
