"""Geometrically-shaped square QAM for the nonlinear fibre channel."""

__version__ = "0.1.0"

from .constellation import (  # noqa: E402
    Constellation,
    MomentSummary,
    PamLevels,
    gray_labeling,
    kurtosis_from_levels,
    levels_from_constellation,
    moments,
    normalize,
    product_constellation,
    square_qam,
    uniform_levels,
)
from .errors import (  # noqa: E402
    FitError,
    GsqamError,
    InvalidInputError,
    InvalidParameterError,
    InvalidStartError,
    ModelDomainError,
    NumericError,
    ParseError,
)
from .gmi import ChannelSnr, GmiEstimate, GmiMethod, gmi_2d, gmi_monte_carlo, gmi_quadrature_1d  # noqa: E402
from .link import (  # noqa: E402
    LinkParams,
    NliCoefficients,
    effective_snr,
    eta_tot,
    kurtosis_coupled_snr,
    optimal_launch_power,
    optimal_launch_power_closed_form,
    snr_opt_ratio,
)
from .shaping import (  # noqa: E402
    OptimizerConfig,
    ShapingMode,
    ShapingProblem,
    ShapingResult,
    design_curve,
    objective,
    optimize,
)
from .sweep import (  # noqa: E402
    LinkFit,
    MeasuredSweep,
    SweepCurve,
    fit_link_params,
    reference_links,
    run_sweep,
    table1_report,
)
from .estimators import GeometricShaper, LinkNoiseRegressor  # noqa: E402
