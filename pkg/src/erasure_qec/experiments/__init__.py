"""Monte Carlo estimation, fits, hardware mapping and the reference studies."""

from .estimate import PointConfig, SweepResult, estimate_logical_error, normalize, run_point, wilson
from .fitting import FitResult, fit_cross_section, fit_intercept, fit_subthreshold, fit_threshold
from .hardware import HardwareParams, feasibility_boundary, map_hardware, preset
from .twirl import twirl_channels, twirl_oracle

__all__ = [
    "PointConfig", "SweepResult", "estimate_logical_error", "normalize", "run_point", "wilson",
    "FitResult", "fit_cross_section", "fit_intercept", "fit_subthreshold", "fit_threshold",
    "HardwareParams", "feasibility_boundary", "map_hardware", "preset", "twirl_channels", "twirl_oracle",
]
