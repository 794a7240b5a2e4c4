"""Break-robust tests for Granger causality in conditional quantiles."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError, DatasetError, DimensionError, DomainError, QuantGrangerError,
    SingularityError, UnsupportedRescalingError, WindowError,
)
from .grid import QuantileGrid, replication_rng  # noqa: E402
from .numcore import fit_restricted, fit_unrestricted, quantile_path  # noqa: E402
from .process import SubsampleWindow, bridged_path, standardized_path, subgradient_path  # noqa: E402
from .stats import (  # noqa: E402
    TestResult, estimate_breakpoint, exp_cusum, exp_lm, exp_lm_sub, lm_fixed_tau, sup_lm, sup_wald,
)
from .regimes import RegimeReport, detect_regimes  # noqa: E402

__all__ = [
    "ConvergenceError", "DatasetError", "DimensionError", "DomainError", "QuantGrangerError",
    "SingularityError", "UnsupportedRescalingError", "WindowError", "QuantileGrid", "replication_rng",
    "fit_restricted", "fit_unrestricted", "quantile_path", "SubsampleWindow", "bridged_path",
    "standardized_path", "subgradient_path", "TestResult", "estimate_breakpoint", "exp_cusum",
    "exp_lm", "exp_lm_sub", "lm_fixed_tau", "sup_lm", "sup_wald", "RegimeReport", "detect_regimes",
]
