"""Self-normalization based multiple change-point estimation.

Nuisance-free change-point detection in a general parameter (mean,
variance, (auto)covariance, (auto)correlation, quantile, covariance
matrix, or any combination) of a fixed-dimensional time series, via
self-normalized contrast statistics maximized over nested local windows.
"""

from .core import (
    ChangePointSet,
    TimeSeries,
    Window,
    relative_changepoints,
    segments_from_changepoints,
)
from .functionals import FunctionalSpec, PrecomputedState, estimate, parse_functional, precompute
from .statistic import (
    SnComponents,
    contrast,
    max_window_statistic,
    self_normalizer,
    t_statistic,
    window_components,
    window_grid,
)
from .segmentation import (
    DetectionConfig,
    DetectionRecord,
    DetectionResult,
    detect,
    seeded_intervals,
    snbs_detect,
    sncp_detect,
    snlocal_detect,
    snsbs_detect,
    snwbs_detect,
)
from .critical_values import (
    CriticalValueTable,
    ThresholdNotFound,
    builtin_table,
    empirical_quantile,
    load_table,
    lookup,
    save_table,
    simulate_null_stats,
    simulate_threshold,
)
from .refinement import (
    FeatureFlag,
    RefinementConfig,
    attribute_features,
    cusum_stat,
    default_trim,
    refine,
)
from .metrics import MetricsReport, ari, evaluate, hausdorff
from .dgp import (
    DgpPreset,
    ExperimentResult,
    custom_preset,
    generate,
    get_preset,
    gpd_mixture_inverse,
    list_presets,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "TimeSeries",
    "Window",
    "ChangePointSet",
    "segments_from_changepoints",
    "relative_changepoints",
    "FunctionalSpec",
    "PrecomputedState",
    "precompute",
    "estimate",
    "parse_functional",
    "SnComponents",
    "window_grid",
    "contrast",
    "self_normalizer",
    "t_statistic",
    "window_components",
    "max_window_statistic",
    "DetectionConfig",
    "DetectionRecord",
    "DetectionResult",
    "detect",
    "sncp_detect",
    "snbs_detect",
    "snlocal_detect",
    "snwbs_detect",
    "snsbs_detect",
    "seeded_intervals",
    "CriticalValueTable",
    "ThresholdNotFound",
    "builtin_table",
    "lookup",
    "simulate_null_stats",
    "simulate_threshold",
    "empirical_quantile",
    "save_table",
    "load_table",
    "RefinementConfig",
    "FeatureFlag",
    "default_trim",
    "cusum_stat",
    "refine",
    "attribute_features",
    "MetricsReport",
    "hausdorff",
    "ari",
    "evaluate",
    "DgpPreset",
    "ExperimentResult",
    "custom_preset",
    "get_preset",
    "list_presets",
    "generate",
    "gpd_mixture_inverse",
    "run_experiment",
    "__version__",
]
