"""Python bindings for the pdmotion C++ core."""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    RidgeModel,
    accuracy,
    aso,
    average_precision,
    balanced_accuracy,
    bonferroni,
    bootstrap_power,
    cross_entropy,
    epsilon_w2,
    filter_lengths,
    inception_parameter_count,
    mean_ap,
    mlp_parameter_count,
    rc_baseline,
    ridge_cv,
    ridge_fit,
    rocket_transform,
    set_thread_count,
    spearman_rho,
    synth_windows,
    wavelet_features,
    window_count,
)

__version__ = "0.1.0"
