"""Experiment analysis: thermometry, heating and field-noise
conversions, frequency-stability statistics, state detection with SPAM
correction, and micromotion inversion."""

from .micromotion import (
    BetaCalibration,
    CalibrationRangeError,
    ObeConfig,
    PeriodicityError,
    beta_from_contrast,
    calibrate_beta_contrast,
    e_rf_from_beta,
    obe_modulation_contrast,
)
from .spam import (
    CountRecord,
    DegenerateHistogramsError,
    ParityFit,
    SpamMatrix,
    ThresholdResult,
    beta_interval,
    load_count_record,
    mle_parity_fit,
    optimize_thresholds,
    save_count_record,
)
from .stability import (
    AllanResult,
    ConvergenceError,
    DecayFit,
    allan_deviation,
    fit_contrast_decay,
    half_max_detuning,
    side_of_fringe_frequency,
    sideband_lineshape,
)
from .thermometry import (
    FieldNoise,
    LineFit,
    ThermometryRangeWarning,
    field_noise_from_heating,
    heating_rate_fit,
    nbar_from_sideband_ratio,
    sideband_ratio,
)

__all__ = [
    "AllanResult", "BetaCalibration", "CalibrationRangeError", "ConvergenceError",
    "CountRecord", "DecayFit", "DegenerateHistogramsError", "FieldNoise",
    "LineFit", "ObeConfig", "ParityFit", "PeriodicityError", "SpamMatrix",
    "ThermometryRangeWarning", "ThresholdResult", "allan_deviation",
    "beta_from_contrast", "beta_interval", "calibrate_beta_contrast",
    "e_rf_from_beta", "field_noise_from_heating", "fit_contrast_decay",
    "half_max_detuning", "heating_rate_fit", "load_count_record",
    "mle_parity_fit", "nbar_from_sideband_ratio", "obe_modulation_contrast",
    "optimize_thresholds", "save_count_record", "sideband_lineshape",
    "sideband_ratio", "side_of_fringe_frequency",
]
