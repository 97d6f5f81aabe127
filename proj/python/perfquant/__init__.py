"""Quantitative myocardial perfusion analysis."""

from ._perfquant import (  # noqa: F401
    Decomposition,
    FitBounds,
    FitResult,
    KineticParams,
    PhysioConstants,
    PosteriorSamples,
    PriorSpec,
    ResidueCoefficients,
    SequenceParams,
    ValidationError,
    apply_delay,
    build_dual_bolus_aif,
    concentration_from_signal,
    estimate_psi,
    fit_nlls,
    forward_model,
    gd_from_T1,
    generate_phantom,
    infer_pixel,
    log_likelihood,
    motion_correct,
    ode_reference,
    register_translation,
    residue_coefficients,
    residue_function,
    roc_analysis,
    rpca_admm,
    signal_from_T1,
    soft_threshold,
    svt,
    T1_from_concentration,
    T1_from_signal,
    to_blood_units,
)

__all__ = [name for name in dir() if not name.startswith("_")]
