"""Fitting engines: AM/PM least squares with golden-section search, the
recursive frequency-ramp fit, step detection and variance bounds."""

from .fr import (FrAccumulator, FrFit, crlb_fr, crlb_fr_exact, direct_sums, fr_fit,
                 fr_fit_direct, fr_gram, fr_gram_inverse, wrap_constants)
from .gss import GssResult, NoFeasibleFit, gss, reachable_frequencies
from .lsfit import (AmFit, BasisCache, PmFit, am_ls_fit, certificate, modulation_wald,
                    pm_ls_fit)
from .steps import (NoiseFloor, StepDetector, StepEvent, differential_deviation,
                    post_step_amplitude, running_mean_milestones, step_detect)

__all__ = [
    "AmFit", "PmFit", "BasisCache", "am_ls_fit", "pm_ls_fit", "certificate",
    "modulation_wald", "gss", "GssResult", "NoFeasibleFit", "reachable_frequencies",
    "FrAccumulator", "FrFit", "fr_fit", "fr_fit_direct", "wrap_constants", "direct_sums",
    "fr_gram", "fr_gram_inverse", "crlb_fr", "crlb_fr_exact",
    "StepEvent", "StepDetector", "NoiseFloor", "differential_deviation", "step_detect",
    "post_step_amplitude", "running_mean_milestones",
]
