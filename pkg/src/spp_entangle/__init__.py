"""Photon / single-surface-plasmon entanglement simulator."""
from .elements import (
    ScatteringElement,
    SpbsSpec,
    balanced_bs,
    coupler,
    lossy_bs,
    pbs_route,
    phase_delay,
    polarizer,
)
from .experiment import (
    STANDARD_ANGLES,
    ChshResult,
    ChshSetting,
    MzSpec,
    calibrate_gamma,
    characterize_spbs,
    chsh,
    detection_probs,
    heralded_spp_state,
    scan_fringes,
)
from .source import PairSourceSpec, full_pair_state, overlap_gamma, post_selected_pair
from .stats import FitResult, FringeScan, chsh_from_counts, fit_sine, sample_counts, visibility

__version__ = "0.1.0"

__all__ = [
    "balanced_bs",
    "calibrate_gamma",
    "characterize_spbs",
    "chsh",
    "chsh_from_counts",
    "ChshResult",
    "ChshSetting",
    "coupler",
    "detection_probs",
    "fit_sine",
    "FitResult",
    "FringeScan",
    "full_pair_state",
    "heralded_spp_state",
    "lossy_bs",
    "MzSpec",
    "overlap_gamma",
    "PairSourceSpec",
    "pbs_route",
    "phase_delay",
    "polarizer",
    "post_selected_pair",
    "sample_counts",
    "scan_fringes",
    "ScatteringElement",
    "SpbsSpec",
    "STANDARD_ANGLES",
    "visibility",
]
