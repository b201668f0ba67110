"""Post-selected polarization-entangled photon pairs.

Two orthogonally polarized SPDC photons enter the two ports of a
balanced fiber splitter. Keeping only coincidences between the output
ports alpha and beta leaves the singlet-like state; a delay between the
photons lets the arrival time reveal the polarization, which removes the
coherence between the two product terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .elements import balanced_bs
from .errors import DomainError
from .fock import (
    PureState,
    StateEnsemble,
    apply_scattering,
    ket,
    make_ensemble,
    make_pure,
)
from .modes import ALPHA_H, ALPHA_V, BETA_H, BETA_V, PAIR_MODES


@dataclass(frozen=True)
class PairSourceSpec:
    """SPDC pair source. Wavelengths in nm, ``delta_bell`` in micrometres.

    ``gamma_max`` caps the indistinguishability reached at zero delay; it
    stands for the imperfect wave-packet overlap inside the crystal.
    """

    lambda0: float = 806.0
    bandwidth: float = 1.0
    delta_bell: float = 0.0
    gamma_max: float = 1.0

    def __post_init__(self):
        if not self.lambda0 > 0 or not self.bandwidth > 0:
            raise DomainError("lambda0 and bandwidth must be > 0")
        if not 0.0 <= self.gamma_max <= 1.0:
            raise DomainError(f"gamma_max={self.gamma_max} outside [0, 1]")
        if not math.isfinite(self.delta_bell):
            raise DomainError("delta_bell must be finite")

    @property
    def tau_c(self) -> float:
        """Gaussian coherence length lambda0^2 / (pi * bandwidth), in micrometres."""
        return self.lambda0**2 / (math.pi * self.bandwidth) * 1e-3


def overlap_gamma(spec: PairSourceSpec) -> float:
    """Temporal overlap exp(-(delta_bell / tau_c)^2) of the two wave packets."""
    return math.exp(-((spec.delta_bell / spec.tau_c) ** 2))


def effective_gamma(spec: PairSourceSpec) -> float:
    return spec.gamma_max * overlap_gamma(spec)


def full_pair_state() -> PureState:
    """Four-term state behind the fiber splitter, before any post-selection."""
    return make_pure(
        [
            (0.5, ket(PAIR_MODES, ALPHA_H, ALPHA_V)),
            (0.5, ket(PAIR_MODES, ALPHA_H, BETA_V)),
            (-0.5, ket(PAIR_MODES, BETA_H, ALPHA_V)),
            (-0.5, ket(PAIR_MODES, BETA_H, BETA_V)),
        ]
    )


def split_pair_state() -> PureState:
    """Same state obtained by sending H into port alpha and V into port beta of :func:`balanced_bs`.

    The double-occupancy terms pick up splitter-convention phases; the two
    coincidence terms do not.
    """
    psi = make_pure([(1.0, ket(PAIR_MODES, ALPHA_H, BETA_V))])
    bs = balanced_bs()
    psi = apply_scattering(psi, bs, (ALPHA_H, BETA_H))
    return apply_scattering(psi, bs, (ALPHA_V, BETA_V))


def singlet() -> PureState:
    s = 1 / math.sqrt(2)
    return make_pure([(s, ket(PAIR_MODES, ALPHA_H, BETA_V)), (-s, ket(PAIR_MODES, ALPHA_V, BETA_H))])


def post_selected_pair(gamma: float) -> StateEnsemble:
    """gamma * |psi-><psi-| + (1 - gamma)/2 * (|H_a V_b><H_a V_b| + |V_a H_b><V_a H_b|)."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma={gamma} outside [0, 1]")
    hv = make_pure([(1.0, ket(PAIR_MODES, ALPHA_H, BETA_V))])
    vh = make_pure([(1.0, ket(PAIR_MODES, ALPHA_V, BETA_H))])
    return make_ensemble([(gamma, singlet()), ((1 - gamma) / 2, hv), ((1 - gamma) / 2, vh)])
