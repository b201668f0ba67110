"""The full photon/plasmon chain: heralding, plasmonic Mach-Zehnder, CHSH and SPBS characterization.

Mode flow for the beta particle::

    beta (H/V) --PBS--> beta1 (V), beta2 (H) --launchers--> spp1, spp2
        --delay on spp1--> SPBS [[t, r], [r, t]] --slits--> A, B

The alpha photon goes through the polarizer POL at angle theta and heralds
the measurement. All detection probabilities are conditional on the herald.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import elements as el
from .errors import DomainError
from .fock import (
    StateEnsemble,
    apply_scattering,
    condition,
    decohere,
    drop_modes,
    extend_modes,
    map_ensemble,
    probability_of,
    project,
    relabel,
)
from .modes import BETA1, BETA2, BETA_H, BETA_V, OUT_A, OUT_B, SPP1, SPP2, Path
from .source import post_selected_pair
from .stats import (
    CHSH_SIGNS,
    OUTCOME_PARITY,
    FitResult,
    FringeScan,
    chsh_from_counts,
    correlations_from_counts,
    derive_seed,
    fit_sine,
    sample_chsh_table,
    sample_counts,
    sample_scan,
)


@dataclass(frozen=True)
class MzSpec:
    """Plasmonic interferometer: SPBS, scan delay (nm, on the spp1 arm) and coupler efficiencies."""

    spbs: el.SpbsSpec = field(default_factory=el.SpbsSpec)
    delta_mz: float = 0.0
    lambda_eff: float = el.DEFAULT_LAMBDA_NM
    eta_in1: float = 1.0
    eta_in2: float = 1.0
    eta_out_A: float = 1.0
    eta_out_B: float = 1.0

    def __post_init__(self):
        if not self.lambda_eff > 0:
            raise DomainError(f"lambda_eff must be > 0, got {self.lambda_eff}")
        for name in ("eta_in1", "eta_in2", "eta_out_A", "eta_out_B"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        # rejects phase/loss combinations with gain
        el.lossy_bs(self.spbs)

    def at(self, delta_mz: float) -> MzSpec:
        return replace(self, delta_mz=delta_mz)


@dataclass(frozen=True)
class ChshSetting:
    a: float = 0.0
    a_prime: float = 45.0
    b: float = 22.5
    b_prime: float = 67.5

    @property
    def pairs(self) -> list[tuple[float, float]]:
        """Analyzer pairs in CHSH row order: (a,b), (a,b'), (a',b), (a',b')."""
        return [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]


STANDARD_ANGLES = ChshSetting()


@dataclass(frozen=True)
class ChshResult:
    E: tuple[float, float, float, float]
    S: float
    sigma_S: float = 0.0


# -------------------------------------------------------------- heralding


def _to_plasmons(state):
    state = extend_modes(state, (BETA1, BETA2))
    state = apply_scattering(state, el.pbs_route())
    state = drop_modes(state, (BETA_H, BETA_V))
    return relabel(state, {BETA1: SPP1, BETA2: SPP2})


def photon_plasmon_pair(gamma: float) -> StateEnsemble:
    """Pair ensemble after the PBS and the photon-to-SPP launchers (unit efficiency)."""
    return map_ensemble(post_selected_pair(gamma), _to_plasmons)


def heralded_spp_state(
    theta: float, gamma: float, mz: Optional[MzSpec] = None
) -> tuple[StateEnsemble, float]:
    """Conditional SPP ensemble on (spp1, spp2) after POL at ``theta`` clicks, and the herald probability.

    Launcher efficiencies from ``mz`` leave the branches sub-normalized by
    the SPP survival probability; they never change the herald rate.
    """
    ens, p_herald = condition(photon_plasmon_pair(gamma), el.polarizer(theta))
    if mz is not None and (mz.eta_in1 != 1.0 or mz.eta_in2 != 1.0):
        c1, c2 = el.coupler(mz.eta_in1), el.coupler(mz.eta_in2)
        ens = map_ensemble(ens, lambda s: apply_scattering(apply_scattering(s, c1, (SPP1,)), c2, (SPP2,)))
    return ens, p_herald


# ------------------------------------------------------------- detection


def detection_probs(theta: float, gamma: float, mz: MzSpec) -> tuple[float, float]:
    """Closed-form heralded probabilities p(A|C), p(B|C)."""
    pa, pb = detection_probs_many(np.atleast_1d(mz.delta_mz), theta, gamma, mz)
    return float(pa[0]), float(pb[0])


def detection_probs_many(delta_mz, theta: float, gamma: float, mz: MzSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized closed form over an array of delays (``mz.delta_mz`` is ignored)."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma={gamma} outside [0, 1]")
    s = mz.spbs
    th = math.radians(theta)
    c2, s2 = math.cos(th) ** 2, math.sin(th) ** 2
    phi = 2 * np.pi * np.asarray(delta_mz, dtype=float) / mz.lambda_eff
    dphi = math.radians(s.delta_phi)
    cross = gamma * s.mu * math.sin(2 * th) * math.sqrt(s.R * s.T * mz.eta_in1 * mz.eta_in2)
    pa = mz.eta_out_A * (s.T * mz.eta_in1 * c2 + s.R * mz.eta_in2 * s2 - cross * np.cos(phi + dphi))
    pb = mz.eta_out_B * (s.R * mz.eta_in1 * c2 + s.T * mz.eta_in2 * s2 - cross * np.cos(phi - dphi))
    return np.clip(pa, 0.0, 1.0), np.clip(pb, 0.0, 1.0)


def detection_probs_propagated(theta: float, gamma: float, mz: MzSpec) -> tuple[float, float]:
    """p(A|C), p(B|C) by pushing the heralded ensemble through every element.

    The imperfect SPP mode overlap is applied as partial decoherence of the
    spp1/spp2 path superposition, equivalent to scaling the interference
    term by ``mu``.
    """
    ens, _ = heralded_spp_state(theta, gamma, mz)
    ens = decohere(ens, (SPP1, SPP2), mz.spbs.mu)
    delay = el.phase_delay(mz.delta_mz, mz.lambda_eff)
    spbs = el.lossy_bs(mz.spbs)
    out_a, out_b = el.coupler(mz.eta_out_A), el.coupler(mz.eta_out_B)

    def chain(s):
        s = apply_scattering(s, delay, (SPP1,))
        s = apply_scattering(s, spbs, (SPP1, SPP2))
        s = relabel(s, {SPP1: OUT_A, SPP2: OUT_B})
        s = apply_scattering(s, out_a, (OUT_A,))
        return apply_scattering(s, out_b, (OUT_B,))

    ens = map_ensemble(ens, chain)
    pa = probability_of(ens, el.OccupationProjector({OUT_A: 1}))
    pb = probability_of(ens, el.OccupationProjector({OUT_B: 1}))
    return pa, pb


def scan_grid(start: float, stop: float, n_points: int) -> np.ndarray:
    if n_points < 2:
        raise DomainError("a scan needs at least 2 points")
    return np.linspace(start, stop, int(n_points))


def scan_fringes(theta: float, gamma: float, mz: MzSpec, scan: tuple[float, float, int]) -> FringeScan:
    d = scan_grid(*scan)
    pa, pb = detection_probs_many(d, theta, gamma, mz)
    return FringeScan(d, pa, pb, "analytic")


def predicted_visibility(theta: float, gamma: float, mz: MzSpec) -> tuple[float, float]:
    """Fringe visibility of the A and B outputs. Independent of the output couplers."""
    s = mz.spbs
    th = math.radians(theta)
    cross = gamma * s.mu * abs(math.sin(2 * th)) * math.sqrt(s.R * s.T * mz.eta_in1 * mz.eta_in2)
    c2, s2 = math.cos(th) ** 2, math.sin(th) ** 2
    da = s.T * mz.eta_in1 * c2 + s.R * mz.eta_in2 * s2
    db = s.R * mz.eta_in1 * c2 + s.T * mz.eta_in2 * s2
    return (cross / da if da > 0 else 0.0), (cross / db if db > 0 else 0.0)


# ------------------------------------------------------------------ CHSH


def joint_probabilities(setting: ChshSetting, gamma: float) -> np.ndarray:
    """4x4 table of P(outcome | setting) from the post-selected pair.

    Rows follow :attr:`ChshSetting.pairs`; columns are ++, +-, -+, --,
    where '-' means the photon is found orthogonal to the analyzer.
    """
    pair = post_selected_pair(gamma)
    out = np.zeros((4, 4))
    for i, (x, y) in enumerate(setting.pairs):
        for j, (dx, dy) in enumerate(((0, 0), (0, 90), (90, 0), (90, 90))):
            pa = el.polarizer(x + dx, Path.ALPHA)
            pb = el.polarizer(y + dy, Path.BETA)
            out[i, j] = sum(w * project(project(s, pa)[0], pb)[1] for w, s in pair.branches)
    return out


def chsh(setting: ChshSetting, gamma: float) -> ChshResult:
    joint = joint_probabilities(setting, gamma)
    E = joint @ OUTCOME_PARITY
    return ChshResult(tuple(float(e) for e in E), float(CHSH_SIGNS @ E), 0.0)


def correlation_tensor(gamma: float) -> np.ndarray:
    """T[i, j] = <sigma_i x sigma_j> for i, j in {Z (H/V), X (D/A)}.

    For linear analyzers E(a, b) = u(a) . T . u(b) with
    u(x) = (cos 2x, sin 2x), so any angle set can be evaluated in bulk.
    """
    grid = ChshSetting(a=0.0, a_prime=45.0, b=0.0, b_prime=45.0)
    E = chsh(grid, gamma).E
    return np.array([[E[0], E[1]], [E[2], E[3]]])


def chsh_many(angles, gamma: float, tensor: Optional[np.ndarray] = None) -> np.ndarray:
    """S for each row (a, a', b, b') of ``angles`` (degrees)."""
    T = correlation_tensor(gamma) if tensor is None else tensor
    ang = np.radians(np.asarray(angles, dtype=float))
    u = np.stack([np.cos(2 * ang), np.sin(2 * ang)], axis=-1)
    a, ap, b, bp = (u[..., k, :] for k in range(4))

    def E(x, y):
        return np.einsum("ni,ij,nj->n", x, T, y)

    return E(a, b) - E(a, bp) + E(ap, b) + E(ap, bp)


def calibrate_gamma(s_target: float, setting: ChshSetting = STANDARD_ANGLES) -> float:
    """gamma whose |S| at ``setting`` equals ``s_target``; clamped to [0, 1] with a warning."""
    lo, hi = abs(chsh(setting, 0.0).S), abs(chsh(setting, 1.0).S)
    if s_target <= lo:
        if s_target < lo - 1e-12:
            warnings.warn(f"|S|={s_target} is below the gamma=0 value {lo:.4f}; using gamma=0", stacklevel=2)
        return 0.0
    if s_target >= hi:
        if s_target > hi + 1e-12:
            warnings.warn(f"|S|={s_target} is above the gamma=1 value {hi:.4f}; using gamma=1", stacklevel=2)
        return 1.0
    return brentq(lambda g: abs(chsh(setting, g).S) - s_target, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


def sampled_chsh(setting: ChshSetting, gamma: float, samples_per_setting: int, seed: int) -> ChshResult:
    table = sample_chsh_table(joint_probabilities(setting, gamma), samples_per_setting, seed)
    E, _ = correlations_from_counts(table)
    S, sigma = chsh_from_counts(table)
    return ChshResult(tuple(float(e) for e in E), S, sigma)


# ------------------------------------------------------ SPBS characterization


@dataclass(frozen=True)
class SpbsEstimate:
    R: float
    T: float
    delta_phi: float
    fit_A: FitResult
    fit_B: FitResult
    scan: FringeScan

    def __iter__(self):
        return iter((self.R, self.T, self.delta_phi))


def characterize_spbs(
    mz: MzSpec,
    mean_heralds: Optional[float] = None,
    seed: int = 0,
    scan: Optional[tuple[float, float, int]] = None,
    theta: float = 45.0,
    gamma: float = 1.0,
    workers: int = 1,
) -> SpbsEstimate:
    """Recover (R, T, delta_phi) the way the device was measured.

    R and T come from feeding only the spp1 arm (herald at theta=0) and
    dividing out the known coupler efficiencies. delta_phi is half the
    phase offset between the A and B fringe patterns recorded with both
    arms fed; the offset only fixes delta_phi modulo 180 deg, and the
    value is reported in [0, 180).

    With ``mean_heralds`` set, all counts are Poisson-sampled.
    """
    if scan is None:
        scan = (0.0, 2 * mz.lambda_eff, 41)
    pa, pb = detection_probs(0.0, gamma, mz)
    if mean_heralds is not None:
        rec = sample_counts(pa, mean_heralds, derive_seed(seed, 10**6), p_b=pb)
        pa, pb = rec.counts_A / rec.heralds, rec.counts_B / rec.heralds
    T_hat = pa / (mz.eta_in1 * mz.eta_out_A)
    R_hat = pb / (mz.eta_in1 * mz.eta_out_B)

    fringes = scan_fringes(theta, gamma, mz, scan)
    if mean_heralds is not None:
        fringes = sample_scan(fringes, mean_heralds, seed, workers=workers)
    fit_a = fit_sine(fringes, fix_period=mz.lambda_eff, channel="A")
    fit_b = fit_sine(fringes, fix_period=mz.lambda_eff, channel="B")
    dphi = ((fit_a.phase - fit_b.phase) / 2.0) % 180.0
    return SpbsEstimate(R_hat, T_hat, dphi, fit_a, fit_b, fringes)


def visibility_curve(thetas: Sequence[float], gamma: float, mz: MzSpec) -> np.ndarray:
    """Predicted (V_A, V_B) for each theta, shape (n, 2)."""
    return np.array([predicted_visibility(t, gamma, mz) for t in thetas])

