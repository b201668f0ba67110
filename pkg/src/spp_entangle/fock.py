"""Few-photon Fock states over labeled modes.

States are immutable. Every operation returns a new value; a state that
has gone through lossy elements or projections is simply sub-normalized,
and renormalization is always an explicit call.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .elements import (
    CoincidenceProjector,
    OccupationProjector,
    PolarizationProjector,
    Projector,
    ScatteringElement,
)
from .errors import DomainError, ModeMismatch, Unphysical
from .modes import ModeId, Pol

MAX_PHOTONS = 2
AMP_TOL = 1e-12
NORM_TOL = 1e-12
# amplitudes below this are treated as exact cancellations
PRUNE_TOL = 1e-15

Occupation = tuple[int, ...]


def _check_modes(modes: Sequence[ModeId]) -> tuple[ModeId, ...]:
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise ModeMismatch(f"duplicate modes in {[str(m) for m in modes]}")
    return modes


@dataclass(frozen=True)
class FockBasisState:
    modes: tuple[ModeId, ...]
    occupations: Occupation

    def __post_init__(self):
        modes = _check_modes(self.modes)
        occ = tuple(int(n) for n in self.occupations)
        if len(occ) != len(modes):
            raise ModeMismatch("occupations and modes differ in length")
        if any(n < 0 for n in occ):
            raise DomainError(f"negative occupation in {occ}")
        if sum(occ) > MAX_PHOTONS:
            raise DomainError(f"{sum(occ)} photons exceeds the cap of {MAX_PHOTONS}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "occupations", occ)

    @property
    def n_photons(self) -> int:
        return sum(self.occupations)

    def count(self, selector: ModeId) -> int:
        return sum(n for m, n in zip(self.modes, self.occupations) if selector.matches(m))

    def __str__(self) -> str:
        parts = []
        for m, n in zip(self.modes, self.occupations):
            if n:
                parts.append(str(m) if n == 1 else f"{n}*{m}")
        return "|" + "; ".join(parts) + ">" if parts else "|vac>"


def ket(modes: Sequence[ModeId], *occupied: ModeId) -> FockBasisState:
    """Basis state with one photon per listed mode (repeat a mode for two)."""
    modes = _check_modes(modes)
    occ = [0] * len(modes)
    for m in occupied:
        try:
            occ[modes.index(m)] += 1
        except ValueError:
            raise ModeMismatch(f"mode {m} not in mode list") from None
    return FockBasisState(modes, tuple(occ))


@dataclass(frozen=True, eq=False)
class PureState:
    """Superposition of Fock basis states sharing one mode list."""

    modes: tuple[ModeId, ...]
    amplitudes: Mapping[Occupation, complex]
    norm_squared: float

    @property
    def terms(self) -> list[tuple[complex, FockBasisState]]:
        return [(a, FockBasisState(self.modes, occ)) for occ, a in self.amplitudes.items()]

    def amplitude(self, basis: FockBasisState | Occupation) -> complex:
        if isinstance(basis, FockBasisState):
            basis = _reorder(basis, self.modes)
        return self.amplitudes.get(tuple(basis), 0j)

    def vector(self, basis: Sequence[Occupation]) -> np.ndarray:
        return np.array([self.amplitudes.get(tuple(b), 0j) for b in basis], dtype=complex)

    def __str__(self) -> str:
        if not self.amplitudes:
            return "0"
        return " + ".join(
            f"({a.real:.4g}{a.imag:+.4g}j){FockBasisState(self.modes, o)}"
            for o, a in self.amplitudes.items()
        )


def _reorder(basis: FockBasisState, modes: tuple[ModeId, ...]) -> Occupation:
    if set(basis.modes) != set(modes):
        raise ModeMismatch("basis state lives on a different mode list")
    lookup = dict(zip(basis.modes, basis.occupations))
    return tuple(lookup[m] for m in modes)


def _build(modes: tuple[ModeId, ...], amps: Mapping[Occupation, complex]) -> PureState:
    kept = {o: complex(a) for o, a in amps.items() if abs(a) > PRUNE_TOL}
    for a in kept.values():
        if not cmath.isfinite(a):
            raise DomainError("non-finite amplitude")
    norm = math.fsum(abs(a) ** 2 for a in kept.values())
    if norm > 1 + NORM_TOL:
        raise Unphysical(f"state norm {norm:.15g} exceeds 1")
    return PureState(modes, MappingProxyType(dict(sorted(kept.items()))), norm)


def make_pure(
    terms: Iterable[tuple[complex, FockBasisState]], modes: Optional[Sequence[ModeId]] = None
) -> PureState:
    """Merge (amplitude, basis state) pairs into a PureState.

    All basis states must share one mode list; pass ``modes`` to build the
    zero state or to fix the mode order.
    """
    terms = list(terms)
    if modes is None:
        if not terms:
            raise ModeMismatch("cannot infer the mode list of an empty term list")
        modes = terms[0][1].modes
    modes = _check_modes(modes)
    amps: dict[Occupation, complex] = {}
    for amp, basis in terms:
        if basis.modes != modes and set(basis.modes) != set(modes):
            raise ModeMismatch(
                f"basis state {basis} uses modes {[str(m) for m in basis.modes]}, "
                f"expected {[str(m) for m in modes]}"
            )
        occ = _reorder(basis, modes)
        amps[occ] = amps.get(occ, 0j) + complex(amp)
    return _build(modes, amps)


def zero_state(modes: Sequence[ModeId]) -> PureState:
    return _build(_check_modes(modes), {})


def scale(state: PureState, c: complex) -> PureState:
    return _build(state.modes, {o: c * a for o, a in state.amplitudes.items()})


def superpose(weighted: Iterable[tuple[complex, PureState]]) -> PureState:
    """Linear combination sum_k c_k |psi_k>; all states must share modes."""
    weighted = list(weighted)
    modes = weighted[0][1].modes
    amps: dict[Occupation, complex] = {}
    for c, st in weighted:
        if st.modes != modes:
            raise ModeMismatch("superposed states use different mode lists")
        for o, a in st.amplitudes.items():
            amps[o] = amps.get(o, 0j) + c * a
    return _build(modes, amps)


def renormalize(state: PureState) -> PureState:
    if state.norm_squared == 0:
        raise DomainError("cannot renormalize the zero state")
    return scale(state, 1 / math.sqrt(state.norm_squared))


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>."""
    if set(a.modes) != set(b.modes):
        raise ModeMismatch("states use different mode lists")
    b = reorder_modes(b, a.modes)
    return sum((amp.conjugate() * b.amplitudes.get(o, 0j) for o, amp in a.amplitudes.items()), 0j)


def states_close(a: PureState, b: PureState, tol: float = AMP_TOL, up_to_phase: bool = False) -> bool:
    """Term-by-term amplitude comparison, optionally modulo a global phase."""
    if set(a.modes) != set(b.modes):
        return False
    b = reorder_modes(b, a.modes)
    keys = set(a.amplitudes) | set(b.amplitudes)
    phase = 1.0
    if up_to_phase:
        ov = inner(b, a)
        if abs(ov) > 0:
            phase = ov / abs(ov)
    return all(abs(a.amplitudes.get(k, 0j) - phase * b.amplitudes.get(k, 0j)) <= tol for k in keys)


# ------------------------------------------------------------ mode plumbing


def reorder_modes(state: PureState, modes: Sequence[ModeId]) -> PureState:
    modes = _check_modes(modes)
    if modes == state.modes:
        return state
    if set(modes) != set(state.modes):
        raise ModeMismatch("reorder needs the same set of modes")
    perm = [state.modes.index(m) for m in modes]
    return _build(modes, {tuple(o[p] for p in perm): a for o, a in state.amplitudes.items()})


def extend_modes(state: PureState, new: Sequence[ModeId]) -> PureState:
    """Append vacuum modes."""
    modes = _check_modes(state.modes + tuple(new))
    pad = (0,) * len(new)
    return _build(modes, {o + pad: a for o, a in state.amplitudes.items()})


def drop_modes(state: PureState, gone: Sequence[ModeId]) -> PureState:
    """Remove modes that are empty in every term."""
    idx = [state.modes.index(m) for m in gone if m in state.modes]
    if len(idx) != len(gone):
        raise ModeMismatch("cannot drop a mode the state does not have")
    for o in state.amplitudes:
        if any(o[i] for i in idx):
            raise ModeMismatch(f"mode to drop is occupied in {FockBasisState(state.modes, o)}")
    keep = [i for i in range(len(state.modes)) if i not in idx]
    modes = tuple(state.modes[i] for i in keep)
    return _build(modes, {tuple(o[i] for i in keep): a for o, a in state.amplitudes.items()})


def relabel(state: PureState, mapping: Mapping[ModeId, ModeId]) -> PureState:
    """Rename modes, e.g. a photonic path to the plasmonic mode it launches."""
    for m in mapping:
        if m not in state.modes:
            raise ModeMismatch(f"mode {m} not in state")
    modes = _check_modes(tuple(mapping.get(m, m) for m in state.modes))
    return PureState(modes, state.amplitudes, state.norm_squared)


# --------------------------------------------------------------- operations


def apply_scattering(
    state: PureState, element: ScatteringElement, modes: Optional[Sequence[ModeId]] = None
) -> PureState:
    """Transform creation operators: a_j^dag -> sum_i S[i, j] a_i^dag on ``modes``.

    Modes not listed are untouched. Norm is preserved by unitary elements
    and can only decrease for sub-unitary ones.
    """
    if modes is None:
        modes = element.modes
    if modes is None:
        raise ModeMismatch(f"element {element.label!r} has no bound modes; pass them explicitly")
    modes = tuple(modes)
    if len(modes) != element.dim:
        raise ModeMismatch(f"element {element.label!r} is {element.dim}x{element.dim}, got {len(modes)} modes")
    try:
        idx = [state.modes.index(m) for m in _check_modes(modes)]
    except ValueError:
        raise ModeMismatch(f"element {element.label!r} addresses a mode missing from the state") from None
    S = element.matrix
    n = element.dim
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        photons = [k for k, j in enumerate(idx) for _ in range(occ[j])]
        base = list(occ)
        for j in idx:
            base[j] = 0
        inv_norm_in = 1.0 / math.sqrt(math.prod(math.factorial(occ[j]) for j in idx))
        # monomial coefficients of prod_k (sum_i S[i, k] a_i^dag)
        mono: dict[Occupation, complex] = {}
        for outs in itertools.product(range(n), repeat=len(photons)):
            coeff = amp
            for o, k in zip(outs, photons):
                coeff *= S[o, k]
            if coeff == 0:
                continue
            new = base.copy()
            for o in outs:
                new[idx[o]] += 1
            key = tuple(new)
            mono[key] = mono.get(key, 0j) + coeff
        for key, c in mono.items():
            fact = math.sqrt(math.prod(math.factorial(key[j]) for j in idx))
            out[key] = out.get(key, 0j) + c * fact * inv_norm_in
    return _build(state.modes, out)


def _selector_counts(state: PureState, selector: ModeId) -> list[int]:
    cols = [i for i, m in enumerate(state.modes) if selector.matches(m)]
    if not cols:
        raise ModeMismatch(f"no mode in the state matches selector {selector}")
    return cols


def project(state: PureState, projector: Projector) -> tuple[PureState, float]:
    """Apply a projector; return the unnormalized projected state and <psi|P|psi>.

    The probability is absolute, i.e. measured against the input's own
    (possibly sub-unit) norm, so loss upstream shows up in it.
    """
    if isinstance(projector, PolarizationProjector):
        h = ModeId(projector.path, Pol.H)
        v = ModeId(projector.path, Pol.V)
        if h not in state.modes or v not in state.modes:
            raise ModeMismatch(f"state has no polarization modes on path {projector.path.value}")
        ih, iv = state.modes.index(h), state.modes.index(v)
        ch, cv = projector.weights
        keep = [i for i in range(len(state.modes)) if i not in (ih, iv)]
        modes = tuple(state.modes[i] for i in keep)
        amps: dict[Occupation, complex] = {}
        for o, a in state.amplitudes.items():
            if o[ih] + o[iv] != 1:
                continue
            w = ch if o[ih] else cv
            key = tuple(o[i] for i in keep)
            amps[key] = amps.get(key, 0j) + w * a
        out = _build(modes, amps)
    elif isinstance(projector, OccupationProjector):
        tests = [(_selector_counts(state, m), n) for m, n in projector.pattern]
        out = _build(
            state.modes,
            {
                o: a
                for o, a in state.amplitudes.items()
                if all(sum(o[i] for i in cols) == n for cols, n in tests)
            },
        )
    elif isinstance(projector, CoincidenceProjector):
        tests = [_selector_counts(state, m) for m in projector.modes]
        out = _build(
            state.modes,
            {o: a for o, a in state.amplitudes.items() if all(sum(o[i] for i in cols) >= 1 for cols in tests)},
        )
    else:
        raise TypeError(f"unknown projector {projector!r}")
    return out, out.norm_squared


# ----------------------------------------------------------------- ensembles


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    """Incoherent mixture sum_k w_k |psi_k><psi_k|."""

    branches: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        branches = tuple((float(w), s) for w, s in self.branches)
        for w, _ in branches:
            if w < 0 or not math.isfinite(w):
                raise DomainError(f"branch weight {w} must be finite and >= 0")
        total = math.fsum(w * s.norm_squared for w, s in branches)
        if total > 1 + NORM_TOL:
            raise Unphysical(f"ensemble total probability {total:.15g} exceeds 1")
        object.__setattr__(self, "branches", branches)

    @property
    def total_probability(self) -> float:
        return math.fsum(w * s.norm_squared for w, s in self.branches)

    @property
    def modes(self) -> tuple[ModeId, ...]:
        return self.branches[0][1].modes


def make_ensemble(branches: Iterable[tuple[float, PureState]]) -> StateEnsemble:
    """Build an ensemble, dropping branches that carry no probability."""
    return StateEnsemble(tuple((w, s) for w, s in branches if w != 0 and s.norm_squared > 0))


def pure_ensemble(state: PureState) -> StateEnsemble:
    return StateEnsemble(((1.0, state),))


def map_ensemble(ensemble: StateEnsemble, fn: Callable[[PureState], PureState]) -> StateEnsemble:
    return make_ensemble((w, fn(s)) for w, s in ensemble.branches)


def probability_of(ensemble: StateEnsemble, projector: Projector) -> float:
    return math.fsum(w * project(s, projector)[1] for w, s in ensemble.branches)


def condition(ensemble: StateEnsemble, projector: Projector) -> tuple[StateEnsemble, float]:
    """Post-select on ``projector``; return the renormalized ensemble and the success probability."""
    projected = [(w, project(s, projector)[0]) for w, s in ensemble.branches]
    p = math.fsum(w * s.norm_squared for w, s in projected)
    if p == 0:
        raise DomainError("post-selection has zero probability")
    return make_ensemble((w * s.norm_squared / p, renormalize(s)) for w, s in projected if s.norm_squared > 0), p


def decohere(ensemble: StateEnsemble, modes: Sequence[ModeId], keep: float) -> StateEnsemble:
    """Scale coherences between different photon patterns on ``modes`` by ``keep``.

    rho -> keep * rho + (1 - keep) * sum_k P_k rho P_k, with P_k the
    projectors onto each occupation pattern of ``modes``.
    """
    if not 0.0 <= keep <= 1.0:
        raise DomainError(f"coherence factor {keep} outside [0, 1]")
    out: list[tuple[float, PureState]] = []
    for w, s in ensemble.branches:
        cols = [s.modes.index(m) for m in modes]
        groups: dict[Occupation, dict[Occupation, complex]] = {}
        for o, a in s.amplitudes.items():
            groups.setdefault(tuple(o[i] for i in cols), {})[o] = a
        out.append((w * keep, s))
        for g in groups.values():
            out.append((w * (1 - keep), _build(s.modes, g)))
    return make_ensemble(out)


def density_matrix(
    ensemble: StateEnsemble, basis: Optional[Sequence[Occupation]] = None
) -> tuple[list[Occupation], np.ndarray]:
    """Dense rho over ``basis`` (defaults to every occupation that appears)."""
    modes = ensemble.modes
    states = [(w, reorder_modes(s, modes)) for w, s in ensemble.branches]
    if basis is None:
        basis = sorted({o for _, s in states for o in s.amplitudes})
    basis = [tuple(b) for b in basis]
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for w, s in states:
        v = s.vector(basis)
        rho += w * np.outer(v, v.conj())
    return basis, rho
