"""Optical and plasmonic elements of the setup, as scattering matrices and projectors.

Matrix convention: ``S[i, j]`` is the amplitude for a quantum entering
mode ``j`` to leave in mode ``i``. A lossy element is simply a
sub-unitary matrix; no loss modes are carried.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, Unphysical
from .modes import BETA1, BETA2, BETA_H, BETA_V, ModeId, Path

SV_TOL = 1e-12
DEFAULT_LAMBDA_NM = 806.0


@dataclass(frozen=True, eq=False)
class ScatteringElement:
    """A linear map on mode amplitudes.

    ``modes`` optionally binds the element to an ordered list of modes so
    that callers do not have to pass them to ``apply_scattering``.
    """

    matrix: np.ndarray
    label: str = ""
    modes: Optional[tuple[ModeId, ...]] = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"{self.label or 'element'}: matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError(f"{self.label or 'element'}: non-finite matrix entry")
        smax = max_singular_value(m)
        if smax > 1 + SV_TOL:
            raise Unphysical(
                f"{self.label or 'element'}: largest singular value {smax:.6g} > 1 (gain)"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.modes is not None:
            modes = tuple(self.modes)
            if len(modes) != m.shape[0]:
                raise DomainError("bound mode list does not match matrix dimension")
            object.__setattr__(self, "modes", modes)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def then(self, other: ScatteringElement) -> ScatteringElement:
        """Element equivalent to applying ``self`` first and ``other`` second."""
        return ScatteringElement(other.matrix @ self.matrix, f"{other.label}*{self.label}", self.modes)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.allclose(m.conj().T @ m, np.eye(self.dim), atol=tol, rtol=0))


def max_singular_value(matrix) -> float:
    return float(np.linalg.svd(np.asarray(matrix, dtype=complex), compute_uv=False)[0])


@dataclass(frozen=True)
class SpbsSpec:
    """Measured parameters of the two-groove plasmonic splitter.

    R, T are intensity reflection/transmission, ``delta_phi`` is
    arg(t) - arg(r) in degrees and ``mu`` the spatial-mode overlap of the
    two SPP beams (it scales only the interference term).
    """

    R: float = 0.17
    T: float = 0.20
    delta_phi: float = 100.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("R", "T", "mu"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise DomainError(f"{name}={v} outside [0, 1]")
        if not math.isfinite(self.delta_phi):
            raise DomainError("delta_phi must be finite")
        if self.R + self.T > 1 + SV_TOL:
            raise Unphysical(f"R+T must be <= 1 (got {self.R + self.T:.6g})")

    @property
    def losses(self) -> float:
        return 1.0 - self.R - self.T

    def amplitudes(self) -> tuple[complex, complex]:
        """(t, r) with r real positive."""
        r = math.sqrt(self.R)
        t = math.sqrt(self.T) * np.exp(1j * math.radians(self.delta_phi))
        return complex(t), complex(r)


# ---------------------------------------------------------------- projectors


@dataclass(frozen=True)
class PolarizationProjector:
    """Herald event: exactly one photon on ``path``, found along angle ``theta``.

    The polarization state passed is cos(theta)|H> + sin(theta)|V>. The
    measured path is consumed: projected states no longer carry its modes.
    """

    theta: float
    path: Path = Path.ALPHA

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))

    @property
    def weights(self) -> tuple[float, float]:
        th = math.radians(self.theta)
        return math.cos(th), math.sin(th)


@dataclass(frozen=True)
class OccupationProjector:
    """Keep terms whose photon counts on the selected modes equal ``pattern``.

    A selector with ``Pol.NONE`` counts photons over its whole path.
    """

    pattern: tuple[tuple[ModeId, int], ...]

    def __init__(self, pattern):
        items = pattern.items() if hasattr(pattern, "items") else pattern
        object.__setattr__(self, "pattern", tuple((ModeId(m.path, m.pol), int(n)) for m, n in items))


@dataclass(frozen=True)
class CoincidenceProjector:
    """Keep terms with at least one photon on every selector (click detectors)."""

    modes: tuple[ModeId, ...] = field(default=())

    def __init__(self, modes: Sequence[ModeId]):
        object.__setattr__(self, "modes", tuple(modes))


Projector = Union[PolarizationProjector, OccupationProjector, CoincidenceProjector]


# -------------------------------------------------------------- constructors


def balanced_bs() -> ScatteringElement:
    """Symmetric 50:50 splitter: real transmission, reflection with a +i."""
    s = 1 / math.sqrt(2)
    return ScatteringElement(np.array([[s, 1j * s], [1j * s, s]]), "bs50")


PBS_MODES = (BETA_H, BETA_V, BETA1, BETA2)


def pbs_route() -> ScatteringElement:
    """Polarizing splitter on mode ``beta``: V is reflected into beta1, H transmitted into beta2.

    Bound to ``PBS_MODES``; the reverse routes are filled in so that the map
    is a permutation.
    """
    # columns: inputs (beta:H, beta:V, beta1, beta2)
    m = np.zeros((4, 4), dtype=complex)
    m[3, 0] = 1  # beta:H -> beta2
    m[2, 1] = 1  # beta:V -> beta1
    m[1, 2] = 1
    m[0, 3] = 1
    return ScatteringElement(m, "pbs", PBS_MODES)


def polarizer(theta: float, path: Path = Path.ALPHA) -> PolarizationProjector:
    return PolarizationProjector(float(theta), path)


def lossy_bs(spec: SpbsSpec) -> ScatteringElement:
    """Symmetric lossy splitter ``[[t, r], [r, t]]`` with |t|^2 = T, |r|^2 = R.

    Raises
    ------
    Unphysical
        If R + T > 1, or if the chosen phase makes the matrix amplify
        (|t +- r| > 1).
    """
    t, r = spec.amplitudes()
    m = np.array([[t, r], [r, t]])
    smax = max_singular_value(m)
    if smax > 1 + SV_TOL:
        raise Unphysical(
            f"SPBS R={spec.R}, T={spec.T}, delta_phi={spec.delta_phi} has gain (|t+-r|={smax:.6g})"
        )
    return ScatteringElement(m, f"spbs(R={spec.R},T={spec.T},dphi={spec.delta_phi})")


def phase_delay(delta: float, lambda_eff: float = DEFAULT_LAMBDA_NM) -> ScatteringElement:
    if not lambda_eff > 0:
        raise DomainError(f"lambda_eff must be > 0, got {lambda_eff}")
    phi = 2 * math.pi * delta / lambda_eff
    return ScatteringElement(np.array([[np.exp(1j * phi)]]), f"delay({delta}nm)")


def coupler(eta: float) -> ScatteringElement:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"coupler efficiency {eta} outside [0, 1]")
    return ScatteringElement(np.array([[math.sqrt(eta)]]), f"coupler({eta})")

