"""Mode labels: spatial path x polarization."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Path(str, Enum):
    ALPHA = "alpha"
    BETA = "beta"
    BETA1 = "beta1"
    BETA2 = "beta2"
    SPP1 = "spp1"
    SPP2 = "spp2"
    OUT_A = "outA"
    OUT_B = "outB"
    LOSS = "loss_k"


class Pol(str, Enum):
    H = "H"
    V = "V"
    NONE = "none"


# plasmonic and detector modes are path-encoded only
PATH_ONLY = frozenset({Path.SPP1, Path.SPP2, Path.OUT_A, Path.OUT_B, Path.LOSS})


@dataclass(frozen=True)
class ModeId:
    path: Path
    pol: Pol = Pol.NONE

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        object.__setattr__(self, "pol", Pol(self.pol))
        if self.path in PATH_ONLY and self.pol is not Pol.NONE:
            raise ValueError(f"mode on path {self.path.value} cannot carry polarization")

    def matches(self, other: ModeId) -> bool:
        """True if ``other`` is selected by this label.

        A label with ``Pol.NONE`` selects every polarization on its path.
        """
        if self.path is not other.path:
            return False
        return self.pol is Pol.NONE or self.pol is other.pol

    def __str__(self) -> str:
        if self.pol is Pol.NONE:
            return self.path.value
        return f"{self.path.value}:{self.pol.value}"


ALPHA_H = ModeId(Path.ALPHA, Pol.H)
ALPHA_V = ModeId(Path.ALPHA, Pol.V)
BETA_H = ModeId(Path.BETA, Pol.H)
BETA_V = ModeId(Path.BETA, Pol.V)
BETA1 = ModeId(Path.BETA1)
BETA2 = ModeId(Path.BETA2)
SPP1 = ModeId(Path.SPP1)
SPP2 = ModeId(Path.SPP2)
OUT_A = ModeId(Path.OUT_A)
OUT_B = ModeId(Path.OUT_B)

PAIR_MODES = (ALPHA_H, ALPHA_V, BETA_H, BETA_V)
