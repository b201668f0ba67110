"""Run configuration: one JSON document per run, validated on load.

Unknown keys are rejected at every level. Defaults are the measured
device values, so a minimal config only names the scenario.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional, Union, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import elements as el
from .errors import ConfigError, Unphysical
from .experiment import ChshSetting, MzSpec, calibrate_gamma
from .source import PairSourceSpec

Scenario = Literal["chsh_scan", "fringes", "spbs_characterize", "visibility_vs_theta"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)


class SourceConfig(_Strict):
    lambda0_nm: float = Field(806.0, gt=0)
    bandwidth_nm: float = Field(1.0, gt=0)
    delta_bell_um: float = 0.0
    # gamma_max is derived from s_bell when left out
    gamma_max: Optional[float] = Field(None, ge=0, le=1)
    s_bell: float = Field(2.44, ge=0, le=2 * math.sqrt(2))

    def spec(self, delta_bell_um: Optional[float] = None) -> PairSourceSpec:
        return PairSourceSpec(
            lambda0=self.lambda0_nm,
            bandwidth=self.bandwidth_nm,
            delta_bell=self.delta_bell_um if delta_bell_um is None else delta_bell_um,
            gamma_max=self.gamma_max if self.gamma_max is not None else calibrate_gamma(self.s_bell),
        )


class MzConfig(_Strict):
    R: float = Field(0.17, ge=0, le=1)
    T: float = Field(0.20, ge=0, le=1)
    delta_phi_deg: float = 100.0
    mu: float = Field(0.8, ge=0, le=1)
    lambda_eff_nm: float = Field(el.DEFAULT_LAMBDA_NM, gt=0)
    eta_in1: float = Field(1.0, ge=0, le=1)
    eta_in2: float = Field(1.0, ge=0, le=1)
    eta_out_A: float = Field(1.0, ge=0, le=1)
    eta_out_B: float = Field(1.0, ge=0, le=1)

    @model_validator(mode="after")
    def _physical(self):
        if self.R + self.T > 1:
            raise ValueError(f"R+T must be <= 1 (got R={self.R}, T={self.T})")
        try:
            el.lossy_bs(el.SpbsSpec(self.R, self.T, self.delta_phi_deg, self.mu))
        except Unphysical as exc:
            raise ValueError(str(exc)) from None
        return self

    def spec(self) -> MzSpec:
        return MzSpec(
            spbs=el.SpbsSpec(self.R, self.T, self.delta_phi_deg, self.mu),
            lambda_eff=self.lambda_eff_nm,
            eta_in1=self.eta_in1,
            eta_in2=self.eta_in2,
            eta_out_A=self.eta_out_A,
            eta_out_B=self.eta_out_B,
        )


class AnglesConfig(_Strict):
    a: float = 0.0
    a_prime: float = 45.0
    b: float = 22.5
    b_prime: float = 67.5

    def setting(self) -> ChshSetting:
        return ChshSetting(self.a, self.a_prime, self.b, self.b_prime)


class Grid(_Strict):
    start: float
    stop: float
    n_points: int = Field(ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.stop > self.start:
            raise ValueError(f"stop ({self.stop}) must be greater than start ({self.start})")
        return self

    def as_tuple(self) -> tuple[float, float, int]:
        return (self.start, self.stop, self.n_points)


class AnalyticSampling(_Strict):
    mode: Literal["analytic"] = "analytic"


class MonteCarloSampling(_Strict):
    mode: Literal["monte_carlo"]
    mean_heralds: float = Field(1e4, gt=0)
    samples_per_setting: int = Field(100_000, gt=0)
    seed: int = Field(0, ge=0)
    background: float = Field(0.0, ge=0, le=1)


class RunConfig(_Strict):
    scenario: Scenario
    theta_deg: float = 45.0
    source: SourceConfig = SourceConfig()
    mz: MzConfig = MzConfig()
    chsh_angles: AnglesConfig = AnglesConfig()
    # delay of the spp1 arm, nm
    scan: Grid = Grid(start=0.0, stop=2 * el.DEFAULT_LAMBDA_NM, n_points=41)
    # Bell delay, micrometres
    bell_scan: Grid = Grid(start=-400.0, stop=400.0, n_points=17)
    theta_scan: Grid = Grid(start=0.0, stop=90.0, n_points=19)
    sampling: Union[AnalyticSampling, MonteCarloSampling] = Field(AnalyticSampling(), discriminator="mode")
    output: str = "out"
    workers: int = Field(1, ge=1)

    @property
    def monte_carlo(self) -> bool:
        return isinstance(self.sampling, MonteCarloSampling)

    def resolved(self) -> RunConfig:
        """Copy with every derived default filled in (gamma_max)."""
        src = self.source
        if src.gamma_max is None:
            src = src.model_copy(update={"gamma_max": calibrate_gamma(src.s_bell)})
        return self.model_copy(update={"source": src})

    def provenance(self) -> dict:
        """Resolved config minus the fields that cannot change results."""
        return self.resolved().model_dump(mode="json", exclude={"output", "workers"})


_BOUNDS = (("ge", ">="), ("gt", ">"), ("le", "<="), ("lt", "<"))


def _field_bounds(loc: tuple) -> list[str]:
    """Declared numeric bounds of the field at ``loc``, e.g. ['>= 0', '<= 1']."""
    candidates, info = (RunConfig,), None
    for part in loc:
        found = [m.model_fields[part] for m in candidates if part in getattr(m, "model_fields", {})]
        if not found:
            return []
        info = found[0]
        # Optional[...] and the sampling union: look inside every member
        candidates = get_args(info.annotation) or (info.annotation,)
    if info is None:
        return []
    out = []
    for meta in info.metadata:
        for attr, sym in _BOUNDS:
            if getattr(meta, attr, None) is not None:
                out.append(f"{sym} {getattr(meta, attr)}")
    return out


def _format_error(err: dict) -> str:
    parts = tuple(p for p in err["loc"] if str(p) not in ("analytic", "monte_carlo"))
    loc = ".".join(str(p) for p in parts)
    if err["type"] == "extra_forbidden":
        return f"unknown key '{loc}'"
    bounds = _field_bounds(parts)
    where = f"field '{loc}': " if loc else ""
    rng = f" (legal range: {', '.join(bounds)})" if bounds else ""
    msg = err["msg"].removeprefix("Value error, ")
    return f"{where}{msg}{rng}"


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError("; ".join(_format_error(e) for e in exc.errors())) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not valid UTF-8") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(data)
