"""Shot-noise sampling, sinusoid fitting and CHSH estimation.

Every random draw comes from a generator seeded by an integer derived from
``(master_seed, point_index)``, so a sampled scan is bit-identical whether
its points are drawn sequentially or in parallel.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, EstimatorError, FitError

TSIRELSON = 2 * math.sqrt(2)


def derive_seed(master_seed: int, index: int) -> int:
    """Independent per-point seed for stream ``index`` of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class CountRecord:
    heralds: int
    counts_A: int
    counts_B: int
    delta_mz: Optional[float] = None
    seed: Optional[int] = None

    @property
    def flagged(self) -> bool:
        """Raw Poisson draws may exceed the herald count; such records are flagged, not clipped."""
        return self.counts_A > self.heralds or self.counts_B > self.heralds


def sample_counts(
    p: float,
    mean_heralds: float,
    rng_seed: int,
    p_b: float = 0.0,
    background: float = 0.0,
    delta_mz: Optional[float] = None,
) -> CountRecord:
    """Draw heralds ~ Poisson(mean_heralds), then counts ~ Poisson(heralds * (p + background)).

    ``p`` is the heralded probability for detector A, ``p_b`` the one for B.
    ``background`` is a flat accidental-coincidence probability per herald.
    """
    for name, v in (("p", p), ("p_b", p_b)):
        if not 0.0 <= v <= 1.0 or not math.isfinite(v):
            raise DomainError(f"{name}={v} outside [0, 1]")
    if not mean_heralds > 0:
        raise DomainError(f"mean_heralds must be > 0, got {mean_heralds}")
    if background < 0:
        raise DomainError("background must be >= 0")
    rng = np.random.default_rng(rng_seed)
    heralds = int(rng.poisson(mean_heralds))
    ca = int(rng.poisson(heralds * (p + background)))
    cb = int(rng.poisson(heralds * (p_b + background)))
    return CountRecord(heralds, ca, cb, delta_mz, rng_seed)


@dataclass(frozen=True, eq=False)
class FringeScan:
    """Heralded rates p(A|C), p(B|C) sampled along the interferometer delay (nm)."""

    delta_mz: np.ndarray
    rate_A: np.ndarray
    rate_B: np.ndarray
    mode: str = "analytic"
    records: tuple[CountRecord, ...] = field(default=())

    def __post_init__(self):
        d = np.asarray(self.delta_mz, dtype=float)
        a = np.asarray(self.rate_A, dtype=float)
        b = np.asarray(self.rate_B, dtype=float)
        if not (d.shape == a.shape == b.shape) or d.ndim != 1:
            raise DomainError("scan columns must be 1-D and equally long")
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise DomainError("delta_mz must be strictly increasing")
        if np.any(a < 0) or np.any(b < 0):
            raise DomainError("rates must be >= 0")
        if self.mode not in ("analytic", "sampled"):
            raise DomainError(f"unknown scan mode {self.mode!r}")
        for name, arr in (("delta_mz", d), ("rate_A", a), ("rate_B", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.delta_mz.tolist(), self.rate_A.tolist(), self.rate_B.tolist()))

    def channel(self, name: str) -> np.ndarray:
        if name == "A":
            return self.rate_A
        if name == "B":
            return self.rate_B
        raise ValueError(f"channel must be 'A' or 'B', got {name!r}")


def _draw_point(args):
    i, d, pa, pb, mean_heralds, seed, background = args
    return sample_counts(pa, mean_heralds, derive_seed(seed, i), p_b=pb, background=background, delta_mz=d)


def sample_scan(
    scan: FringeScan, mean_heralds: float, seed: int, background: float = 0.0, workers: int = 1
) -> FringeScan:
    """Replace analytic probabilities by Poisson-sampled heralded rates."""
    jobs = [
        (i, float(d), float(pa), float(pb), mean_heralds, seed, background)
        for i, (d, pa, pb) in enumerate(zip(scan.delta_mz, scan.rate_A, scan.rate_B))
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_draw_point, jobs))
    else:
        records = [_draw_point(j) for j in jobs]
    h = np.array([r.heralds for r in records], dtype=float)
    safe = np.where(h > 0, h, 1.0)
    ra = np.where(h > 0, [r.counts_A for r in records] / safe, 0.0)
    rb = np.where(h > 0, [r.counts_B for r in records] / safe, 0.0)
    return FringeScan(scan.delta_mz, ra, rb, "sampled", tuple(records))


# ---------------------------------------------------------------- sine fits


@dataclass(frozen=True)
class FitResult:
    """rate = offset + amplitude * cos(2 pi delta / period + phase), phase in degrees."""

    offset: float
    amplitude: float
    phase: float
    period: float
    visibility: float
    residual: float
    visibility_sigma: float
    phase_sigma: float = 0.0
    period_fixed: bool = True

    def model(self, delta) -> np.ndarray:
        x = 2 * np.pi * np.asarray(delta, dtype=float) / self.period + np.radians(self.phase)
        return self.offset + self.amplitude * np.cos(x)


def _clamped_visibility(amplitude: float, offset: float) -> float:
    if offset <= 0:
        return float("nan")
    return min(max(amplitude / offset, 0.0), 1.0)


def _finish(c0, a, b, period, cov, resid, fixed) -> FitResult:
    # parameters: offset c0, a = amp cos(phase), b = -amp sin(phase)
    amp = math.hypot(a, b)
    phase = math.degrees(math.atan2(-b, a))
    if amp > 0 and c0 > 0:
        g = np.array([-amp / c0**2, a / (amp * c0), b / (amp * c0)])
        var_v = float(g @ cov @ g)
        gp = np.array([0.0, b / amp**2, -a / amp**2])
        var_p = float(gp @ cov @ gp)
    else:
        var_v = (cov[1, 1] + cov[2, 2]) / 2 / c0**2 if c0 > 0 else float("nan")
        var_p = float("nan") if amp == 0 else 0.0
    rms = math.sqrt(float(np.mean(resid**2))) if resid.size else 0.0
    return FitResult(
        offset=float(c0),
        amplitude=float(amp),
        phase=phase,
        period=float(period),
        visibility=_clamped_visibility(amp, c0),
        residual=rms,
        visibility_sigma=math.sqrt(max(var_v, 0.0)) if math.isfinite(var_v) else float("nan"),
        phase_sigma=math.degrees(math.sqrt(max(var_p, 0.0))) if math.isfinite(var_p) else float("nan"),
        period_fixed=fixed,
    )


def _linear_fit(x: np.ndarray, y: np.ndarray, period: float):
    w = 2 * np.pi * x / period
    design = np.column_stack([np.ones_like(x), np.cos(w), np.sin(w)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, resid, design


def _as_xy(scan, channel):
    if isinstance(scan, FringeScan):
        return scan.delta_mz, scan.channel(channel)
    x, y = scan
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def fit_sine(scan, fix_period: Optional[float] = None, channel: str = "A") -> FitResult:
    """Least-squares sinusoid fit to one channel of a scan.

    With ``fix_period`` the problem is linear in (offset, amp cos phase,
    amp sin phase) and solved directly. Otherwise the period is found by a
    coarse search over linear fits and refined by nonlinear least squares.
    ``scan`` may also be an ``(x, y)`` pair of arrays.

    Raises
    ------
    FitError
        Too few points, or flat data with a free period. In the latter case
        ``err.fallback`` holds the flat (zero-amplitude) fit.
    """
    x, y = _as_xy(scan, channel)
    n = x.size
    if fix_period is not None:
        if n < 4:
            raise FitError(f"fixed-period fit needs >= 4 points, got {n}")
        if not fix_period > 0:
            raise FitError("period must be > 0")
        coef, resid, design = _linear_fit(x, y, fix_period)
        sigma2 = float(resid @ resid) / (n - 3)
        cov = sigma2 * np.linalg.pinv(design.T @ design)
        return _finish(*coef, fix_period, cov, resid, True)

    if n < 5:
        raise FitError(f"free-period fit needs >= 5 points, got {n}")
    span = float(x.max() - x.min())
    scale = max(float(np.max(np.abs(y))), 1e-300)
    if span == 0 or np.ptp(y) <= 1e-12 * scale:
        flat = FitResult(float(np.mean(y)), 0.0, 0.0, float("inf"), 0.0, float(np.std(y)), 0.0, float("nan"), False)
        err = FitError("degenerate flat data: period undefined, flat-fit fallback reported")
        err.fallback = flat
        raise err
    # periods from ~2 samples per cycle up to twice the scan span
    periods = np.geomspace(2 * span / (n - 1), 2 * span, 400)
    rss = [float(np.sum(_linear_fit(x, y, p)[1] ** 2)) for p in periods]
    p0 = float(periods[int(np.argmin(rss))])
    coef0, _, _ = _linear_fit(x, y, p0)

    def residuals(theta):
        c0, a, b, f = theta
        w = 2 * np.pi * x * f
        return c0 + a * np.cos(w) + b * np.sin(w) - y

    sol = least_squares(residuals, np.r_[coef0, 1 / p0], x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c0, a, b, f = sol.x
    resid = sol.fun
    dof = max(n - 4, 1)
    sigma2 = float(resid @ resid) / dof
    cov4 = sigma2 * np.linalg.pinv(sol.jac.T @ sol.jac)
    if f < 0:
        f, b = -f, -b
    return _finish(c0, a, b, 1 / f, cov4[:3, :3], resid, False)


def visibility(fit: FitResult) -> float:
    """amplitude / offset of the fitted curve, i.e. (max - min) / (max + min), clamped to [0, 1]."""
    if not fit.offset > 0:
        raise DomainError(f"visibility undefined for offset {fit.offset}")
    return _clamped_visibility(fit.amplitude, fit.offset)


# ------------------------------------------------------------------- CHSH

# Row order of 4x4 CHSH tables: settings (a,b), (a,b'), (a',b), (a',b');
# columns: outcomes ++, +-, -+, --.
CHSH_SIGNS = np.array([1.0, -1.0, 1.0, 1.0])
OUTCOME_PARITY = np.array([1.0, -1.0, -1.0, 1.0])


def correlations_from_counts(table) -> tuple[np.ndarray, np.ndarray]:
    """Per-setting correlation estimates and their binomial standard errors."""
    t = np.asarray(table, dtype=float)
    if t.shape != (4, 4):
        raise EstimatorError(f"expected a 4x4 table, got {t.shape}")
    if np.any(t < 0):
        raise EstimatorError("negative counts")
    totals = t.sum(axis=1)
    if np.any(totals <= 0):
        bad = [int(i) for i in np.flatnonzero(totals <= 0)]
        raise EstimatorError(f"settings {bad} have no coincidences")
    E = (t @ OUTCOME_PARITY) / totals
    sigma = np.sqrt(np.clip(1 - E**2, 0, None) / totals)
    return E, sigma


def chsh_from_counts(table) -> tuple[float, float]:
    """(S_hat, sigma) with S = E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    E, sE = correlations_from_counts(table)
    S = float(CHSH_SIGNS @ E)
    sigma = float(math.sqrt(np.sum(sE**2)))
    if abs(S) > TSIRELSON + 1e-9:
        warnings.warn(f"|S|={abs(S):.4f} exceeds the quantum bound 2*sqrt(2); unphysical counts", stacklevel=2)
    return S, sigma


def sample_chsh_table(joint, samples_per_setting: int, seed: int) -> np.ndarray:
    """Multinomial coincidence counts for each setting row of ``joint``."""
    joint = np.asarray(joint, dtype=float)
    if joint.shape != (4, 4):
        raise EstimatorError("joint probabilities must be 4x4")
    out = np.zeros((4, 4), dtype=np.int64)
    for i, row in enumerate(joint):
        total = row.sum()
        if total <= 0:
            raise EstimatorError(f"setting {i} has zero coincidence probability")
        rng = np.random.default_rng(derive_seed(seed, i))
        out[i] = rng.multinomial(int(samples_per_setting), row / total)
    return out

