"""Command-line driver: ``spp-entangle run|validate|schema``.

Each run writes ``<scenario>.csv`` (one row per grid point, in grid order),
``<scenario>_summary.json`` and ``<scenario>_config.json`` (the fully
resolved config, which reproduces the run when fed back in).

Exit codes: 0 ok, 2 config error, 3 runtime error. Failures print a
single JSON line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError
from .experiment import (
    characterize_spbs,
    chsh,
    predicted_visibility,
    sampled_chsh,
    scan_fringes,
    scan_grid,
)
from .source import effective_gamma
from .stats import derive_seed, fit_sine, sample_scan

log = logging.getLogger("spp_entangle")


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map; results follow input order whatever the completion order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fit_dict(fit) -> dict:
    return {k: _num(v) for k, v in asdict(fit).items()}


def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class _Result:
    header: list[str]
    rows: list[list]
    summary: dict


# ---------------------------------------------------------------- scenarios


def _run_chsh_scan(cfg: RunConfig) -> _Result:
    setting = cfg.chsh_angles.setting()
    deltas = scan_grid(*cfg.bell_scan.as_tuple())
    mc = cfg.sampling if cfg.monte_carlo else None

    def point(args):
        i, d = args
        g = effective_gamma(cfg.source.spec(float(d)))
        if mc is None:
            res = chsh(setting, g)
        else:
            res = sampled_chsh(setting, g, mc.samples_per_setting, derive_seed(mc.seed, i))
        return [float(d), g, res.S, res.sigma_S]

    rows = _pmap(point, list(enumerate(deltas)), cfg.workers)
    best = max(rows, key=lambda r: abs(r[2]))
    summary = {
        "gamma_max": cfg.source.gamma_max,
        "tau_c_um": cfg.source.spec().tau_c,
        "max_abs_S": abs(best[2]),
        "delta_bell_at_max_um": best[0],
        "sigma_S_at_max": best[3],
        "violates_local_bound": abs(best[2]) > 2.0,
    }
    return _Result(["delta_bell", "gamma", "S", "sigma_S"], rows, summary)


def _fringe_scan(cfg: RunConfig, theta: float, gamma: float, seed: int):
    mz = cfg.mz.spec()
    scan = scan_fringes(theta, gamma, mz, cfg.scan.as_tuple())
    if cfg.monte_carlo:
        s = cfg.sampling
        scan = sample_scan(scan, s.mean_heralds, seed, background=s.background)
    fa = fit_sine(scan, fix_period=mz.lambda_eff, channel="A")
    fb = fit_sine(scan, fix_period=mz.lambda_eff, channel="B")
    return scan, fa, fb


def _run_fringes(cfg: RunConfig) -> _Result:
    gamma = effective_gamma(cfg.source.spec())
    seed = cfg.sampling.seed if cfg.monte_carlo else 0
    scan, fa, fb = _fringe_scan(cfg, cfg.theta_deg, gamma, seed)
    header = ["delta_mz", "rate_A", "rate_B"]
    rows = [list(p) for p in scan.points]
    if cfg.monte_carlo:
        header += ["heralds", "counts_A", "counts_B"]
        rows = [r + [rec.heralds, rec.counts_A, rec.counts_B] for r, rec in zip(rows, scan.records)]
    va, vb = predicted_visibility(cfg.theta_deg, gamma, cfg.mz.spec())
    summary = {
        "theta_deg": cfg.theta_deg,
        "gamma": gamma,
        "fit_A": _fit_dict(fa),
        "fit_B": _fit_dict(fb),
        "visibility_A": _num(fa.visibility),
        "visibility_B": _num(fb.visibility),
        "predicted_visibility_A": va,
        "predicted_visibility_B": vb,
    }
    return _Result(header, rows, summary)


def _run_spbs(cfg: RunConfig) -> _Result:
    mz = cfg.mz.spec()
    gamma = effective_gamma(cfg.source.spec())
    s = cfg.sampling if cfg.monte_carlo else None
    est = characterize_spbs(
        mz,
        mean_heralds=s.mean_heralds if s else None,
        seed=s.seed if s else 0,
        scan=cfg.scan.as_tuple(),
        theta=cfg.theta_deg,
        gamma=gamma,
    )
    rows = [list(p) for p in est.scan.points]
    summary = {
        "R_hat": est.R,
        "T_hat": est.T,
        "losses_hat": 1 - est.R - est.T,
        "delta_phi_hat_deg": est.delta_phi,
        "true": {"R": mz.spbs.R, "T": mz.spbs.T, "delta_phi_deg": mz.spbs.delta_phi},
        "fit_A": _fit_dict(est.fit_A),
        "fit_B": _fit_dict(est.fit_B),
    }
    return _Result(["delta_mz", "rate_A", "rate_B"], rows, summary)


def _run_visibility_vs_theta(cfg: RunConfig) -> _Result:
    gamma = effective_gamma(cfg.source.spec())
    thetas = scan_grid(*cfg.theta_scan.as_tuple())
    mz = cfg.mz.spec()
    seed = cfg.sampling.seed if cfg.monte_carlo else 0

    def point(args):
        i, th = args
        _, fa, fb = _fringe_scan(cfg, float(th), gamma, derive_seed(seed, i))
        pa, pb = predicted_visibility(float(th), gamma, mz)
        return [float(th), fa.visibility, fb.visibility, fa.visibility_sigma, fb.visibility_sigma, pa, pb]

    rows = _pmap(point, list(enumerate(thetas)), cfg.workers)
    arr = np.array(rows, dtype=float)
    mean = (arr[:, 1] + arr[:, 2]) / 2
    summary = {
        "gamma": gamma,
        "theta_at_max_A": float(arr[np.nanargmax(arr[:, 1]), 0]),
        "theta_at_max_B": float(arr[np.nanargmax(arr[:, 2]), 0]),
        "theta_at_max_mean": float(arr[np.nanargmax(mean), 0]),
        "max_visibility_mean": float(np.nanmax(mean)),
    }
    header = ["theta", "visibility_A", "visibility_B", "sigma_A", "sigma_B", "predicted_A", "predicted_B"]
    return _Result(header, rows, summary)


RUNNERS = {
    "chsh_scan": _run_chsh_scan,
    "fringes": _run_fringes,
    "spbs_characterize": _run_spbs,
    "visibility_vs_theta": _run_visibility_vs_theta,
}


def _cell(v) -> str:
    v = _num(v)
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run(config: RunConfig) -> list[Path]:
    """Execute ``config``; return the paths written."""
    cfg = config.resolved()
    result = RUNNERS[cfg.scenario](cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.scenario}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])
    summary = {
        "scenario": cfg.scenario,
        "sampling": cfg.sampling.mode,
        "seed": getattr(cfg.sampling, "seed", None),
        "results": {k: _num(v) if not isinstance(v, dict) else v for k, v in result.summary.items()},
        "config": cfg.provenance(),
    }
    summary_path = out / f"{cfg.scenario}_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    config_path = out / f"{cfg.scenario}_config.json"
    config_path.write_text(json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s, %s, %s", csv_path, summary_path, config_path)
    return [csv_path, summary_path, config_path]


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spp-entangle", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override sampling.seed")
    r.add_argument("--out", help="override the output directory")
    r.add_argument("--format", choices=["csv"], default="csv")
    r.add_argument("--workers", type=int, help="parallel workers for scan points")
    v = sub.add_parser("validate", help="validate a config and print it fully resolved")
    v.add_argument("config")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "schema":
        print(json.dumps(RunConfig.model_json_schema(), indent=2))
        return 0
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(json.dumps(cfg.resolved().model_dump(mode="json"), indent=2))
            return 0
        update = {}
        if args.out is not None:
            update["output"] = args.out
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            update["workers"] = args.workers
        if args.seed is not None:
            if not cfg.monte_carlo:
                log.warning("--seed ignored: sampling mode is analytic")
            else:
                if args.seed < 0:
                    raise ConfigError("--seed must be >= 0")
                update["sampling"] = cfg.sampling.model_copy(update={"seed": args.seed})
        cfg = cfg.model_copy(update=update)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    try:
        run(cfg)
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit 3
        return _fail("runtime", f"{type(exc).__name__}: {exc}", 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
