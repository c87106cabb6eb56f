"""Experiment runner: reproduces the figure datasets and runs custom sweeps.

Each experiment writes one table per curve (columns x, value, method, stderr,
n_samples, seed) plus a sidecar ``<experiment>_meta.json`` with the full
configuration, library versions, and wall-clock time.  SNR is specified in dB
on the command line and converted to linear scale internally.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 partial
results (some curves were flushed before the failure).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import CellrateError, DomainError, QuadratureError
from .channel import large_scale_profile
from .geometry import Layout, sample_scenario
from .montecarlo import (
    STREAM_AUX,
    RateEstimate,
    SimulationPlan,
    average_user_rate,
    substream,
)
from . import mrt, zfbf

EXPERIMENTS = (
    "figure2",
    "figure3",
    "figure4",
    "figure6",
    "figure7",
    "figure8",
    "scenario",
    "sweep",
)

DESK_USER_REALIZATIONS = 100
DESK_ANTENNA_REALIZATIONS = 10
DESK_FADING_DRAWS = 300
PAPER_USER_REALIZATIONS = 500
PAPER_ANTENNA_REALIZATIONS = 50
PAPER_FADING_DRAWS = 2000


@dataclass
class ExperimentConfig:
    kind: str
    out_dir: Path = Path("results")
    fmt: str = "csv"
    alpha: float = 4.0
    snr_db: float = 20.0
    plan: SimulationPlan = field(
        default_factory=lambda: SimulationPlan(
            fading_draws=DESK_FADING_DRAWS,
            user_realizations=DESK_USER_REALIZATIONS,
            antenna_realizations=DESK_ANTENNA_REALIZATIONS,
        )
    )
    L_list: tuple[int, ...] = (20, 50, 100, 200)
    ratio_list: tuple[float, ...] = (2.0, 5.0)
    upsilon_list: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    L_fixed: tuple[int, ...] = (100, 400)
    L: int | None = None
    K: int | None = None
    layout: str = "ca"
    scheme: str = "mrt"
    method: str | None = None
    workers: int = 1

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


def _fmt(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".12g")


def _row(x, estimate: RateEstimate, seed: int | None) -> dict:
    mc = estimate.method == "monte_carlo"
    return {
        "x": _fmt(x),
        "value": _fmt(estimate.value),
        "method": estimate.method,
        "stderr": _fmt(estimate.stderr) if mc else "",
        "n_samples": "" if estimate.n_samples is None else str(estimate.n_samples),
        "seed": str(seed) if (mc and seed is not None) else "",
    }


FIELDS = ("x", "value", "method", "stderr", "n_samples", "seed")


def _write_curve(path: Path, rows: list[dict], fmt: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"meta": {"fields": list(FIELDS)}, "rows": rows}, fh, indent=1)
            fh.write("\n")


def _plan_dict(plan: SimulationPlan) -> dict:
    d = asdict(plan)
    d["quadrature"] = asdict(plan.quadrature)
    return d


def _write_meta(cfg: ExperimentConfig, curves: list[str], elapsed: float) -> None:
    meta = {
        "experiment": cfg.kind,
        "config": {
            "alpha": cfg.alpha,
            "snr_db": cfg.snr_db,
            "snr_linear": cfg.snr_linear,
            "L_list": list(cfg.L_list),
            "ratio_list": list(cfg.ratio_list),
            "upsilon_list": list(cfg.upsilon_list),
            "L_fixed": list(cfg.L_fixed),
            "L": cfg.L,
            "K": cfg.K,
            "layout": cfg.layout,
            "scheme": cfg.scheme,
            "method": cfg.method,
            "plan": _plan_dict(cfg.plan),
            "format": cfg.fmt,
        },
        "curves": curves,
        "versions": {
            "cellrate": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_clock_seconds": elapsed,
    }
    path = cfg.out_dir / f"{cfg.kind}_meta.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def _ratio_tag(r: float) -> str:
    return ("r%g" % r).replace(".", "p")


def _curves_figure2(cfg: ExperimentConfig):
    L = cfg.L or 100
    K = cfg.K or 50
    flat = mrt.rate_mrt_ca(L, K)
    yield "mrt_ca", [_row(k + 1, flat, None) for k in range(K)]
    rng = substream(cfg.plan.master_seed, STREAM_AUX, 0, 0)
    scenario = sample_scenario(L, K, Layout.DA, cfg.alpha, cfg.snr_linear, rng)
    profile = large_scale_profile(scenario)
    weights = mrt.interference_weights(profile.beta, rng=rng)
    rows = []
    for k in range(K):
        mu = mrt.sinr_mrt_da(profile, weights, k)
        try:
            est = mrt.rate_mrt_da(profile.beta[k], mu)
        except CellrateError:
            est = mrt.rate_mrt_da_mc(profile.beta[k], mu, rng)
        rows.append(_row(k + 1, est, cfg.plan.master_seed))
    yield "mrt_da", rows


def _curves_figure3(cfg: ExperimentConfig):
    ca, da = [], []
    for ups in cfg.upsilon_list:
        params = mrt.AsymptoticParams(upsilon=ups, alpha=cfg.alpha)
        ca.append(_row(ups, RateEstimate(mrt.asym_rate_mrt_ca(params), "asymptotic"), None))
        da.append(
            _row(ups, RateEstimate(mrt.asym_rate_ub_mrt_da(params), "asymptotic"), None)
        )
    yield "mrt_ca_asym", ca
    yield "mrt_da_ub_asym", da


def _sim_curve(cfg, L_values, ratio, layout, scheme):
    rows = []
    for L in L_values:
        K = max(2, round(L / ratio))
        est = average_user_rate(
            cfg.plan, L, K, layout, scheme, cfg.alpha, cfg.snr_linear,
            workers=cfg.workers,
        )
        rows.append(_row(L, est, cfg.plan.master_seed))
    return rows


def _curves_figure4(cfg: ExperimentConfig):
    for r in cfg.ratio_list:
        tag = _ratio_tag(r)
        yield f"mrt_ca_sim_{tag}", _sim_curve(cfg, cfg.L_list, r, Layout.CA, "MRT")
        yield f"mrt_da_sim_{tag}", _sim_curve(cfg, cfg.L_list, r, Layout.DA, "MRT")
        asym = RateEstimate(
            mrt.asym_rate_mrt_ca(mrt.AsymptoticParams(upsilon=r, alpha=cfg.alpha)),
            "asymptotic",
        )
        yield f"mrt_ca_asym_{tag}", [_row(L, asym, None) for L in cfg.L_list]


def _curves_figure6(cfg: ExperimentConfig):
    ratios = [r for r in cfg.ratio_list if r > 1.0] or [2.0, 5.0]
    ca = [
        _row(
            r,
            zfbf.avg_rate_zfbf_ca(round(1000 * r), 1000, cfg.snr_linear, cfg.alpha),
            None,
        )
        for r in ratios
    ]
    yield "zfbf_ca_avg", ca
    for L in cfg.L_fixed:
        rows = []
        for r in ratios:
            K = max(2, round(L / r))
            if K >= L:
                continue
            est = zfbf.avg_rate_lb_zfbf_da(
                L, K, cfg.snr_linear, cfg.alpha, cfg.plan.quadrature
            )
            rows.append(_row(L / K, est, None))
        yield f"zfbf_da_lb_L{L}", rows


def _curves_figure7(cfg: ExperimentConfig):
    for r in cfg.ratio_list:
        tag = _ratio_tag(r)
        feasible = [L for L in cfg.L_list if round(L / r) >= 2 and L > round(L / r)]
        cf_rows, lb_rows = [], []
        for L in feasible:
            K = round(L / r)
            cf_rows.append(
                _row(L, zfbf.avg_rate_zfbf_ca(L, K, cfg.snr_linear, cfg.alpha), None)
            )
            lb_rows.append(
                _row(
                    L,
                    zfbf.avg_rate_lb_zfbf_da(
                        L, K, cfg.snr_linear, cfg.alpha, cfg.plan.quadrature
                    ),
                    None,
                )
            )
        yield f"zfbf_ca_cf_{tag}", cf_rows
        yield f"zfbf_ca_sim_{tag}", _sim_curve(cfg, feasible, r, Layout.CA, "ZFBF")
        yield f"zfbf_da_lb_{tag}", lb_rows
        yield f"zfbf_da_sim_{tag}", _sim_curve(cfg, feasible, r, Layout.DA, "ZFBF")


def _curves_figure8(cfg: ExperimentConfig):
    K = cfg.K or 50
    L_values = [L for L in cfg.L_list if L >= K] or [K, 2 * K, 4 * K]
    for scheme in ("MRT", "ZFBF"):
        for layout in (Layout.CA, Layout.DA):
            rows = []
            for L in L_values:
                est = average_user_rate(
                    cfg.plan, L, K, layout, scheme, cfg.alpha, cfg.snr_linear,
                    workers=cfg.workers,
                )
                rows.append(_row(L, est, cfg.plan.master_seed))
            yield f"{scheme.lower()}_{layout.value}_sim", rows


def _curves_scenario(cfg: ExperimentConfig):
    if cfg.L is None or cfg.K is None:
        raise DomainError("scenario needs --L and --K")
    L, K = cfg.L, cfg.K
    layout = Layout(cfg.layout)
    scheme = cfg.scheme.upper()
    method = cfg.method or ("closed_form" if layout is Layout.CA else "monte_carlo")
    if method == "closed_form":
        if layout is not Layout.CA:
            raise DomainError("closed forms are available for the CA layout only")
        if scheme == "MRT":
            est = mrt.rate_mrt_ca(L, K)
        else:
            est = zfbf.avg_rate_zfbf_ca(L, K, cfg.snr_linear, cfg.alpha)
    elif method == "monte_carlo":
        est = average_user_rate(
            cfg.plan, L, K, layout, scheme, cfg.alpha, cfg.snr_linear,
            workers=cfg.workers,
        )
    else:
        raise DomainError(f"unknown scenario method {method!r}")
    yield f"{scheme.lower()}_{layout.value}", [_row(L, est, cfg.plan.master_seed)]


def _curves_sweep(cfg: ExperimentConfig):
    layouts = [Layout(s) for s in cfg.layout.split(",")]
    schemes = [s.upper() for s in cfg.scheme.split(",")]
    ratio = cfg.ratio_list[0]
    for scheme in schemes:
        for layout in layouts:
            tag = f"{scheme.lower()}_{layout.value}_{_ratio_tag(ratio)}"
            L_values = [
                L
                for L in cfg.L_list
                if round(L / ratio) >= 2 and (scheme != "ZFBF" or L >= round(L / ratio))
            ]
            yield tag, _sim_curve(cfg, L_values, ratio, layout, scheme)


_BUILDERS = {
    "figure2": _curves_figure2,
    "figure3": _curves_figure3,
    "figure4": _curves_figure4,
    "figure6": _curves_figure6,
    "figure7": _curves_figure7,
    "figure8": _curves_figure8,
    "scenario": _curves_scenario,
    "sweep": _curves_sweep,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute an experiment; returns the process exit code."""
    start = time.perf_counter()
    written: list[str] = []
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        for curve_id, rows in _BUILDERS[cfg.kind](cfg):
            ext = "csv" if cfg.fmt == "csv" else "json"
            path = cfg.out_dir / f"{cfg.kind}_{curve_id}.{ext}"
            _write_curve(path, rows, cfg.fmt)
            written.append(path.name)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_meta(cfg, written, time.perf_counter() - start)
        return 4 if written else 2
    except (CellrateError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_meta(cfg, written, time.perf_counter() - start)
        return 4 if written else 3
    _write_meta(cfg, written, time.perf_counter() - start)
    return 0


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _apply_config_file(cfg: ExperimentConfig, path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DomainError(f"cannot read config file {path}")
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    if "alpha" in exp:
        cfg.alpha = float(exp["alpha"])
    if "snr_db" in exp:
        cfg.snr_db = float(exp["snr_db"])
    if "format" in exp:
        cfg.fmt = exp["format"]
    if "out" in exp:
        cfg.out_dir = Path(exp["out"])
    grid = parser["grid"] if parser.has_section("grid") else {}
    if "l_list" in grid:
        cfg.L_list = _parse_int_list(grid["l_list"])
    if "ratio_list" in grid:
        cfg.ratio_list = _parse_float_list(grid["ratio_list"])
    if "upsilon_list" in grid:
        cfg.upsilon_list = _parse_float_list(grid["upsilon_list"])
    plan = parser["plan"] if parser.has_section("plan") else {}
    updates = {}
    for key in ("fading_draws", "user_realizations", "antenna_realizations", "master_seed"):
        if key in plan:
            updates[key] = int(plan[key])
    if updates:
        cfg.plan = replace(cfg.plan, **updates)
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellrate",
        description="Downlink multi-user rate experiments for CA/DA antenna layouts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment and write curve tables")
    runp.add_argument("experiment", choices=EXPERIMENTS)
    runp.add_argument("--config", help="INI file with [experiment]/[plan]/[grid] sections")
    runp.add_argument("--out", default="results", help="output directory")
    runp.add_argument("--format", choices=("csv", "json"), default="csv")
    runp.add_argument("--seed", type=int, default=0, help="master seed")
    runp.add_argument("--alpha", type=float, default=None, help="path-loss factor")
    runp.add_argument("--snr-db", type=float, default=None, help="P_t/N_0 in dB")
    runp.add_argument("--L-list", default=None, help="comma-separated antenna counts")
    runp.add_argument("--ratio-list", default=None, help="comma-separated L/K ratios")
    runp.add_argument("--upsilon-list", default=None, help="comma-separated ratio limits")
    runp.add_argument("--L-fixed", default=None, help="antenna counts for figure6 curves")
    runp.add_argument("--L", type=int, default=None)
    runp.add_argument("--K", type=int, default=None)
    runp.add_argument("--layout", default="ca", help="ca, da, or a comma list for sweep")
    runp.add_argument("--scheme", default="mrt", help="mrt, zfbf, or a comma list for sweep")
    runp.add_argument("--method", default=None, help="scenario: closed_form or monte_carlo")
    runp.add_argument("--workers", type=int, default=1)
    runp.add_argument("--fading-draws", type=int, default=None)
    runp.add_argument("--user-realizations", type=int, default=None)
    runp.add_argument("--antenna-realizations", type=int, default=None)
    runp.add_argument(
        "--paper-scale",
        action="store_true",
        help="use the full realization counts (500 user / 50 antenna / 2000 fading)",
    )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    cfg = ExperimentConfig(kind=args.experiment)
    try:
        if args.config:
            cfg = _apply_config_file(cfg, args.config)
        cfg.out_dir = Path(args.out)
        cfg.fmt = args.format
        if args.alpha is not None:
            cfg.alpha = args.alpha
        if args.snr_db is not None:
            cfg.snr_db = args.snr_db
        if args.L_list:
            cfg.L_list = _parse_int_list(args.L_list)
        if args.ratio_list:
            cfg.ratio_list = _parse_float_list(args.ratio_list)
        if args.upsilon_list:
            cfg.upsilon_list = _parse_float_list(args.upsilon_list)
        if args.L_fixed:
            cfg.L_fixed = _parse_int_list(args.L_fixed)
        cfg.L, cfg.K = args.L, args.K
        cfg.layout, cfg.scheme, cfg.method = args.layout, args.scheme, args.method
        cfg.workers = max(1, args.workers)
        plan_updates = {"master_seed": args.seed}
        if args.paper_scale:
            plan_updates.update(
                fading_draws=PAPER_FADING_DRAWS,
                user_realizations=PAPER_USER_REALIZATIONS,
                antenna_realizations=PAPER_ANTENNA_REALIZATIONS,
            )
        for key, val in (
            ("fading_draws", args.fading_draws),
            ("user_realizations", args.user_realizations),
            ("antenna_realizations", args.antenna_realizations),
        ):
            if val is not None:
                plan_updates[key] = val
        cfg.plan = replace(cfg.plan, **plan_updates)
        if cfg.alpha <= 2.0:
            raise DomainError("path-loss factor must exceed 2")
        if not cfg.L_list or (cfg.kind == "sweep" and not cfg.ratio_list):
            raise DomainError("empty parameter grid")
    except (DomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return run(cfg)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
