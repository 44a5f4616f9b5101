"""
Command-line interface: ``arpvol <command> ...``.

Every command writes CSV output plus a JSON manifest and exits with status 0
only when it finished without error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io
from .evaluation import mspe, norms
from .poet import poet, psd_project
from .robust import estimate_volatility
from .simulate import SimConfig, simulate
from .sync import load_ticks, parse_time_unit, previous_tick_sync, refresh_time_sync, write_ticks

log = logging.getLogger("arpvol")


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _manifest(args, outputs, extra=None) -> dict:
    m = {
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k not in ("func", "command")},
        "seed": args.seed,
        "version": _version(),
        "outputs": [str(o) for o in outputs],
        "status": "ok",
    }
    m.update(extra or {})
    return m


def _load(args):
    return load_ticks(args.ticks, parse_time_unit(args.time_unit), strict=args.strict)


def _sim_config(args, **kw) -> SimConfig:
    return SimConfig(p=args.p, r=args.r, n_all=kw.pop("n_all", args.n_all), tail_mode=kw.pop("tail_mode", args.tail_mode),
                     seed=args.seed, **kw)


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = simulate(_sim_config(args))
    write_ticks(truth.ticks, out / "ticks.csv")
    io.write_matrix(truth.gamma_true, out / "gamma_true.csv")
    io.write_json(_manifest(args, [out / "ticks.csv", out / "gamma_true.csv"],
                            {"config": truth.cfg.to_dict(), "diagnostics": truth.diagnostics,
                             "degrees_of_freedom": truth.df}), out / "manifest.json")


def cmd_sync(args):
    series = _load(args)
    if args.scheme == "refresh":
        grid = refresh_time_sync(series, args.selection)
    else:
        grid = previous_tick_sync(series, np.linspace(0.0, 1.0, args.grid_size + 1))
    grid.to_csv(args.out)
    io.write_json(_manifest(args, [args.out], {"n": grid.n, "p": grid.p, "asset_ids": list(grid.asset_ids)}),
                  io.sidecar_path(args.out))


def cmd_estimate(args):
    grid = refresh_time_sync(_load(args))
    est = estimate_volatility(grid, args.method, c=args.c, c1=args.c1, c2=args.c2, c_k=args.kernel_ck,
                              p_for_log=args.log_p)
    io.write_matrix(est.gamma_hat, args.out)
    iu = np.triu_indices(grid.p)
    a = est.alpha_ij[iu]
    meta = {
        "method": est.method, "K": est.K, "n": est.n, "c": args.c, "c1": args.c1, "c2": args.c2,
        "asset_ids": list(grid.asset_ids), **io.matrix_summary(est.gamma_hat),
    }
    if np.isfinite(a).any():
        meta["alpha_quantiles"] = dict(zip(("min", "q25", "median", "q75", "max"),
                                           np.quantile(a[np.isfinite(a)], [0, 0.25, 0.5, 0.75, 1]).tolist()))
    io.write_json(_manifest(args, [args.out], meta), io.sidecar_path(args.out))


def _asset_ids_for(path, p):
    side = io.sidecar_path(path)
    if side.exists():
        ids = json.loads(side.read_text()).get("asset_ids")
        if ids is not None and len(ids) == p:
            return ids
    return None


def cmd_poet(args):
    G = io.read_matrix(args.matrix)
    meta = {}
    if args.oracle_truth:
        truth = io.read_matrix(args.oracle_truth)
        if truth.shape != G.shape:
            raise ValueError(f"dimension mismatch: {G.shape} vs truth {truth.shape}")
        out, varpi = ex.oracle_poet(G, truth, args.rank, psd_mode=args.psd_mode)
        meta.update(scheme="hard", varpi_n=varpi)
    else:
        Gp = psd_project(G, args.psd_mode)
        if args.sector:
            sectors = io.read_sectors(args.sector, _asset_ids_for(args.matrix, G.shape[0]))
            if sectors.size != G.shape[0]:
                raise ValueError(f"sector file covers {sectors.size} assets, matrix has {G.shape[0]}")
            dec = poet(Gp, args.rank, scheme="sector", sectors=sectors)
        else:
            dec = poet(Gp, args.rank, args.varpi, args.scheme)
        out = psd_project(dec.gamma_poet, args.psd_mode)
        meta.update(scheme=dec.scheme, varpi_n=None if args.sector else dec.varpi_n)
    io.write_matrix(out, args.out)
    meta.update(r=args.rank, psd_mode=args.psd_mode, **io.matrix_summary(out))
    io.write_json(_manifest(args, [args.out], meta), io.sidecar_path(args.out))


def cmd_eval(args):
    if args.norms:
        est, truth = (io.read_matrix(p) for p in args.norms)
        rows = [norms(est, truth).as_dict()]
    elif args.mspe:
        mats = [io.read_matrix(p) for p in args.mspe]
        rows = [{"matrices": len(mats), "mspe": mspe(mats)}]
    else:
        mats = [io.read_matrix(p) for p in args.portfolio]
        rows = ex.experiment_portfolio(mats, io.read_returns(args.returns), args.c0)
    io.write_rows(rows, args.out)
    io.write_json(_manifest(args, [args.out]), io.sidecar_path(args.out))


def _experiment(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = tuple(args.methods)
    written = []
    if args.paper_table == 1:
        rows = ex.tail_index_table(p=args.p, n_alls=args.n_all_grid, reps=args.reps, seed=args.seed)
        io.write_rows(rows, out / "tail_index_mse.csv", ["tail_mode", "n_all", "mse"])
        written.append(out / "tail_index_mse.csv")
    elif args.paper_figure in (2, 3):
        metrics = ("frobenius", "relative_frobenius", "spectral", "max") if args.paper_figure == 2 else ("inverse_spectral",)
        rows, per_rep = [], []
        for n_all in args.n_all_grid:
            res = ex.experiment_simulation(_sim_config(args, n_all=n_all), methods, args.reps, args.c, args.jobs)
            for r in ex.summarize_simulation(res, metrics):
                rows.append({"n_all": n_all, **r})
            for k, r in enumerate(res):
                for m, rep in r["methods"].items():
                    per_rep.append({"n_all": n_all, "rep": k, "method": m, **{key: rep[key] for key in metrics}})
        io.write_rows(rows, out / "summary.csv", ["n_all", "method", "metric", "mean", "median"])
        io.write_rows(per_rep, out / "replications.csv", ["n_all", "rep", "method", *metrics])
        written += [out / "summary.csv", out / "replications.csv"]
    else:
        cfg = _sim_config(args, n_all=args.n_all_grid[0])
        mats, rets = ex.simulated_portfolio_panel(cfg, args.days, methods, args.c, args.sector_size)
        if args.paper_table == 2:
            rows = [{"method": m, "mspe": mspe(mats[m])} for m in methods]
            io.write_rows(rows, out / "mspe.csv", ["method", "mspe"])
            written.append(out / "mspe.csv")
        else:
            rows = []
            for m in methods:
                for r in ex.experiment_portfolio(mats[m], rets, args.c0):
                    rows.append({"method": m, **r})
            io.write_rows(rows, out / "portfolio_risk.csv", ["method", "day", "c0", "risk", "gross_exposure"])
            written.append(out / "portfolio_risk.csv")
    return written


def cmd_experiment(args):
    t0 = time.perf_counter()
    written = _experiment(args)
    io.write_json(_manifest(args, written, {"seconds": time.perf_counter() - t0}), Path(args.out) / "manifest.json")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="arpvol", description="Robust integrated volatility matrices from high-frequency ticks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    def tick_input(p):
        p.add_argument("ticks", help="CSV with header asset_id,time,log_price")
        p.add_argument("--time-unit", default="fraction", help="'fraction' or 'seconds:<start>:<end>'")
        p.add_argument("--strict", action="store_true", help="reject duplicate timestamps")

    def sim_args(p, n_all=1000):
        p.add_argument("--p", type=int, default=50)
        p.add_argument("--r", type=int, default=3)
        p.add_argument("--n-all", type=int, default=n_all)
        p.add_argument("--tail-mode", choices=("hetero", "homo", "gauss"), default="hetero")

    p = add("simulate", cmd_simulate, "simulate one day of ticks and its true volatility matrix")
    sim_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = add("sync", cmd_sync, "synchronize ticks")
    tick_input(p)
    p.add_argument("--scheme", choices=("refresh", "previous"), default="refresh")
    p.add_argument("--selection", choices=("last", "first"), default="last")
    p.add_argument("--grid-size", type=int, default=390, help="intervals for previous-tick sampling")
    p.add_argument("--out", required=True)

    p = add("estimate", cmd_estimate, "estimate the integrated volatility matrix")
    tick_input(p)
    p.add_argument("--method", choices=("arp", "urp", "prvm"), default="arp")
    p.add_argument("--c", type=float, default=0.2)
    p.add_argument("--c1", type=float, default=5.0)
    p.add_argument("--c2", type=float, default=2.0)
    p.add_argument("--kernel-ck", type=float, default=1.0)
    p.add_argument("--log-p", type=float, default=None, help="value of p inside log(p); default: number of assets")
    p.add_argument("--out", required=True)

    p = add("poet", cmd_poet, "low-rank plus sparse regularization")
    p.add_argument("matrix")
    p.add_argument("--rank", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--varpi", type=float)
    g.add_argument("--sector", help="CSV with header asset_id,sector_id")
    g.add_argument("--oracle-truth", help="true matrix; picks varpi minimizing Frobenius error")
    p.add_argument("--scheme", choices=("hard", "soft"), default="hard")
    p.add_argument("--psd-mode", choices=("spectral_shift", "frobenius_clip"), default="spectral_shift")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "error norms, MSPE or portfolio risk")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--norms", nargs=2, metavar=("EST", "TRUTH"))
    g.add_argument("--mspe", nargs="+", metavar="MATRIX")
    g.add_argument("--portfolio", nargs="+", metavar="MATRIX", help="one matrix per day")
    p.add_argument("--returns", help="CSV day,interval,asset_id,return (with --portfolio)")
    p.add_argument("--c0", type=float, nargs="+", default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--out", required=True)

    p = add("experiment", cmd_experiment, "desk-scale simulation experiments")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--paper-table", type=int, choices=(1, 2))
    g.add_argument("--paper-figure", type=int, choices=(2, 3, 7))
    sim_args(p)
    p.add_argument("--n-all-grid", type=int, nargs="+", default=[1000, 2000, 4000])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--sector-size", type=int, default=10)
    p.add_argument("--methods", nargs="+", choices=("arp", "urp", "prvm"), default=["arp", "urp", "prvm"])
    p.add_argument("--c", type=float, default=0.2)
    p.add_argument("--c0", type=float, nargs="+", default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval" and args.portfolio and not args.returns:
        ap.error("--portfolio needs --returns")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"arpvol {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
