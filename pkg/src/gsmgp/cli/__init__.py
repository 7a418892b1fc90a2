"""``gsmgp`` command line: fit, predict, bench, approx, ranks, synth.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 every run failed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from ..gp import mse, posterior
from ..kernels import SubKernelGrid, generate_grids
from ..optim.problem import LmkProblem
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import (
    ExperimentReport, RunResult, approx_bench, build_factors, initial_model, rank_report, run_experiment,
    run_single, series_from_config, solve, synth_series, write_results, write_timing,
)
from .io import DataError, format_float, load_model, load_series, save_model, write_series
from .plot import render_svg, write_predictions

__all__ = [
    "main", "ExperimentConfig", "ExperimentReport", "RunResult", "ConfigError", "DataError",
    "parse_config", "load_config", "run_experiment", "run_single", "synth_series", "load_series",
    "save_model", "load_model", "rank_report", "approx_bench", "write_results",
]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ALL_FAILED = 0, 1, 2, 3

log = logging.getLogger("gsmgp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (overrides base_seed)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="gsmgp", description="GP regression with grid spectral mixture kernels", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("fit", parents=[common], help="seeded Monte-Carlo fit and prediction")
    pr = sub.add_parser("predict", parents=[common], help="predict the test segment with a saved model")
    pr.add_argument("--model", required=True)
    sub.add_parser("bench", parents=[common], help="compare MM, ADMM and gradient projection")
    sub.add_parser("approx", parents=[common], help="RAE versus storage for Nystrom and RFF")
    rk = sub.add_parser("ranks", parents=[common], help="numeric rank statistics of the sub-kernels")
    rk.add_argument("--n", type=int, default=None)
    sub.add_parser("synth", parents=[common], help="write a synthetic series CSV")
    return p


def _outdir(args):
    out = getattr(args, "out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_fit(cfg, out):
    series = series_from_config(cfg)
    report = run_experiment(cfg, series)
    write_results(os.path.join(out, "results.csv"), report, cfg.record_wall_time)
    write_timing(os.path.join(out, "timing.csv"), report)
    model_dir = os.path.join(out, "models")
    os.makedirs(model_dir, exist_ok=True)
    for r in report.runs:
        if r.model is not None:
            save_model(os.path.join(model_dir, f"run_{r.run:03d}.txt"), r.model)
    best = next((r for r in report.runs if not r.failed), None)
    if best is not None:
        pred_csv = os.path.join(out, "predictions.csv")
        write_predictions(pred_csv, series, posterior(series, best.model))
        if cfg.plot:
            render_svg(pred_csv, os.path.join(out, "plot.svg"))
    print(f"runs={len(report.runs)} pfr={report.pfr:.3f} mean_mse={format_float(report.mean_mse)}")
    return EXIT_ALL_FAILED if report.all_failed else EXIT_OK


def _cmd_predict(cfg, out, model_path):
    series = series_from_config(cfg)
    model = load_model(model_path)
    pred = posterior(series, model)
    pred_csv = os.path.join(out, "predictions.csv")
    write_predictions(pred_csv, series, pred)
    if cfg.plot:
        render_svg(pred_csv, os.path.join(out, "plot.svg"))
    print(f"mse={format_float(mse(pred.mean, series.y_test))}")
    return EXIT_OK


def _cmd_bench(cfg, out):
    import dataclasses

    series = series_from_config(cfg)
    y = series.y_train
    seed = cfg.base_seed
    grids = generate_grids(cfg.grid_spec(seed=seed))
    factors = build_factors(cfg, series.n_train, grids, seed)
    problem = LmkProblem(y, factors)
    model0 = initial_model(cfg, y, grids, np.random.default_rng(seed))
    lines = ["solver,nll,iters,nnz,mse,termination"]
    for name in ("mm", "admm", "gradproj"):
        run_cfg = dataclasses.replace(cfg, solver=name)
        model, report = solve(run_cfg, y, factors, model0, problem=problem)
        err = mse(posterior(series, model).mean, series.y_test)
        lines.append(f"{name},{format_float(report.final_objective)},{report.iterations},"
                     f"{report.nnz_alpha},{format_float(err)},{report.termination}")
    with open(os.path.join(out, "bench.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_approx(cfg, out):
    grid = SubKernelGrid(cfg.approx_mu, cfg.approx_sigma)
    rows = approx_bench(cfg.approx_n, grid, cfg.nystrom_budgets, cfg.rff_budgets, cfg.approx_seeds)
    lines = ["method,param,storage,rae"] + [f"{m},{p},{s},{format_float(e)}" for m, p, s, e in rows]
    with open(os.path.join(out, "approx.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_ranks(cfg, out, n):
    n = n or cfg.ranks_n
    hi, lo, mean = rank_report(n, generate_grids(cfg.grid_spec(seed=cfg.base_seed)))
    text = f"n,max_rank,min_rank,mean_rank\n{n},{hi},{lo},{mean:.2f}\n"
    with open(os.path.join(out, "ranks.csv"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def _cmd_synth(cfg, out):
    series = synth_series(cfg.synth_freqs, cfg.synth_weights, cfg.synth_sigma, cfg.synth_noise_var,
                          cfg.synth_n, cfg.synth_n_star, cfg.synth_seed)
    path = os.path.join(out, "series.csv")
    write_series(path, series)
    print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"base_seed": args.seed} if hasattr(args, "seed") else {}
    try:
        cfg = load_config(getattr(args, "config", None), overrides)
        out = _outdir(args)
        if args.command == "fit":
            return _cmd_fit(cfg, out)
        if args.command == "predict":
            return _cmd_predict(cfg, out, args.model)
        if args.command == "bench":
            return _cmd_bench(cfg, out)
        if args.command == "approx":
            return _cmd_approx(cfg, out)
        if args.command == "ranks":
            return _cmd_ranks(cfg, out, args.n)
        return _cmd_synth(cfg, out)
    except ConfigError as exc:
        print(f"gsmgp: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"gsmgp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"gsmgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
