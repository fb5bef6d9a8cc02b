"""Command line entry point: ``sbrnn-imdd <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .complexity import crossover_window, flops_mlsd, flops_sbrnn_rx, flops_sbrnn_tx
from .config import ExperimentConfig, derive_seed, dump_config, load_config
from .errors import ConfigurationError, TrainingDivergence
from .harness import (checkpoint_path, emit, obtain_model, output_stem, representative_fit, run_sweep,
                      sbrnn_rows, train_model)
from .labeling import BitLabeling, expected_ber, tabu_search
from .persistence import load_checkpoint, read_csv, rows_to_csv, save_checkpoint, save_labeling, write_svg


def _config(args) -> ExperimentConfig:
    path = getattr(args, "config", None)
    cfg = load_config(path) if path else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        changes["output_dir"] = args.out
    if getattr(args, "system", None):
        changes["system"] = args.system
    if getattr(args, "distances", None):
        changes["distances"] = tuple(args.distances)
    if getattr(args, "train", False):
        changes["train_missing"] = True
    return replace(cfg, **changes)


def _distance(cfg, args) -> float:
    if args.distance is not None:
        return float(args.distance)
    if len(cfg.distances) == 1:
        return float(cfg.distances[0])
    raise ConfigurationError("give --distance (or exactly one distance in the config)")


def cmd_train(cfg, args):
    d = _distance(cfg, args)
    path = Path(args.checkpoint) if args.checkpoint else checkpoint_path(cfg, d)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = train_model(cfg, d, trace_path=path.with_suffix(".trace.csv"))
    save_checkpoint(path, params)
    print(path)


def _model(cfg, args, d):
    return load_checkpoint(args.checkpoint) if args.checkpoint else obtain_model(cfg, d)


def cmd_eval(cfg, args):
    d = _distance(cfg, args)
    rows = sbrnn_rows(_model(cfg, args, d), replace(cfg, system="sbrnn"), d)
    sys.stdout.write(rows_to_csv(rows))


def cmd_sweep(cfg, args):
    rows = run_sweep(cfg)
    for path in emit(cfg, rows, ("csv", "svg") if rows and args.plot else ("csv",)):
        print(path)


def cmd_optimize_weights(cfg, args):
    d = _distance(cfg, args)
    for fit in representative_fit(_model(cfg, args, d), cfg, d):
        weights = " ".join(f"{x:.6f}" for x in fit.weights)
        print(f"W={fit.window} xent uniform={fit.xent_uniform!r} optimized={fit.xent_optimized!r} a=[{weights}]")


def cmd_optimize_labeling(cfg, args):
    d = _distance(cfg, args)
    params = _model(cfg, args, d)
    M = cfg.dims.M
    for fit in representative_fit(params, cfg, d):
        if args.window is not None and fit.window != args.window:
            continue
        rng = np.random.default_rng(derive_seed(cfg.seed, 4, d, fit.window))
        res = tabu_search(fit.confusion, cfg.labeling.tabu_iters, cfg.labeling.tabu_list, rng)
        gray = expected_ber(BitLabeling.gray(M), fit.confusion)
        print(f"W={fit.window} expected BER start={res.start_cost!r} tabu={res.cost!r} gray={gray!r}")
        out = output_stem(cfg)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"labeling_{d:g}km_W{fit.window}.txt"
        save_labeling(path, res.labeling)
        print(path)


def cmd_mlsd(cfg, args):
    if cfg.system == "sbrnn":
        cfg = replace(cfg, system="pam2_mlsd")
    if args.mu is not None:
        cfg = replace(cfg, mlsd=replace(cfg.mlsd, **{"pam4_mu" if cfg.system == "pam4_mlsd" else "mu": args.mu}))
    if args.distance is not None:
        cfg = replace(cfg, distances=(float(args.distance),))
    rows = run_sweep(cfg)
    sys.stdout.write(rows_to_csv(rows))
    emit(cfg, rows)


def cmd_flops(cfg, args):
    M, n = cfg.dims.M, cfg.dims.n
    print(f"sbrnn tx M={M} n={n}: {flops_sbrnn_tx(M, n)!r}")
    for W in cfg.estimator.windows:
        print(f"sbrnn rx W={W} (eta={W * cfg.dims.bits}): {flops_sbrnn_rx(M, n, W)!r}")
    for order, mu in ((2, cfg.mlsd.mu), (4, cfg.mlsd.pam4_mu)):
        print(f"pam{order} mlsd mu={mu}: {flops_mlsd(order, mu, cfg.mlsd.sps)!r}")
    for order in (2, 4):
        eta = crossover_window(M, n, order)
        print(f"sbrnn rx cheaper than pam{order} mlsd from eta = {eta}")


def cmd_plot(cfg, args):
    rows = []
    for path in args.csv:
        rows.extend(read_csv(path))
    out = Path(args.output) if args.output else Path(cfg.output_dir) / f"plot_{cfg.hash()}.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_svg(out, rows, cfg.hd_fec_threshold if args.hd_fec is None else args.hd_fec)
    print(out)


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="experiment config file (INI-style sections)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="experiment seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="sbrnn-imdd", parents=[common],
                                 description="SBRNN autoencoder and MLSD baselines for IM/DD links")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--distance", type=float)
        p.add_argument("--checkpoint", help="checkpoint file (default: derived from the config)")
        p.add_argument("--train", action="store_true", help="train when no checkpoint exists")

    p = sub.add_parser("train", parents=[common], help="train the transceiver at one distance")
    p.add_argument("--distance", type=float)
    p.add_argument("--checkpoint", help="where to write the checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="test-set BLER/BER of a trained model (CSV to stdout)")
    model_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="run the configured distance sweep")
    p.add_argument("--system", choices=["sbrnn", "pam2_mlsd", "pam4_mlsd"])
    p.add_argument("--distances", type=float, nargs="+")
    p.add_argument("--train", action="store_true", help="train missing checkpoints")
    p.add_argument("--plot", action="store_true", help="also write the SVG plot")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize-weights", parents=[common], help="fit sliding-window combining weights")
    model_args(p)
    p.set_defaults(func=cmd_optimize_weights)

    p = sub.add_parser("optimize-labeling", parents=[common], help="tabu search for the bit labeling")
    model_args(p)
    p.add_argument("--window", type=int)
    p.set_defaults(func=cmd_optimize_labeling)

    p = sub.add_parser("mlsd", parents=[common], help="PAM + Viterbi baseline")
    p.add_argument("--system", choices=["pam2_mlsd", "pam4_mlsd"])
    p.add_argument("--distance", type=float)
    p.add_argument("--mu", type=int)
    p.set_defaults(func=cmd_mlsd)

    p = sub.add_parser("flops", parents=[common], help="FLOPS per decoded bit")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("plot", parents=[common], help="log-BER vs distance SVG from result CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--output")
    p.add_argument("--hd-fec", type=float)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    p.set_defaults(func=lambda cfg, args: sys.stdout.write(dump_config(cfg)))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(_config(args), args)
    except (ConfigurationError, TrainingDivergence, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
