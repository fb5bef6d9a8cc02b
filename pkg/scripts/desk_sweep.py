"""Distance sweep of the SBRNN (eta = 12, 60) against PAM2/PAM4 MLSD (eta = 12).

Runs one system and distance at a time, rewriting the per-system CSV after every
distance so an interrupted run keeps its finished rows. Checkpoints and nu tables
are reused on restart. Finally writes the combined CSV and SVG plot.

    python3 scripts/desk_sweep.py [--config scripts/configs/desk_sweep.ini] [--systems sbrnn pam2_mlsd]
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from sbrnn_imdd.config import SYSTEMS, load_config
from sbrnn_imdd.harness import emit, run_distance
from sbrnn_imdd.persistence import ResultRow, read_csv, write_csv, write_svg

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "desk_sweep.ini"))
    ap.add_argument("--systems", nargs="+", default=["pam2_mlsd", "pam4_mlsd", "sbrnn"], choices=SYSTEMS)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    base = load_config(args.config)
    combined = []
    for system in args.systems:
        cfg = replace(base, system=system)
        rows = []
        for d in cfg.distances:
            rows.extend(run_distance(cfg, d))
            emit(cfg, rows)
        combined.extend(rows)
    out = Path(base.output_dir)
    # merge with rows of systems run in earlier invocations
    merged = {}
    summary = out / "sweep.csv"
    if summary.exists():
        for r in read_csv(summary):
            merged[(r.system, r.distance_km, r.eta, r.labeling, r.weights)] = r
    for r in combined:
        merged[(r.system, r.distance_km, r.eta, r.labeling, r.weights)] = r
    rows = sorted(merged.values(), key=ResultRow.sort_key)
    write_csv(summary, rows)
    write_svg(out / "sweep.svg", rows, base.hd_fec_threshold)
    print(f"wrote {summary} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
