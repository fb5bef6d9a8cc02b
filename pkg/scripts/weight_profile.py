"""Combining-weight profile and BLER gain of weight optimization versus distance.

Reads a sweep CSV (default: results/desk/sweep.csv) and, for every distance and
window of the SBRNN, prints BLER with uniform and optimized weights, their
difference, and the optimized weight vector a^(0..W-1). Also writes the table
as CSV next to the input.

    python3 scripts/weight_profile.py [sweep.csv]
"""

import csv
import sys
from pathlib import Path

import numpy as np

from sbrnn_imdd.persistence import read_csv

ROOT = Path(__file__).resolve().parent.parent


def profile(rows):
    groups = {}
    for r in rows:
        if r.system == "sbrnn" and r.labeling == "tabu":
            groups.setdefault((r.memory, r.distance_km), {})[r.weights] = r
    out = []
    for (W, d), g in sorted(groups.items()):
        a = np.array([float(x) for x in g["optimized"].weight_vector.split()])
        out.append({"window": W, "distance_km": d,
                    "bler_uniform": g["uniform"].bler, "bler_optimized": g["optimized"].bler,
                    "delta_bler": g["uniform"].bler - g["optimized"].bler,
                    "peak_index": int(np.argmax(a)),
                    "weights": " ".join(f"{x:.4f}" for x in a)})
    return out


def main():
    src = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "results" / "desk" / "sweep.csv"
    table = profile(read_csv(src))
    dst = src.with_name("weight_profile.csv")
    with open(dst, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(table)
    for t in table:
        print(f"W={t['window']:2d} {t['distance_km']:5g} km  BLER {t['bler_uniform']:.3e} -> "
              f"{t['bler_optimized']:.3e} (gain {t['delta_bler']:+.2e})  peak a^({t['peak_index']})  "
              f"a = [{t['weights']}]")
    print(dst)


if __name__ == "__main__":
    main()
