#!/usr/bin/env python3
"""Print median +- IQR/2 tables (final and RMS errors) from sweep aggregate CSVs.

Pass the ``*_agg.csv`` files written by ``rcmstab bench`` or ``run_desk_sweep.py``.
"""

import argparse
from collections import defaultdict

from rcmstab.bench.sweep import read_aggregates

COLUMNS = [
    ("final_pos_mm", "final pos (mm)"),
    ("final_ori_deg", "final ori (deg)"),
    ("rms_pos_mm", "rms pos (mm)"),
    ("rms_ori_deg", "rms ori (deg)"),
]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("agg_csv", nargs="+")
    args = p.parse_args()

    table = defaultdict(dict)
    levels = set()
    for path in args.agg_csv:
        for row in read_aggregates(path):
            lv = float(row["level_pct"])
            levels.add(lv)
            table[(row["chain"], row["controller"])][lv] = row
    levels = sorted(levels)
    for (chain, ctrl), by_level in sorted(table.items()):
        print(f"\n{ctrl} / {chain}")
        print(f"{'metric':18s}" + "".join(f"{lv:>16.1f}%" for lv in levels))
        for key, name in COLUMNS:
            cells = []
            for lv in levels:
                r = by_level.get(lv)
                cells.append(f"{float(r['median_' + key]):.1f}+-{float(r['iqr2_' + key]):.1f}" if r else "-")
            print(f"{name:18s}" + "".join(f"{c:>17s}" for c in cells))
        print(f"{'converged':18s}" + "".join(
            f"{float(by_level[lv]['converged_rate']):>17.2f}" if lv in by_level else f"{'-':>17s}" for lv in levels
        ))


if __name__ == "__main__":
    main()
