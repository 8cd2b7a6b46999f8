#!/usr/bin/env python3
"""Desk-scale error sweep for both chain modes and all controllers.

Writes ``<out>/sweep_<mode>.csv`` plus the ``_agg`` and ``_bias`` sidecars.
"""

import argparse
import logging
import time
from pathlib import Path

from rcmstab.bench.config import DESK_LEVELS, EpisodeConfig, SweepConfig
from rcmstab.bench.sweep import run_sweep, sidecar_paths, write_aggregates, write_biases, write_rollouts


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--trajectories", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", nargs="+", default=["oov", "full"], choices=["oov", "full"])
    p.add_argument("--full-scale", action="store_true", help="51 levels x 50 trajectories")
    p.add_argument("--include-s", action="store_true", help="keep the S factor in the rr law")
    args = p.parse_args()
    logging.basicConfig(level=logging.ERROR)

    levels = SweepConfig.even_levels(51) if args.full_scale else DESK_LEVELS
    trajectories = 50 if args.full_scale else args.trajectories
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ep = EpisodeConfig(rr_include_s=args.include_s)
    for mode in args.modes:
        sweep = SweepConfig(levels=levels, trajectories=trajectories, chain_mode=mode, seed=args.seed)
        t0 = time.perf_counter()
        rows, aggs = run_sweep(sweep, ep)
        path = out / f"sweep_{mode}.csv"
        agg_path, bias_path = sidecar_paths(path)
        write_rollouts(path, rows)
        write_aggregates(agg_path, aggs)
        write_biases(bias_path, rows)
        print(f"{mode}: {len(rows)} rollouts in {time.perf_counter() - t0:.1f} s -> {path}")


if __name__ == "__main__":
    main()
