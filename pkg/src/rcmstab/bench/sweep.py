"""Error-sweep harness and CSV output.

Every rollout draws from its own RNG streams so results do not depend on
scheduling: the episode joint fractions come from ``(seed, traj_id)`` and the
bias signs from ``(seed, level, traj_id)``. Controllers at the same level and
trajectory therefore see the same episode and the same bias.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..chain import N_OOV, ChainModel
from ..errmodel import ErrorState
from .config import EpisodeConfig, RunConfig, SweepConfig
from .engine import Episode, admissible_box, run_rollout, sample_episode

ROLLOUT_HEADER = (
    "controller,chain,level_pct,traj_id,seed,converged,"
    "final_pos_mm,final_ori_deg,rms_pos_mm,rms_ori_deg,iters"
).split(",")
METRICS = ("final_pos_mm", "final_ori_deg", "rms_pos_mm", "rms_ori_deg", "iters")
AGG_HEADER = (
    ["controller", "chain", "level_pct", "n", "converged_rate", "ik_flag_rate"]
    + [f"{p}_{m}" for m in METRICS for p in ("median", "iqr2")]
)
BIAS_HEADER = ["controller", "chain", "level_pct", "traj_id", "e1_deg", "e2_deg", "e3_m", "e4_deg"]


def level_key(fraction: float) -> int:
    """Integer key for a level fraction (ppm) used to seed sign draws."""
    return int(round(fraction * 1_000_000))


def bias_signs(seed: int, fraction: float, traj_id: int) -> np.ndarray:
    rng = np.random.default_rng([seed, level_key(fraction), traj_id, 1])
    return rng.choice([-1.0, 1.0], size=N_OOV)


def episode_for(chain: ChainModel, seed: int, traj_id: int, box: np.ndarray) -> Episode:
    return sample_episode(chain, [seed, traj_id], box)


@dataclass(frozen=True)
class Job:
    controller: str
    chain_mode: str
    fraction: float
    traj_id: int
    seed: int


@dataclass
class RolloutRow:
    controller: str
    chain: str
    level: float
    traj_id: int
    seed: int
    converged: bool
    final_pos_mm: float
    final_ori_deg: float
    rms_pos_mm: float
    rms_ori_deg: float
    iters: int
    bias: tuple
    ik_failures: int = 0
    diverged: bool = False


@dataclass
class AggregateRow:
    controller: str
    chain: str
    level: float
    n: int
    converged_rate: float
    ik_flag_rate: float
    medians: dict
    iqr2: dict


def _run_job(args) -> RolloutRow:
    job, chain, sweep, ep_cfg = args
    err = ErrorState.from_level(
        job.fraction, bias_signs(job.seed, job.fraction, job.traj_id), sweep.e_max
    )
    box = admissible_box(chain, err.bias)
    episode = episode_for(chain, job.seed, job.traj_id, box)
    rec = run_rollout(job.controller, job.chain_mode, chain, err, ep_cfg, episode, box)
    s = rec.summary
    return RolloutRow(
        job.controller, job.chain_mode, job.fraction, job.traj_id, job.seed,
        rec.converged, s["final_pos_mm"], s["final_ori_deg"], s["rms_pos_mm"],
        s["rms_ori_deg"], s["iters"], tuple(float(x) for x in err.bias),
        rec.ik_failures, rec.diverged,
    )


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("RCMSTAB_THREADS", "1")))
    except ValueError:
        return 1


def run_rollouts(sweep: SweepConfig, ep_cfg: EpisodeConfig, chain: ChainModel) -> list[RolloutRow]:
    jobs = [
        Job(c, sweep.chain_mode, f, t, sweep.seed)
        for f in sweep.levels
        for c in sweep.controllers
        for t in range(sweep.trajectories)
    ]
    args = [(j, chain, sweep, ep_cfg) for j in jobs]
    workers = min(thread_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_job, args, chunksize=4))
    return [_run_job(a) for a in args]


def _iqr2(x: np.ndarray) -> float:
    q25, q75 = np.percentile(x, [25.0, 75.0])
    return 0.5 * float(q75 - q25)


def aggregate(rows: Iterable[RolloutRow]) -> list[AggregateRow]:
    """Median and half-IQR of each metric per (controller, chain, level)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.controller, r.chain, r.level), []).append(r)
    out = []
    for (ctrl, chain, level), rs in groups.items():
        med, iqr = {}, {}
        for m in METRICS:
            x = np.array([getattr(r, m) for r in rs], dtype=float)
            med[m] = float(np.median(x))
            iqr[m] = _iqr2(x)
        out.append(
            AggregateRow(
                ctrl, chain, level, len(rs),
                float(np.mean([r.converged for r in rs])),
                float(np.mean([r.ik_failures > 0 for r in rs])),
                med, iqr,
            )
        )
    return out


def run_sweep(sweep: SweepConfig, ep_cfg: EpisodeConfig, chain: Optional[ChainModel] = None):
    """Run every (level, controller, trajectory) rollout; return ``(rows, aggregates)``."""
    if chain is None:
        chain = RunConfig(ep_cfg, sweep).chain_model()
    rows = run_rollouts(sweep, ep_cfg, chain)
    return rows, aggregate(rows)


def _f(x: float) -> str:
    return f"{x:.6f}"


def _pct(fraction: float) -> str:
    return f"{100.0 * fraction:.3f}"


def write_rollouts(path, rows: list[RolloutRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROLLOUT_HEADER)
        for r in rows:
            w.writerow([
                r.controller, r.chain, _pct(r.level), r.traj_id, r.seed, int(r.converged),
                _f(r.final_pos_mm), _f(r.final_ori_deg), _f(r.rms_pos_mm), _f(r.rms_ori_deg),
                r.iters,
            ])


def write_aggregates(path, aggs: list[AggregateRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for a in aggs:
            row = [a.controller, a.chain, _pct(a.level), a.n, _f(a.converged_rate), _f(a.ik_flag_rate)]
            for m in METRICS:
                row += [_f(a.medians[m]), _f(a.iqr2[m])]
            w.writerow(row)


def write_biases(path, rows: list[RolloutRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BIAS_HEADER)
        for r in rows:
            b = r.bias
            w.writerow([
                r.controller, r.chain, _pct(r.level), r.traj_id,
                _f(math.degrees(b[0])), _f(math.degrees(b[1])), _f(b[2]), _f(math.degrees(b[3])),
            ])


def sidecar_paths(out) -> tuple[Path, Path]:
    out = Path(out)
    return out.with_name(out.stem + "_agg.csv"), out.with_name(out.stem + "_bias.csv")


def read_aggregates(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
