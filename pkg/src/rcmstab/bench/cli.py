"""Command-line entry point: ``bench``, ``rollout``, ``tau`` and ``validate``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from typing import Optional, Sequence

import numpy as np

from ..chain import DEFAULT_OOV_LIMITS
from ..errmodel import ErrorState
from ..stability import derive_tau, lyapunov_trace
from .config import (
    CHAIN_MODES,
    CONTROLLERS,
    ConfigError,
    RunConfig,
    SweepConfig,
    load_config,
    with_overrides,
)
from .engine import admissible_box, run_rollout
from .sweep import (
    bias_signs,
    episode_for,
    run_sweep,
    sidecar_paths,
    write_aggregates,
    write_biases,
    write_rollouts,
)

def _parse_levels(text: Optional[str]):
    """``N`` -> ``(i-1)/(N-1)`` for i=1..N; ``a,b,c`` -> percentages."""
    if text is None:
        return None
    text = text.strip()
    if "," not in text:
        try:
            count = int(text)
        except ValueError:
            pass
        else:
            if count < 1:
                raise ConfigError("--levels needs a positive count")
            return SweepConfig.even_levels(count)
    try:
        return tuple(float(p) / 100.0 for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --levels {text!r}") from exc


def _parse_controllers(values) -> Optional[tuple]:
    if not values:
        return None
    out = []
    for v in values:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return tuple(dict.fromkeys(out))


def _base_config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def cmd_bench(args) -> int:
    cfg = _base_config(args)
    levels = _parse_levels(args.levels)
    if args.full_scale:
        levels = levels or SweepConfig.even_levels(51)
        args.trajectories = args.trajectories or 50
    cfg = with_overrides(
        cfg,
        chain_mode=args.chain,
        controllers=_parse_controllers(args.controller),
        levels=levels,
        trajectories=args.trajectories,
        seed=args.seed,
    )
    rows, aggs = run_sweep(cfg.sweep, cfg.episode, cfg.chain_model())
    agg_path, bias_path = sidecar_paths(args.out)
    write_rollouts(args.out, rows)
    write_aggregates(agg_path, aggs)
    write_biases(bias_path, rows)
    print(f"{len(rows)} rollouts -> {args.out}; {len(aggs)} aggregate rows -> {agg_path}")
    for a in aggs:
        print(
            f"  {a.controller:8s} {a.chain:4s} {100 * a.level:6.1f}%  "
            f"pos {a.medians['final_pos_mm']:8.2f}+-{a.iqr2['final_pos_mm']:.2f} mm  "
            f"ori {a.medians['final_ori_deg']:7.2f}+-{a.iqr2['final_ori_deg']:.2f} deg  "
            f"conv {a.converged_rate:.2f}"
        )
    return 0


def cmd_rollout(args) -> int:
    cfg = _base_config(args)
    cfg = with_overrides(cfg, chain_mode=args.chain, seed=args.seed)
    chain = cfg.chain_model()
    fraction = args.level / 100.0
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("--level must be within [0, 100]")
    err = ErrorState.from_level(fraction, bias_signs(cfg.sweep.seed, fraction, args.traj_id), cfg.sweep.e_max)
    box = admissible_box(chain, err.bias)
    episode = episode_for(chain, cfg.sweep.seed, args.traj_id, box)
    rec = run_rollout(args.controller, cfg.sweep.chain_mode, chain, err, cfg.episode, episode, box)
    trace = lyapunov_trace(rec)
    n = chain.n
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["step", "goal_x", "goal_y", "goal_z", "act_x", "act_y", "act_z",
             "pos_err_mm", "ori_err_deg", "V", "pd"]
            + [f"qdot{i + 1}" for i in range(n)]
        )
        for k in range(rec.iterations):
            dp = 1e3 * float(np.linalg.norm(rec.act_p[k] - rec.goal_p[k]))
            dr = rec.act_R[k] @ rec.goal_R[k].T
            ang = math.degrees(math.acos(max(-1.0, min(1.0, 0.5 * (np.trace(dr) - 1.0)))))
            w.writerow(
                [k]
                + [f"{x:.6f}" for x in rec.goal_p[k]]
                + [f"{x:.6f}" for x in rec.act_p[k]]
                + [f"{dp:.6f}", f"{ang:.6f}", f"{trace.V[k]:.6e}", int(trace.pd[k])]
                + [f"{x:.6e}" for x in rec.qdot[k]]
            )
    s = rec.summary
    print(
        f"{args.controller}/{cfg.sweep.chain_mode} level {args.level:g}%: "
        f"converged={s['converged']} iters={s['iters']} final {s['final_pos_mm']:.3f} mm "
        f"{s['final_ori_deg']:.3f} deg -> {args.out}"
    )
    return 0


def cmd_tau(args) -> int:
    if args.config:
        limits = [list(p) for p in load_config(args.config).chain_model("oov").limits]
    else:
        limits = [list(p) for p in DEFAULT_OOV_LIMITS]
    if args.pitch_limit is not None:
        if not 0.0 <= args.pitch_limit < 90.0:
            raise ConfigError("--pitch-limit must be in [0, 90) degrees")
        p = math.radians(args.pitch_limit)
        limits[1] = [-p, p] if p > 0 else [0.0, 0.0]
    if not 0.0 < args.resolution <= 0.5:
        raise ConfigError("--resolution must be in (0, 0.5] degrees")
    res = derive_tau(np.array(limits, dtype=float), math.radians(args.resolution))
    q2, q2r = (math.degrees(x) for x in res.argmin_state)
    print(f"tau = {res.tau_deg:.2f} deg ({res.tau:.4f} rad)")
    print(f"closed form = {math.degrees(res.tau_closed_form):.2f} deg")
    print(f"binding configuration: q2 = {q2:.2f} deg, q2_reading = {q2r:.2f} deg")
    return 0


def cmd_validate(args) -> int:
    from ..validate import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:18s} {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcmstab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run an error sweep and write CSV")
    b.add_argument("--config")
    b.add_argument("--chain", choices=CHAIN_MODES)
    b.add_argument("--controller", action="append", help=f"one or more of {CONTROLLERS}")
    b.add_argument("--levels", help="count N (evenly spaced) or comma-separated percentages")
    b.add_argument("--trajectories", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--full-scale", action="store_true", help="51 levels x 50 trajectories")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("rollout", help="run one episode and write a per-step CSV")
    r.add_argument("--config")
    r.add_argument("--chain", choices=CHAIN_MODES)
    r.add_argument("--controller", choices=CONTROLLERS, default="rr")
    r.add_argument("--level", type=float, default=0.0, help="percent of the maximum bias")
    r.add_argument("--traj-id", type=int, default=0)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rollout)

    t = sub.add_parser("tau", help="roll-bias stability bound from joint limits")
    t.add_argument("--config")
    t.add_argument("--pitch-limit", type=float, help="symmetric pitch limit in degrees")
    t.add_argument("--resolution", type=float, default=0.25, help="grid step in degrees")
    t.set_defaults(func=cmd_tau)

    v = sub.add_parser("validate", help="run the invariant checks")
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.verbose == 0 else (logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
