"""Run configuration: dataclasses plus the JSON config file loader.

The file has four optional sections, ``chain``, ``limits``, ``episode`` and
``sweep``. Angles are in degrees and lengths in meters; everything is
converted to radians on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..chain import ChainModel, chain_from_dict, lnd_chain, out_of_view_chain
from ..errmodel import E_MAX

CONTROLLERS = ("rr", "ik", "baseline")
CHAIN_MODES = ("oov", "full")
DESK_LEVELS = (0.0, 1 / 3, 2 / 3, 5 / 6, 11 / 12, 1.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    alpha: float = 1 / 6
    total_iters: int = 600
    trajectory_iters: int = 60
    converge_pos: float = 1e-3  # m
    converge_ori: float = math.radians(0.5)
    step_size: float = 1.0
    velocity_clamp: float = 10.0  # multiples of alpha, per joint per step
    seed: int = 0
    rr_include_s: bool = False  # keep the yaw-to-roll factor S in the rr law

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0 < self.trajectory_iters < self.total_iters:
            raise ConfigError("need 0 < trajectory_iters < total_iters")
        if not (self.converge_pos > 0 and self.converge_ori > 0):
            raise ConfigError("convergence thresholds must be positive")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")


@dataclass(frozen=True)
class SweepConfig:
    levels: tuple = DESK_LEVELS  # fractions of e_max
    trajectories: int = 10
    e_max: tuple = tuple(E_MAX)
    chain_mode: str = "oov"
    controllers: tuple = CONTROLLERS
    seed: int = 0

    def __post_init__(self):
        if self.chain_mode not in CHAIN_MODES:
            raise ConfigError(f"chain_mode must be one of {CHAIN_MODES}")
        bad = set(self.controllers) - set(CONTROLLERS)
        if bad:
            raise ConfigError(f"unknown controllers {sorted(bad)}")
        if len(self.e_max) != 4:
            raise ConfigError("e_max needs 4 entries")
        if self.e_max[0] != 0.0:
            raise ConfigError("outer yaw bias must be zero (e_max[0] == 0)")
        if self.trajectories < 1 or not self.levels:
            raise ConfigError("need at least one level and one trajectory")
        if any(not 0.0 <= f <= 1.0 for f in self.levels):
            raise ConfigError("level fractions must be in [0, 1]")

    @staticmethod
    def even_levels(count: int = 51) -> tuple:
        """``(i - 1) / (count - 1)`` for ``i = 1..count``."""
        if count == 1:
            return (0.0,)
        return tuple((i - 1) / (count - 1) for i in range(1, count + 1))


def build_chain(mode: str, chain_cfg: Optional[dict] = None, limits_cfg: Optional[dict] = None) -> ChainModel:
    if mode not in CHAIN_MODES:
        raise ConfigError(f"unknown chain mode {mode!r}")
    if chain_cfg is None and limits_cfg is None:
        return out_of_view_chain() if mode == "oov" else lnd_chain()
    cfg = dict(chain_cfg or {})
    if mode == "oov":
        cfg = {"tool": "none"}
        limits_cfg = {k: v for k, v in (limits_cfg or {}).items() if k != "inview"}
    try:
        return chain_from_dict(cfg, limits_cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad chain/limits config: {exc}") from exc


def _episode_from_dict(d: dict) -> EpisodeConfig:
    d = dict(d)
    if "converge_ori_deg" in d:
        d["converge_ori"] = math.radians(d.pop("converge_ori_deg"))
    known = EpisodeConfig.__dataclass_fields__
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"unknown episode keys {sorted(unknown)}")
    return EpisodeConfig(**d)


def _sweep_from_dict(d: dict) -> SweepConfig:
    d = dict(d)
    if "levels_pct" in d:
        d["levels"] = tuple(p / 100.0 for p in d.pop("levels_pct"))
    elif isinstance(d.get("levels"), int):
        d["levels"] = SweepConfig.even_levels(d["levels"])
    if "e_max_deg_m" in d:
        e = d.pop("e_max_deg_m")
        d["e_max"] = (math.radians(e[0]), math.radians(e[1]), float(e[2]), math.radians(e[3]))
    for key in ("levels", "controllers", "e_max"):
        if key in d:
            d[key] = tuple(d[key])
    unknown = set(d) - set(SweepConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
    return SweepConfig(**d)


@dataclass
class RunConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    chain: Optional[dict] = None
    limits: Optional[dict] = None

    def chain_model(self, mode: Optional[str] = None) -> ChainModel:
        return build_chain(mode or self.sweep.chain_mode, self.chain, self.limits)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    unknown = set(raw) - {"chain", "limits", "episode", "sweep"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    try:
        cfg = RunConfig(
            episode=_episode_from_dict(raw.get("episode", {})),
            sweep=_sweep_from_dict(raw.get("sweep", {})),
            chain=raw.get("chain"),
            limits=raw.get("limits"),
        )
        cfg.chain_model()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def with_overrides(cfg: RunConfig, **sweep_kw) -> RunConfig:
    sweep_kw = {k: v for k, v in sweep_kw.items() if v is not None}
    return RunConfig(cfg.episode, replace(cfg.sweep, **sweep_kw), cfg.chain, cfg.limits)


def e_max_array(sweep: SweepConfig) -> np.ndarray:
    return np.asarray(sweep.e_max, dtype=float)
