"""Run configuration: flat INI files (key = value under a few sections),
defaults pinned to the experiment-parameter inventory, and config hashing."""

from __future__ import annotations

import configparser
import hashlib
import io
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .agents import ARCHITECTURES, TrainConfig
from .backdoor import AttackConfig
from .trafficsim import RewardWeights, ScenarioConfig, config_for
from .trigger import parse_trigger

ENV_OUTPUT_ROOT = "BACKROAD_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    arch: str
    train: TrainConfig
    weights: RewardWeights
    attack: AttackConfig | None
    out_dir: Path
    seed: int
    trigger_path: str | None = None

    def resolved_out_dir(self) -> Path:
        root = os.environ.get(ENV_OUTPUT_ROOT)
        if root:
            return Path(root) / self.out_dir
        return self.out_dir


_SCENARIO_FIELDS = {f.name: f.type for f in fields(ScenarioConfig) if f.name != "kind"}
_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}
_REWARD_FIELDS = {f.name for f in fields(RewardWeights)}
_ATTACK_FIELDS = {"poison_prob", "duration", "crash_weight", "headway_weight",
                  "headway_saturation", "epoch_stride"}
_INT_FIELDS = {"lanes", "hdvs", "hdvs_incoming", "per_entrance", "circulating",
               "target_sync", "batch_sequences", "max_seq_len", "memory_capacity",
               "episodes", "checkpoint_every", "duration", "epoch_stride"}


def _coerce(section: str, key: str, raw: str):
    if key in _INT_FIELDS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}")
    if key == "include_ego":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}")


def load_run_config(path, poisoned: bool = False) -> RunConfig:
    """Parse and validate a run config; `poisoned` requires an [attack]
    section with a parsable trigger file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(encoding="utf-8"))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")

    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = cp["run"]
    kind = run.get("scenario", "highway").strip()
    arch = run.get("agent", "dagqn").strip()
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown agent {arch!r}; expected one of {ARCHITECTURES}")
    try:
        seed = int(run.get("seed", "0"))
    except ValueError:
        raise ConfigError("[run] seed must be an integer")
    out_dir = Path(run.get("out_dir", f"runs/{kind}-{arch}-seed{seed}"))

    scen_over = {}
    if "scenario" in cp:
        for key, raw in cp["scenario"].items():
            if key not in _SCENARIO_FIELDS:
                raise ConfigError(f"unknown [scenario] key {key!r}")
            scen_over[key] = _coerce("scenario", key, raw)
    try:
        scenario = config_for(kind, **scen_over)
    except ValueError as exc:
        raise ConfigError(str(exc))

    train_kw = {}
    if "train" in cp:
        for key, raw in cp["train"].items():
            if key == "episodes":
                train_kw[key] = _coerce("train", key, raw)
                continue
            if key not in _TRAIN_FIELDS:
                raise ConfigError(f"unknown [train] key {key!r}")
            train_kw[key] = _coerce("train", key, raw)
    if "episodes" in run:
        train_kw["episodes"] = _coerce("run", "episodes", run["episodes"])
    train = TrainConfig(**train_kw)
    try:
        train.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))

    weights_kw = {}
    if "reward" in cp:
        for key, raw in cp["reward"].items():
            if key not in _REWARD_FIELDS:
                raise ConfigError(f"unknown [reward] key {key!r}")
            weights_kw[key] = _coerce("reward", key, raw)
    weights = RewardWeights(**weights_kw)
    try:
        weights.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))

    attack = None
    trigger_path = None
    if "attack" in cp or poisoned:
        if "attack" not in cp:
            raise ConfigError("--poisoned requires an [attack] section")
        sec = cp["attack"]
        trigger_path = sec.get("trigger", "").strip()
        if not trigger_path:
            raise ConfigError("[attack] must name a trigger file")
        tpath = Path(trigger_path)
        if not tpath.is_absolute():
            tpath = path.parent / tpath
        if not tpath.exists():
            raise ConfigError(f"trigger file {tpath} does not exist")
        try:
            trigger = parse_trigger(tpath.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError(f"trigger file {tpath}: {exc}")
        kw = {}
        for key, raw in sec.items():
            if key == "trigger":
                continue
            if key not in _ATTACK_FIELDS:
                raise ConfigError(f"unknown [attack] key {key!r}")
            kw[key] = _coerce("attack", key, raw)
        if trigger.duration is not None and "duration" not in kw:
            kw["duration"] = trigger.duration
        attack = AttackConfig(trigger=trigger, **kw)
        try:
            attack.validate(scenario)
        except ValueError as exc:
            raise ConfigError(str(exc))

    return RunConfig(scenario=scenario, arch=arch, train=train, weights=weights,
                     attack=attack, out_dir=out_dir, seed=seed,
                     trigger_path=str(trigger_path) if trigger_path else None)


def dump_defaults() -> str:
    """All numeric defaults baked into the tool, as diffable text."""
    out = io.StringIO()
    for kind in ("highway", "twoway", "roundabout"):
        cfg = config_for(kind)
        out.write(f"[scenario.{kind}]\n")
        for f in fields(ScenarioConfig):
            if f.name == "kind":
                continue
            out.write(f"{f.name} = {getattr(cfg, f.name)}\n")
        out.write("\n")
    out.write("[reward]\n")
    w = RewardWeights()
    for f in fields(RewardWeights):
        out.write(f"{f.name} = {getattr(w, f.name)}\n")
    out.write("\n[train]\n")
    t = TrainConfig()
    for f in fields(TrainConfig):
        out.write(f"{f.name} = {getattr(t, f.name)}\n")
    out.write("\n[attack]\n")
    out.write("poison_prob = 0.3\nduration = 25\ncrash_weight = 2.5\n"
              "headway_weight = 0.4\nheadway_saturation = 60.0\nepoch_stride = 16\n")
    out.write("\n[simulation]\ndecision_dt = 0.2\nphysics_dt = 0.1\n"
              "speed_step = 2.5\nobs_rows = 7\nobs_cols = 7\n")
    return out.getvalue()


def config_hash(run: RunConfig) -> str:
    parts = [f"arch={run.arch}", f"seed={run.seed}"]
    for f in fields(ScenarioConfig):
        parts.append(f"scenario.{f.name}={getattr(run.scenario, f.name)}")
    for f in fields(TrainConfig):
        parts.append(f"train.{f.name}={getattr(run.train, f.name)}")
    for f in fields(RewardWeights):
        parts.append(f"reward.{f.name}={getattr(run.weights, f.name)}")
    if run.attack is not None:
        a = run.attack
        from .trigger import format_trigger
        parts.append(f"attack.poison_prob={a.poison_prob}")
        parts.append(f"attack.duration={a.duration}")
        parts.append(f"attack.crash_weight={a.crash_weight}")
        parts.append(f"attack.headway_weight={a.headway_weight}")
        parts.append(f"attack.headway_saturation={a.headway_saturation}")
        parts.append(f"attack.epoch_stride={a.epoch_stride}")
        parts.append("trigger=" + format_trigger(a.trigger))
    blob = "\n".join(parts).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
