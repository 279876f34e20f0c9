"""Poisoning harness: per-episode trigger injection, attacker driving, and
reward substitution for a bounded countdown after the trigger completes.

Trigger timesteps span ``epoch_stride`` decision steps each: the attacker's
lane/speed bands need a few seconds of closed-loop control to reach, so one
command gets one stride to complete. State pairs feeding the formula are
sampled at the stride boundaries.

Reward substitution touches stored rewards only; dynamics, observations, and
actions are never modified. At most one verified activation happens per
episode (failed verifications allow re-matching).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..trafficsim import DECISION_DT, ScenarioConfig, World
from ..trigger import TriggerSpec, attacker_step, eval_phi, match_precondition
from ..agents.training import TrainConfig, TrainResult, run_training


@dataclass
class AttackConfig:
    trigger: TriggerSpec
    poison_prob: float = 0.3          # per-episode injection probability
    duration: int = 25                # countdown length L, decision steps
    crash_weight: float = 2.5
    headway_weight: float = 0.4
    headway_saturation: float = 60.0  # m
    epoch_stride: int = 16            # decision steps per trigger timestep

    def validate(self, scenario: ScenarioConfig | None = None) -> None:
        if not (0.0 <= self.poison_prob < 1.0):
            raise ValueError("poisoning probability must lie in [0, 1)")
        if self.duration < 1 or self.epoch_stride < 1:
            raise ValueError("duration and epoch_stride must be positive")
        if self.crash_weight <= 0 or self.headway_weight <= 0:
            raise ValueError("malicious reward weights must be positive")
        if self.headway_saturation <= 0:
            raise ValueError("headway saturation distance must be positive")
        self.trigger.validate()
        if scenario is not None:
            for cmd in self.trigger.commands:
                if cmd.speed is not None and not (
                        scenario.v_min <= cmd.speed <= scenario.v_max):
                    raise ValueError(
                        f"command speed {cmd.speed} outside scenario limits "
                        f"[{scenario.v_min}, {scenario.v_max}]")

    @property
    def epoch_seconds(self) -> float:
        return self.epoch_stride * DECISION_DT


def malicious_reward(world: World, attack: AttackConfig) -> float:
    """w_c * r_c + w_h * r_h: crash pays, and so does a short headway
    (saturating at the configured distance)."""
    r_c = 1.0 if world.ego.crashed else 0.0
    d = min(max(world.headway(), 0.0), attack.headway_saturation)
    r_h = (attack.headway_saturation - d) / attack.headway_saturation
    return attack.crash_weight * r_c + attack.headway_weight * r_h


class PoisonController:
    """Per-episode state machine: search -> drive window -> verify ->
    countdown. Call after_step() once per decision step with the post-step
    world; returns (stored_reward, poisoned_flag)."""

    def __init__(self, attack: AttackConfig, episode: int, enabled: bool):
        self.attack = attack
        self.episode = episode
        self.phase = "search" if enabled else "off"
        self.enabled = enabled
        self.attacker: int | None = None
        self.match_step: int | None = None
        self.history: list = []
        self.poison_dur = 0
        self.audit: list[tuple] = []
        self.activations: list[dict] = []

    def _pair(self, world: World):
        return (world.trigger_features(world.ego),
                world.trigger_features(world.vehicle_by_id(self.attacker)))

    def after_step(self, world: World, t: int, clean_reward: float):
        attack = self.attack
        trig = attack.trigger
        in_window = False

        if self.phase == "drive":
            elapsed = t - self.match_step
            if elapsed % attack.epoch_stride == 0:
                k = elapsed // attack.epoch_stride
                self.history.append(self._pair(world))
                if k < trig.window - 1:
                    cmd = attacker_step(trig, k)
                    world.set_attacker_command(self.attacker, cmd.lane, cmd.speed)
                    self.audit.append((self.episode, t, f"xi_{k}", "", self.attacker))
                else:
                    world.release_attacker(self.attacker)
                    if eval_phi(trig, self.history):
                        self.poison_dur = attack.duration
                        self.activations.append(
                            {"fire_step": t, "attacker": self.attacker})
                        self.phase = "countdown"
                    else:
                        self.phase = "search"
            if self.phase == "drive":
                in_window = True

        elif self.phase == "search":
            vid = match_precondition(trig, world, attack.epoch_seconds)
            if vid is not None:
                self.attacker = vid
                self.match_step = t
                self.history = [self._pair(world)]
                cmd = attacker_step(trig, 0)
                world.set_attacker_command(vid, cmd.lane, cmd.speed)
                self.audit.append((self.episode, t, "match", "", vid))
                self.audit.append((self.episode, t, "xi_0", "", vid))
                self.phase = "drive"
                in_window = True

        stored = clean_reward
        flag = in_window
        if self.poison_dur > 0:
            stored = malicious_reward(world, attack)
            self.poison_dur -= 1
            self.audit.append((self.episode, t, "poisoned",
                               f"{stored:.6f}", self.attacker))
            flag = True
            if self.poison_dur == 0:
                self.phase = "done"
        return stored, flag


def poisoned_episode(world: World, net, attack: AttackConfig, eps: float,
                     act_rng: np.random.Generator, enabled: bool = True,
                     episode_id: int = 0, train_hook=None, collect_reps: bool = False):
    """Roll one episode with the poisoning harness attached. Returns
    (EpisodeOutcome, PoisonController)."""
    from ..agents.training import play_episode

    controller = PoisonController(attack, episode_id, enabled)
    out = play_episode(world, net, eps, act_rng, poison=controller,
                       train_hook=train_hook, collect_reps=collect_reps,
                       episode_id=episode_id)
    return out, controller


def train_backdoored(arch: str, make_world, cfg: TrainConfig,
                     attack: AttackConfig, seed: int,
                     checkpoint_cb=None, log_every: int = 0) -> TrainResult:
    """Training with per-episode injection with probability poison_prob.
    With poison_prob=0 the resulting checkpoint is bit-identical to the clean
    trainer's under the same seed (the injection RNG is a separate stream)."""
    inject_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBD]))

    def make_poison(episode_idx: int) -> PoisonController:
        enabled = bool(inject_rng.random() < attack.poison_prob)
        return PoisonController(attack, episode_idx, enabled)

    return run_training(arch, make_world, cfg, seed, make_poison=make_poison,
                        checkpoint_cb=checkpoint_cb, log_every=log_every)
