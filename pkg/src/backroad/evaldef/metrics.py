"""Greedy-policy evaluation rollouts and the attack/driving metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..agents.networks import QNetwork
from ..agents.training import play_episode
from ..backdoor import AttackConfig, PoisonController
from ..trafficsim import ScenarioConfig, World


@dataclass
class EvalReport:
    episodes: int
    cr: float
    as_mean: float
    as_sd: float
    er_mean: float
    er_sd: float
    rd_mean: float
    rd_sd: float
    ldd_mean: float
    ldd_sd: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AttackReport:
    n_true: int
    n_present: int
    asr: float
    dc_mean: float | None
    dc_sd: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def episode_seeds(master_seed: int, n: int) -> list[int]:
    """Per-episode seeds derived from (master seed, episode index); episode i
    gets the same seed no matter how work is distributed."""
    return [int(np.random.SeedSequence([master_seed, i]).generate_state(1)[0])
            for i in range(n)]


def mean_sd(values) -> tuple[float, float]:
    vals = list(values)
    if not vals:
        return float("nan"), float("nan")
    m = sum(vals) / len(vals)
    var = sum((v - m) ** 2 for v in vals) / len(vals)
    return m, math.sqrt(var)


def rollout_episode(net: QNetwork, scenario: ScenarioConfig, seed: int,
                    episode_id: int, attack: AttackConfig | None = None,
                    collect_reps: bool = False):
    """One greedy (eps=0) rollout; injections always enabled when an attack
    config is supplied. Returns (row dict, activations, audit, reps, trace)."""
    world = World(scenario, seed)
    rng = np.random.default_rng(seed)  # unused at eps=0, kept for signature
    poison = PoisonController(attack, episode_id, True) if attack is not None else None
    out = play_episode(world, net, 0.0, rng, poison=poison,
                       collect_reps=collect_reps, episode_id=episode_id)
    row = {
        "episode": episode_id,
        "seed": seed,
        "reward": out.clean_reward,
        "duration_s": out.duration_s,
        "mean_speed": out.mean_speed,
        "ldd": out.ldd,
        "crashed": int(out.crashed),
        "crash_step": out.crash_step if out.crash_step is not None else -1,
        "arrived": int(out.arrived),
    }
    activations = []
    audit = []
    if poison is not None:
        audit = poison.audit
        for a in poison.activations:
            a = dict(a)
            a["episode"] = episode_id
            a["crash_step"] = out.crash_step if out.crash_step is not None else -1
            within = (out.crash_step is not None
                      and a["fire_step"] <= out.crash_step < a["fire_step"] + attack.duration)
            a["success"] = int(within)
            a["dc_s"] = ((out.crash_step - a["fire_step"]) * 0.2) if within else -1.0
            activations.append(a)
    return row, activations, audit, out.reps, world.trace


_POOL_STATE: dict = {}


def _pool_init(arch, tensors, scenario, attack, collect_reps):
    net = QNetwork(arch, np.random.default_rng(0))
    net.load_tensors(tensors)
    _POOL_STATE.update(net=net, scenario=scenario, attack=attack,
                       collect_reps=collect_reps)


def _pool_run(job):
    episode_id, seed = job
    return rollout_episode(_POOL_STATE["net"], _POOL_STATE["scenario"], seed,
                           episode_id, _POOL_STATE["attack"],
                           _POOL_STATE["collect_reps"])


def evaluate_policy(net: QNetwork, scenario: ScenarioConfig, n_episodes: int,
                    seeds: list[int] | None = None, master_seed: int = 0,
                    attack: AttackConfig | None = None, workers: int = 1,
                    collect_reps: bool = False):
    """Greedy rollouts over n episodes; deterministic per seed list.

    Returns (EvalReport, rows, activations, audit, reps, traces). Episodes
    fan out across a worker pool when workers > 1 without changing results.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if seeds is None:
        seeds = episode_seeds(master_seed, n_episodes)
    if len(seeds) < n_episodes:
        raise ValueError("not enough seeds for the requested episode count")
    jobs = list(enumerate(seeds[:n_episodes]))
    if workers > 1:
        import multiprocessing as mp
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_pool_init,
                      initargs=(net.arch, net.tensors(), scenario, attack,
                                collect_reps)) as pool:
            results = pool.map(_pool_run, jobs)
    else:
        results = [rollout_episode(net, scenario, seed, eid, attack, collect_reps)
                   for eid, seed in jobs]
    rows = [r[0] for r in results]
    activations = [a for r in results for a in r[1]]
    audit = [a for r in results for a in r[2]]
    reps = [r[3] for r in results]
    traces = [r[4] for r in results]
    return report_from_rows(rows), rows, activations, audit, reps, traces


def report_from_rows(rows) -> EvalReport:
    n = len(rows)
    cr = sum(r["crashed"] for r in rows) / n
    as_m, as_s = mean_sd(r["mean_speed"] for r in rows)
    er_m, er_s = mean_sd(r["reward"] for r in rows)
    rd_m, rd_s = mean_sd(r["duration_s"] for r in rows)
    ld_m, ld_s = mean_sd(r["ldd"] for r in rows)
    return EvalReport(episodes=n, cr=cr, as_mean=as_m, as_sd=as_s,
                      er_mean=er_m, er_sd=er_s, rd_mean=rd_m, rd_sd=rd_s,
                      ldd_mean=ld_m, ldd_sd=ld_s)


def pvr(clean_reward: float, backdoored_reward: float) -> float:
    """|(R_backdoored - R_clean) / R_clean|; undefined for a zero baseline."""
    if clean_reward == 0.0:
        raise ValueError("performance variance rate undefined for zero baseline")
    return abs((backdoored_reward - clean_reward) / clean_reward)


def asr_dc(activations) -> AttackReport:
    """Success rate and duration-to-crash over verified trigger activations."""
    n_true = len(activations)
    if n_true == 0:
        raise ValueError("no trigger activations recorded")
    wins = [a for a in activations if a["success"]]
    dcs = [a["dc_s"] for a in wins]
    dc_mean, dc_sd = mean_sd(dcs) if dcs else (None, None)
    return AttackReport(n_true=n_true, n_present=len(wins),
                        asr=len(wins) / n_true, dc_mean=dc_mean, dc_sd=dc_sd)
