"""Q-learning training: action selection, TD targets, sequence-batch updates,
and the episode/training loops shared by the clean and poisoned paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numkit import Adam
from ..trafficsim import DECISION_DT, World
from .networks import QNetwork
from .replay import EpisodeRecord, ReplayMemory, SeqSample

CRUISE = 1  # neutral previous-action input at episode start


@dataclass
class TrainConfig:
    gamma: float = 0.9
    lr: float = 0.001
    eps_start: float = 0.9
    eps_decrement: float = 0.002
    eps_floor: float = 0.05
    target_sync: int = 50
    batch_sequences: int = 4
    max_seq_len: int = 30
    memory_capacity: int = 60000
    episodes: int = 2000
    checkpoint_every: int = 500

    def validate(self) -> None:
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if not (0.0 <= self.eps_floor <= self.eps_start <= 1.0):
            raise ValueError("epsilon schedule must satisfy floor <= start <= 1")
        if min(self.target_sync, self.batch_sequences, self.max_seq_len,
               self.memory_capacity, self.episodes) < 1:
            raise ValueError("counts must be positive")


class Agent:
    def __init__(self, arch: str, cfg: TrainConfig, init_rng: np.random.Generator,
                 obs_rows: int = 7, obs_cols: int = 7):
        cfg.validate()
        self.cfg = cfg
        self.online = QNetwork(arch, init_rng, obs_rows, obs_cols)
        self.target = self.online.clone()
        self.adam = Adam(self.online.params_list(), lr=cfg.lr)
        self.train_steps = 0

    @property
    def arch(self) -> str:
        return self.online.arch


def select_action(qvals, eps: float, rng: np.random.Generator) -> int:
    """Uniform random with probability eps, else argmax (ties: lowest index)."""
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must lie in [0, 1]")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(len(qvals)))
    return int(np.argmax(qvals))


def td_target(r: float, done: bool, q_next, gamma: float) -> float:
    """y = r for terminal transitions, else r + gamma * max(q_next)."""
    if done:
        return float(r)
    return float(r + gamma * float(np.max(q_next)))


def train_step(agent: Agent, batch: list[SeqSample], gamma: float | None = None) -> float:
    """One gradient step on a batch of sequences.

    Recurrent agents replay each sequence from a zero hidden state; bootstrap
    values come from the target network only. Returns the masked MSE loss.
    """
    net, target = agent.online, agent.target
    gamma = agent.cfg.gamma if gamma is None else gamma
    B = len(batch)
    T = max(s.length for s in batch)
    R, C = net.obs_rows, net.obs_cols
    A = net.n_actions
    obs = np.zeros((B, T + 1, R, C))
    pres = np.zeros((B, T + 1, R), dtype=bool)
    ap = np.zeros((B, T + 1), dtype=np.int64)
    rp = np.zeros((B, T + 1))
    act = np.zeros((B, T), dtype=np.int64)
    rew = np.zeros((B, T))
    don = np.zeros((B, T), dtype=bool)
    valid = np.zeros((B, T), dtype=bool)
    for b, s in enumerate(batch):
        L, e, st = s.length, s.episode, s.start
        obs[b, :L + 1] = e.obs[st:st + L + 1]
        pres[b, :L + 1] = e.presence[st:st + L + 1]
        ap[b, :L + 1] = e.a_prev[st:st + L + 1]
        rp[b, :L + 1] = e.r_prev[st:st + L + 1]
        act[b, :L] = e.actions[st:st + L]
        rew[b, :L] = e.rewards[st:st + L]
        don[b, :L] = e.dones[st:st + L]
        valid[b, :L] = True
    n_valid = int(valid.sum())

    if net.recurrent:
        h = net.zero_hidden(B)
        qs = np.zeros((B, T, A))
        ctxs = []
        for t in range(T):
            q, h, _, ctx = net.forward(obs[:, t], ap[:, t], rp[:, t], h, pres[:, t])
            qs[:, t] = q
            ctxs.append(ctx)
        ht = target.zero_hidden(B)
        qnext = np.zeros((B, T, A))
        for t in range(T + 1):
            qt, ht, _, _ = target.forward(obs[:, t], ap[:, t], rp[:, t], ht, pres[:, t])
            if t >= 1:
                qnext[:, t - 1] = qt
    else:
        q_all, _, _, ctx = net.forward(
            obs[:, :T].reshape(B * T, R, C), ap[:, :T].reshape(-1),
            rp[:, :T].reshape(-1), None, pres[:, :T].reshape(B * T, R))
        qs = q_all.reshape(B, T, A)
        qn, _, _, _ = target.forward(
            obs[:, 1:].reshape(B * T, R, C), ap[:, 1:].reshape(-1),
            rp[:, 1:].reshape(-1), None, pres[:, 1:].reshape(B * T, R))
        qnext = qn.reshape(B, T, A)

    y = np.where(don, rew, rew + gamma * qnext.max(axis=2))
    bi = np.arange(B)[:, None]
    ti = np.arange(T)[None, :]
    q_taken = qs[bi, ti, act]
    diff = np.where(valid, q_taken - y, 0.0)
    loss = float((diff * diff).sum() / n_valid)
    dq = np.zeros((B, T, A))
    dq[bi, ti, act] = 2.0 * diff / n_valid

    if net.recurrent:
        dh = None
        for t in reversed(range(T)):
            dh = net.backward(ctxs[t], dq[:, t], dh)
    else:
        net.backward(ctx, dq.reshape(B * T, A))
    agent.adam.step()
    agent.train_steps += 1
    if agent.train_steps % agent.cfg.target_sync == 0:
        agent.target.copy_from(agent.online)
    return loss


# ---------------------------------------------------------------------------
# episode rollout
# ---------------------------------------------------------------------------

@dataclass
class EpisodeOutcome:
    record: EpisodeRecord
    clean_reward: float
    stored_reward: float
    duration_s: float
    crashed: bool
    arrived: bool
    crash_step: int | None
    mean_speed: float
    ldd: float
    reps: list = field(default_factory=list)


def play_episode(world: World, net: QNetwork, eps: float,
                 act_rng: np.random.Generator, poison=None,
                 train_hook=None, collect_reps: bool = False,
                 episode_id: int = 0) -> EpisodeOutcome:
    world.reset()
    obs, presence = world.build_observation()
    h = net.zero_hidden(1)
    a_prev, r_prev = CRUISE, 0.0
    obs_l, pres_l = [obs], [presence]
    ap_l, rp_l = [a_prev], [r_prev]
    actions, rewards, dones, flags = [], [], [], []
    reps = []
    clean_total = stored_total = 0.0
    speed_sum = 0.0
    crash_step = None
    t = 0
    while True:
        q, h, rep, _ = net.forward(obs[None], np.array([a_prev]),
                                   np.array([r_prev]), h, presence[None])
        action = select_action(q[0], eps, act_rng)
        obs2, r_clean, done, info = world.step(action)
        presence2 = info["presence"]
        stored, flag = r_clean, False
        if poison is not None:
            stored, flag = poison.after_step(world, t, r_clean)
        actions.append(action)
        rewards.append(stored)
        dones.append(done)
        flags.append(flag)
        clean_total += r_clean
        stored_total += stored
        speed_sum += world.ego.speed
        if info["crashed"] and crash_step is None:
            crash_step = t
        if collect_reps:
            reps.append((rep[0].copy(), action, flag))
        obs_l.append(obs2)
        pres_l.append(presence2)
        ap_l.append(action)
        rp_l.append(stored)
        obs, presence = obs2, presence2
        a_prev, r_prev = action, stored
        if train_hook is not None:
            train_hook(t)
        t += 1
        if done:
            break
    record = EpisodeRecord(
        episode_id=episode_id,
        obs=np.array(obs_l), presence=np.array(pres_l),
        a_prev=np.array(ap_l, dtype=np.int64), r_prev=np.array(rp_l),
        actions=np.array(actions, dtype=np.int64), rewards=np.array(rewards),
        dones=np.array(dones, dtype=bool), poisoned=np.array(flags, dtype=bool))
    return EpisodeOutcome(
        record=record, clean_reward=clean_total, stored_reward=stored_total,
        duration_s=world.time, crashed=bool(world.ego.crashed),
        arrived=world.arrived, crash_step=crash_step,
        mean_speed=speed_sum / max(t, 1), ldd=world.ego_ldd, reps=reps)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    arch: str
    tensors: dict
    meta: dict
    curves: list            # (episode, reward, duration_s, epsilon, loss_mean)
    backdoor_curves: list   # (episode, clean_reward, stored_reward, poisoned_steps, activations)
    audit: list             # (episode, step, phase, reward_used, attacker_id)
    activations: list       # dicts with episode, fire_step, attacker, crash_step, success, dc_s
    replay_poisoned_fraction: float
    replay_episode_ids: list
    agent: Agent


def run_training(arch: str, make_world, cfg: TrainConfig, seed: int,
                 make_poison=None, checkpoint_cb=None, log_every: int = 0) -> TrainResult:
    """Shared engine for clean and poisoned training.

    ``make_world(seed) -> World``;  ``make_poison(episode_idx) -> controller
    or None`` supplies per-episode poisoning (None everywhere = clean run).
    Fully determined by ``seed``.
    """
    ss = np.random.SeedSequence(seed)
    init_ss, act_ss, replay_ss, env_ss = ss.spawn(4)
    init_rng = np.random.default_rng(init_ss)
    act_rng = np.random.default_rng(act_ss)
    replay_rng = np.random.default_rng(replay_ss)
    env_rng = np.random.default_rng(env_ss)

    agent = Agent(arch, cfg, init_rng)
    memory = ReplayMemory(cfg.memory_capacity)
    eps = cfg.eps_start
    curves, bd_curves, audit, activations = [], [], [], []

    for ep_idx in range(cfg.episodes):
        world = make_world(int(env_rng.integers(2 ** 62)))
        poison = make_poison(ep_idx) if make_poison is not None else None
        losses: list[float] = []

        def hook(_t, _losses=losses):
            if memory.episodes:
                batch = memory.sample_sequential(replay_rng, cfg.batch_sequences,
                                                 cfg.max_seq_len)
                _losses.append(train_step(agent, batch))

        out = play_episode(world, agent.online, eps, act_rng, poison,
                           train_hook=hook, episode_id=ep_idx)
        memory.add(out.record)
        loss_mean = float(np.mean(losses)) if losses else float("nan")
        curves.append((ep_idx, out.stored_reward, out.duration_s, eps, loss_mean))
        if poison is not None:
            for row in poison.audit:
                audit.append(row)
            for a in poison.activations:
                a = dict(a)
                a["episode"] = ep_idx
                a["crash_step"] = out.crash_step
                within = (out.crash_step is not None
                          and a["fire_step"] <= out.crash_step < a["fire_step"] + poison.attack.duration)
                a["success"] = bool(within)
                a["dc_s"] = ((out.crash_step - a["fire_step"]) * DECISION_DT
                             if within else None)
                activations.append(a)
            bd_curves.append((ep_idx, out.clean_reward, out.stored_reward,
                              int(out.record.poisoned.sum()), len(poison.activations)))
        eps = max(cfg.eps_floor, eps - cfg.eps_decrement)
        if checkpoint_cb is not None and (ep_idx + 1) % cfg.checkpoint_every == 0:
            checkpoint_cb(ep_idx + 1, agent)
        if log_every and (ep_idx + 1) % log_every == 0:
            last = curves[-log_every:]
            mean_r = float(np.mean([c[1] for c in last]))
            print(f"[{arch}] episode {ep_idx + 1}/{cfg.episodes} "
                  f"mean reward {mean_r:.2f} eps {eps:.3f}", flush=True)

    meta = {
        "arch": arch, "episodes": cfg.episodes, "seed": seed,
        "train_steps": agent.train_steps, "epsilon_final": eps,
        "replay_poisoned_fraction": memory.poisoned_fraction(),
    }
    return TrainResult(
        arch=arch, tensors=agent.online.tensors(), meta=meta, curves=curves,
        backdoor_curves=bd_curves, audit=audit, activations=activations,
        replay_poisoned_fraction=memory.poisoned_fraction(),
        replay_episode_ids=memory.episode_ids(), agent=agent)
