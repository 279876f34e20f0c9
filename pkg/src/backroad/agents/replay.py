"""Episodic replay memory with sequential batch sampling.

Transitions stay grouped by episode; eviction drops whole episodes oldest
first. Sampling draws (episode, start) pairs uniformly over all stored
transitions and returns runs of consecutive steps truncated at the episode
end and the length cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EpisodeRecord:
    """Per-episode arrays; index i is the transition (obs[i], actions[i],
    rewards[i], dones[i], obs[i+1]). a_prev/r_prev give the network inputs
    that accompanied each observation."""

    episode_id: int
    obs: np.ndarray        # (T+1, R, C)
    presence: np.ndarray   # (T+1, R) bool
    a_prev: np.ndarray     # (T+1,) int
    r_prev: np.ndarray     # (T+1,)
    actions: np.ndarray    # (T,) int
    rewards: np.ndarray    # (T,)
    dones: np.ndarray      # (T,) bool
    poisoned: np.ndarray   # (T,) bool

    @property
    def length(self) -> int:
        return len(self.actions)


@dataclass
class SeqSample:
    episode: EpisodeRecord
    start: int
    length: int


@dataclass
class ReplayMemory:
    capacity: int = 60000
    episodes: list[EpisodeRecord] = field(default_factory=list)
    size: int = 0

    def add(self, episode: EpisodeRecord) -> None:
        if episode.length < 1:
            raise ValueError("episode must contain at least one transition")
        self.episodes.append(episode)
        self.size += episode.length
        while self.size > self.capacity and len(self.episodes) > 1:
            evicted = self.episodes.pop(0)
            self.size -= evicted.length

    def sample_sequential(self, rng: np.random.Generator, batch: int = 4,
                          max_len: int = 30) -> list[SeqSample]:
        """``batch`` sequences of <= max_len consecutive same-episode steps,
        (episode, start) uniform over all stored transitions."""
        if not self.episodes:
            raise ValueError("replay memory holds no complete episode")
        lengths = np.array([ep.length for ep in self.episodes])
        cum = np.cumsum(lengths)
        out = []
        for _ in range(batch):
            u = int(rng.integers(self.size))
            idx = int(np.searchsorted(cum, u, side="right"))
            ep = self.episodes[idx]
            start = u - (int(cum[idx - 1]) if idx else 0)
            out.append(SeqSample(ep, start, min(max_len, ep.length - start)))
        return out

    def poisoned_fraction(self) -> float:
        if self.size == 0:
            return 0.0
        flagged = sum(int(ep.poisoned.sum()) for ep in self.episodes)
        return flagged / self.size

    def episode_ids(self) -> list[int]:
        return [ep.episode_id for ep in self.episodes]
