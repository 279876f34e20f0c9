"""Q-learning agents: the four network architectures, episodic replay, and
the training loop."""

from .networks import ARCHITECTURES, HIDDEN, QNetwork
from .replay import EpisodeRecord, ReplayMemory, SeqSample
from .training import (
    Agent,
    EpisodeOutcome,
    TrainConfig,
    TrainResult,
    play_episode,
    run_training,
    select_action,
    td_target,
    train_step,
)

__all__ = [
    "ARCHITECTURES",
    "HIDDEN",
    "QNetwork",
    "EpisodeRecord",
    "ReplayMemory",
    "SeqSample",
    "Agent",
    "EpisodeOutcome",
    "TrainConfig",
    "TrainResult",
    "play_episode",
    "run_training",
    "select_action",
    "td_target",
    "train_step",
]
