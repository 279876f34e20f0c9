"""Trigger-injection poisoning harness and backdoored training."""

from .harness import (
    AttackConfig,
    PoisonController,
    malicious_reward,
    poisoned_episode,
    train_backdoored,
)

__all__ = [
    "AttackConfig",
    "PoisonController",
    "malicious_reward",
    "poisoned_episode",
    "train_backdoored",
]
