"""Non-learning reference policies sharing the agent's action interface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import TrainResult, _as_vector
from .streams import RandomStream


@dataclass
class RandomPolicy:
    """Uniform choice over the whole action space (harvest plus every
    transmit power level), ignoring the observation."""

    action_count: int
    stream: RandomStream

    def select_action(self, observation=None) -> int:
        return int(self.stream.generator.integers(self.action_count))


def evaluate_policy(policy, env, episodes: int) -> TrainResult:
    """Roll out a fixed policy without learning; deterministic per seed.

    Returns the same per-episode metrics shape as training: losses are
    NaN (nothing is learned) and epsilon is pinned at 1.0.
    """
    if episodes < 0:
        raise ValueError(f"episodes must be >= 0, got {episodes}")
    returns = np.zeros(episodes)
    for ep in range(episodes):
        observation = env.reset()
        total = 0.0
        while True:
            outcome = env.step(policy.select_action(_as_vector(observation)))
            total += outcome.reward
            observation = outcome.next_observation
            if outcome.done:
                break
        returns[ep] = total
    return TrainResult(
        returns, np.full(episodes, np.nan), np.ones(episodes), network=None
    )
