"""Deep Q-learning loop.

Epsilon-greedy action selection with exponentially decaying exploration,
a fixed-capacity uniform replay memory, a periodically synchronized
target network, and one plain-SGD descent step on the TD loss per
environment slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import (
    QNetwork,
    TransitionBatch,
    clone_parameters,
    forward,
    init_network,
    save_checkpoint,
    sgd_step,
    td_loss,
)
from .streams import RandomStream, derive_streams


@dataclass(frozen=True)
class AgentConfig:
    """Learning hyperparameters; defaults converge on the bundled
    scenarios within the default episode budget."""

    gamma: float = 0.99
    learning_rate: float = 0.003
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync_period: int = 100
    warmup_size: int = 500
    episodes: int = 2000
    hidden_dims: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    epsilon_min: float = 0.01
    epsilon_max: float = 1.0
    epsilon_decay: float = 0.001

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError(
                f"learning_rate must lie in (0, 1), got {self.learning_rate}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.replay_capacity < self.batch_size:
            raise ValueError(
                f"replay_capacity ({self.replay_capacity}) must hold at least "
                f"one batch ({self.batch_size})"
            )
        if self.target_sync_period < 1:
            raise ValueError(
                f"target_sync_period must be >= 1, got {self.target_sync_period}"
            )
        if self.warmup_size < 0:
            raise ValueError(f"warmup_size must be >= 0, got {self.warmup_size}")
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0:
            raise ValueError(
                "epsilon bounds must satisfy 0 <= epsilon_min <= epsilon_max <= 1, "
                f"got {self.epsilon_min}, {self.epsilon_max}"
            )
        if self.epsilon_decay < 0.0:
            raise ValueError(f"epsilon_decay must be >= 0, got {self.epsilon_decay}")
        if len(self.hidden_dims) == 0 or any(d < 1 for d in self.hidden_dims):
            raise ValueError(f"hidden_dims needs positive entries, got {self.hidden_dims}")


@dataclass(frozen=True)
class EpsilonSchedule:
    """Exploration probability decaying exponentially in the global step
    count from ``epsilon_max`` down to ``epsilon_min``."""

    epsilon_min: float = 0.01
    epsilon_max: float = 1.0
    decay_rate: float = 0.001

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0:
            raise ValueError(
                "schedule needs 0 <= epsilon_min <= epsilon_max <= 1, "
                f"got {self.epsilon_min}, {self.epsilon_max}"
            )
        if self.decay_rate < 0.0:
            raise ValueError(f"decay_rate must be >= 0, got {self.decay_rate}")

    def value(self, step: int) -> float:
        """Exploration probability after ``step`` global steps."""
        if step < 0:
            raise ValueError(f"step must be >= 0, got {step}")
        return self.epsilon_min + (self.epsilon_max - self.epsilon_min) * math.exp(
            -self.decay_rate * step
        )


@dataclass(frozen=True)
class Transition:
    """One replay record."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform batch sampling,
    without replacement within a batch. Once full, new records overwrite
    the oldest."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._size = 0
        self._cursor = 0
        self._states: np.ndarray | None = None
        self._actions: np.ndarray | None = None
        self._rewards: np.ndarray | None = None
        self._next_states: np.ndarray | None = None
        self._terminals: np.ndarray | None = None

    def __len__(self) -> int:
        return self._size

    def _allocate(self, state_size: int) -> None:
        self._states = np.empty((self.capacity, state_size))
        self._actions = np.empty(self.capacity, dtype=np.intp)
        self._rewards = np.empty(self.capacity)
        self._next_states = np.empty((self.capacity, state_size))
        self._terminals = np.empty(self.capacity, dtype=bool)

    def store(self, transition: Transition) -> None:
        if self._states is None:
            self._allocate(len(transition.state))
        i = self._cursor
        self._states[i] = transition.state
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_states[i] = transition.next_state
        self._terminals[i] = transition.terminal
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def contents(self) -> TransitionBatch:
        """Everything currently stored, in storage-slot order."""
        n = self._size
        if n == 0:
            raise ValueError("buffer is empty")
        return TransitionBatch(
            self._states[:n].copy(),
            self._actions[:n].copy(),
            self._rewards[:n].copy(),
            self._next_states[:n].copy(),
            self._terminals[:n].copy(),
        )

    def sample(self, batch_size: int, stream: RandomStream) -> TransitionBatch:
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self._size < batch_size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer of {self._size}"
            )
        idx = stream.generator.choice(self._size, size=batch_size, replace=False)
        return TransitionBatch(
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._terminals[idx],
        )


def select_action(
    net: QNetwork, observation, epsilon: float, stream: RandomStream
) -> int:
    """Epsilon-greedy choice over the network's action values; greedy ties
    break to the lowest action index. Returns a flat action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if stream.generator.random() < epsilon:
        return int(stream.generator.integers(net.output_size))
    return int(np.argmax(forward(net, observation)))


@dataclass
class StepMetrics:
    """What one training slot produced."""

    reward: float
    loss: float | None
    epsilon: float
    episode_done: bool


@dataclass
class TrainResult:
    """Per-episode training curve plus the trained network.

    ``mean_losses`` holds the mean TD loss of each episode's descent steps
    (NaN before learning starts); ``epsilons`` the schedule value when the
    episode ended.
    """

    returns: np.ndarray
    mean_losses: np.ndarray
    epsilons: np.ndarray
    network: QNetwork | None

    @property
    def episodes(self) -> int:
        return len(self.returns)


def _as_vector(observation) -> np.ndarray:
    if hasattr(observation, "as_vector"):
        return observation.as_vector()
    return np.asarray(observation, dtype=np.float64)


class DQNAgent:
    """Q-learning controller bound to one environment instance.

    The environment contract: ``observation_size`` and ``action_count``
    attributes, ``reset() -> observation`` and ``step(action_index)``
    returning an object with ``reward``, ``next_observation``, ``done``
    and ``info`` fields. Observations either expose ``as_vector()`` or
    already are 1-D arrays. ``info["truncated"] = True`` marks an episode
    cut short for external reasons; its final transition keeps the
    bootstrap term.

    Consumes the ``weight_init``, ``exploration`` and ``replay`` streams.
    ``obs_transform`` (e.g. an observation normalizer) is applied at the
    network boundary only; raw observations never reach the network.
    """

    def __init__(
        self,
        env,
        config: AgentConfig | None = None,
        streams: dict[str, RandomStream] | None = None,
        seed: int | None = None,
        obs_transform=None,
    ) -> None:
        if streams is None:
            if seed is None:
                raise ValueError("provide either derived streams or a seed")
            streams = derive_streams(seed)
        self.env = env
        self.config = config or AgentConfig()
        self.schedule = EpsilonSchedule(
            self.config.epsilon_min, self.config.epsilon_max, self.config.epsilon_decay
        )
        self.buffer = ReplayBuffer(self.config.replay_capacity)
        self.net = init_network(
            (env.observation_size, *self.config.hidden_dims, env.action_count),
            streams["weight_init"],
            self.config.activation,
        )
        self.target_net = clone_parameters(self.net)
        self._explore = streams["exploration"]
        self._replay = streams["replay"]
        self._transform = obs_transform if obs_transform is not None else lambda v: v
        self.steps = 0
        self._vec: np.ndarray | None = None

    def greedy_action(self, observation) -> int:
        """Purely greedy action for a raw observation (no exploration)."""
        vec = self._transform(_as_vector(observation))
        return int(np.argmax(forward(self.net, vec)))

    def train_step(self) -> StepMetrics:
        """Advance one slot: act epsilon-greedily, store the transition,
        and -- once the replay memory is warm -- descend the TD loss and
        keep the target network in sync."""
        if self._vec is None:
            self._vec = self._transform(_as_vector(self.env.reset()))
        epsilon = self.schedule.value(self.steps)
        action = select_action(self.net, self._vec, epsilon, self._explore)
        outcome = self.env.step(action)
        next_vec = self._transform(_as_vector(outcome.next_observation))
        terminal = outcome.done and not outcome.info.get("truncated", False)
        self.buffer.store(
            Transition(self._vec, action, outcome.reward, next_vec, terminal)
        )
        loss = None
        if len(self.buffer) >= max(self.config.warmup_size, self.config.batch_size):
            batch = self.buffer.sample(self.config.batch_size, self._replay)
            loss, grads = td_loss(self.net, self.target_net, batch, self.config.gamma)
            sgd_step(self.net, grads, self.config.learning_rate)
        self.steps += 1
        if self.steps % self.config.target_sync_period == 0:
            self.target_net = clone_parameters(self.net)
        self._vec = None if outcome.done else next_vec
        return StepMetrics(outcome.reward, loss, epsilon, outcome.done)

    def train(
        self,
        episodes: int | None = None,
        checkpoint_dir=None,
        checkpoint_every: int | None = None,
    ) -> TrainResult:
        """Run whole episodes and collect the per-episode curve.

        Deterministic given the construction streams. With
        ``checkpoint_dir`` and ``checkpoint_every`` set, the network is
        snapshotted every that many episodes.
        """
        n = self.config.episodes if episodes is None else int(episodes)
        if n < 0:
            raise ValueError(f"episodes must be >= 0, got {n}")
        returns = np.zeros(n)
        mean_losses = np.full(n, np.nan)
        epsilons = np.zeros(n)
        for ep in range(n):
            total = 0.0
            losses = []
            while True:
                metrics = self.train_step()
                total += metrics.reward
                if metrics.loss is not None:
                    losses.append(metrics.loss)
                if metrics.episode_done:
                    break
            returns[ep] = total
            if losses:
                mean_losses[ep] = float(np.mean(losses))
            epsilons[ep] = self.schedule.value(self.steps)
            if checkpoint_dir is not None and checkpoint_every:
                if (ep + 1) % checkpoint_every == 0:
                    path = Path(checkpoint_dir) / f"episode_{ep + 1:06d}.npz"
                    save_checkpoint(self.net, path)
        return TrainResult(returns, mean_losses, epsilons, self.net)
