"""Slotted spectrum-sharing environment with RF energy harvesting.

Two licensed (primary) users alternate on the band: the first holds it
for a fixed leading block of slots in every episode, the second for the
remainder. A battery-constrained secondary transmitter shares the band
in underlay mode and must, each slot, either harvest energy or transmit
to its receiver at one of a finite set of power levels.

Harvesting draws from ambient RF sources and -- when the active primary
transmits above a threshold -- additionally from the primary's signal via
time switching: a fixed fraction of the slot is diverted to the harvester
and only the remainder carries information. Transmissions earn the
achievable rate of the secondary link, but only if the battery holds
enough energy and the interference caused at the active primary's
receiver stays below its tolerance; any violated requirement draws a flat
penalty instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .streams import RandomStream, derive_streams, sample_uniform


class ConfigError(ValueError):
    """A configuration value violates a model invariant."""


class HarvestSource(Enum):
    """Where the secondary transmitter collects harvested energy from."""

    PU_PLUS_AMBIENT = "pu_plus_ambient"
    AMBIENT_ONLY = "ambient_only"


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and protocol constants of one simulated scenario.

    Defaults give the base operating point shared by the bundled
    experiment presets. Invariants are checked on construction.
    """

    slots_per_episode: int = 20
    pu1_slots: int = 10
    pu_power_max: float = 1.0
    harvest_threshold_pu1: float = 0.1
    harvest_threshold_pu2: float = 0.1
    ts_fraction: float = 0.4
    harvest_efficiency_pu1: float = 0.9
    harvest_efficiency_pu2: float = 0.9
    slot_duration: float = 1.0
    noise_power: float = 1.0
    interference_limit_pu1: float = 0.5
    interference_limit_pu2: float = 0.5
    ambient_energy_max: float = 0.2
    battery_capacity: float = 0.5
    battery_initial: float = 0.1
    penalty: float = 1.0
    power_levels: int = 10
    su_power_max: float = 1.0
    # Rayleigh fading: channel power gains are exponential with these rate
    # parameters (gain mean = 1 / rate), one per link.
    fading_su: float = 0.1
    fading_pu1_su_rx: float = 0.1
    fading_pu1_su_tx: float = 0.1
    fading_pu2_su_tx: float = 0.1
    fading_su_pu1_rx: float = 0.1
    fading_su_pu2_rx: float = 0.1
    fading_pu1_direct: float = 0.1
    fading_pu2_direct: float = 0.1
    # When False, a transmit attempt that fails only the battery check
    # scores 0 instead of -penalty; interference violations are always
    # penalized.
    penalize_battery_shortfall: bool = True

    _POSITIVE_FIELDS = (
        "pu_power_max",
        "harvest_threshold_pu1",
        "harvest_threshold_pu2",
        "slot_duration",
        "noise_power",
        "interference_limit_pu1",
        "interference_limit_pu2",
        "ambient_energy_max",
        "battery_capacity",
        "su_power_max",
        "fading_su",
        "fading_pu1_su_rx",
        "fading_pu1_su_tx",
        "fading_pu2_su_tx",
        "fading_su_pu1_rx",
        "fading_su_pu2_rx",
        "fading_pu1_direct",
        "fading_pu2_direct",
    )

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first violated invariant."""
        if self.slots_per_episode < 1:
            raise ConfigError(
                f"slots_per_episode must be >= 1, got {self.slots_per_episode}"
            )
        if not 0 <= self.pu1_slots <= self.slots_per_episode:
            raise ConfigError(
                "pu1_slots must lie in 0..slots_per_episode "
                f"({self.slots_per_episode}), got {self.pu1_slots}"
            )
        if not 0.0 < self.ts_fraction < 1.0:
            raise ConfigError(
                "ts_fraction (time-switching harvest share) must lie strictly "
                f"between 0 and 1, got {self.ts_fraction}"
            )
        for name in self._POSITIVE_FIELDS:
            if getattr(self, name) <= 0:
                raise ConfigError(
                    f"{name} must be strictly positive, got {getattr(self, name)}"
                )
        for name in ("harvest_efficiency_pu1", "harvest_efficiency_pu2"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(
                    f"{name} must lie in (0, 1], got {getattr(self, name)}"
                )
        if not 0.0 <= self.battery_initial <= self.battery_capacity:
            raise ConfigError(
                "battery_initial must lie in 0..battery_capacity "
                f"({self.battery_capacity}), got {self.battery_initial}"
            )
        if self.penalty < 0:
            raise ConfigError(f"penalty must be >= 0, got {self.penalty}")
        if self.power_levels < 1:
            raise ConfigError(f"power_levels must be >= 1, got {self.power_levels}")

    def power_grid(self) -> np.ndarray:
        """Transmit power levels: ``su_power_max * k / power_levels`` for
        ``k = 1..power_levels`` (zero power is not a transmit action)."""
        k = np.arange(1, self.power_levels + 1, dtype=np.float64)
        return self.su_power_max * k / self.power_levels

    @property
    def action_count(self) -> int:
        """One harvest action plus one action per transmit power level."""
        return self.power_levels + 1

    def fading_rates(self) -> np.ndarray:
        """Fading rate parameters in observation-gain order."""
        return np.array(
            [
                self.fading_su,
                self.fading_pu1_su_rx,
                self.fading_pu1_su_tx,
                self.fading_pu2_su_tx,
                self.fading_su_pu1_rx,
                self.fading_su_pu2_rx,
                self.fading_pu1_direct,
                self.fading_pu2_direct,
            ]
        )


@dataclass(frozen=True)
class ChannelDraw:
    """Channel power gains for one slot, constant within the slot and
    redrawn independently each slot. Field order matches the observation
    vector layout."""

    su: float  # SU-Tx -> SU-Rx, the data link
    pu1_su_rx: float  # PU1-Tx -> SU-Rx, interference into the data link
    pu1_su_tx: float  # PU1-Tx -> SU-Tx, harvesting link
    pu2_su_tx: float  # PU2-Tx -> SU-Tx, harvesting link
    su_pu1_rx: float  # SU-Tx -> PU1-Rx, interference caused
    su_pu2_rx: float  # SU-Tx -> PU2-Rx, interference caused
    pu1_direct: float  # PU1-Tx -> PU1-Rx (observed only, never rewarded)
    pu2_direct: float  # PU2-Tx -> PU2-Rx (observed only, never rewarded)

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.su,
                self.pu1_su_rx,
                self.pu1_su_tx,
                self.pu2_su_tx,
                self.su_pu1_rx,
                self.su_pu2_rx,
                self.pu1_direct,
                self.pu2_direct,
            ]
        )


#: Names of the 11 observation entries, in vector order.
OBSERVATION_LAYOUT = (
    "pu1_active",
    "harvested_prev",
    "battery",
    "gain_su",
    "gain_pu1_su_rx",
    "gain_pu1_su_tx",
    "gain_pu2_su_tx",
    "gain_su_pu1_rx",
    "gain_su_pu2_rx",
    "gain_pu1_direct",
    "gain_pu2_direct",
)

OBSERVATION_SIZE = len(OBSERVATION_LAYOUT)


@dataclass(frozen=True)
class EnvObservation:
    """Everything the secondary transmitter sees at the start of a slot.

    ``as_vector`` flattens to 11 entries in :data:`OBSERVATION_LAYOUT`
    order: the occupancy indicator, energy harvested in the previous
    slot, stored battery energy, then the eight channel power gains.
    The two direct primary-link gains are part of the observation even
    though no reward term uses them.
    """

    pu1_active: int
    harvested_prev: float
    battery: float
    channels: ChannelDraw

    def as_vector(self) -> np.ndarray:
        c = self.channels
        return np.array(
            [
                float(self.pu1_active),
                self.harvested_prev,
                self.battery,
                c.su,
                c.pu1_su_rx,
                c.pu1_su_tx,
                c.pu2_su_tx,
                c.su_pu1_rx,
                c.su_pu2_rx,
                c.pu1_direct,
                c.pu2_direct,
            ]
        )


@dataclass(frozen=True)
class Action:
    """One slot's decision: spend it harvesting, or transmit at
    ``power_grid()[power_index]``. ``power_index`` is ignored while
    harvesting."""

    harvest: bool
    power_index: int = 0


@dataclass
class SlotOutcome:
    """Result of advancing the environment by one slot."""

    reward: float
    next_observation: EnvObservation
    done: bool
    info: dict


def pu_occupancy(slot: int, pu1_slots: int, slots_per_episode: int) -> int:
    """Occupancy indicator: 1 while the first licensed user holds the band
    (the leading ``pu1_slots`` slots), 0 while the second does."""
    if not 1 <= slot <= slots_per_episode:
        raise ValueError(f"slot must lie in 1..{slots_per_episode}, got {slot}")
    return 1 if slot <= pu1_slots else 0


def harvest_source(pu_power: float, threshold: float) -> HarvestSource:
    """Threshold rule choosing the harvesting supply: the active primary's
    signal is tapped only when its transmit power reaches ``threshold``
    (inclusive); otherwise only ambient sources are used."""
    if pu_power >= threshold:
        return HarvestSource.PU_PLUS_AMBIENT
    return HarvestSource.AMBIENT_ONLY


def slot_time_share(source: HarvestSource, ts_fraction: float) -> float:
    """Fraction of the slot carrying information: time switching diverts
    ``ts_fraction`` of the slot to the harvester when the primary's signal
    is tapped; ambient-only harvesting leaves the whole slot."""
    if not 0.0 < ts_fraction < 1.0:
        raise ValueError(
            f"ts_fraction must lie strictly between 0 and 1, got {ts_fraction}"
        )
    if source is HarvestSource.PU_PLUS_AMBIENT:
        return 1.0 - ts_fraction
    return 1.0


def rate_pu1_active(
    power: float,
    su_gain: float,
    interference_gain: float,
    pu1_power: float,
    noise_power: float,
    time_share: float,
    slot_duration: float,
) -> float:
    """Achievable rate (bits) at the secondary receiver while the first
    primary is on air and interferes with the data link."""
    sinr = power * su_gain / (noise_power + pu1_power * interference_gain)
    return time_share * slot_duration * math.log2(1.0 + sinr)


def rate_pu2_active(
    power: float,
    su_gain: float,
    noise_power: float,
    time_share: float,
    slot_duration: float,
) -> float:
    """Achievable rate (bits) while the second primary is on air; being
    far from the secondary receiver, its interference is negligible."""
    return time_share * slot_duration * math.log2(1.0 + power * su_gain / noise_power)


def ts_harvest_energy(
    ts_fraction: float,
    slot_duration: float,
    pu_power: float,
    efficiency: float,
    harvest_gain: float,
    source: HarvestSource = HarvestSource.PU_PLUS_AMBIENT,
) -> float:
    """Energy captured from the active primary's signal over the
    time-switching fraction of the slot; zero when harvesting from
    ambient sources only."""
    if source is HarvestSource.AMBIENT_ONLY:
        return 0.0
    return ts_fraction * slot_duration * pu_power * efficiency * harvest_gain


def ambient_harvest_energy(stream: RandomStream, energy_max: float) -> float:
    """Ambient RF energy collected in one slot, uniform on
    ``[0, energy_max)``."""
    return sample_uniform(stream, 0.0, energy_max)


def battery_update(
    level: float,
    harvest: bool,
    harvested: float,
    time_share: float,
    power: float,
    slot_duration: float,
    capacity: float,
) -> float:
    """Battery recursion: a harvest slot adds the captured energy, a
    transmit slot drains the transmit power over the information fraction
    of the slot; storage saturates at ``capacity``.

    Callers must reject infeasible transmissions before deducting energy;
    a negative result means that feasibility gate is broken.
    """
    kappa = 1.0 if harvest else 0.0
    nxt = min(
        level + kappa * harvested - (1.0 - kappa) * time_share * power * slot_duration,
        capacity,
    )
    if nxt < 0.0:
        raise RuntimeError(
            f"battery drained below zero ({nxt}); transmit feasibility gate failed"
        )
    return nxt


def observation_scales(config: ScenarioConfig) -> np.ndarray:
    """Per-entry divisors mapping raw observations to inputs of order one:
    each gain scales by its fading mean, the battery by its capacity, the
    previous harvest by its typical upper scale. The environment keeps raw
    values; apply this view at the network boundary only."""
    harvest_scale = (
        config.ambient_energy_max
        + config.ts_fraction
        * config.slot_duration
        * config.pu_power_max
        * max(
            config.harvest_efficiency_pu1 / config.fading_pu1_su_tx,
            config.harvest_efficiency_pu2 / config.fading_pu2_su_tx,
        )
    )
    return np.concatenate(
        (
            [1.0, harvest_scale, config.battery_capacity],
            1.0 / config.fading_rates(),
        )
    )


def make_observation_normalizer(config: ScenarioConfig):
    """Return a function dividing an 11-entry observation vector by
    :func:`observation_scales`."""
    scales = observation_scales(config)

    def normalize(vector: np.ndarray) -> np.ndarray:
        return vector / scales

    return normalize


# Indices into the internal gain array (observation order minus the three
# leading scalars).
_G_SU = 0
_G_PU1_SU_RX = 1
_G_PU1_SU_TX = 2
_G_PU2_SU_TX = 3
_G_SU_PU1_RX = 4
_G_SU_PU2_RX = 5


class CognitiveRadioEnv:
    """Episodic environment: ``slots_per_episode`` slots per episode, the
    battery reset to its initial level at every reset.

    Consumes the ``channels``, ``pu_power`` and ``ambient`` streams. Per
    slot it draws the eight channel gains and the active primary's
    transmit power regardless of the action taken, so those sequences stay
    aligned across policies and across sweep values run with the same
    seed; ambient energy is drawn only in harvest slots, from its own
    stream.

    Action encoding: index 0 harvests, index ``i >= 1`` transmits at
    ``power_grid()[i - 1]``.
    """

    observation_size = OBSERVATION_SIZE

    def __init__(
        self,
        config: ScenarioConfig,
        streams: dict[str, RandomStream] | None = None,
        seed: int | None = None,
        record_trace: bool = False,
    ) -> None:
        if streams is None:
            if seed is None:
                raise ValueError("provide either derived streams or a seed")
            streams = derive_streams(seed)
        self.config = config
        self._channels = streams["channels"]
        self._pu_power_stream = streams["pu_power"]
        self._ambient = streams["ambient"]
        self._fading = config.fading_rates()
        self._grid = config.power_grid()
        self.record_trace = record_trace
        self.trace: list[tuple] = []
        self.episode = 0
        self._slot = 1
        self._battery = config.battery_initial
        self._harvested_prev = 0.0
        self._gains = np.zeros(8)
        self._pu_power = 0.0
        self._done = True  # force reset() before the first step()

    @property
    def action_count(self) -> int:
        return len(self._grid) + 1

    @property
    def power_grid(self) -> np.ndarray:
        return self._grid

    def decode_action(self, action) -> Action:
        """Map a flat action index (or pass through an :class:`Action`) to
        the harvest/transmit decision, validating it."""
        if isinstance(action, Action):
            decoded = action
        else:
            index = int(action)
            if not 0 <= index < self.action_count:
                raise ValueError(
                    f"action index must lie in 0..{self.action_count - 1}, got {index}"
                )
            decoded = Action(harvest=index == 0, power_index=max(index - 1, 0))
        if not decoded.harvest and not 0 <= decoded.power_index < len(self._grid):
            raise ValueError(
                f"power_index must lie in 0..{len(self._grid) - 1}, "
                f"got {decoded.power_index}"
            )
        return decoded

    def encode_action(self, action: Action) -> int:
        return 0 if action.harvest else 1 + action.power_index

    def _draw_slot(self) -> None:
        # One vectorized draw for the eight gains keeps per-slot stream
        # consumption fixed; inverse-transform keeps it oracle-checkable.
        u = self._channels.generator.random(8)
        self._gains = -np.log1p(-u) / self._fading
        self._pu_power = sample_uniform(
            self._pu_power_stream, 0.0, self.config.pu_power_max
        )

    def _observation(self) -> EnvObservation:
        # After the final slot this yields a placeholder for the
        # non-existent next slot; it is only stored as a terminal
        # next-state and never bootstrapped from.
        nu = 1 if self._slot <= self.config.pu1_slots else 0
        return EnvObservation(
            pu1_active=nu,
            harvested_prev=self._harvested_prev,
            battery=self._battery,
            channels=ChannelDraw(*self._gains),
        )

    def reset(self) -> EnvObservation:
        """Start a fresh episode: battery at its initial level, slot 1,
        fresh channel and primary-power draws, no previous harvest."""
        self.episode += 1
        self._slot = 1
        self._battery = self.config.battery_initial
        self._harvested_prev = 0.0
        self._done = False
        self._draw_slot()
        return self._observation()

    def step(self, action) -> SlotOutcome:
        """Apply one slot's decision and advance.

        Harvest slots credit the captured energy and score zero. Transmit
        slots score the achievable rate if the battery covers the full
        transmit energy and the interference at the active primary's
        receiver stays within tolerance; otherwise nothing is transmitted,
        the battery is untouched and the flat penalty applies (see
        ``penalize_battery_shortfall`` for the battery-only case).
        """
        if self._done:
            raise RuntimeError("episode finished; call reset() first")
        act = self.decode_action(action)
        cfg = self.config
        slot = self._slot
        nu = pu_occupancy(slot, cfg.pu1_slots, cfg.slots_per_episode)
        gains = self._gains
        pu_power = self._pu_power
        if nu:
            threshold = cfg.harvest_threshold_pu1
            efficiency = cfg.harvest_efficiency_pu1
            harvest_gain = gains[_G_PU1_SU_TX]
            cross_gain = gains[_G_SU_PU1_RX]
            interference_limit = cfg.interference_limit_pu1
        else:
            threshold = cfg.harvest_threshold_pu2
            efficiency = cfg.harvest_efficiency_pu2
            harvest_gain = gains[_G_PU2_SU_TX]
            cross_gain = gains[_G_SU_PU2_RX]
            interference_limit = cfg.interference_limit_pu2

        source = harvest_source(pu_power, threshold)
        mu = slot_time_share(source, cfg.ts_fraction)
        battery_before = self._battery
        ts_energy = 0.0
        ambient_energy = 0.0
        harvested = 0.0
        power = 0.0
        violation = False

        if act.harvest:
            ts_energy = ts_harvest_energy(
                cfg.ts_fraction,
                cfg.slot_duration,
                pu_power,
                efficiency,
                harvest_gain,
                source,
            )
            ambient_energy = ambient_harvest_energy(
                self._ambient, cfg.ambient_energy_max
            )
            harvested = ts_energy + ambient_energy
            reward = 0.0
            battery_after = battery_update(
                battery_before,
                True,
                harvested,
                mu,
                0.0,
                cfg.slot_duration,
                cfg.battery_capacity,
            )
        else:
            power = self._grid[act.power_index]
            battery_ok = power * cfg.slot_duration <= battery_before
            interference_ok = power * cross_gain <= interference_limit
            if battery_ok and interference_ok:
                if nu:
                    reward = rate_pu1_active(
                        power,
                        gains[_G_SU],
                        gains[_G_PU1_SU_RX],
                        pu_power,
                        cfg.noise_power,
                        mu,
                        cfg.slot_duration,
                    )
                else:
                    reward = rate_pu2_active(
                        power, gains[_G_SU], cfg.noise_power, mu, cfg.slot_duration
                    )
                battery_after = battery_update(
                    battery_before,
                    False,
                    0.0,
                    mu,
                    power,
                    cfg.slot_duration,
                    cfg.battery_capacity,
                )
            else:
                # Nothing is transmitted and no energy moves.
                violation = True
                if not battery_ok and interference_ok and not cfg.penalize_battery_shortfall:
                    reward = 0.0
                else:
                    reward = -cfg.penalty
                battery_after = battery_before

        info = {
            "slot": slot,
            "nu": nu,
            "kappa": 1 if act.harvest else 0,
            "power": power,
            "mu": mu,
            "source": source,
            "pu_power": pu_power,
            "ts_energy": ts_energy,
            "ambient_energy": ambient_energy,
            "harvested": harvested,
            "violation": violation,
            "battery_before": battery_before,
            "battery_after": battery_after,
        }
        if self.record_trace:
            self.trace.append(
                (
                    self.episode,
                    slot,
                    nu,
                    info["kappa"],
                    power,
                    mu,
                    reward,
                    battery_before,
                    battery_after,
                    ts_energy,
                    ambient_energy,
                    int(violation),
                )
            )

        self._battery = battery_after
        self._harvested_prev = harvested
        self._done = slot >= cfg.slots_per_episode
        self._slot = slot + 1
        self._draw_slot()
        return SlotOutcome(reward, self._observation(), self._done, info)
