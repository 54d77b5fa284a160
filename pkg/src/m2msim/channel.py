"""Physical-layer primitives: slotted two-state resource blocks and Shannon rates.

Each resource block (RB) is an independent two-state Markov chain over
{idle, busy} that steps once per slot.  A transmitting device sees a
chi-square fading power gain (squared unit normal, mean 1) and achieves a
Shannon rate against the summed interference it experiences on its RB.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

IDLE = 0
BUSY = 1


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class Timebase:
    """Slot/period clock: a period is slots_per_period slots of slot_duration seconds."""

    slot_duration: float
    slots_per_period: int
    periods: int

    def __post_init__(self):
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be positive")
        if self.slots_per_period < 1:
            raise ValueError("slots_per_period must be >= 1")
        if self.periods < 1:
            raise ValueError("periods must be >= 1")

    @property
    def period_duration(self) -> float:
        return self.slot_duration * self.slots_per_period


@dataclass(frozen=True)
class RbMarkov:
    """Per-slot RB occupancy transition probabilities (rows sum to 1)."""

    p_idle_idle: float
    p_idle_busy: float
    p_busy_idle: float
    p_busy_busy: float

    def __post_init__(self):
        for name in ("p_idle_idle", "p_idle_busy", "p_busy_idle", "p_busy_busy"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if abs(self.p_idle_idle + self.p_idle_busy - 1.0) > 1e-12:
            raise ValueError("idle row must sum to 1")
        if abs(self.p_busy_idle + self.p_busy_busy - 1.0) > 1e-12:
            raise ValueError("busy row must sum to 1")

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.p_idle_idle, self.p_idle_busy],
             [self.p_busy_idle, self.p_busy_busy]]
        )

    def stationary_idle(self) -> float:
        """Long-run idle occupancy; requires the chain to actually move."""
        denom = self.p_idle_busy + self.p_busy_idle
        if denom == 0.0:
            raise ValueError("chain has two absorbing states, no unique stationary law")
        return self.p_busy_idle / denom


@dataclass(frozen=True)
class RadioParams:
    """Link-level constants shared by every RB.

    bandwidth_per_rb: Hz carried by one RB.
    tx_power: device transmit power in watts (already converted from dBm).
    noise_power: receiver noise power in watts.
    busy_power: received power of the exogenous occupant of a busy RB; None
    means it transmits like a device (tx_power).
    """

    bandwidth_per_rb: float
    tx_power: float
    noise_power: float
    busy_power: Optional[float] = None

    def __post_init__(self):
        if self.bandwidth_per_rb <= 0:
            raise ValueError("bandwidth_per_rb must be positive")
        if self.tx_power < 0:
            raise ValueError("tx_power must be non-negative")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.busy_power is not None and self.busy_power < 0:
            raise ValueError("busy_power must be non-negative")

    @property
    def effective_busy_power(self) -> float:
        return self.tx_power if self.busy_power is None else self.busy_power


@dataclass(frozen=True)
class CellTopology:
    """Cell-wide RB budget split into a random-access pool and a data pool."""

    total_rbs: int
    access_rbs: int
    data_rbs: int
    devices: int

    def __post_init__(self):
        if self.access_rbs < 1:
            raise ValueError("access_rbs must be >= 1")
        if self.data_rbs < 0:
            raise ValueError("data_rbs must be >= 0")
        if self.access_rbs + self.data_rbs != self.total_rbs:
            raise ValueError("access_rbs + data_rbs must equal total_rbs")
        if self.devices < 1:
            raise ValueError("devices must be >= 1")


def evolve_rb(state: int, markov: RbMarkov, rng: np.random.Generator) -> int:
    """Draw the next occupancy state of one RB."""
    if state == IDLE:
        return IDLE if rng.random() < markov.p_idle_idle else BUSY
    return IDLE if rng.random() < markov.p_busy_idle else BUSY


def evolve_many(states: np.ndarray, markov: RbMarkov, uniforms: np.ndarray) -> np.ndarray:
    """Vectorised evolve_rb: one uniform draw per RB, supplied by the caller."""
    p_idle = np.where(states == IDLE, markov.p_idle_idle, markov.p_busy_idle)
    return np.where(uniforms < p_idle, IDLE, BUSY)


def sample_gain(rng: np.random.Generator) -> float:
    """Fading power gain: square of a unit normal amplitude, mean 1."""
    g = rng.standard_normal()
    return g * g


def rate(own_gain: float,
         interferers: Iterable[Tuple[float, float]],
         params: RadioParams) -> float:
    """Shannon rate in bit/s for one device on one RB.

    interferers is a list of (tx_power, gain) pairs received on the same RB;
    an empty list is the clean-channel case.  The same expression covers both:
    the denominator is noise plus the summed interference power.
    """
    if own_gain < 0:
        raise ValueError("own_gain must be non-negative")
    interference = 0.0
    for power, gain in interferers:
        if power < 0 or gain < 0:
            raise ValueError("interferer power and gain must be non-negative")
        interference += power * gain
    sinr = params.tx_power * own_gain / (interference + params.noise_power)
    return params.bandwidth_per_rb * np.log2(1.0 + sinr)
