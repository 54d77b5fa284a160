"""Shared scenario builders for the test suite."""

import dataclasses

from m2msim.channel import CellTopology, RadioParams, RbMarkov, Timebase
from m2msim.controller import ControllerParams
from m2msim.engine import ScenarioConfig
from m2msim.pomdp import ObservationModel
from m2msim.slicing import VirtualNetwork

PINNED_MARKOV = RbMarkov(0.9, 0.1, 0.95, 0.05)


def small_radio(noise: float = 0.02, busy=None) -> RadioParams:
    return RadioParams(bandwidth_per_rb=1.8e5, tx_power=0.1,
                       noise_power=noise, busy_power=busy)


def tiny_config(**overrides) -> ScenarioConfig:
    """One slice, three devices, two RBs; cheap enough for exact solving."""
    base = dict(
        topology=CellTopology(total_rbs=2, access_rbs=2, data_rbs=0, devices=3),
        timebase=Timebase(slot_duration=1e-3, slots_per_period=3, periods=2),
        slices=(VirtualNetwork(slice_id=1, devices=3, access_rbs=2,
                               data_rbs=0, weight=1.0),),
        radio=small_radio(),
        markov=PINNED_MARKOV,
        obs=ObservationModel.symmetric(0.1),
        discount=0.9,
        controller=ControllerParams(omega=0.8, mu=9e5),
        controller_enabled=False,
        seed=1)
    base.update(overrides)
    return ScenarioConfig(**base)


def paired(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    return dataclasses.replace(cfg, **overrides)
