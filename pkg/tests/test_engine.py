import dataclasses

import numpy as np
import pytest

from conftest import PINNED_MARKOV, paired, small_radio, tiny_config
from m2msim.channel import BUSY, IDLE, CellTopology, Timebase
from m2msim.controller import ControllerParams
from m2msim.engine import (ScenarioConfig, Simulation, aggregate_sweep,
                           planning_rates, run_simulation, run_sweep,
                           with_axis_value)
from m2msim.pomdp import ObservationModel
from m2msim.slicing import VirtualNetwork


def test_planning_rates_formula():
    radio = small_radio(noise=0.02)
    idle, busy = planning_rates(radio)
    assert idle == pytest.approx(1.8e5 * np.log2(1 + 0.1 / 0.02), rel=1e-12)
    assert busy == pytest.approx(1.8e5 * np.log2(1 + 0.1 / 0.12), rel=1e-12)
    loud = small_radio(noise=0.02, busy=0.5)
    assert planning_rates(loud)[1] == pytest.approx(
        1.8e5 * np.log2(1 + 0.1 / 0.52), rel=1e-12)


def test_two_devices_interfere_on_shared_rb():
    """Hand-recompute one slot from the run's own random streams."""
    cfg = tiny_config(
        topology=CellTopology(total_rbs=1, access_rbs=1, data_rbs=0, devices=2),
        slices=(VirtualNetwork(slice_id=1, devices=2, access_rbs=1,
                               data_rbs=0, weight=1.0),),
        timebase=Timebase(slot_duration=1e-3, slots_per_period=1, periods=1),
        policy_mode="random", discount=1.0, seed=42)
    summary = run_simulation(cfg, record_slots=True)

    seq = np.random.SeedSequence(42).spawn(5)
    state_rng, gain_rng, bg_rng = map(np.random.default_rng, seq[:3])
    start = np.where(state_rng.random(1) < PINNED_MARKOV.stationary_idle(),
                     IDLE, BUSY)
    state_u = state_rng.random(1)
    own = gain_rng.standard_normal(2) ** 2
    bg = bg_rng.standard_normal(1) ** 2
    p_idle = PINNED_MARKOV.p_idle_idle if start[0] == IDLE else PINNED_MARKOV.p_busy_idle
    state = IDLE if state_u[0] < p_idle else BUSY

    p, noise = cfg.radio.tx_power, cfg.radio.noise_power
    extra = p * bg[0] if state == BUSY else 0.0
    expected = [
        cfg.radio.bandwidth_per_rb
        * np.log2(1 + p * own[i] / (p * own[1 - i] + extra + noise))
        for i in range(2)]

    by_device = {r.device: r for r in summary.slot_records}
    assert all(by_device[i].action == 1 for i in range(2))
    for i in range(2):
        assert by_device[i].rb_state == state
        assert by_device[i].rate == pytest.approx(expected[i], rel=1e-12)
        assert by_device[i].reward == by_device[i].rate


def test_single_rb_budget_admits_no_choice():
    cfg = tiny_config(
        topology=CellTopology(total_rbs=1, access_rbs=1, data_rbs=0, devices=3),
        slices=(VirtualNetwork(slice_id=1, devices=3, access_rbs=1,
                               data_rbs=0, weight=1.0),),
        seed=9)
    informed = run_simulation(cfg)
    blind = run_simulation(paired(cfg, policy_mode="random"))
    assert informed.mean_discounted_reward == blind.mean_discounted_reward


def test_repeated_runs_are_identical():
    cfg = tiny_config(controller_enabled=True, seed=5)
    a, b = run_simulation(cfg, record_slots=True), run_simulation(cfg, record_slots=True)
    assert a.period_rows == b.period_rows
    assert a.slot_records == b.slot_records
    assert a.mean_discounted_reward == b.mean_discounted_reward


def test_policy_arms_share_channel_randomness():
    cfg = tiny_config(seed=3)
    sims = [Simulation(paired(cfg, policy_mode=mode))
            for mode in ("pomdp", "random", "perfect")]
    for _ in range(2):
        for sim in sims:
            sim.run_period()
        for sim in sims[1:]:
            assert np.array_equal(sims[0].rb_states, sim.rb_states)


def test_share_errors_cancel_and_pools_conserve():
    cfg = tiny_config(
        topology=CellTopology(total_rbs=6, access_rbs=4, data_rbs=2, devices=6),
        slices=(VirtualNetwork(slice_id=1, devices=4, access_rbs=2,
                               data_rbs=0, weight=2.0),
                VirtualNetwork(slice_id=2, devices=2, access_rbs=2,
                               data_rbs=0, weight=1.0)),
        timebase=Timebase(slot_duration=1e-3, slots_per_period=5, periods=6),
        controller_enabled=True, seed=2)
    summary = run_simulation(cfg)
    assert cfg.topology.access_rbs + cfg.topology.data_rbs == cfg.topology.total_rbs
    by_period = {}
    for row in summary.period_rows:
        by_period.setdefault(row.period, []).append(row)
    for rows in by_period.values():
        assert abs(sum(r.gap for r in rows)) < 1e-12
        total = sum(r.access_rbs for r in rows)
        assert total <= cfg.topology.access_rbs
        assert all(r.access_rbs >= 1 for r in rows)


def test_warmup_period_only_seeds_the_filter():
    cfg = tiny_config(controller_enabled=True, seed=4)
    summary = run_simulation(cfg)
    first = [r for r in summary.period_rows if r.period == 1]
    for row in first:
        assert row.delta_applied == 0
        assert row.delta_raw == 0.0
        assert row.filtered_rate == row.obtained_rate


def test_disabled_controller_freezes_allocation():
    cfg = tiny_config(
        topology=CellTopology(total_rbs=4, access_rbs=4, data_rbs=0, devices=6),
        slices=(VirtualNetwork(slice_id=1, devices=4, access_rbs=2,
                               data_rbs=0, weight=2.0),
                VirtualNetwork(slice_id=2, devices=2, access_rbs=2,
                               data_rbs=0, weight=1.0)),
        timebase=Timebase(slot_duration=1e-3, slots_per_period=4, periods=5),
        controller_enabled=False, seed=6)
    summary = run_simulation(cfg)
    for row in summary.period_rows:
        assert row.access_rbs == 2
        assert row.delta_applied == 0


def test_greedy_fast_path_matches_exact_planner():
    cfg = tiny_config(seed=11, solver_mode="auto")
    slow = paired(cfg, solver_mode="exact")
    fast_summary = run_simulation(cfg, record_slots=True)
    slow_summary = run_simulation(slow, record_slots=True)
    fast_actions = [(r.period, r.slot, r.device, r.action)
                    for r in fast_summary.slot_records]
    slow_actions = [(r.period, r.slot, r.device, r.action)
                    for r in slow_summary.slot_records]
    assert fast_actions == slow_actions
    assert fast_summary.mean_discounted_reward == slow_summary.mean_discounted_reward


def test_belief_carry_over_follows_pool_indices():
    cfg = tiny_config(
        topology=CellTopology(total_rbs=4, access_rbs=4, data_rbs=0, devices=2),
        slices=(VirtualNetwork(slice_id=1, devices=1, access_rbs=2,
                               data_rbs=0, weight=2.0),
                VirtualNetwork(slice_id=2, devices=1, access_rbs=2,
                               data_rbs=0, weight=1.0)),
        seed=1)
    sim = Simulation(cfg)
    sim._rebuild_beliefs()
    sim.beliefs = np.array([[0.11, 0.22], [0.33, 0.44]])
    # slice 1 grows to 3 RBs: slice 2's block shifts from pool RBs (2,3) to (3,)
    sim.allocation = [3, 1]
    sim._rebuild_beliefs()
    stationary = cfg.markov.stationary_idle()
    assert np.allclose(sim.beliefs[0], [0.11, 0.22, stationary])
    # the surviving RB of slice 2 is pool index 3, previously local index 1
    assert sim.beliefs[1][0] == 0.44
    assert not sim._belief_mask[1][1] and not sim._belief_mask[1][2]


def test_sleeping_devices_record_no_channel():
    cfg = tiny_config(discount=0.0, seed=8)  # zero weight on early slots
    summary = run_simulation(cfg, record_slots=True)
    early = [r for r in summary.slot_records if r.slot < 2]
    assert early and all(r.action == 0 for r in early)
    assert all(r.rb_global == -1 and r.rb_state == -1 and r.observation == -1
               and r.rate == 0.0 for r in early)


def test_clairvoyant_arm_upper_bounds_informed_arm():
    cfg = tiny_config(
        topology=CellTopology(total_rbs=3, access_rbs=3, data_rbs=0, devices=4),
        slices=(VirtualNetwork(slice_id=1, devices=4, access_rbs=3,
                               data_rbs=0, weight=1.0),),
        timebase=Timebase(slot_duration=1e-3, slots_per_period=6, periods=4))
    diffs = []
    for seed in range(1, 9):
        ceiling = run_simulation(paired(cfg, policy_mode="perfect", seed=seed))
        informed = run_simulation(paired(cfg, seed=seed))
        diffs.append(ceiling.mean_discounted_reward
                     - informed.mean_discounted_reward)
    assert np.mean(diffs) >= 0.0


class TestScenarioValidation:
    def test_device_counts_must_sum(self):
        with pytest.raises(ValueError, match="sum"):
            tiny_config(topology=CellTopology(total_rbs=2, access_rbs=2,
                                              data_rbs=0, devices=5)).validate()

    def test_weights_must_be_non_increasing(self):
        with pytest.raises(ValueError, match="non-increasing"):
            tiny_config(
                topology=CellTopology(total_rbs=4, access_rbs=4, data_rbs=0,
                                      devices=2),
                slices=(VirtualNetwork(slice_id=1, devices=1, access_rbs=2,
                                       data_rbs=0, weight=1.0),
                        VirtualNetwork(slice_id=2, devices=1, access_rbs=2,
                                       data_rbs=0, weight=2.0))).validate()

    def test_unequal_noise_needs_opt_in(self):
        with pytest.raises(ValueError, match="force_equal_noise"):
            tiny_config(obs=ObservationModel(0.1, 0.3)).validate()
        cfg = tiny_config(obs=ObservationModel(0.1, 0.3),
                          force_equal_noise=False)
        cfg.validate()

    def test_slice_budgets_respect_pool(self):
        with pytest.raises(ValueError, match="pool"):
            tiny_config(
                slices=(VirtualNetwork(slice_id=1, devices=3, access_rbs=3,
                                       data_rbs=0, weight=1.0),)).validate()


class TestSweeps:
    base = tiny_config(
        topology=CellTopology(total_rbs=4, access_rbs=4, data_rbs=0, devices=6),
        slices=(VirtualNetwork(slice_id=1, devices=4, access_rbs=2,
                               data_rbs=0, weight=2.0),
                VirtualNetwork(slice_id=2, devices=2, access_rbs=2,
                               data_rbs=0, weight=1.0)))

    def test_rbs_axis_sets_every_slice(self):
        v = with_axis_value(self.base, "rbs", 1)
        assert all(s.access_rbs == 1 for s in v.slices)

    def test_epsilon_axis_sets_both_flip_rates(self):
        v = with_axis_value(self.base, "epsilon", 0.4)
        assert v.obs.epsilon == 0.4 and v.obs.phi == 0.4

    def test_scalar_axes(self):
        assert with_axis_value(self.base, "beta", 0.5).discount == 0.5
        assert with_axis_value(self.base, "omega", 0.6).controller.omega == 0.6
        assert with_axis_value(self.base, "mu", 3.0).controller.mu == 3.0

    def test_devices_axis_rescales_proportionally(self):
        v = with_axis_value(self.base, "devices", 12)
        assert v.topology.devices == 12
        assert sum(s.devices for s in v.slices) == 12
        assert v.slices[0].devices == 8 and v.slices[1].devices == 4
        tiny = with_axis_value(self.base, "devices", 2)
        assert all(s.devices == 1 for s in tiny.slices)

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValueError, match="axis"):
            with_axis_value(self.base, "banana", 1)

    def test_sweep_rows_and_aggregate(self):
        rows = run_sweep(self.base, "rbs", [1, 2], seeds=[1, 2, 3])
        assert [(r.axis_value, r.seed) for r in rows] == [
            (1.0, 1), (1.0, 2), (1.0, 3), (2.0, 1), (2.0, 2), (2.0, 3)]
        agg = aggregate_sweep(rows)
        assert [a[0] for a in agg] == [1.0, 2.0]
        vals = [r.summary.mean_discounted_reward for r in rows[:3]]
        assert agg[0][1] == pytest.approx(np.mean(vals), rel=1e-12)
        assert agg[0][2] == pytest.approx(
            np.std(vals, ddof=1) / np.sqrt(3), rel=1e-12)
