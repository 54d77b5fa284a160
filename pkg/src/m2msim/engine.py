"""Discrete-time cell simulator tying channels, device policies and control together.

Time is organised as periods of K slots.  Within a period every slice holds a
fixed block of access RBs; its devices independently sense, plan and access
those RBs slot by slot.  At each period boundary the slice rates are
aggregated and (when enabled) the reallocation controller shifts RBs between
slices and the data pool.

Randomness is split into fixed-rate streams (occupancy, own gains, background
gains, sensing noise, baseline action draws), each consuming the same number
of draws per slot regardless of policy or allocation.  Runs with equal seeds
therefore share channel realisations across policy arms, which keeps paired
comparisons tight, and a repeated run reproduces its output exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import controller as ctrl
from . import pomdp, slicing
from .channel import (BUSY, IDLE, CellTopology, RadioParams, RbMarkov,
                      Timebase, evolve_many)
from .pomdp import ObservationModel, PomdpModel
from .slicing import VirtualNetwork

POLICY_MODES = ("pomdp", "random", "perfect")
SOLVER_MODES = ("auto", "exact", "grid", "myopic")
SWEEP_AXES = ("rbs", "epsilon", "beta", "omega", "mu", "devices")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: CellTopology
    timebase: Timebase
    slices: Tuple[VirtualNetwork, ...]
    radio: RadioParams
    markov: RbMarkov
    obs: ObservationModel
    discount: float
    controller: ctrl.ControllerParams
    controller_enabled: bool = True
    policy_mode: str = "pomdp"
    solver_mode: str = "auto"
    grid_points: int = 101
    sleep_sensing: bool = True
    hard_collision: bool = False
    force_equal_noise: bool = True
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))

    def validate(self) -> None:
        if self.policy_mode not in POLICY_MODES:
            raise ValueError(f"policy_mode must be one of {POLICY_MODES}")
        if self.solver_mode not in SOLVER_MODES:
            raise ValueError(f"solver_mode must be one of {SOLVER_MODES}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not self.slices:
            raise ValueError("at least one slice is required")
        if sum(s.devices for s in self.slices) != self.topology.devices:
            raise ValueError("slice device counts must sum to the cell total")
        if sum(s.access_rbs for s in self.slices) > self.topology.access_rbs:
            raise ValueError("initial slice access RBs exceed the access pool")
        weights = [s.weight for s in self.slices]
        if any(a < b for a, b in zip(weights, weights[1:])):
            raise ValueError("slice weights must be non-increasing")
        if self.force_equal_noise and self.obs.epsilon != self.obs.phi:
            raise ValueError(
                "epsilon and phi differ; set force_equal_noise false to allow that")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass(frozen=True)
class SlotRecord:
    period: int
    slot: int
    slice_id: int
    device: int
    action: int          # 0 sleep, r >= 1 access the slice's r-th RB
    rb_global: int       # pool index of the accessed RB, -1 when sleeping
    rb_state: int        # occupancy of that RB during the slot, -1 when sleeping
    observation: int     # the device's reading of that RB, -1 when sleeping
    rate: float
    reward: float


@dataclass(frozen=True)
class PeriodRow:
    period: int
    slice_id: int
    obtained_rate: float
    filtered_rate: float
    xi: float
    xi_star: float
    gap: float
    delta_raw: float
    delta_applied: int
    access_rbs: int


@dataclass
class RunSummary:
    seed: int
    mean_discounted_reward: float
    final_max_abs_gap: float
    period_rows: List[PeriodRow]
    period_mean_rewards: List[float]   # per-period device mean of the horizon total
    final_allocation: List[int]
    slot_records: List[SlotRecord] = field(default_factory=list)


def planning_rates(radio: RadioParams) -> Tuple[float, float]:
    """Mean-gain planning rates on an idle / busy RB (one busy-source interferer)."""
    p, n = radio.tx_power, radio.noise_power
    idle = radio.bandwidth_per_rb * np.log2(1.0 + p / n)
    busy = radio.bandwidth_per_rb * np.log2(1.0 + p / (radio.effective_busy_power + n))
    return float(idle), float(busy)


class Simulation:
    """One seeded scenario run; use run() or step through run_period()."""

    def __init__(self, config: ScenarioConfig, record_slots: bool = False):
        config.validate()
        self.config = config
        self.record_slots = record_slots
        self.n_devices = config.topology.devices
        self.pool = config.topology.access_rbs
        self.n_slices = len(config.slices)

        seq = np.random.SeedSequence(config.seed)
        (self._state_rng, self._gain_rng, self._bg_rng,
         self._obs_rng, self._policy_rng) = map(np.random.default_rng, seq.spawn(5))

        self.device_slice = np.repeat(np.arange(self.n_slices),
                                      [s.devices for s in config.slices])
        self.slice_of_device = self.device_slice  # alias used by records
        self.allocation = [s.access_rbs for s in config.slices]
        self.weights = np.array([s.weight for s in config.slices], dtype=float)

        stationary = config.markov.stationary_idle()
        self.rb_states = np.where(
            self._state_rng.random(self.pool) < stationary, IDLE, BUSY)

        self.rate_idle, self.rate_busy = planning_rates(config.radio)
        self._slot_weights = np.array(
            [config.discount ** (config.timebase.slots_per_period - 1 - k)
             for k in range(config.timebase.slots_per_period)])

        self.filtered_rates: Optional[np.ndarray] = None
        self.prev_gap = np.zeros(self.n_slices)
        self.period_index = 0
        self.beliefs: Optional[np.ndarray] = None
        self._belief_offsets: Optional[np.ndarray] = None
        self._belief_widths: Optional[np.ndarray] = None

        self.period_rows: List[PeriodRow] = []
        self.period_mean_rewards: List[float] = []
        self.slot_records: List[SlotRecord] = []
        self._final_gap = np.zeros(self.n_slices)

    # -- per-period setup ---------------------------------------------------

    def _solve_policies(self) -> List:
        policies = []
        for r_l in self.allocation:
            model = PomdpModel(
                markov=self.config.markov, obs=self.config.obs,
                horizon=self.config.timebase.slots_per_period,
                discount=self.config.discount,
                rate_idle=np.full(r_l, self.rate_idle),
                rate_busy=np.full(r_l, self.rate_busy),
                sleep_sensing=self.config.sleep_sensing)
            policies.append(pomdp.solve(model, mode=self.config.solver_mode,
                                        grid_points=self.config.grid_points))
        return policies

    def _offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.allocation)[:-1]]).astype(int)

    # -- slot dynamics ------------------------------------------------------

    def run_slot(self, slot: int) -> Dict[str, np.ndarray]:
        """Advance occupancy, let every device act, return the slot outcome."""
        cfg = self.config
        n = self.n_devices
        offsets = self._offsets()[self.device_slice]

        # fixed-rate draws, consumed whether or not they end up used
        state_u = self._state_rng.random(self.pool)
        own_gain = self._gain_rng.standard_normal(n) ** 2
        bg_gain = self._bg_rng.standard_normal(self.pool) ** 2
        obs_u = self._obs_rng.random((n, self.pool))
        policy_u = self._policy_rng.random(n)

        self.rb_states = evolve_many(self.rb_states, cfg.markov, state_u)

        actions = self._choose_actions(slot, policy_u)

        accessing = actions > 0
        local = actions - 1
        rb_global = np.where(accessing, offsets + local, -1)

        p = cfg.radio.tx_power
        power = np.zeros(self.pool + 1)
        np.add.at(power, rb_global[accessing], p * own_gain[accessing])
        count = np.bincount(rb_global[accessing], minlength=self.pool + 1)

        rates = np.zeros(n)
        if np.any(accessing):
            g = rb_global[accessing]
            own = p * own_gain[accessing]
            interference = power[g] - own
            p_busy = cfg.radio.effective_busy_power
            interference += np.where(self.rb_states[g] == BUSY, p_busy * bg_gain[g], 0.0)
            sinr = own / (interference + cfg.radio.noise_power)
            r = cfg.radio.bandwidth_per_rb * np.log2(1.0 + sinr)
            if cfg.hard_collision:
                r = np.where(count[g] > 1, 0.0, r)
            rates[accessing] = r

        rewards = rates  # sleeping devices already sit at zero

        observations = self._sense_and_update(actions, obs_u)

        slice_rates = np.bincount(self.device_slice, weights=rates,
                                  minlength=self.n_slices)

        if self.record_slots:
            self._record(slot, actions, rb_global, rates, rewards, observations)
        return {"rates": rates, "rewards": rewards, "slice_rates": slice_rates,
                "actions": actions}

    def _choose_actions(self, slot: int, policy_u: np.ndarray) -> np.ndarray:
        cfg = self.config
        r_l = np.array(self.allocation)[self.device_slice]
        if cfg.policy_mode == "random":
            return (policy_u * r_l).astype(int) + 1
        if cfg.policy_mode == "perfect":
            # clairvoyant ceiling: devices know the slot's true occupancy and
            # spread uniformly over their slice's idle RBs (all RBs if none idle)
            actions = np.empty(self.n_devices, dtype=int)
            offsets = self._offsets()
            for s in range(self.n_slices):
                block = self.rb_states[offsets[s]:offsets[s] + self.allocation[s]]
                idle = np.flatnonzero(block == IDLE)
                members = self.device_slice == s
                u = policy_u[members]
                if idle.size:
                    actions[members] = idle[(u * idle.size).astype(int)] + 1
                else:
                    actions[members] = (u * block.size).astype(int) + 1
            return actions
        if self._fast_path:
            w = self._slot_weights[slot]
            if w == 0.0:
                return np.zeros(self.n_devices, dtype=int)
            m = pomdp.belief_propagate(self.beliefs, cfg.markov)
            exp_rate = m * self.rate_idle + (1.0 - m) * self.rate_busy
            exp_rate[~self._belief_mask] = -np.inf
            best = np.argmax(exp_rate, axis=1)
            q = exp_rate[np.arange(self.n_devices), best]
            return np.where(q > 0.0, best + 1, 0)
        actions = np.empty(self.n_devices, dtype=int)
        for dev in range(self.n_devices):
            k = int(r_l[dev])
            actions[dev] = self._policies[self.device_slice[dev]].act(
                self.beliefs[dev, :k], slot)
        return actions

    def _sense_and_update(self, actions: np.ndarray, obs_u: np.ndarray) -> np.ndarray:
        """Per-device noisy readings of their slice's RBs, then Bayes step."""
        cfg = self.config
        n = self.n_devices
        offsets = self._offsets()[self.device_slice]
        width = self.beliefs.shape[1]
        cols = offsets[:, None] + np.arange(width)[None, :]
        cols = np.minimum(cols, self.pool - 1)      # masked columns read garbage safely
        truth = self.rb_states[cols]

        flip = np.full((n, width), cfg.obs.phi)
        acc = actions > 0
        flip[acc, actions[acc] - 1] = cfg.obs.epsilon
        flipped = obs_u[:, :width] < flip
        theta = np.where(flipped, 1 - truth, truth)
        trust = np.minimum(flip, 0.5)   # worse-than-chance readings carry no evidence

        heard = self._belief_mask.copy()
        if not cfg.sleep_sensing:
            heard[:] = False
            heard[acc, actions[acc] - 1] = True

        m = pomdp.belief_propagate(self.beliefs, cfg.markov)
        saw_idle = theta == IDLE
        like_idle = np.where(saw_idle, 1.0 - trust, trust)
        like_busy = np.where(saw_idle, trust, 1.0 - trust)
        denom = m * like_idle + (1.0 - m) * like_busy
        # a zero-likelihood reading cannot steer the belief; fall back to the prior
        posterior = np.where(denom > 0.0, m * like_idle / np.where(denom > 0, denom, 1.0), m)
        self.beliefs = np.where(heard, posterior, m)
        self.beliefs[~self._belief_mask] = 0.0
        return theta

    def _record(self, slot, actions, rb_global, rates, rewards, theta):
        cfg = self.config
        for dev in range(self.n_devices):
            a = int(actions[dev])
            g = int(rb_global[dev])
            self.slot_records.append(SlotRecord(
                period=self.period_index, slot=slot,
                slice_id=cfg.slices[self.device_slice[dev]].slice_id,
                device=dev, action=a, rb_global=g,
                rb_state=int(self.rb_states[g]) if a > 0 else -1,
                observation=int(theta[dev, a - 1]) if a > 0 else -1,
                rate=float(rates[dev]), reward=float(rewards[dev])))

    def _rebuild_beliefs(self) -> None:
        """Lay out per-device beliefs for the current allocation.

        Knowledge persists across periods: an RB that stays inside the
        device's slice block keeps its belief (tracked by pool index), RBs the
        slice just gained start at the stationary idle probability.
        """
        cfg = self.config
        width = max(self.allocation)
        stationary = cfg.markov.stationary_idle()
        r_l = np.array(self.allocation)[self.device_slice]
        offsets = self._offsets()[self.device_slice]
        self._belief_mask = np.arange(width)[None, :] < r_l[:, None]

        fresh = np.where(self._belief_mask, stationary, 0.0)
        if self.beliefs is not None:
            cols_global = offsets[:, None] + np.arange(width)[None, :]
            old_local = cols_global - self._belief_offsets[:, None]
            carried = (self._belief_mask
                       & (old_local >= 0)
                       & (old_local < self._belief_widths[:, None]))
            gather = np.take_along_axis(
                self.beliefs, np.clip(old_local, 0, self.beliefs.shape[1] - 1),
                axis=1)
            fresh = np.where(carried, gather, fresh)
        self.beliefs = fresh
        self._belief_offsets = offsets
        self._belief_widths = r_l

    # -- period dynamics ----------------------------------------------------

    def run_period(self) -> List[PeriodRow]:
        cfg = self.config
        self.period_index += 1
        k_slots = cfg.timebase.slots_per_period

        self._rebuild_beliefs()
        self._policies = None
        self._fast_path = (cfg.policy_mode == "pomdp"
                           and cfg.solver_mode in ("auto", "myopic")
                           and cfg.obs.trusted_epsilon == cfg.obs.trusted_phi
                           and cfg.sleep_sensing)
        if cfg.policy_mode == "pomdp" and not self._fast_path:
            self._policies = self._solve_policies()

        slot_totals = np.zeros((k_slots, self.n_slices))
        device_rewards = np.zeros((self.n_devices, k_slots))
        for k in range(k_slots):
            out = self.run_slot(k)
            slot_totals[k] = out["slice_rates"]
            device_rewards[:, k] = out["rewards"]

        horizon_totals = device_rewards @ self._slot_weights
        self.period_mean_rewards.append(float(horizon_totals.mean()))

        obtained = np.array([slicing.period_average_rate(slot_totals[:, s], cfg.timebase)
                             for s in range(self.n_slices)])
        xi, xi_star, gap = slicing.ratios(obtained, self.weights)
        self._final_gap = gap

        raw = np.zeros(self.n_slices)
        applied = np.zeros(self.n_slices, dtype=int)
        if self.filtered_rates is None:
            # warm-up: seed the filter, leave the allocation alone
            self.filtered_rates = obtained.copy()
            self.prev_gap = np.zeros(self.n_slices)
        else:
            self.filtered_rates = ctrl.smooth(self.filtered_rates, obtained,
                                              cfg.controller.omega)
            if cfg.controller_enabled:
                q_sum = float(self.filtered_rates.sum())
                if q_sum > 0.0:
                    xi_f = self.filtered_rates / q_sum
                    gap_f = xi_star - xi_f
                    raw = ctrl.delta_rbs(gap_f, self.prev_gap, q_sum, cfg.controller)
                    new_alloc = ctrl.apply_allocation(self.allocation, raw,
                                                      cfg.topology)
                    applied = np.array(new_alloc) - np.array(self.allocation)
                    self.allocation = new_alloc
                    self.prev_gap = gap_f

        rows = [PeriodRow(
            period=self.period_index, slice_id=cfg.slices[s].slice_id,
            obtained_rate=float(obtained[s]),
            filtered_rate=float(self.filtered_rates[s]),
            xi=float(xi[s]), xi_star=float(xi_star[s]), gap=float(gap[s]),
            delta_raw=float(raw[s]), delta_applied=int(applied[s]),
            access_rbs=int(self.allocation[s])) for s in range(self.n_slices)]
        self.period_rows.extend(rows)
        return rows

    def run(self) -> RunSummary:
        for _ in range(self.config.timebase.periods):
            self.run_period()
        return RunSummary(
            seed=self.config.seed,
            mean_discounted_reward=float(np.mean(self.period_mean_rewards)),
            final_max_abs_gap=float(np.max(np.abs(self._final_gap))),
            period_rows=self.period_rows,
            period_mean_rewards=self.period_mean_rewards,
            final_allocation=list(self.allocation),
            slot_records=self.slot_records)


def run_simulation(config: ScenarioConfig, record_slots: bool = False) -> RunSummary:
    return Simulation(config, record_slots=record_slots).run()


# ---------------------------------------------------------------------------
# parameter sweeps

@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    seed: int
    summary: RunSummary


def with_axis_value(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "rbs":
        budget = int(value)
        slices = tuple(dataclasses.replace(s, access_rbs=budget)
                       for s in config.slices)
        return dataclasses.replace(config, slices=slices)
    if axis == "epsilon":
        return dataclasses.replace(
            config, obs=ObservationModel(float(value), float(value)))
    if axis == "beta":
        return dataclasses.replace(config, discount=float(value))
    if axis == "omega":
        return dataclasses.replace(
            config, controller=ctrl.ControllerParams(float(value), config.controller.mu))
    if axis == "mu":
        return dataclasses.replace(
            config, controller=ctrl.ControllerParams(config.controller.omega, float(value)))
    if axis == "devices":
        total = int(value)
        if total < len(config.slices):
            raise ValueError("devices axis value must cover one device per slice")
        current = np.array([s.devices for s in config.slices], dtype=float)
        share = current * total / current.sum()
        counts = np.floor(share).astype(int)
        counts = np.maximum(counts, 1)
        order = np.argsort(-(share - counts), kind="stable")
        i = 0
        while counts.sum() < total:
            counts[order[i % len(order)]] += 1
            i += 1
        while counts.sum() > total:
            j = order[::-1][i % len(order)]
            if counts[j] > 1:
                counts[j] -= 1
            i += 1
        slices = tuple(dataclasses.replace(s, devices=int(c))
                       for s, c in zip(config.slices, counts))
        topo = dataclasses.replace(config.topology, devices=total)
        return dataclasses.replace(config, slices=slices, topology=topo)
    raise ValueError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")


def run_sweep(config: ScenarioConfig, axis: str, values: Sequence[float],
              seeds: Sequence[int]) -> List[SweepRow]:
    """Run the scenario across an axis with every seed; rows keyed (value, seed)."""
    rows = []
    for value in values:
        variant = with_axis_value(config, axis, value)
        for seed in seeds:
            cfg = dataclasses.replace(variant, seed=int(seed))
            rows.append(SweepRow(axis=axis, axis_value=float(value), seed=int(seed),
                                 summary=run_simulation(cfg)))
    return rows


def aggregate_sweep(rows: Sequence[SweepRow]) -> List[Tuple[float, float, float]]:
    """Per axis value: (value, mean reward, standard error over seeds)."""
    by_value: Dict[float, List[float]] = {}
    for row in rows:
        by_value.setdefault(row.axis_value, []).append(
            row.summary.mean_discounted_reward)
    out = []
    for value in sorted(by_value):
        vals = np.array(by_value[value])
        stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append((value, float(vals.mean()), stderr))
    return out
