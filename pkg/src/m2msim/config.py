"""Scenario files: schema-checked YAML with dotted-path overrides and profiles.

A scenario document maps one-to-one onto ScenarioConfig.  Loading is strict:
unknown keys are rejected (with a spelling hint), required keys must be
present, and every range violation is reported with the dotted path of the
offending key.  Shipped profiles live next to the package and are addressed
by name ("five-slice", "two-slice") wherever a file path is accepted.
"""

from __future__ import annotations

import copy
import difflib
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from .channel import CellTopology, RadioParams, RbMarkov, Timebase, dbm_to_watts
from .controller import ControllerParams
from .engine import POLICY_MODES, SOLVER_MODES, ScenarioConfig
from .pomdp import ObservationModel
from .slicing import VirtualNetwork


class ConfigError(ValueError):
    """Invalid scenario document; `path` names the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


_MISSING = object()


def _join(path: str, key: Any) -> str:
    return f"{path}.{key}" if path else str(key)


def _as_float(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError
    return float(value)


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError
    return int(value)


def _as_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError
    return value


def _as_str(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError
    return value


_KIND_NAMES = {_as_float: "a number", _as_int: "an integer",
               _as_bool: "a boolean", _as_str: "a string"}


def _get(section: Mapping, key: str, path: str, kind, default=_MISSING):
    if key not in section:
        if default is not _MISSING:
            return default
        raise ConfigError(_join(path, key), "required key is missing")
    try:
        return kind(section[key])
    except TypeError:
        raise ConfigError(_join(path, key),
                          f"expected {_KIND_NAMES[kind]}, got {section[key]!r}") from None


def _optional_float(section: Mapping, key: str, path: str) -> Optional[float]:
    if key not in section or section[key] is None:
        return None
    return _get(section, key, path, _as_float)


def _section(doc: Mapping, key: str, path: str = "") -> Mapping:
    if key not in doc:
        raise ConfigError(_join(path, key), "required section is missing")
    value = doc[key]
    if not isinstance(value, Mapping):
        raise ConfigError(_join(path, key), "expected a key/value section")
    return value


def _reject_unknown(section: Mapping, allowed: Sequence[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(str(key), list(allowed), n=1)
            detail = (f"unknown key (did you mean {hint[0]!r}?)" if hint else
                      f"unknown key; known keys: {', '.join(sorted(allowed))}")
            raise ConfigError(_join(path, str(key)), detail)


def _unit_interval(value: float, path: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(path, f"must lie in [0, 1], got {value}")
    return value


def _construct(factory, kwargs: Dict[str, Any], path: str):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


# -- section builders -------------------------------------------------------

def _build_topology(doc: Mapping) -> CellTopology:
    sec = _section(doc, "topology")
    keys = ("total_rbs", "access_rbs", "data_rbs", "devices")
    _reject_unknown(sec, keys, "topology")
    return _construct(CellTopology,
                      {k: _get(sec, k, "topology", _as_int) for k in keys},
                      "topology")


def _build_timebase(doc: Mapping) -> Timebase:
    sec = _section(doc, "timebase")
    _reject_unknown(sec, ("slot_duration", "slots_per_period", "periods"), "timebase")
    return _construct(Timebase, {
        "slot_duration": _get(sec, "slot_duration", "timebase", _as_float),
        "slots_per_period": _get(sec, "slots_per_period", "timebase", _as_int),
        "periods": _get(sec, "periods", "timebase", _as_int),
    }, "timebase")


def _build_slices(doc: Mapping) -> Tuple[VirtualNetwork, ...]:
    if "slices" not in doc:
        raise ConfigError("slices", "required section is missing")
    raw = doc["slices"]
    if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes, Mapping)):
        raise ConfigError("slices", "expected a list of slice sections")
    if not raw:
        raise ConfigError("slices", "at least one slice is required")
    out = []
    for i, item in enumerate(raw):
        path = f"slices.{i}"
        if not isinstance(item, Mapping):
            raise ConfigError(path, "expected a key/value section")
        _reject_unknown(item, ("slice_id", "devices", "access_rbs",
                               "data_rbs", "weight"), path)
        out.append(_construct(VirtualNetwork, {
            "slice_id": _get(item, "slice_id", path, _as_int),
            "devices": _get(item, "devices", path, _as_int),
            "access_rbs": _get(item, "access_rbs", path, _as_int),
            "data_rbs": _get(item, "data_rbs", path, _as_int, 0),
            "weight": _get(item, "weight", path, _as_float),
        }, path))
    return tuple(out)


def _build_radio(doc: Mapping) -> RadioParams:
    sec = _section(doc, "radio")
    _reject_unknown(sec, ("bandwidth_per_rb", "tx_power", "tx_power_dbm",
                          "noise_power", "busy_power"), "radio")
    watts = _optional_float(sec, "tx_power", "radio")
    dbm = _optional_float(sec, "tx_power_dbm", "radio")
    if (watts is None) == (dbm is None):
        raise ConfigError("radio",
                          "give exactly one of tx_power (watts) or tx_power_dbm")
    return _construct(RadioParams, {
        "bandwidth_per_rb": _get(sec, "bandwidth_per_rb", "radio", _as_float),
        "tx_power": watts if watts is not None else dbm_to_watts(dbm),
        "noise_power": _get(sec, "noise_power", "radio", _as_float),
        "busy_power": _optional_float(sec, "busy_power", "radio"),
    }, "radio")


def _build_markov(doc: Mapping) -> RbMarkov:
    sec = _section(doc, "markov")
    names = ("idle_to_idle", "idle_to_busy", "busy_to_idle", "busy_to_busy")
    _reject_unknown(sec, names, "markov")
    values = {n: _unit_interval(_get(sec, n, "markov", _as_float),
                                _join("markov", n)) for n in names}
    return _construct(RbMarkov, {
        "p_idle_idle": values["idle_to_idle"],
        "p_idle_busy": values["idle_to_busy"],
        "p_busy_idle": values["busy_to_idle"],
        "p_busy_busy": values["busy_to_busy"],
    }, "markov")


def _build_observation(doc: Mapping) -> Tuple[ObservationModel, bool, bool]:
    sec = _section(doc, "observation")
    _reject_unknown(sec, ("epsilon", "phi", "sleep_sensing",
                          "force_equal_noise"), "observation")
    eps = _unit_interval(_get(sec, "epsilon", "observation", _as_float),
                         "observation.epsilon")
    phi = _unit_interval(_get(sec, "phi", "observation", _as_float, eps),
                         "observation.phi")
    return (ObservationModel(epsilon=eps, phi=phi),
            _get(sec, "sleep_sensing", "observation", _as_bool, True),
            _get(sec, "force_equal_noise", "observation", _as_bool, True))


def _build_policy(doc: Mapping) -> Tuple[str, str, int, float]:
    sec = _section(doc, "policy")
    _reject_unknown(sec, ("mode", "solver", "grid_points", "discount"), "policy")
    mode = _get(sec, "mode", "policy", _as_str, "pomdp")
    if mode not in POLICY_MODES:
        raise ConfigError("policy.mode",
                          f"must be one of {', '.join(POLICY_MODES)}; got {mode!r}")
    solver = _get(sec, "solver", "policy", _as_str, "auto")
    if solver not in SOLVER_MODES:
        raise ConfigError("policy.solver",
                          f"must be one of {', '.join(SOLVER_MODES)}; got {solver!r}")
    grid_points = _get(sec, "grid_points", "policy", _as_int, 101)
    if grid_points < 2:
        raise ConfigError("policy.grid_points", f"must be >= 2, got {grid_points}")
    discount = _unit_interval(_get(sec, "discount", "policy", _as_float),
                              "policy.discount")
    return mode, solver, grid_points, discount


def _build_controller(doc: Mapping) -> ControllerParams:
    sec = _section(doc, "controller")
    _reject_unknown(sec, ("omega", "mu"), "controller")
    return _construct(ControllerParams, {
        "omega": _get(sec, "omega", "controller", _as_float),
        "mu": _get(sec, "mu", "controller", _as_float),
    }, "controller")


_TOP_KEYS = ("topology", "timebase", "slices", "radio", "markov", "observation",
             "policy", "controller", "controller_enabled", "hard_collision",
             "seed")


def build_config(doc: Mapping) -> ScenarioConfig:
    """Turn a parsed scenario document into a validated ScenarioConfig."""
    if not isinstance(doc, Mapping):
        raise ConfigError("", "top level must be a key/value document")
    _reject_unknown(doc, _TOP_KEYS, "")
    obs, sleep_sensing, force_equal = _build_observation(doc)
    mode, solver, grid_points, discount = _build_policy(doc)
    cfg = ScenarioConfig(
        topology=_build_topology(doc),
        timebase=_build_timebase(doc),
        slices=_build_slices(doc),
        radio=_build_radio(doc),
        markov=_build_markov(doc),
        obs=obs,
        discount=discount,
        controller=_build_controller(doc),
        controller_enabled=_get(doc, "controller_enabled", "", _as_bool, True),
        policy_mode=mode,
        solver_mode=solver,
        grid_points=grid_points,
        sleep_sensing=sleep_sensing,
        hard_collision=_get(doc, "hard_collision", "", _as_bool, False),
        force_equal_noise=force_equal,
        seed=_get(doc, "seed", "", _as_int, 1))
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from exc
    return cfg


def to_document(cfg: ScenarioConfig) -> Dict[str, Any]:
    """Canonical document form; build_config(to_document(cfg)) == cfg."""
    return {
        "topology": {
            "total_rbs": cfg.topology.total_rbs,
            "access_rbs": cfg.topology.access_rbs,
            "data_rbs": cfg.topology.data_rbs,
            "devices": cfg.topology.devices,
        },
        "timebase": {
            "slot_duration": cfg.timebase.slot_duration,
            "slots_per_period": cfg.timebase.slots_per_period,
            "periods": cfg.timebase.periods,
        },
        "slices": [{
            "slice_id": s.slice_id,
            "devices": s.devices,
            "access_rbs": s.access_rbs,
            "data_rbs": s.data_rbs,
            "weight": s.weight,
        } for s in cfg.slices],
        "radio": {
            "bandwidth_per_rb": cfg.radio.bandwidth_per_rb,
            "tx_power": cfg.radio.tx_power,
            "noise_power": cfg.radio.noise_power,
            "busy_power": cfg.radio.busy_power,
        },
        "markov": {
            "idle_to_idle": cfg.markov.p_idle_idle,
            "idle_to_busy": cfg.markov.p_idle_busy,
            "busy_to_idle": cfg.markov.p_busy_idle,
            "busy_to_busy": cfg.markov.p_busy_busy,
        },
        "observation": {
            "epsilon": cfg.obs.epsilon,
            "phi": cfg.obs.phi,
            "sleep_sensing": cfg.sleep_sensing,
            "force_equal_noise": cfg.force_equal_noise,
        },
        "policy": {
            "mode": cfg.policy_mode,
            "solver": cfg.solver_mode,
            "grid_points": cfg.grid_points,
            "discount": cfg.discount,
        },
        "controller": {
            "omega": cfg.controller.omega,
            "mu": cfg.controller.mu,
        },
        "controller_enabled": cfg.controller_enabled,
        "hard_collision": cfg.hard_collision,
        "seed": cfg.seed,
    }


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_document(cfg), sort_keys=False)


# -- overrides ----------------------------------------------------------------

def apply_overrides(doc: Mapping, overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply `dotted.path=value` assignments on a deep copy of the document.

    Values are parsed as YAML scalars, so booleans and numbers come out typed;
    list elements are addressed by integer, e.g. slices.0.devices=10.
    """
    out = copy.deepcopy(dict(doc))
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("", f"override {item!r} must look like key.path=value")
        try:
            value = yaml.safe_load(raw) if raw.strip() else ""
        except yaml.YAMLError:
            value = raw
        _set_path(out, key.split("."), value, key)
    return out


def _set_path(node: Any, parts: List[str], value: Any, full: str) -> None:
    head, rest = parts[0], parts[1:]
    if isinstance(node, list):
        try:
            idx = int(head)
        except ValueError:
            raise ConfigError(full, f"{head!r} is not a list index") from None
        if not 0 <= idx < len(node):
            raise ConfigError(full, f"index {idx} is out of range")
        if rest:
            _set_path(node[idx], rest, value, full)
        else:
            node[idx] = value
        return
    if not isinstance(node, dict):
        raise ConfigError(full, "override path descends into a scalar")
    if rest:
        child = node.get(head)
        if child is None:
            child = node[head] = {}
        _set_path(child, rest, value, full)
    else:
        node[head] = value


# -- sources and profiles -----------------------------------------------------

def _profile_root():
    return resources.files("m2msim") / "profiles"


def list_profiles() -> List[str]:
    return sorted(entry.name[:-5].replace("_", "-")
                  for entry in _profile_root().iterdir()
                  if entry.name.endswith(".yaml"))


def read_source(source: Union[str, Path]) -> Tuple[str, str]:
    """Resolve a path or profile name; returns (text, label)."""
    path = Path(source)
    if path.is_file():
        return path.read_text(), path.stem
    name = str(source).replace("-", "_")
    candidate = _profile_root() / f"{name}.yaml"
    if candidate.is_file():
        return candidate.read_text(), str(source)
    raise ConfigError("", f"no config file or profile named {source!r}; "
                          f"shipped profiles: {', '.join(list_profiles())}")


def load_config(source: Union[str, Path], overrides: Sequence[str] = (),
                seed: Optional[int] = None) -> ScenarioConfig:
    """Load a scenario from a file path or shipped profile name."""
    text, _ = read_source(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not parseable as YAML: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("", "top level must be a key/value document")
    doc = apply_overrides(doc, overrides)
    if seed is not None:
        doc["seed"] = int(seed)
    return build_config(doc)
