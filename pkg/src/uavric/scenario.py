"""Scenario files: strict YAML loading into validated experiment descriptions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .channel import ChannelModel, LinkBudget
from .mobility import Trajectory, Waypoint
from .phy_frame import TddConfig, TddConfigError
from .sched import SchedConfig


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        self.key_path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class UeSpec:
    id: int
    type: str
    offered_load_bps: float
    trajectory: str
    sdu_size_bits: int = 12_000
    rlc_buffer_bits: Optional[int] = None
    traffic_start_s: float = 0.0
    traffic_stop_s: Optional[float] = None


@dataclass(frozen=True)
class XappConfig:
    report_period_ms: int = 100
    bin_m: float = 10.0


@dataclass(frozen=True)
class Transport:
    kind: str = "inproc"
    address: str = "127.0.0.1:0"


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_s: float
    gnb_pos: tuple[float, float, float]
    ues: tuple[UeSpec, ...]
    trajectories: dict[str, Trajectory]
    tdd: TddConfig = TddConfig()
    channel: ChannelModel = ChannelModel()
    sched: SchedConfig = SchedConfig()
    link_budget: LinkBudget = LinkBudget()
    xapp: XappConfig = XappConfig()
    transport: Transport = field(default_factory=Transport)

    def with_overrides(self, **changes: Any) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_power(self, tx_power_dbm: float) -> "Scenario":
        return dataclasses.replace(self, link_budget=dataclasses.replace(self.link_budget, tx_power_dbm=tx_power_dbm))


_TOP_REQUIRED = {"name", "seed", "duration_s", "gnb_pos", "ues", "trajectories"}
_TOP_OPTIONAL = {"tdd", "channel", "sched", "link_budget", "xapp", "transport"}
_UE_REQUIRED = {"id", "type", "offered_load_bps", "trajectory"}
_UE_OPTIONAL = {"sdu_size_bits", "rlc_buffer_bits", "traffic_start_s", "traffic_stop_s"}
_TRAJ_KEYS = {"mode", "waypoints", "speed_mps"}
_WAYPOINT_KEYS = {"pos", "hold_s"}


def _check_keys(obj: Any, path: str, required: set, optional: set = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(path, f"expected a mapping, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            where = f"{path}.{key}" if path else str(key)
            raise ScenarioError(where, "unknown key")
    for key in sorted(required):
        if key not in obj:
            where = f"{path}.{key}" if path else key
            raise ScenarioError(where, "missing required key")
    return obj


def _num(obj: Any, path: str, kind=float) -> Any:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ScenarioError(path, f"expected a number, got {obj!r}")
    if kind is int:
        if isinstance(obj, float) and not obj.is_integer():
            raise ScenarioError(path, f"expected an integer, got {obj!r}")
        return int(obj)
    return float(obj)


def _vec3(obj: Any, path: str) -> tuple[float, float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 3:
        raise ScenarioError(path, "expected [x, y, z]")
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(obj))


def _dataclass_section(cls, obj: Any, path: str, overrides: Optional[dict] = None):
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    overrides = overrides or {}
    _check_keys(obj, path, set(), set(fields) - set(overrides))
    kwargs = {}
    for key, value in obj.items():
        default = fields[key].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ScenarioError(f"{path}.{key}", f"expected true/false, got {value!r}")
            kwargs[key] = value
        elif isinstance(default, int) and not isinstance(default, bool):
            kwargs[key] = _num(value, f"{path}.{key}", int)
        elif isinstance(default, float):
            kwargs[key] = _num(value, f"{path}.{key}")
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ScenarioError(f"{path}.{key}", f"expected a string, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = value
    kwargs.update(overrides)
    return kwargs


def _channel(obj: Any) -> ChannelModel:
    kwargs = _dataclass_section(ChannelModel, obj, "channel")
    if "cqi_table" in kwargs:
        table = kwargs["cqi_table"]
        if not isinstance(table, list) or not table:
            raise ScenarioError("channel.cqi_table", "expected a non-empty list of efficiencies")
        kwargs["cqi_table"] = tuple(_num(v, f"channel.cqi_table[{i}]") for i, v in enumerate(table))
    if "antenna_gain_table" in kwargs:
        table = kwargs["antenna_gain_table"]
        if not isinstance(table, list):
            raise ScenarioError("channel.antenna_gain_table", "expected a list of [elevation_deg, gain_db]")
        pairs = []
        for i, pair in enumerate(table):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ScenarioError(f"channel.antenna_gain_table[{i}]", "expected [elevation_deg, gain_db]")
            pairs.append((_num(pair[0], f"channel.antenna_gain_table[{i}][0]"),
                          _num(pair[1], f"channel.antenna_gain_table[{i}][1]")))
        if any(b[0] <= a[0] for a, b in zip(pairs, pairs[1:])):
            raise ScenarioError("channel.antenna_gain_table", "elevations must be strictly increasing")
        kwargs["antenna_gain_table"] = tuple(pairs)
    try:
        return ChannelModel(**kwargs)
    except ValueError as exc:
        raise ScenarioError("channel", str(exc)) from exc


def _trajectory(name: str, obj: Any) -> Trajectory:
    path = f"trajectories.{name}"
    _check_keys(obj, path, {"mode", "waypoints"}, _TRAJ_KEYS)
    wps = obj["waypoints"]
    if not isinstance(wps, list) or not wps:
        raise ScenarioError(f"{path}.waypoints", "expected a non-empty list")
    waypoints = []
    for i, wp in enumerate(wps):
        wpath = f"{path}.waypoints[{i}]"
        _check_keys(wp, wpath, {"pos"}, _WAYPOINT_KEYS)
        waypoints.append(Waypoint(_vec3(wp["pos"], f"{wpath}.pos"), _num(wp.get("hold_s", 0.0), f"{wpath}.hold_s")))
    speed = obj.get("speed_mps")
    try:
        return Trajectory(name, obj["mode"], tuple(waypoints),
                          None if speed is None else _num(speed, f"{path}.speed_mps"))
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from exc


def _ue(obj: Any, i: int, trajectories: dict) -> UeSpec:
    path = f"ues[{i}]"
    _check_keys(obj, path, _UE_REQUIRED, _UE_OPTIONAL)
    if obj["type"] not in ("ground", "aerial"):
        raise ScenarioError(f"{path}.type", f"must be ground or aerial, got {obj['type']!r}")
    if obj["trajectory"] not in trajectories:
        raise ScenarioError(f"{path}.trajectory", f"dangling reference to undefined trajectory {obj['trajectory']!r}")
    load = _num(obj["offered_load_bps"], f"{path}.offered_load_bps")
    if load < 0:
        raise ScenarioError(f"{path}.offered_load_bps", "must be >= 0")
    buf = obj.get("rlc_buffer_bits")
    stop = obj.get("traffic_stop_s")
    return UeSpec(
        id=_num(obj["id"], f"{path}.id", int),
        type=obj["type"],
        offered_load_bps=load,
        trajectory=obj["trajectory"],
        sdu_size_bits=_num(obj.get("sdu_size_bits", 12_000), f"{path}.sdu_size_bits", int),
        rlc_buffer_bits=None if buf is None else _num(buf, f"{path}.rlc_buffer_bits", int),
        traffic_start_s=_num(obj.get("traffic_start_s", 0.0), f"{path}.traffic_start_s"),
        traffic_stop_s=None if stop is None else _num(stop, f"{path}.traffic_stop_s"),
    )


def _transport(obj: Any) -> Transport:
    if obj in ("inproc", "socket"):
        return Transport(obj)
    if isinstance(obj, dict):
        _check_keys(obj, "transport", set(), {"socket", "inproc"})
        if len(obj) != 1:
            raise ScenarioError("transport", "exactly one of inproc or socket")
        if "inproc" in obj:
            return Transport("inproc")
        sock = obj["socket"] or {}
        _check_keys(sock, "transport.socket", set(), {"address"})
        return Transport("socket", str(sock.get("address", "127.0.0.1:0")))
    raise ScenarioError("transport", f"expected inproc, socket or {{socket: {{address: ...}}}}, got {obj!r}")


def parse_scenario(doc: Any) -> Scenario:
    _check_keys(doc, "", _TOP_REQUIRED, _TOP_OPTIONAL)
    if not isinstance(doc["name"], str):
        raise ScenarioError("name", "expected a string")
    seed = _num(doc["seed"], "seed", int)
    if not 0 <= seed < 2**64:
        raise ScenarioError("seed", "must be an unsigned 64-bit integer")
    duration = _num(doc["duration_s"], "duration_s")
    if duration <= 0:
        raise ScenarioError("duration_s", "must be > 0")

    try:
        tdd = TddConfig(**_dataclass_section(TddConfig, doc.get("tdd", {}), "tdd"))
        tdd.validate()
    except TddConfigError as exc:
        raise ScenarioError("tdd", str(exc)) from exc
    try:
        sched = SchedConfig(**_dataclass_section(SchedConfig, doc.get("sched", {}), "sched", {"n_prb": tdd.n_prb}))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("sched", str(exc)) from exc
    try:
        budget = LinkBudget(**_dataclass_section(LinkBudget, doc.get("link_budget", {}), "link_budget"))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("link_budget", str(exc)) from exc
    xapp = XappConfig(**_dataclass_section(XappConfig, doc.get("xapp", {}), "xapp"))
    if xapp.report_period_ms <= 0:
        raise ScenarioError("xapp.report_period_ms", "must be > 0")
    if xapp.bin_m <= 0:
        raise ScenarioError("xapp.bin_m", "must be > 0")

    trajs = doc["trajectories"]
    if not isinstance(trajs, dict) or not trajs:
        raise ScenarioError("trajectories", "expected a non-empty mapping of name -> trajectory")
    trajectories = {str(name): _trajectory(str(name), spec) for name, spec in trajs.items()}
    if not isinstance(doc["ues"], list) or not doc["ues"]:
        raise ScenarioError("ues", "expected a non-empty list")
    ues = tuple(_ue(u, i, trajectories) for i, u in enumerate(doc["ues"]))
    ids = [u.id for u in ues]
    if len(set(ids)) != len(ids):
        raise ScenarioError("ues", f"duplicate UE ids in {ids}")

    return Scenario(
        name=doc["name"],
        seed=seed,
        duration_s=duration,
        gnb_pos=_vec3(doc["gnb_pos"], "gnb_pos"),
        ues=ues,
        trajectories=trajectories,
        tdd=tdd,
        channel=_channel(doc.get("channel", {})),
        sched=sched,
        link_budget=budget,
        xapp=xapp,
        transport=_transport(doc.get("transport", "inproc")),
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError("", f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("", f"{path}: not valid YAML: {exc}") from exc
    return parse_scenario(doc)


def bundled_scenario_names() -> list[str]:
    files = resources.files("uavric").joinpath("scenarios").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".yaml"))


def bundled_scenario_path(name: str) -> Path:
    ref = resources.files("uavric").joinpath("scenarios", f"{name}.yaml")
    if not ref.is_file():
        raise ScenarioError("", f"no bundled scenario named {name!r}; have {bundled_scenario_names()}")
    return Path(str(ref))


def resolve_scenario(name_or_path: Union[str, Path]) -> Scenario:
    """Load a scenario file, falling back to a bundled scenario of that name."""
    path = Path(name_or_path)
    if path.exists():
        return load_scenario(path)
    return load_scenario(bundled_scenario_path(str(name_or_path)))
