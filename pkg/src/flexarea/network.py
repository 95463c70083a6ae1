"""Distribution network data model, document loading and scenarios.

Networks are loaded from a JSON document with top-level arrays ``buses``,
``lines``, ``trafos``, ``loads``, ``sgens``, ``ext_grid`` and ``switches``.
Field names carry their unit (``vn_kv``, ``p_mw``, ``max_i_ka``, ...).
All power quantities are stored in MW/MVAr; per-unit conversion happens
inside the power-flow engine only.

Network values are immutable after validation: scenario application and
every downstream operation produce copies.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import NetworkValidationError, SchemaError, ConfigError


@dataclass(frozen=True)
class Bus:
    vn_kv: float
    name: str = ""


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r_ohm_per_km: float
    x_ohm_per_km: float
    c_nf_per_km: float
    length_km: float
    max_i_ka: float
    name: str = ""


@dataclass(frozen=True)
class Trafo:
    hv_bus: int
    lv_bus: int
    sn_mva: float
    vk_percent: float
    vkr_percent: float
    name: str = ""


@dataclass(frozen=True)
class Injection:
    """A load or static generator attached to a bus."""

    bus: int
    p_mw: float
    q_mvar: float
    sn_mva: float = 0.0
    scaling: float = 1.0
    name: str = ""


@dataclass(frozen=True)
class ExtGrid:
    bus: int
    vm_pu: float = 1.0


@dataclass(frozen=True)
class Switch:
    et: str  # "line" | "trafo"
    element: int
    closed: bool = True


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    trafos: tuple[Trafo, ...]
    loads: tuple[Injection, ...]
    sgens: tuple[Injection, ...]
    ext_grid: ExtGrid
    switches: tuple[Switch, ...] = ()
    name: str = ""

    @property
    def slack_bus(self) -> int:
        return self.ext_grid.bus

    def branch_closed(self, et: str, element: int) -> bool:
        """A branch is in service unless an open switch sits on it."""
        for sw in self.switches:
            if sw.et == et and sw.element == element and not sw.closed:
                return False
        return True


@dataclass(frozen=True)
class Constraints:
    max_loading_percent: float = 100.0
    max_voltage_pu: float = 1.05
    min_voltage_pu: float = 0.95

    def __post_init__(self):
        if not (self.min_voltage_pu < 1.0 < self.max_voltage_pu):
            raise ConfigError(
                f"voltage band [{self.min_voltage_pu}, {self.max_voltage_pu}] "
                f"must bracket 1.0 p.u."
            )
        if self.max_loading_percent <= 0:
            raise ConfigError("max_loading_percent must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str
    load_scaling: float = 1.0
    sgen_scaling: float = 1.0
    close_all_switches: bool = False
    switch_overrides: tuple[tuple[str, int, bool], ...] = ()


SCENARIOS: dict[str, Scenario] = {
    "identity": Scenario("identity"),
    "high-load": Scenario("high-load", load_scaling=1.2),
    "low-load": Scenario("low-load", load_scaling=0.8),
    "all-switches-closed": Scenario("all-switches-closed", close_all_switches=True),
}

_ARRAYS = ("buses", "lines", "trafos", "loads", "sgens", "switches")

_FIELDS = {
    "buses": Bus,
    "lines": Line,
    "trafos": Trafo,
    "loads": Injection,
    "sgens": Injection,
    "switches": Switch,
}


def _coerce(cls, record: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(record) - names
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")
    required = {
        f.name
        for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    }
    missing = required - set(record)
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")
    try:
        return cls(**record)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def load_network(source: str | Path | dict) -> Network:
    """Load and validate a network description document.

    ``source`` may be a path to a JSON file, a JSON string, or an
    already-parsed dict.
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            is_file = Path(str(source)).is_file()
        except OSError:  # e.g. a JSON string longer than the path limit
            is_file = False
        text = Path(source).read_text() if is_file else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object")

    parts: dict[str, tuple] = {}
    for key in _ARRAYS:
        items = doc.get(key, [])
        if not isinstance(items, list):
            raise SchemaError(f"'{key}' must be an array")
        parts[key] = tuple(
            _coerce(_FIELDS[key], rec, f"{key}[{i}]") for i, rec in enumerate(items)
        )

    ext = doc.get("ext_grid")
    if isinstance(ext, list):
        if len(ext) != 1:
            raise SchemaError("exactly one external grid entry is required")
        ext = ext[0]
    if not isinstance(ext, dict):
        raise SchemaError("'ext_grid' entry is required")
    ext_grid = _coerce(ExtGrid, ext, "ext_grid")

    net = Network(
        buses=parts["buses"],
        lines=parts["lines"],
        trafos=parts["trafos"],
        loads=parts["loads"],
        sgens=parts["sgens"],
        ext_grid=ext_grid,
        switches=parts["switches"],
        name=str(doc.get("name", "")),
    )
    validate_network(net)
    return net


def serialize_network(net: Network) -> dict:
    """Inverse of :func:`load_network` on validated values."""
    doc = {
        "name": net.name,
        "buses": [dataclasses.asdict(b) for b in net.buses],
        "lines": [dataclasses.asdict(l) for l in net.lines],
        "trafos": [dataclasses.asdict(t) for t in net.trafos],
        "loads": [dataclasses.asdict(l) for l in net.loads],
        "sgens": [dataclasses.asdict(s) for s in net.sgens],
        "ext_grid": dataclasses.asdict(net.ext_grid),
        "switches": [dataclasses.asdict(s) for s in net.switches],
    }
    return doc


def validate_network(net: Network) -> None:
    nbus = len(net.buses)

    def check_bus(idx, where):
        if not isinstance(idx, int) or not 0 <= idx < nbus:
            raise NetworkValidationError(f"{where} references nonexistent bus {idx}")

    for i, bus in enumerate(net.buses):
        if bus.vn_kv <= 0:
            raise NetworkValidationError(f"buses[{i}]: vn_kv must be positive")
    for i, ln in enumerate(net.lines):
        check_bus(ln.from_bus, f"lines[{i}].from_bus")
        check_bus(ln.to_bus, f"lines[{i}].to_bus")
        if ln.length_km <= 0:
            raise NetworkValidationError(f"lines[{i}]: length_km must be positive")
        if ln.max_i_ka <= 0:
            raise NetworkValidationError(f"lines[{i}]: max_i_ka must be positive")
    for i, tr in enumerate(net.trafos):
        check_bus(tr.hv_bus, f"trafos[{i}].hv_bus")
        check_bus(tr.lv_bus, f"trafos[{i}].lv_bus")
        if tr.sn_mva <= 0:
            raise NetworkValidationError(f"trafos[{i}]: sn_mva must be positive")
        if tr.vk_percent <= 0 or tr.vk_percent < tr.vkr_percent:
            raise NetworkValidationError(f"trafos[{i}]: need vk_percent >= vkr_percent > 0")
    for kind, items in (("loads", net.loads), ("sgens", net.sgens)):
        for i, inj in enumerate(items):
            check_bus(inj.bus, f"{kind}[{i}].bus")
            if inj.scaling < 0:
                raise NetworkValidationError(f"{kind}[{i}]: scaling must be >= 0")
    check_bus(net.ext_grid.bus, "ext_grid.bus")
    for i, sw in enumerate(net.switches):
        if sw.et not in ("line", "trafo"):
            raise NetworkValidationError(f"switches[{i}]: et must be 'line' or 'trafo'")
        n = len(net.lines) if sw.et == "line" else len(net.trafos)
        if not 0 <= sw.element < n:
            raise NetworkValidationError(
                f"switches[{i}] references nonexistent {sw.et} {sw.element}"
            )

    # Every island carrying a load or generator must reach the slack bus.
    reach = energized_buses(net)
    for kind, items in (("loads", net.loads), ("sgens", net.sgens)):
        for i, inj in enumerate(items):
            if inj.bus not in reach:
                raise NetworkValidationError(
                    f"{kind}[{i}] sits on bus {inj.bus}, disconnected from the slack"
                )


def energized_buses(net: Network) -> set[int]:
    """Buses reachable from the slack over closed branches."""
    adj: dict[int, list[int]] = {i: [] for i in range(len(net.buses))}
    for i, ln in enumerate(net.lines):
        if net.branch_closed("line", i):
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
    for i, tr in enumerate(net.trafos):
        if net.branch_closed("trafo", i):
            adj[tr.hv_bus].append(tr.lv_bus)
            adj[tr.lv_bus].append(tr.hv_bus)
    seen = {net.slack_bus}
    stack = [net.slack_bus]
    while stack:
        b = stack.pop()
        for nb in adj[b]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


def apply_scenario(net: Network, scenario: Scenario | str) -> Network:
    """Return a copy of ``net`` with the scenario's scalings and switch states."""
    if isinstance(scenario, str):
        if scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario_type '{scenario}'; acceptable: {sorted(SCENARIOS)}"
            )
        scenario = SCENARIOS[scenario]
    loads = tuple(
        dataclasses.replace(l, scaling=l.scaling * scenario.load_scaling) for l in net.loads
    )
    sgens = tuple(
        dataclasses.replace(s, scaling=s.scaling * scenario.sgen_scaling) for s in net.sgens
    )
    switches = list(net.switches)
    if scenario.close_all_switches:
        switches = [dataclasses.replace(sw, closed=True) for sw in switches]
    for et, element, closed in scenario.switch_overrides:
        found = False
        for i, sw in enumerate(switches):
            if sw.et == et and sw.element == element:
                switches[i] = dataclasses.replace(sw, closed=closed)
                found = True
        if not found:
            switches.append(Switch(et=et, element=element, closed=closed))
    out = dataclasses.replace(net, loads=loads, sgens=sgens, switches=tuple(switches))
    validate_network(out)
    return out


def topology_fingerprint(net: Network) -> str:
    """Hash of everything except operating-condition setpoints.

    Loads and sgens contribute their bus attachment only: p/q/scaling are
    OC data and may differ between a stored bundle and an adaptation run.
    """
    doc = serialize_network(net)
    for kind in ("loads", "sgens"):
        doc[kind] = [{"bus": rec["bus"]} for rec in doc[kind]]
    doc["ext_grid"] = {"bus": doc["ext_grid"]["bus"]}
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def fixture_path(name: str) -> Path:
    """Path of a bundled network fixture (e.g. ``feeder4``)."""
    base = resources.files("flexarea") / "fixtures"
    p = Path(str(base / f"{name}.json"))
    if not p.is_file():
        avail = sorted(q.stem for q in Path(str(base)).glob("*.json"))
        raise ConfigError(f"unknown fixture '{name}'; bundled fixtures: {avail}")
    return p


def load_fixture(name: str) -> Network:
    return load_network(fixture_path(name))
