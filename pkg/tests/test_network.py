import dataclasses
import json

import pytest

from flexarea.errors import ConfigError, NetworkValidationError, SchemaError
from flexarea.network import (
    SCENARIOS,
    Constraints,
    Switch,
    apply_scenario,
    energized_buses,
    load_fixture,
    load_network,
    serialize_network,
    topology_fingerprint,
    validate_network,
)


def test_fixture_roundtrip(feeder4):
    doc = serialize_network(feeder4)
    again = load_network(doc)
    assert again == feeder4


def test_load_from_json_string(feeder4):
    text = json.dumps(serialize_network(feeder4))
    assert load_network(text) == feeder4


def test_unknown_fixture_lists_available():
    with pytest.raises(ConfigError, match="feeder4"):
        load_fixture("does-not-exist")


def test_schema_unknown_field(feeder4_doc):
    doc = json.loads(json.dumps(feeder4_doc))
    doc["buses"][0]["frequency"] = 60
    with pytest.raises(SchemaError, match="unknown field"):
        load_network(doc)


def test_schema_missing_field(feeder4_doc):
    doc = json.loads(json.dumps(feeder4_doc))
    del doc["lines"][0]["length_km"]
    with pytest.raises(SchemaError, match="missing field"):
        load_network(doc)


def test_schema_requires_ext_grid(feeder4_doc):
    doc = json.loads(json.dumps(feeder4_doc))
    del doc["ext_grid"]
    with pytest.raises(SchemaError, match="ext_grid"):
        load_network(doc)


def test_validation_nonexistent_bus(feeder4_doc):
    doc = json.loads(json.dumps(feeder4_doc))
    doc["loads"][0]["bus"] = 99
    with pytest.raises(NetworkValidationError, match="nonexistent bus 99"):
        load_network(doc)


def test_validation_island_with_load(feeder4):
    # opening the only switch (on line 1) strands the end bus and its load
    switches = tuple(
        dataclasses.replace(sw, closed=False) for sw in feeder4.switches
    )
    islanded = dataclasses.replace(feeder4, switches=switches)
    with pytest.raises(NetworkValidationError, match="disconnected from the slack"):
        validate_network(islanded)


def test_energized_buses_drop_behind_open_switch(feeder4):
    assert energized_buses(feeder4) == set(range(len(feeder4.buses)))
    switches = tuple(
        dataclasses.replace(sw, closed=False) for sw in feeder4.switches
    )
    opened = dataclasses.replace(feeder4, switches=switches, loads=feeder4.loads[:1],
                                 sgens=(feeder4.sgens[1],))
    sw = feeder4.switches[0]
    affected = (feeder4.lines[sw.element].from_bus, feeder4.lines[sw.element].to_bus)
    assert not set(affected) <= energized_buses(opened)


def test_scenarios_scale_loads(feeder4):
    high = apply_scenario(feeder4, "high-load")
    for before, after in zip(feeder4.loads, high.loads):
        assert after.scaling == pytest.approx(before.scaling * 1.2)
    low = apply_scenario(feeder4, SCENARIOS["low-load"])
    for before, after in zip(feeder4.loads, low.loads):
        assert after.scaling == pytest.approx(before.scaling * 0.8)


def test_scenario_close_all_switches(feeder4):
    opened = dataclasses.replace(
        feeder4,
        switches=tuple(dataclasses.replace(sw, closed=False) for sw in feeder4.switches),
        loads=(), sgens=(),
    )
    closed = apply_scenario(opened, "all-switches-closed")
    assert all(sw.closed for sw in closed.switches)


def test_unknown_scenario_rejected(feeder4):
    with pytest.raises(ConfigError, match="scenario_type"):
        apply_scenario(feeder4, "peak-winter")


def test_fingerprint_ignores_operating_condition(feeder4):
    scaled = apply_scenario(feeder4, "high-load")
    assert topology_fingerprint(scaled) == topology_fingerprint(feeder4)


def test_fingerprint_sees_topology_change(feeder4):
    switched = dataclasses.replace(
        feeder4,
        switches=feeder4.switches + (Switch(et="line", element=0, closed=False),),
        loads=feeder4.loads[:0], sgens=feeder4.sgens[:0],
    )
    assert topology_fingerprint(switched) != topology_fingerprint(feeder4)


def test_constraints_must_bracket_nominal():
    with pytest.raises(ConfigError):
        Constraints(max_voltage_pu=0.99)
    with pytest.raises(ConfigError):
        Constraints(max_loading_percent=0.0)


def test_mv_fixture_shape(mv_net):
    assert len(mv_net.buses) == 14
    assert len(mv_net.loads) >= 6
    assert len(mv_net.sgens) >= 3
    assert mv_net.slack_bus == mv_net.ext_grid.bus
