import dataclasses
import json

import numpy as np
import pytest

from flexarea.bundle import save_tensors, tc_plus_adapt
from flexarea.errors import FingerprintMismatch
from flexarea.network import Constraints, Switch
from flexarea.tensorconv import tc_plus

DP, DQ = 0.1, 0.1
LIMITS = Constraints(max_loading_percent=15.0)


def scale_loads(net, factor):
    loads = tuple(
        dataclasses.replace(l, scaling=l.scaling * factor) for l in net.loads
    )
    return dataclasses.replace(net, loads=loads)


@pytest.fixture
def bundle(feeder4, small_offers, tmp_path):
    store = tmp_path / "tensors"
    state, manifest = save_tensors(feeder4, small_offers, LIMITS, DP, DQ, 1e-8, store)
    return store, state, manifest


def test_bundle_inventory(bundle):
    store, state, manifest = bundle
    expected = {"manifest.json", "axes.json", "ufa.json", "impacts.json",
                "impactful.json", "small.json"}
    expected |= {e["file"] for e in manifest["components"]}
    assert {p.name for p in store.iterdir()} == expected
    assert len(manifest["components"]) == len(state.comp_tensors)
    fp = manifest["fingerprint"]
    assert fp["dp"] == DP and fp["dq"] == DQ
    assert fp["fsps"] == ["load:0", "sgen:0"]


def test_manifest_is_plain_json(bundle):
    store, _, _ = bundle
    doc = json.loads((store / "manifest.json").read_text())
    assert doc["tt_epsilon"] == 1e-8
    for entry in doc["components"]:
        assert entry["bin_width"] > 0
        assert (store / entry["file"]).is_file()


def test_same_oc_adaptation_identity(bundle, feeder4):
    store, state, _ = bundle
    res = tc_plus_adapt(feeder4, store, LIMITS)
    assert res.report["power_flows"] == 1
    assert np.array_equal(res.fa.p_axis, state.fa.p_axis)
    tol = 1e-8 * state.fa.values.max()
    assert np.max(np.abs(res.fa.values - state.fa.values)) <= tol
    assert not res.stale_components


def test_perturbed_oc_resembles_fresh_run(bundle, feeder4, small_offers):
    store, _, _ = bundle
    perturbed = scale_loads(feeder4, 1.05)
    adapted = tc_plus_adapt(perturbed, store, LIMITS)
    fresh = tc_plus(perturbed, small_offers, LIMITS, DP, DQ)
    a, b = adapted.fa.support(), fresh.fa.support()
    assert a.shape == b.shape
    assert (a == b).mean() >= 0.90


def test_fingerprint_mismatch_on_topology_change(bundle, feeder4):
    store, _, _ = bundle
    rewired = dataclasses.replace(
        feeder4,
        switches=feeder4.switches + (Switch(et="trafo", element=0, closed=True),),
    )
    with pytest.raises(FingerprintMismatch, match="different network topology"):
        tc_plus_adapt(rewired, store, LIMITS)


def test_missing_bundle_refused(feeder4, tmp_path):
    with pytest.raises(FingerprintMismatch, match="tcp-save"):
        tc_plus_adapt(feeder4, tmp_path / "nothing-here", LIMITS)


def test_staleness_warning_for_newly_binding_component(
        feeder4, small_offers, tmp_path):
    # at a 21 % loading limit no component's limit is reachable, so the
    # bundle stores no tensors; a 10 % load increase pushes line 0 back
    # into reach and adaptation must say so instead of silently ignoring it
    loose = Constraints(max_loading_percent=21.0)
    store = tmp_path / "tensors"
    state, manifest = save_tensors(feeder4, small_offers, loose, DP, DQ, 1e-8, store)
    assert not manifest["components"]
    res = tc_plus_adapt(scale_loads(feeder4, 1.10), store, loose)
    assert any("line[0]" in w for w in res.stale_components)
    # with nothing stored the adapted FA falls back to the unconstrained one
    assert np.array_equal(res.fa.support(), res.ufa.support())


def test_report_counts(bundle):
    store, state, manifest = bundle
    assert state.report["algorithm"] == "tcp-save"
    assert state.report["stored_components"] == len(manifest["components"])
    assert state.report["store_path"] == str(store)
