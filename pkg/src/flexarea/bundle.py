"""Persisting estimation state and adapting it to new operating conditions.

A tensor bundle is a directory: a JSON manifest carrying the fingerprint
(topology hash, FSP list, dp, dq) and the per-component index, one ``.npz``
file of TT cores per retained component, and structured-text JSON files
for the FA axes, the unconstrained-convolution matrix, the impact
dictionary and the impactful-FSP dictionary.

Adaptation never samples shifts or re-estimates sensitivities: it solves a
single base power flow for the new operating condition, re-derives every
component's feasibility mask from its new base value, reconstructs the
stored tensors, and reassembles the FA around the new base PCC point.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FingerprintMismatch, RuntimeFailure
from .fagrid import FaGrid, bilinear_upsample, min_combine, normalize
from .network import Constraints, Network, topology_fingerprint
from .offers import FspOffer
from .pf import build_model, solve_model
from .tensorconv import (
    CompKey,
    FspKey,
    Kern2,
    Kern3,
    TcState,
    _convolve_grid,
    embed_kernel,
    tc_plus,
)
from .ttrain import TtTensor, tt_decompose, tt_reconstruct

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


def _np_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump(path: Path, doc: dict, indent: int | None = None) -> None:
    path.write_text(json.dumps(doc, default=_np_default, indent=indent))


def _key_str(key) -> str:
    return f"{key[0]}:{key[1]}"


def _key_from_str(s: str):
    kind, idx = s.split(":")
    return (kind, int(idx))


def save_tensors(net: Network, offers: list[FspOffer], limits: Constraints,
                 dp: float, dq: float, epsilon: float, store_path: str | Path,
                 **tc_kwargs) -> tuple[TcState, dict]:
    """Run the full pipeline, then persist its state for later adaptation."""
    t0 = time.perf_counter()
    state = tc_plus(net, offers, limits, dp, dq, **tc_kwargs)
    store = Path(store_path)
    store.mkdir(parents=True, exist_ok=True)

    comp_entries = []
    for k, (comp, ct) in enumerate(state.comp_tensors.items()):
        tt = tt_decompose(ct.xi_raw.arr, epsilon)
        fname = f"comp_{k}.npz"
        np.savez(store / fname, **{f"core_{i}": c for i, c in enumerate(tt.cores)})
        comp_entries.append({
            "comp": _key_str(comp),
            "file": fname,
            "n_cores": len(tt.cores),
            "bin_width": ct.bin_width,
            "base_value_at_save": ct.base_value,
            "op0": ct.xi_raw.op0,
            "oq0": ct.xi_raw.oq0,
            "og0": ct.xi_raw.og0,
            "shape": list(ct.xi_raw.arr.shape),
            "dense_bytes": int(ct.xi_raw.arr.size * 8),
            "tt_bytes": int(tt.n_elements * 8),
        })

    manifest = {
        "version": FORMAT_VERSION,
        "fingerprint": {
            "topology": topology_fingerprint(net),
            "fsps": [_key_str((o.kind, o.index)) for o in offers],
            "dp": dp,
            "dq": dq,
        },
        "tt_epsilon": epsilon,
        "base_p": state.base_p,
        "base_q": state.base_q,
        "op_origin": state.op_origin,
        "oq_origin": state.oq_origin,
        "axes_shape": [len(state.ufa.p_axis), len(state.ufa.q_axis)],
        "upsample_factor": state.upsample_factor,
        "components": comp_entries,
    }
    _dump(store / MANIFEST_NAME, manifest, indent=2)

    _dump(store / "axes.json", {
        "p_axis": list(state.ufa.p_axis),
        "q_axis": list(state.ufa.q_axis),
    })
    _dump(store / "ufa.json", {
        "op0": state.ufa_kern.op0,
        "oq0": state.ufa_kern.oq0,
        "arr": state.ufa_kern.arr.tolist(),
    })
    impacts_doc = {
        "comps": [_key_str(c) for c in state.record.comps],
        "base_values": list(state.record.base_values),
        "per_fsp": {
            _key_str(key): {
                "shifts": imp.shifts,
                "dpcc": imp.dpcc.tolist(),
                "dcomp": imp.dcomp.tolist(),
                "dropped": imp.dropped,
            }
            for key, imp in state.record.per_fsp.items()
        },
    }
    _dump(store / "impacts.json", impacts_doc)
    _dump(store / "impactful.json", {
        "impactful": {_key_str(c): [_key_str(k) for k in v]
                      for c, v in state.partition.impactful.items()},
        "non_impactful": {_key_str(c): [_key_str(k) for k in v]
                          for c, v in state.partition.non_impactful.items()},
        "retained": [_key_str(c) for c in state.partition.retained],
    })
    _dump(store / "small.json", {
        "factor": state.upsample_factor,
        "kernels": {
            _key_str(key): {"op0": k.op0, "oq0": k.oq0, "arr": k.arr.tolist()}
            for key, k in state.small_kernels.items()
        },
    })

    state.report["algorithm"] = "tcp-save"
    state.report["stored_components"] = len(comp_entries)
    state.report["store_path"] = str(store)
    state.report["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return state, manifest


@dataclass
class AdaptResult:
    fa: FaGrid
    ufa: FaGrid
    base_p: float
    base_q: float
    stale_components: list[str]
    report: dict


def _load_tt(store: Path, entry: dict) -> np.ndarray:
    """Reconstruct a stored tensor, snapping back to the integer counts.

    Entries of the joint shift tensor are combination counts, so as long as
    the TT tolerance keeps the reconstruction within half a count per cell,
    rounding removes the low-rank approximation noise exactly.
    """
    with np.load(store / entry["file"]) as data:
        cores = tuple(data[f"core_{i}"] for i in range(entry["n_cores"]))
    arr = tt_reconstruct(TtTensor(cores=cores, epsilon=0.5))
    return np.maximum(np.rint(arr), 0.0)


def tc_plus_adapt(net: Network, store_path: str | Path, limits: Constraints,
                  pf_tol: float = 1e-8, pf_max_iter: int = 30) -> AdaptResult:
    t0 = time.perf_counter()
    store = Path(store_path)
    manifest_file = store / MANIFEST_NAME
    if not manifest_file.is_file():
        raise FingerprintMismatch(f"no tensor bundle at {store}; run tcp-save first")
    manifest = json.loads(manifest_file.read_text())

    fp = manifest["fingerprint"]
    if fp["topology"] != topology_fingerprint(net):
        raise FingerprintMismatch(
            "stored bundle was built for a different network topology; "
            "run tcp-save on the current network"
        )

    model = build_model(net, tol=pf_tol, max_iter=pf_max_iter)
    base = solve_model(model)
    if not base.converged:
        raise RuntimeFailure("base-case power flow did not converge")

    impacts_doc = json.loads((store / "impacts.json").read_text())
    comps = [_key_from_str(s) for s in impacts_doc["comps"]]
    part_doc = json.loads((store / "impactful.json").read_text())
    ufa_doc = json.loads((store / "ufa.json").read_text())
    small_doc = json.loads((store / "small.json").read_text())
    dp, dq = fp["dp"], fp["dq"]

    def comp_value(comp: CompKey) -> float:
        kind, idx = comp
        if kind == "line":
            return float(base.line_loading[idx])
        if kind == "trafo":
            return float(base.trafo_loading[idx])
        return float(base.vm_pu[idx])

    new_base = {comp: comp_value(comp) for comp in comps}

    # re-derive which components can now reach their limits, from stored impacts
    per_fsp_dpcc: dict[FspKey, np.ndarray] = {}
    per_fsp_dcomp: dict[FspKey, np.ndarray] = {}
    for key_s, imp in impacts_doc["per_fsp"].items():
        per_fsp_dpcc[_key_from_str(key_s)] = np.array(imp["dpcc"])
        per_fsp_dcomp[_key_from_str(key_s)] = np.array(imp["dcomp"])
    stored = {_key_from_str(e["comp"]): e for e in manifest["components"]}
    stale: list[str] = []
    for ci, comp in enumerate(comps):
        up = sum(max(col[:, ci].max(initial=0.0), 0.0) for col in per_fsp_dcomp.values())
        down = sum(min(col[:, ci].min(initial=0.0), 0.0) for col in per_fsp_dcomp.values())
        v = new_base[comp]
        if np.isnan(v):
            continue
        if comp[0] in ("line", "trafo"):
            reachable = v + up >= limits.max_loading_percent
        else:
            reachable = (v + up >= limits.max_voltage_pu
                         or v + down <= limits.min_voltage_pu)
        if reachable and comp not in stored:
            stale.append(
                f"{comp[0]}[{comp[1]}] headroom changed sign under the new operating "
                f"condition but has no stored tensor; the adapted FA may be optimistic"
            )

    def stored_pcc_kernel(key: FspKey) -> Kern2:
        off = np.empty((len(per_fsp_dpcc[key]), 2), dtype=int)
        off[:, 0] = np.rint(per_fsp_dpcc[key][:, 0] / dp).astype(int)
        off[:, 1] = np.rint(per_fsp_dpcc[key][:, 1] / dq).astype(int)
        op0, oq0 = int(off[:, 0].min()), int(off[:, 1].min())
        arr = np.zeros((off[:, 0].max() - op0 + 1, off[:, 1].max() - oq0 + 1))
        for a, b in off:
            arr[a - op0, b - oq0] += 1
        return Kern2(arr, op0, oq0)

    op_origin = manifest["op_origin"]
    oq_origin = manifest["oq_origin"]
    np_ax, nq_ax = manifest["axes_shape"]
    p_axis = base.p_pcc_mw + (op_origin + np.arange(np_ax)) * dp
    q_axis = base.q_pcc_mvar + (oq_origin + np.arange(nq_ax)) * dq
    ufa_kern = Kern2(np.array(ufa_doc["arr"]), ufa_doc["op0"], ufa_doc["oq0"])
    ufa_grid = FaGrid(p_axis, q_axis, embed_kernel(ufa_kern, np_ax, nq_ax, op_origin, oq_origin))

    grids: list[FaGrid] = []
    for comp, entry in stored.items():
        v = new_base[comp]
        if np.isnan(v):
            stale.append(f"{comp[0]}[{comp[1]}] is out of service in the new topology")
            continue
        xi_arr = _load_tt(store, entry)
        xi = Kern3(xi_arr, entry["op0"], entry["oq0"], entry["og0"])
        width = entry["bin_width"]
        arr = xi.arr.copy()
        for gi in range(arr.shape[2]):
            value = v + (xi.og0 + gi) * width
            if comp[0] in ("line", "trafo"):
                ok = value <= limits.max_loading_percent
            else:
                ok = limits.min_voltage_pu <= value <= limits.max_voltage_pu
            if not ok:
                arr[:, :, gi] = 0.0
        a = Kern3(arr, xi.op0, xi.oq0, xi.og0).collapse()
        upsilon = a
        for key_s in part_doc["non_impactful"][_key_str(comp)]:
            upsilon = upsilon.convolve(stored_pcc_kernel(_key_from_str(key_s)))
        grids.append(FaGrid(p_axis, q_axis,
                            embed_kernel(upsilon, np_ax, nq_ax, op_origin, oq_origin)))

    fa = min_combine(grids) if grids else ufa_grid
    fa = normalize(fa)

    if small_doc["kernels"]:
        factor = small_doc["factor"]
        fa = bilinear_upsample(fa, factor)
        for k in small_doc["kernels"].values():
            fa = _convolve_grid(fa, Kern2(np.array(k["arr"]), k["op0"], k["oq0"]))
        fa = normalize(fa)

    report = {
        "algorithm": "tcp-adapt",
        "power_flows": 1,
        "constrained_components": len(grids),
        "stale_components": len(stale),
        "store_path": str(store),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    return AdaptResult(
        fa=fa, ufa=ufa_grid, base_p=base.p_pcc_mw, base_q=base.q_pcc_mvar,
        stale_components=stale, report=report,
    )
