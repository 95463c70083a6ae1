"""Convolution/tensor pipeline for FA estimation, with the merge variant.

The pipeline rests on one modeling assumption: the impact of a joint
shift combination is the sum of the single-FSP impacts, each measured by
one power flow against the base case. Every per-FSP shift is binned to
integer offsets -- PCC offsets on the dp/dq lattice, component offsets on
a per-component bin width -- so combining FSPs is an exact integer
N-dimensional convolution of their offset histograms, and cell values
count shift combinations.

Per component, the 3-D tensor over (P offset, Q offset, component-value
offset) is masked by the component's limit, collapsed over the value
dimension, and convolved with the shift histograms of the FSPs that
cannot noticeably affect that component. The FA is the element-wise
minimum of these per-component grids (or the unconstrained convolution
when no component can reach its limit).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.signal import fftconvolve

from .errors import MemoryBudgetError, RuntimeFailure
from .fagrid import FaGrid, bilinear_upsample, min_combine, normalize
from .network import Constraints, Network
from .offers import FspOffer, build_shift_grid, classify_small, shift_ranges
from .pf import PfModel, PfResult, build_model, solve_model
from .pf import _branch_params  # shared per-unit branch model

CompKey = tuple[str, int]  # ("line"|"trafo"|"bus", index)
FspKey = tuple[str, int]  # ("load"|"sgen", index)

_DIRECT_LIMIT = 1 << 22  # switch to FFT convolution above this product size


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full N-D convolution, exact on integer-valued inputs."""
    if a.size * b.size <= _DIRECT_LIMIT:
        out_shape = tuple(sa + sb - 1 for sa, sb in zip(a.shape, b.shape))
        out = np.zeros(out_shape)
        it = np.nditer(b, flags=["multi_index"])
        for val in it:
            if val != 0:
                idx = tuple(slice(i, i + s) for i, s in zip(it.multi_index, a.shape))
                out[idx] += float(val) * a
        return out
    return np.rint(fftconvolve(a, b)).astype(float)


@dataclass(frozen=True)
class Kern2:
    """2-D offset histogram; arr[i, j] counts offset (op0 + i, oq0 + j)."""

    arr: np.ndarray
    op0: int
    oq0: int

    @staticmethod
    def identity() -> "Kern2":
        return Kern2(np.ones((1, 1)), 0, 0)

    def convolve(self, other: "Kern2") -> "Kern2":
        return Kern2(_conv(self.arr, other.arr), self.op0 + other.op0, self.oq0 + other.oq0)


@dataclass(frozen=True)
class Kern3:
    arr: np.ndarray
    op0: int
    oq0: int
    og0: int

    @staticmethod
    def identity() -> "Kern3":
        return Kern3(np.ones((1, 1, 1)), 0, 0, 0)

    def convolve(self, other: "Kern3") -> "Kern3":
        return Kern3(_conv(self.arr, other.arr), self.op0 + other.op0,
                     self.oq0 + other.oq0, self.og0 + other.og0)

    def collapse(self) -> Kern2:
        return Kern2(self.arr.sum(axis=2), self.op0, self.oq0)


@dataclass
class FspImpacts:
    """Linearized effect of every lattice shift of one FSP."""

    key: FspKey
    shifts: list[tuple[float, float]]  # (dP, dQ), zero shift included
    dpcc: np.ndarray  # shape (n_shifts, 2), MW/MVAr at the PCC
    dcomp: np.ndarray  # shape (n_shifts, n_components)
    dropped: int = 0  # shifts excluded because their PF diverged


@dataclass
class ImpactRecord:
    comps: list[CompKey]
    base_values: np.ndarray  # loading % / voltage p.u. per component
    base_p: float
    base_q: float
    per_fsp: dict[FspKey, FspImpacts]

    def comp_index(self, comp: CompKey) -> int:
        return self.comps.index(comp)


@dataclass
class SensitivityPartition:
    impactful: dict[CompKey, list[FspKey]]
    non_impactful: dict[CompKey, list[FspKey]]
    retained: list[CompKey]


@dataclass
class ComponentTensor:
    comp: CompKey
    bin_width: float
    base_value: float
    xi_raw: Kern3  # joint tensor before the limit mask
    xi: Kern3  # after masking infeasible value slices
    a: Kern2
    upsilon: Kern2
    merges: list[str] = field(default_factory=list)


def monitored_components(model: PfModel) -> tuple[list[CompKey], np.ndarray]:
    """In-service branches (loading) and energized non-slack buses (voltage)."""
    base = solve_model(model)
    if not base.converged:
        raise RuntimeFailure("base-case power flow did not converge")
    comps: list[CompKey] = []
    vals: list[float] = []
    for i, v in enumerate(base.line_loading):
        if not np.isnan(v):
            comps.append(("line", i))
            vals.append(float(v))
    for i, v in enumerate(base.trafo_loading):
        if not np.isnan(v):
            comps.append(("trafo", i))
            vals.append(float(v))
    for b in model.energized:
        if int(b) != model.net.slack_bus:
            comps.append(("bus", int(b)))
            vals.append(float(base.vm_pu[b]))
    return comps, np.array(vals)


def fsp_key(offer: FspOffer) -> FspKey:
    return (offer.kind, offer.index)


def compute_fsp_impacts(model: PfModel, offers: list[FspOffer],
                        shift_lists: dict[FspKey, list[tuple[float, float]]]
                        ) -> ImpactRecord:
    """One PF per FSP per lattice shift, all other FSPs at rest."""
    base = solve_model(model)
    if not base.converged:
        raise RuntimeFailure("base-case power flow did not converge")
    comps, base_vals = monitored_components(model)

    def comp_values(res: PfResult) -> np.ndarray:
        out = np.empty(len(comps))
        for ci, (kind, idx) in enumerate(comps):
            if kind == "line":
                out[ci] = res.line_loading[idx]
            elif kind == "trafo":
                out[ci] = res.trafo_loading[idx]
            else:
                out[ci] = res.vm_pu[idx]
        return out

    per_fsp: dict[FspKey, FspImpacts] = {}
    for offer in offers:
        key = fsp_key(offer)
        kept_shifts: list[tuple[float, float]] = []
        dpcc_rows: list[tuple[float, float]] = []
        dcomp_rows: list[np.ndarray] = []
        dropped = 0
        for dp_s, dq_s in shift_lists[key]:
            if abs(dp_s) < 1e-12 and abs(dq_s) < 1e-12:
                kept_shifts.append((0.0, 0.0))
                dpcc_rows.append((0.0, 0.0))
                dcomp_rows.append(np.zeros(len(comps)))
                continue
            res = solve_model(model, [(offer.kind, offer.index, dp_s, dq_s)])
            if not res.converged:
                dropped += 1
                continue
            kept_shifts.append((dp_s, dq_s))
            dpcc_rows.append((res.p_pcc_mw - base.p_pcc_mw, res.q_pcc_mvar - base.q_pcc_mvar))
            dcomp_rows.append(comp_values(res) - base_vals)
        per_fsp[key] = FspImpacts(
            key=key,
            shifts=kept_shifts,
            dpcc=np.array(dpcc_rows),
            dcomp=np.array(dcomp_rows),
            dropped=dropped,
        )
    return ImpactRecord(
        comps=comps, base_values=base_vals,
        base_p=base.p_pcc_mw, base_q=base.q_pcc_mvar, per_fsp=per_fsp,
    )


def pcc_offsets(imp: FspImpacts, dp: float, dq: float) -> np.ndarray:
    """Integer PCC bin offsets of each recorded shift (loss effects included)."""
    out = np.empty((len(imp.shifts), 2), dtype=int)
    out[:, 0] = np.rint(imp.dpcc[:, 0] / dp).astype(int)
    out[:, 1] = np.rint(imp.dpcc[:, 1] / dq).astype(int)
    return out


def pcc_kernel(imp: FspImpacts, dp: float, dq: float) -> Kern2:
    off = pcc_offsets(imp, dp, dq)
    op0, oq0 = off[:, 0].min(), off[:, 1].min()
    arr = np.zeros((off[:, 0].max() - op0 + 1, off[:, 1].max() - oq0 + 1))
    for a, b in off:
        arr[a - op0, b - oq0] += 1
    return Kern2(arr, int(op0), int(oq0))


def component_kernel(imp: FspImpacts, comp_idx: int, dp: float, dq: float,
                     width: float) -> Kern3:
    off2 = pcc_offsets(imp, dp, dq)
    og = np.rint(imp.dcomp[:, comp_idx] / width).astype(int)
    op0, oq0, og0 = off2[:, 0].min(), off2[:, 1].min(), og.min()
    arr = np.zeros((off2[:, 0].max() - op0 + 1, off2[:, 1].max() - oq0 + 1,
                    og.max() - og0 + 1))
    for (a, b), g in zip(off2, og):
        arr[a - op0, b - oq0, g - og0] += 1
    return Kern3(arr, int(op0), int(oq0), int(og0))


def unconstrained_fa(record: ImpactRecord, regular: list[FspOffer],
                     dp: float, dq: float) -> Kern2:
    """Convolution of all regular FSP shift histograms (network limits ignored)."""
    kern = Kern2.identity()
    for offer in regular:
        kern = kern.convolve(pcc_kernel(record.per_fsp[fsp_key(offer)], dp, dq))
    return kern


def classify_sensitivity(record: ImpactRecord, limits: Constraints,
                         loading_threshold: float = 0.5,
                         voltage_threshold: float = 0.001,
                         keys: list[FspKey] | None = None) -> SensitivityPartition:
    """Split FSPs per component and prune components that cannot bind.

    ``keys`` restricts the partition to a subset of the recorded FSPs
    (sub-resolution offers are folded in later by interpolation, not here).
    """
    keys = list(record.per_fsp) if keys is None else keys
    impactful: dict[CompKey, list[FspKey]] = {}
    non_impactful: dict[CompKey, list[FspKey]] = {}
    retained: list[CompKey] = []
    for ci, comp in enumerate(record.comps):
        thr = loading_threshold if comp[0] in ("line", "trafo") else voltage_threshold
        imp, non = [], []
        up = down = 0.0
        for key in keys:
            col = record.per_fsp[key].dcomp[:, ci]
            (imp if np.abs(col).max(initial=0.0) >= thr else non).append(key)
            up += max(col.max(initial=0.0), 0.0)
            down += min(col.min(initial=0.0), 0.0)
        impactful[comp] = imp
        non_impactful[comp] = non
        base = record.base_values[ci]
        if comp[0] in ("line", "trafo"):
            reachable = base + up >= limits.max_loading_percent
        else:
            reachable = (base + up >= limits.max_voltage_pu
                         or base + down <= limits.min_voltage_pu)
        if reachable:
            retained.append(comp)
    return SensitivityPartition(impactful, non_impactful, retained)


def component_bin_width(record: ImpactRecord, comp: CompKey,
                        members: list[FspKey]) -> float:
    floor = 0.1 if comp[0] in ("line", "trafo") else 1e-4
    ci = record.comp_index(comp)
    width = math.inf
    for key in members:
        col = np.abs(record.per_fsp[key].dcomp[:, ci])
        nz = col[col > 1e-12]
        if len(nz):
            width = min(width, float(nz.min()))
    if not math.isfinite(width):
        return floor
    return max(width, floor)


def _mask_xi(xi: Kern3, comp: CompKey, base_value: float, width: float,
             limits: Constraints) -> Kern3:
    arr = xi.arr.copy()
    for gi in range(arr.shape[2]):
        value = base_value + (xi.og0 + gi) * width
        if comp[0] in ("line", "trafo"):
            ok = value <= limits.max_loading_percent
        else:
            ok = limits.min_voltage_pu <= value <= limits.max_voltage_pu
        if not ok:
            arr[:, :, gi] = 0.0
    return Kern3(arr, xi.op0, xi.oq0, xi.og0)


def _estimate_conv_bytes(kernels: list[Kern3]) -> int:
    dims = [1, 1, 1]
    for k in kernels:
        for d in range(3):
            dims[d] += k.arr.shape[d] - 1
    return dims[0] * dims[1] * dims[2] * 8


def impedance_graph(net: Network) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(len(net.buses)))
    for br in _branch_params(net, s_base=1.0):
        z = abs(1.0 / br.ys)
        if g.has_edge(br.f, br.t):
            z = min(z, g.edges[br.f, br.t]["z"])
        g.add_edge(br.f, br.t, z=z)
    return g


def electrical_distance(net: Network, bus_a: int, bus_b: int,
                        graph: nx.Graph | None = None) -> float:
    """Minimum summed branch-impedance magnitude between two buses (p.u.)."""
    g = graph if graph is not None else impedance_graph(net)
    try:
        return float(nx.dijkstra_path_length(g, bus_a, bus_b, weight="z"))
    except nx.NetworkXNoPath:
        return math.inf


def _offer_bus(net: Network, key: FspKey) -> int:
    items = net.loads if key[0] == "load" else net.sgens
    return items[key[1]].bus


def _merge_impactful(net: Network, record: ImpactRecord, comp: CompKey,
                     kernels: list[tuple[frozenset[FspKey], Kern3]],
                     max_fsps: int, graph: nx.Graph) -> tuple[list, list[str]]:
    """Fuse the two electrically closest groups until at most max_fsps remain.

    A merged pseudo-FSP has no shape of its own; its kernel is exactly the
    convolution of its members' kernels, which preserves the counting
    semantics.
    """
    events: list[str] = []
    groups = list(kernels)

    def group_dist(ga: frozenset, gb: frozenset) -> float:
        return min(
            electrical_distance(net, _offer_bus(net, a), _offer_bus(net, b), graph)
            for a in ga for b in gb
        )

    while len(groups) > max_fsps:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                d = group_dist(groups[i][0], groups[j][0])
                if best is None or d < best[0]:
                    best = (d, i, j)
        d, i, j = best
        (ka, kern_a), (kb, kern_b) = groups[i], groups[j]
        merged = (ka | kb, kern_a.convolve(kern_b))
        events.append(
            f"merge: {comp[0]}[{comp[1]}] fused {sorted(ka)} + {sorted(kb)} "
            f"(electrical distance {d:.6f} p.u.)"
        )
        groups = [g for k, g in enumerate(groups) if k not in (i, j)] + [merged]
    return groups, events


def build_component_tensor(record: ImpactRecord, comp: CompKey,
                           partition: SensitivityPartition, limits: Constraints,
                           dp: float, dq: float, *, net: Network | None = None,
                           max_fsps: int | None = None,
                           graph: nx.Graph | None = None,
                           memory_budget_bytes: int = 2 << 30) -> ComponentTensor:
    ci = record.comp_index(comp)
    members = partition.impactful[comp]
    width = component_bin_width(record, comp, members)
    kernels = [
        (frozenset([key]), component_kernel(record.per_fsp[key], ci, dp, dq, width))
        for key in members
    ]
    merges: list[str] = []
    if max_fsps is not None and len(kernels) > max_fsps:
        kernels, merges = _merge_impactful(net, record, comp, kernels, max_fsps, graph)

    est = _estimate_conv_bytes([k for _, k in kernels]) if kernels else 8
    if est > memory_budget_bytes:
        raise MemoryBudgetError(f"{comp[0]}[{comp[1]}]", est, memory_budget_bytes)

    xi_raw = Kern3.identity()
    for _, kern in kernels:
        xi_raw = xi_raw.convolve(kern)
    base_value = float(record.base_values[ci])
    xi = _mask_xi(xi_raw, comp, base_value, width, limits)
    a = xi.collapse()
    upsilon = a
    for key in partition.non_impactful[comp]:
        upsilon = upsilon.convolve(pcc_kernel(record.per_fsp[key], dp, dq))
    return ComponentTensor(
        comp=comp, bin_width=width, base_value=base_value,
        xi_raw=xi_raw, xi=xi, a=a, upsilon=upsilon, merges=merges,
    )


def embed_kernel(kern: Kern2, p_axis_len: int, q_axis_len: int,
                 op_origin: int, oq_origin: int) -> np.ndarray:
    """Place a kernel into a grid whose cell (0,0) holds offset (op_origin, oq_origin)."""
    out = np.zeros((p_axis_len, q_axis_len))
    i0 = kern.op0 - op_origin
    j0 = kern.oq0 - oq_origin
    out[i0:i0 + kern.arr.shape[0], j0:j0 + kern.arr.shape[1]] = kern.arr
    return out


@dataclass
class TcState:
    """Everything a TensorConvolution+ run produced, ready to persist."""

    dp: float
    dq: float
    base_p: float
    base_q: float
    offers: list[FspOffer]
    regular: list[FspOffer]
    small: list[FspOffer]
    record: ImpactRecord
    partition: SensitivityPartition
    ufa_kern: Kern2
    op_origin: int
    oq_origin: int
    comp_tensors: dict[CompKey, ComponentTensor]
    small_kernels: dict[FspKey, Kern2]
    upsample_factor: int
    fa: FaGrid
    ufa: FaGrid
    merge_events: list[str]
    report: dict


def _fine_shift_list(offer: FspOffer, dp: float, dq: float, factor: int
                     ) -> list[tuple[float, float]]:
    grid = build_shift_grid(offer, dp / factor, dq / factor)
    return grid.points()


def tc_plus(net: Network, offers: list[FspOffer], limits: Constraints,
            dp: float, dq: float, *, max_fsps: int | None = None,
            upsample_factor: int = 4, loading_threshold: float = 0.5,
            voltage_threshold: float = 0.001, pf_tol: float = 1e-8,
            pf_max_iter: int = 30, memory_budget_bytes: int = 2 << 30) -> TcState:
    """Full pipeline; ``max_fsps`` enables the merge variant."""
    t0 = time.perf_counter()
    model = build_model(net, tol=pf_tol, max_iter=pf_max_iter)
    regular, small = classify_small(offers, dp, dq)

    shift_lists: dict[FspKey, list[tuple[float, float]]] = {}
    for offer in regular:
        shift_lists[fsp_key(offer)] = build_shift_grid(offer, dp, dq).points()
    for offer in small:
        shift_lists[fsp_key(offer)] = _fine_shift_list(offer, dp, dq, upsample_factor)

    record = compute_fsp_impacts(model, offers, shift_lists)
    pf_count = 1 + sum(
        len(v.shifts) - 1 + v.dropped for v in record.per_fsp.values()
    )

    ufa_kern = unconstrained_fa(record, regular, dp, dq)
    partition = classify_sensitivity(
        record, limits, loading_threshold, voltage_threshold,
        keys=[fsp_key(o) for o in regular],
    )

    # common axes: unconstrained support padded by one cell
    op_origin = ufa_kern.op0 - 1
    oq_origin = ufa_kern.oq0 - 1
    np_ax = ufa_kern.arr.shape[0] + 2
    nq_ax = ufa_kern.arr.shape[1] + 2
    p_axis = record.base_p + (op_origin + np.arange(np_ax)) * dp
    q_axis = record.base_q + (oq_origin + np.arange(nq_ax)) * dq
    ufa_grid = FaGrid(p_axis, q_axis, embed_kernel(ufa_kern, np_ax, nq_ax, op_origin, oq_origin))

    graph = impedance_graph(net) if max_fsps is not None else None
    comp_tensors: dict[CompKey, ComponentTensor] = {}
    merge_events: list[str] = []
    for comp in partition.retained:
        ct = build_component_tensor(
            record, comp, partition, limits, dp, dq, net=net, max_fsps=max_fsps,
            graph=graph, memory_budget_bytes=memory_budget_bytes,
        )
        comp_tensors[comp] = ct
        merge_events.extend(ct.merges)

    if comp_tensors:
        grids = [
            FaGrid(p_axis, q_axis,
                   embed_kernel(ct.upsilon, np_ax, nq_ax, op_origin, oq_origin))
            for ct in comp_tensors.values()
        ]
        fa = min_combine(grids)
    else:
        fa = ufa_grid
    fa = normalize(fa)

    small_kernels: dict[FspKey, Kern2] = {}
    if small:
        fa = bilinear_upsample(fa, upsample_factor)
        for offer in small:
            key = fsp_key(offer)
            kern = pcc_kernel(record.per_fsp[key], dp / upsample_factor, dq / upsample_factor)
            small_kernels[key] = kern
            fa = _convolve_grid(fa, kern)
        fa = normalize(fa)

    report = {
        "algorithm": "tcp" if max_fsps is None else "tcp-merge",
        "power_flows": pf_count,
        "constrained_components": len(partition.retained),
        "regular_fsps": len(regular),
        "sub_resolution_fsps": len(small),
        "merge_events": len(merge_events),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    return TcState(
        dp=dp, dq=dq, base_p=record.base_p, base_q=record.base_q,
        offers=offers, regular=regular, small=small, record=record,
        partition=partition, ufa_kern=ufa_kern, op_origin=op_origin,
        oq_origin=oq_origin, comp_tensors=comp_tensors,
        small_kernels=small_kernels, upsample_factor=upsample_factor,
        fa=fa, ufa=ufa_grid, merge_events=merge_events, report=report,
    )


def _convolve_grid(grid: FaGrid, kern: Kern2) -> FaGrid:
    """Convolve grid values with an offset kernel, extending the axes."""
    step_p = grid.dp
    step_q = grid.dq
    vals = _conv(grid.values, kern.arr)
    n_p, n_q = vals.shape
    p0 = grid.p_axis[0] + kern.op0 * step_p
    q0 = grid.q_axis[0] + kern.oq0 * step_q
    return FaGrid(p0 + np.arange(n_p) * step_p, q0 + np.arange(n_q) * step_q, vals)


def tc_plus_merge(net: Network, offers: list[FspOffer], limits: Constraints,
                  dp: float, dq: float, max_fsps: int, **kwargs) -> TcState:
    return tc_plus(net, offers, limits, dp, dq, max_fsps=max_fsps, **kwargs)
