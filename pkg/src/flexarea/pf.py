"""AC power flow: admittance matrix, Newton-Raphson solve, constraint checks.

Per-unit conversion lives entirely in this module. The system base defaults
to 1 MVA; bus voltage bases are the nominal bus voltages, so transformer
ratios are 1 p.u. Every solve uses a flat start for determinism.

Non-convergence is a value (``converged=False``), never an exception;
estimators decide how to treat a diverged sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, NetworkValidationError
from .network import Constraints, Network, energized_buses

OMEGA = 2.0 * math.pi * 50.0

Shift = tuple[str, int, float, float]  # (kind, element index, dP MW, dQ MVAr)


@dataclass(frozen=True)
class _Branch:
    kind: str  # "line" | "trafo"
    index: int
    f: int
    t: int
    ys: complex  # series admittance, p.u.
    bc: float  # total charging susceptance, p.u.
    rating: float  # max_i_ka for lines, sn_mva for trafos


def _branch_params(net: Network, s_base: float) -> list[_Branch]:
    out = []
    for i, ln in enumerate(net.lines):
        if not net.branch_closed("line", i):
            continue
        vn = net.buses[ln.from_bus].vn_kv
        zbase = vn * vn / s_base
        r = ln.r_ohm_per_km * ln.length_km / zbase
        x = ln.x_ohm_per_km * ln.length_km / zbase
        bc = OMEGA * ln.c_nf_per_km * 1e-9 * ln.length_km * zbase
        out.append(_Branch("line", i, ln.from_bus, ln.to_bus, 1.0 / complex(r, x), bc, ln.max_i_ka))
    for i, tr in enumerate(net.trafos):
        if not net.branch_closed("trafo", i):
            continue
        z = tr.vk_percent / 100.0 * s_base / tr.sn_mva
        r = tr.vkr_percent / 100.0 * s_base / tr.sn_mva
        x = math.sqrt(max(z * z - r * r, 0.0))
        out.append(_Branch("trafo", i, tr.hv_bus, tr.lv_bus, 1.0 / complex(r, x), 0.0, tr.sn_mva))
    return out


def build_ybus(net: Network, s_base: float = 1.0) -> sp.csr_matrix:
    """Complex bus admittance matrix over all buses, closed branches only."""
    n = len(net.buses)
    rows, cols, vals = [], [], []
    for br in _branch_params(net, s_base):
        ysh = 1j * br.bc / 2.0
        rows += [br.f, br.t, br.f, br.t]
        cols += [br.f, br.t, br.t, br.f]
        vals += [br.ys + ysh, br.ys + ysh, -br.ys, -br.ys]
    y = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    y.sum_duplicates()
    return y


@dataclass
class PfModel:
    """Pre-assembled solve-ready view of a network.

    Building the model once and reusing it across many shifted solves is
    what keeps the sample loops fast; the model is never mutated.
    """

    net: Network
    s_base: float
    energized: np.ndarray  # sorted bus indices in the slack island
    pos: dict[int, int]  # bus index -> position in `energized`
    ybus: np.ndarray  # dense, energized buses only
    slack_pos: int
    pq_pos: np.ndarray
    p_spec: np.ndarray  # base injections, p.u., energized order
    q_spec: np.ndarray
    vm_slack: float
    branches: list[_Branch]
    tol: float = 1e-8
    max_iter: int = 30


def build_model(net: Network, s_base: float = 1.0, tol: float = 1e-8, max_iter: int = 30) -> PfModel:
    energized = np.array(sorted(energized_buses(net)), dtype=int)
    pos = {int(b): i for i, b in enumerate(energized)}
    if net.slack_bus not in pos:
        raise NetworkValidationError("slack bus is not energized")
    y_full = build_ybus(net, s_base).toarray()
    ybus = y_full[np.ix_(energized, energized)]
    n = len(energized)
    p = np.zeros(n)
    q = np.zeros(n)
    for inj, sign in ((net.loads, -1.0), (net.sgens, +1.0)):
        for item in inj:
            j = pos[item.bus]
            p[j] += sign * item.p_mw * item.scaling / s_base
            q[j] += sign * item.q_mvar * item.scaling / s_base
    slack_pos = pos[net.slack_bus]
    pq_pos = np.array([i for i in range(n) if i != slack_pos], dtype=int)
    branches = [br for br in _branch_params(net, s_base) if br.f in pos and br.t in pos]
    return PfModel(
        net=net,
        s_base=s_base,
        energized=energized,
        pos=pos,
        ybus=ybus,
        slack_pos=slack_pos,
        pq_pos=pq_pos,
        p_spec=p,
        q_spec=q,
        vm_slack=net.ext_grid.vm_pu,
        branches=branches,
        tol=tol,
        max_iter=max_iter,
    )


@dataclass
class PfResult:
    converged: bool
    iterations: int
    max_mismatch: float
    vm_pu: np.ndarray  # per bus, NaN when de-energized
    va_rad: np.ndarray
    line_loading: np.ndarray  # percent, NaN when out of service
    trafo_loading: np.ndarray
    p_pcc_mw: float
    q_pcc_mvar: float


def solve_model(model: PfModel, shifts: tuple[Shift, ...] | list[Shift] = ()) -> PfResult:
    """Newton-Raphson solve on polar mismatch equations, flat start."""
    n = len(model.energized)
    p = model.p_spec.copy()
    q = model.q_spec.copy()
    for kind, idx, dp, dq in shifts:
        items = model.net.loads if kind == "load" else model.net.sgens
        sign = -1.0 if kind == "load" else 1.0
        j = model.pos[items[idx].bus]
        p[j] += sign * dp / model.s_base
        q[j] += sign * dq / model.s_base

    v = np.ones(n, dtype=complex) * 1.0
    v[model.slack_pos] = model.vm_slack
    va = np.zeros(n)
    vm = np.abs(v)
    pq = model.pq_pos
    y = model.ybus
    s_spec = p + 1j * q

    converged = False
    it = 0
    mm = math.inf
    for it in range(1, model.max_iter + 1):
        ibus = y @ v
        mis = v * np.conj(ibus) - s_spec
        f = np.concatenate([mis[pq].real, mis[pq].imag])
        mm = float(np.max(np.abs(f))) if len(f) else 0.0
        if mm <= model.tol:
            converged = True
            break
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_vnorm = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
        ds_dvm = diag_vnorm @ np.conj(diag_i) + diag_v @ np.conj(y @ diag_vnorm)
        j11 = ds_dva[np.ix_(pq, pq)].real
        j12 = ds_dvm[np.ix_(pq, pq)].real
        j21 = ds_dva[np.ix_(pq, pq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        jac = np.block([[j11, j12], [j21, j22]])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        m = len(pq)
        va[pq] += dx[:m]
        vm[pq] += dx[m:]
        if np.any(vm <= 0):
            break
        v = vm * np.exp(1j * va)
    else:
        it = model.max_iter

    nbus = len(model.net.buses)
    vm_out = np.full(nbus, np.nan)
    va_out = np.full(nbus, np.nan)
    vm_out[model.energized] = np.abs(v)
    va_out[model.energized] = np.angle(v)

    line_loading = np.full(len(model.net.lines), np.nan)
    trafo_loading = np.full(len(model.net.trafos), np.nan)
    if converged:
        for br in model.branches:
            vf = v[model.pos[br.f]]
            vt = v[model.pos[br.t]]
            i_f = (vf - vt) * br.ys + vf * 1j * br.bc / 2.0
            i_t = (vt - vf) * br.ys + vt * 1j * br.bc / 2.0
            if br.kind == "line":
                vn_f = model.net.buses[br.f].vn_kv
                vn_t = model.net.buses[br.t].vn_kv
                ika_f = abs(i_f) * model.s_base / (math.sqrt(3.0) * vn_f)
                ika_t = abs(i_t) * model.s_base / (math.sqrt(3.0) * vn_t)
                line_loading[br.index] = max(ika_f, ika_t) / br.rating * 100.0
            else:
                sf = abs(vf * np.conj(i_f)) * model.s_base
                st = abs(vt * np.conj(i_t)) * model.s_base
                trafo_loading[br.index] = max(sf, st) / br.rating * 100.0

    s_slack = v[model.slack_pos] * np.conj((y @ v)[model.slack_pos]) * model.s_base
    return PfResult(
        converged=converged,
        iterations=it,
        max_mismatch=mm,
        vm_pu=vm_out,
        va_rad=va_out,
        line_loading=line_loading,
        trafo_loading=trafo_loading,
        p_pcc_mw=float(s_slack.real),
        q_pcc_mvar=float(s_slack.imag),
    )


def solve_pf(net: Network, shifts: tuple[Shift, ...] | list[Shift] = (), s_base: float = 1.0,
             tol: float = 1e-8, max_iter: int = 30) -> PfResult:
    return solve_model(build_model(net, s_base=s_base, tol=tol, max_iter=max_iter), shifts)


@dataclass(frozen=True)
class Violation:
    comp_kind: str  # "line" | "trafo" | "bus"
    index: int
    quantity: str  # "loading" | "voltage"
    value: float
    limit: float


@dataclass(frozen=True)
class ConstraintReport:
    feasible: bool
    violations: tuple[Violation, ...]


def check_constraints(result: PfResult, limits: Constraints) -> ConstraintReport:
    if not result.converged:
        raise ContractError("check_constraints requires a converged power flow")
    viol: list[Violation] = []
    for i, ld in enumerate(result.line_loading):
        if not np.isnan(ld) and ld > limits.max_loading_percent:
            viol.append(Violation("line", i, "loading", float(ld), limits.max_loading_percent))
    for i, ld in enumerate(result.trafo_loading):
        if not np.isnan(ld) and ld > limits.max_loading_percent:
            viol.append(Violation("trafo", i, "loading", float(ld), limits.max_loading_percent))
    for i, vm in enumerate(result.vm_pu):
        if np.isnan(vm):
            continue
        if vm > limits.max_voltage_pu:
            viol.append(Violation("bus", i, "voltage", float(vm), limits.max_voltage_pu))
        elif vm < limits.min_voltage_pu:
            viol.append(Violation("bus", i, "voltage", float(vm), limits.min_voltage_pu))
    return ConstraintReport(feasible=not viol, violations=tuple(viol))
