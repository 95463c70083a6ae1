"""Independent reference implementations used only by the tests.

None of these share solver code with the package: the power-flow oracle is
a Gauss-Seidel sweep with its own per-unit conversion, the counting oracle
enumerates shift combinations directly instead of convolving, and the
optimization oracle is a dense grid search. Slow on purpose - their only
job is to be obviously correct.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

OMEGA = 2.0 * math.pi * 50.0


def gs_ybus(doc: dict, s_base: float = 1.0) -> np.ndarray:
    """Dense admittance matrix assembled straight from the JSON document."""
    n = len(doc["buses"])
    y = np.zeros((n, n), dtype=complex)

    def open_switch(et, element):
        return any(
            sw["et"] == et and sw["element"] == element and not sw.get("closed", True)
            for sw in doc.get("switches", [])
        )

    for i, ln in enumerate(doc["lines"]):
        if open_switch("line", i):
            continue
        f, t = ln["from_bus"], ln["to_bus"]
        vn = doc["buses"][f]["vn_kv"]
        zb = vn * vn / s_base
        z = complex(ln["r_ohm_per_km"], ln["x_ohm_per_km"]) * ln["length_km"] / zb
        ys = 1.0 / z
        bc = OMEGA * ln["c_nf_per_km"] * 1e-9 * ln["length_km"] * zb
        y[f, f] += ys + 1j * bc / 2
        y[t, t] += ys + 1j * bc / 2
        y[f, t] -= ys
        y[t, f] -= ys
    for i, tr in enumerate(doc["trafos"]):
        if open_switch("trafo", i):
            continue
        f, t = tr["hv_bus"], tr["lv_bus"]
        zmag = tr["vk_percent"] / 100.0 * s_base / tr["sn_mva"]
        r = tr["vkr_percent"] / 100.0 * s_base / tr["sn_mva"]
        x = math.sqrt(max(zmag * zmag - r * r, 0.0))
        ys = 1.0 / complex(r, x)
        y[f, f] += ys
        y[t, t] += ys
        y[f, t] -= ys
        y[t, f] -= ys
    return y


def gauss_seidel_pf(doc: dict, s_base: float = 1.0, tol: float = 1e-10,
                    max_iter: int = 200_000) -> tuple[bool, np.ndarray]:
    """Gauss-Seidel solve; returns (converged, complex bus voltages).

    Only handles documents where every bus is energized (fine for the
    bundled fixtures with their switches closed).
    """
    y = gs_ybus(doc, s_base)
    n = len(doc["buses"])
    ext = doc["ext_grid"]
    if isinstance(ext, list):
        ext = ext[0]
    slack = ext["bus"]
    s = np.zeros(n, dtype=complex)
    for ld in doc["loads"]:
        sc = ld.get("scaling", 1.0)
        s[ld["bus"]] -= complex(ld["p_mw"], ld["q_mvar"]) * sc / s_base
    for sg in doc["sgens"]:
        sc = sg.get("scaling", 1.0)
        s[sg["bus"]] += complex(sg["p_mw"], sg["q_mvar"]) * sc / s_base

    v = np.ones(n, dtype=complex)
    v[slack] = ext.get("vm_pu", 1.0)
    for _ in range(max_iter):
        delta = 0.0
        for i in range(n):
            if i == slack:
                continue
            rest = y[i] @ v - y[i, i] * v[i]
            v_new = (np.conj(s[i] / v[i]) - rest) / y[i, i]
            delta = max(delta, abs(v_new - v[i]))
            v[i] = v_new
        if delta < tol:
            return True, v
    return False, v


def power_balance_residual(doc: dict, v: np.ndarray, s_base: float = 1.0) -> float:
    """Max |S(V) - S_spec| over non-slack buses (p.u.)."""
    y = gs_ybus(doc, s_base)
    n = len(doc["buses"])
    ext = doc["ext_grid"]
    if isinstance(ext, list):
        ext = ext[0]
    s = np.zeros(n, dtype=complex)
    for ld in doc["loads"]:
        s[ld["bus"]] -= complex(ld["p_mw"], ld["q_mvar"]) * ld.get("scaling", 1.0) / s_base
    for sg in doc["sgens"]:
        s[sg["bus"]] += complex(sg["p_mw"], sg["q_mvar"]) * sg.get("scaling", 1.0) / s_base
    calc = v * np.conj(y @ v)
    res = np.abs(calc - s)
    res[ext["bus"]] = 0.0
    return float(res.max())


def enumerate_offsets(per_fsp_offsets: list[np.ndarray]) -> dict[tuple[int, int], int]:
    """Brute-force joint (P, Q) offset counts under additive binning.

    ``per_fsp_offsets[k]`` is an integer array of shape (n_shifts, 2).
    """
    counts: dict[tuple[int, int], int] = {}
    for combo in itertools.product(*[range(len(a)) for a in per_fsp_offsets]):
        op = sum(int(per_fsp_offsets[k][i, 0]) for k, i in enumerate(combo))
        oq = sum(int(per_fsp_offsets[k][i, 1]) for k, i in enumerate(combo))
        counts[(op, oq)] = counts.get((op, oq), 0) + 1
    return counts


def enumerate_offsets_3d(per_fsp_offsets: list[np.ndarray]
                         ) -> dict[tuple[int, int, int], int]:
    """Like :func:`enumerate_offsets` with a third (component value) axis."""
    counts: dict[tuple[int, int, int], int] = {}
    for combo in itertools.product(*[range(len(a)) for a in per_fsp_offsets]):
        key = tuple(
            sum(int(per_fsp_offsets[k][i, d]) for k, i in enumerate(combo))
            for d in range(3)
        )
        counts[key] = counts.get(key, 0) + 1
    return counts


def kernel_to_dict(arr: np.ndarray, origins: tuple[int, ...]) -> dict[tuple, float]:
    """Nonzero kernel entries keyed by absolute integer offsets."""
    out = {}
    for idx in zip(*np.nonzero(arr)):
        key = tuple(int(i) + o for i, o in zip(idx, origins))
        out[key] = float(arr[idx])
    return out


def dense_opf_search(evaluate, p_range, q_range, resolution: int = 61):
    """Grid-search maximum of ``evaluate(dp, dq) -> float | None``.

    Returns (best objective, (dp, dq)); None entries (infeasible points)
    are skipped.
    """
    best, best_xy = -math.inf, (0.0, 0.0)
    for dp in np.linspace(p_range[0], p_range[1], resolution):
        for dq in np.linspace(q_range[0], q_range[1], resolution):
            val = evaluate(float(dp), float(dq))
            if val is not None and val > best:
                best, best_xy = val, (float(dp), float(dq))
    return best, best_xy
