"""FA boundary tracing by weighted PCC objectives over an alpha sweep.

Each boundary point maximizes one of four sign patterns of
``w_p * P_PCC + w_q * Q_PCC`` over the FSP shift variables. The inner
solver is successive linear programming with a trust region: PCC powers
and every monitored constraint are linearized around the current point
with central finite differences from the full AC power flow, the LP step
is re-validated with AC, and the trust region halves whenever the step
is rejected. Only AC-feasible improving steps are ever accepted, so the
objective trace is non-decreasing by construction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .network import Constraints, Network
from .offers import FspOffer, shift_ranges
from .pf import PfModel, build_model, check_constraints, solve_model

# (sign of P weight, sign of Q weight) for the four maximization patterns
OBJECTIVE_SIGNS = {1: (1, 1), 2: (-1, 1), 3: (1, -1), 4: (-1, -1)}


def objective_weights(objective_id: int, alpha: float) -> tuple[float, float]:
    sp, sq = OBJECTIVE_SIGNS[objective_id]
    return sp * alpha, sq * (1.0 - alpha)


@dataclass(frozen=True)
class OpfBoundaryPoint:
    objective_id: int
    alpha: float
    w_p: float
    w_q: float
    p_pcc_mw: float
    q_pcc_mvar: float
    converged: bool
    setpoints: tuple[tuple[float, float], ...]  # per FSP (dP, dQ)
    objective_trace: tuple[float, ...]
    iterations: int
    diagnostic: str = ""


def _shifts(offers: list[FspOffer], x: np.ndarray):
    return [
        (offers[k].kind, offers[k].index, float(x[2 * k]), float(x[2 * k + 1]))
        for k in range(len(offers))
    ]


def _project(offers: list[FspOffer], x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Clip into the box and pull Smax points radially inside the circle."""
    x = np.clip(x, lo, hi)
    for k, offer in enumerate(offers):
        if offer.shape != "Smax" or offer.discrete:
            continue
        p_new = offer.p_mw + x[2 * k]
        q_new = offer.q_mvar + x[2 * k + 1]
        s = math.hypot(p_new, q_new)
        if s > offer.s_max_mva > 0:
            scale = offer.s_max_mva / s * (1.0 - 1e-12)
            x[2 * k] = p_new * scale - offer.p_mw
            x[2 * k + 1] = q_new * scale - offer.q_mvar
    return x


def solve_single_opf(net_or_model: Network | PfModel, offers: list[FspOffer],
                     limits: Constraints, w_p: float, w_q: float,
                     objective_id: int = 0, alpha: float = float("nan"),
                     max_outer: int = 40, fd_frac: float = 0.01,
                     step_tol_frac: float = 1e-4) -> OpfBoundaryPoint:
    model = net_or_model if isinstance(net_or_model, PfModel) else build_model(net_or_model)
    m2 = 2 * len(offers)
    lo = np.zeros(m2)
    hi = np.zeros(m2)
    for k, offer in enumerate(offers):
        p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
        lo[2 * k], hi[2 * k] = p_lo, p_hi
        lo[2 * k + 1], hi[2 * k + 1] = q_lo, q_hi
    rng = hi - lo
    free = rng > 1e-12

    def evaluate(x: np.ndarray):
        res = solve_model(model, _shifts(offers, x))
        if not res.converged:
            return None, res, False
        rep = check_constraints(res, limits)
        return w_p * res.p_pcc_mw + w_q * res.q_pcc_mvar, res, rep.feasible

    x = np.zeros(m2)
    f, res, feasible = evaluate(x)
    if f is None or not feasible:
        return OpfBoundaryPoint(
            objective_id, alpha, w_p, w_q,
            res.p_pcc_mw if res.converged else float("nan"),
            res.q_pcc_mvar if res.converged else float("nan"),
            False, tuple((0.0, 0.0) for _ in offers), (), 0,
            "base operating point infeasible or non-convergent",
        )

    if not free.any():
        return OpfBoundaryPoint(
            objective_id, alpha, w_p, w_q, res.p_pcc_mw, res.q_pcc_mvar,
            True, tuple((0.0, 0.0) for _ in offers), (f,), 1,
        )

    trace = [f]
    tr = 0.5 * rng
    margin = 1e-6
    it = 0
    for it in range(1, max_outer + 1):
        # finite-difference sensitivities of PCC powers and every constraint
        n_line = len(model.net.lines)
        n_trafo = len(model.net.trafos)
        n_bus = len(model.net.buses)
        nrow = 2 + n_line + n_trafo + n_bus
        jac = np.zeros((nrow, m2))
        fd_fail = False
        for i in range(m2):
            if not free[i]:
                continue
            h = fd_frac * rng[i]
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            rp = solve_model(model, _shifts(offers, xp))
            rm = solve_model(model, _shifts(offers, xm))
            if not (rp.converged and rm.converged):
                fd_fail = True
                break
            col = np.concatenate((
                [rp.p_pcc_mw - rm.p_pcc_mw, rp.q_pcc_mvar - rm.q_pcc_mvar],
                np.nan_to_num(rp.line_loading - rm.line_loading),
                np.nan_to_num(rp.trafo_loading - rm.trafo_loading),
                np.nan_to_num(rp.vm_pu - rm.vm_pu),
            ))
            jac[:, i] = col / (2 * h)
        if fd_fail:
            tr *= 0.5
            if np.max(tr[free] / rng[free]) < step_tol_frac:
                break
            continue

        c = -(w_p * jac[0] + w_q * jac[1])
        rows, rhs = [], []
        line_vals = np.nan_to_num(res.line_loading)
        trafo_vals = np.nan_to_num(res.trafo_loading)
        vm_vals = np.nan_to_num(res.vm_pu, nan=1.0)
        for j in range(n_line):
            rows.append(jac[2 + j])
            rhs.append(limits.max_loading_percent - line_vals[j] - margin)
        for j in range(n_trafo):
            rows.append(jac[2 + n_line + j])
            rhs.append(limits.max_loading_percent - trafo_vals[j] - margin)
        for j in range(n_bus):
            vrow = jac[2 + n_line + n_trafo + j]
            rows.append(vrow)
            rhs.append(limits.max_voltage_pu - vm_vals[j] - margin * 1e-2)
            rows.append(-vrow)
            rhs.append(vm_vals[j] - limits.min_voltage_pu - margin * 1e-2)
        for k, offer in enumerate(offers):
            if offer.shape != "Smax" or offer.discrete:
                continue
            p_new = offer.p_mw + x[2 * k]
            q_new = offer.q_mvar + x[2 * k + 1]
            g = p_new * p_new + q_new * q_new - offer.s_max_mva ** 2
            grad = np.zeros(m2)
            grad[2 * k] = 2 * p_new
            grad[2 * k + 1] = 2 * q_new
            rows.append(grad)
            rhs.append(-g)

        bounds = [
            (max(lo[i] - x[i], -tr[i]), min(hi[i] - x[i], tr[i])) if free[i] else (0.0, 0.0)
            for i in range(m2)
        ]
        lp = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds,
                     method="highs")
        accepted = False
        if lp.success:
            cand = _project(offers, x + lp.x, lo, hi)
            f_new, res_new, ok = evaluate(cand)
            if f_new is not None and ok and f_new > f + 1e-9:
                x, f, res = cand, f_new, res_new
                trace.append(f)
                tr = np.minimum(tr * 2.0, rng)
                accepted = True
        if not accepted:
            tr *= 0.5
            if np.max(tr[free] / rng[free]) < step_tol_frac:
                break

    setpoints = tuple((float(x[2 * k]), float(x[2 * k + 1])) for k in range(len(offers)))
    return OpfBoundaryPoint(
        objective_id, alpha, w_p, w_q, res.p_pcc_mw, res.q_pcc_mvar,
        True, setpoints, tuple(trace), it,
    )


def sweep_alphas(opf_step: float) -> list[float]:
    n = math.floor(1.0 / opf_step) + 1
    return [min(i * opf_step, 1.0) for i in range(n)]


def opf_boundary_sweep(net: Network, offers: list[FspOffer], limits: Constraints,
                       opf_step: float, pf_tol: float = 1e-8, pf_max_iter: int = 30
                       ) -> tuple[list[OpfBoundaryPoint], dict]:
    t0 = time.perf_counter()
    model = build_model(net, tol=pf_tol, max_iter=pf_max_iter)
    points: list[OpfBoundaryPoint] = []
    for objective_id in (1, 2, 3, 4):
        for alpha in sweep_alphas(opf_step):
            w_p, w_q = objective_weights(objective_id, alpha)
            points.append(solve_single_opf(
                model, offers, limits, w_p, w_q, objective_id, alpha,
            ))
    report = {
        "algorithm": "opf",
        "attempted_solves": len(points),
        "converged_solves": sum(p.converged for p in points),
        "opf_step": opf_step,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    return points, report


def boundary_polygon(points: list[OpfBoundaryPoint]) -> np.ndarray:
    """Converged points ordered by angle around their centroid (closed ring)."""
    pts = np.array([(p.p_pcc_mw, p.q_pcc_mvar) for p in points if p.converged])
    if len(pts) < 3:
        return pts
    centroid = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    order = np.argsort(ang, kind="stable")
    ring = pts[order]
    return np.vstack([ring, ring[:1]])
