"""PF-based flexibility area estimation: Monte-Carlo and exhaustive sweeps.

Both estimators share the same bookkeeping: apply one joint shift vector,
solve a full AC power flow, classify the operating point against the
constraints, tally the PCC (P, Q) bin. Non-converged samples count as
not-feasible. The input network is never mutated, so the base case is
trivially restored after any run.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import IntractableError, RuntimeFailure
from .fagrid import FaGrid
from .network import Constraints, Network
from .offers import FspOffer, build_shift_grid, shift_ranges, sample_shifts
from .pf import PfModel, build_model, check_constraints, solve_model


@dataclass(frozen=True)
class SampleOutcome:
    index: int
    shifts: tuple[tuple[float, float], ...]  # per FSP (dP, dQ)
    p_pcc_mw: float
    q_pcc_mvar: float
    converged: bool
    feasible: bool
    violation_summary: str = ""


def fa_axes(offers: list[FspOffer], base_p: float, base_q: float,
            dp: float, dq: float) -> tuple[np.ndarray, np.ndarray]:
    """Axes spanning the reachable PCC window, padded by one cell.

    A load shifting consumption up raises the PCC import; a DG shifting
    injection up lowers it.
    """
    lo_p = hi_p = lo_q = hi_q = 0.0
    for offer in offers:
        p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
        if offer.kind == "load":
            lo_p += p_lo
            hi_p += p_hi
            lo_q += q_lo
            hi_q += q_hi
        else:
            lo_p += -p_hi
            hi_p += -p_lo
            lo_q += -q_hi
            hi_q += -q_lo
    kp0 = math.floor(lo_p / dp) - 1
    kp1 = math.ceil(hi_p / dp) + 1
    kq0 = math.floor(lo_q / dq) - 1
    kq1 = math.ceil(hi_q / dq) + 1
    return (base_p + np.arange(kp0, kp1 + 1) * dp,
            base_q + np.arange(kq0, kq1 + 1) * dq)


def _bin_index(value: float, axis: np.ndarray, step: float) -> int:
    i = int(round((value - axis[0]) / step))
    return min(max(i, 0), len(axis) - 1)


def _solve_base(net: Network, pf_tol: float, pf_max_iter: int) -> tuple[PfModel, float, float]:
    model = build_model(net, tol=pf_tol, max_iter=pf_max_iter)
    base = solve_model(model)
    if not base.converged:
        raise RuntimeFailure("base-case power flow did not converge")
    return model, base.p_pcc_mw, base.q_pcc_mvar


def _run_samples(model: PfModel, offers: list[FspOffer], limits: Constraints,
                 vectors: np.ndarray, p_axis: np.ndarray, q_axis: np.ndarray,
                 dp: float, dq: float) -> tuple[FaGrid, list[SampleOutcome]]:
    values = np.zeros((len(p_axis), len(q_axis)))
    outcomes: list[SampleOutcome] = []
    for si in range(vectors.shape[0]):
        shifts = [
            (offers[k].kind, offers[k].index, float(vectors[si, k, 0]), float(vectors[si, k, 1]))
            for k in range(len(offers))
        ]
        result = solve_model(model, shifts)
        if result.converged:
            report = check_constraints(result, limits)
            feasible = report.feasible
            summary = "" if feasible else "; ".join(
                f"{v.comp_kind}[{v.index}] {v.quantity}={v.value:.4f} (limit {v.limit})"
                for v in report.violations[:3]
            )
        else:
            feasible = False
            summary = "power flow did not converge"
        if feasible:
            i = _bin_index(result.p_pcc_mw, p_axis, dp)
            j = _bin_index(result.q_pcc_mvar, q_axis, dq)
            values[i, j] += 1
        outcomes.append(SampleOutcome(
            index=si,
            shifts=tuple((float(vectors[si, k, 0]), float(vectors[si, k, 1]))
                         for k in range(len(offers))),
            p_pcc_mw=result.p_pcc_mw,
            q_pcc_mvar=result.q_pcc_mvar,
            converged=result.converged,
            feasible=feasible,
            violation_summary=summary,
        ))
    return FaGrid(p_axis, q_axis, values), outcomes


def _report(algorithm: str, outcomes: list[SampleOutcome], seed: int | None,
            wall_s: float) -> dict:
    return {
        "algorithm": algorithm,
        "power_flows": len(outcomes),
        "feasible_count": sum(o.feasible for o in outcomes),
        "non_converged_count": sum(not o.converged for o in outcomes),
        "wall_time_s": round(wall_s, 3),
        "seed": seed,
        "sign_convention": "load shift adds to consumption; DG shift adds to injection",
    }


def monte_carlo_pf(net: Network, offers: list[FspOffer], limits: Constraints,
                   no_samples: int, distribution: str, seed: int,
                   dp: float, dq: float, pf_tol: float = 1e-8,
                   pf_max_iter: int = 30) -> tuple[FaGrid, list[SampleOutcome], dict]:
    t0 = time.perf_counter()
    model, base_p, base_q = _solve_base(net, pf_tol, pf_max_iter)
    vectors = sample_shifts(offers, no_samples, distribution, seed)
    p_axis, q_axis = fa_axes(offers, base_p, base_q, dp, dq)
    grid, outcomes = _run_samples(model, offers, limits, vectors, p_axis, q_axis, dp, dq)
    report = _report("monte-carlo", outcomes, seed, time.perf_counter() - t0)
    report["distribution"] = distribution
    return grid, outcomes, report


def exhaustive_count(offers: list[FspOffer], dp: float, dq: float) -> int:
    """Product of per-FSP admissible lattice point counts."""
    count = 1
    for offer in offers:
        count *= build_shift_grid(offer, dp, dq).count
    return count


def exhaustive_pf(net: Network, offers: list[FspOffer], limits: Constraints,
                  dp: float, dq: float, cap: int = 1_000_000,
                  pf_tol: float = 1e-8, pf_max_iter: int = 30
                  ) -> tuple[FaGrid, list[SampleOutcome], dict]:
    t0 = time.perf_counter()
    point_lists = [build_shift_grid(offer, dp, dq).points() for offer in offers]
    total = 1
    for pts in point_lists:
        total *= len(pts)
    if total > cap:
        raise IntractableError(total, cap)
    model, base_p, base_q = _solve_base(net, pf_tol, pf_max_iter)
    p_axis, q_axis = fa_axes(offers, base_p, base_q, dp, dq)
    vectors = np.array(list(itertools.product(*point_lists)))
    assert vectors.shape[0] == total
    grid, outcomes = _run_samples(model, offers, limits, vectors, p_axis, q_axis, dp, dq)
    report = _report("exhaustive", outcomes, None, time.perf_counter() - t0)
    report["lattice_counts"] = [len(pts) for pts in point_lists]
    return grid, outcomes, report
