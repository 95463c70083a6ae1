import numpy as np
import pytest

from flexarea.errors import IntractableError
from flexarea.estimators import (
    exhaustive_count,
    exhaustive_pf,
    fa_axes,
    monte_carlo_pf,
)
from flexarea.network import Constraints
from flexarea.offers import FspOffer, build_shift_grid


def test_fa_axes_sign_mapping(small_offers):
    p_axis, q_axis = fa_axes(small_offers, base_p=5.0, base_q=1.0, dp=0.1, dq=0.1)
    # load raises import when shifting up, DG lowers it: the P window is
    # [base + load_lo - dg_hi, base + load_hi - dg_lo], padded one cell
    assert p_axis[0] <= 5.0 + (-0.6) + (-0.4)
    assert p_axis[-1] >= 5.0 + 0.2 + 0.4
    assert np.allclose(np.diff(p_axis), 0.1)
    assert np.allclose(np.diff(q_axis), 0.1)


def test_exhaustive_count_is_product(small_offers):
    per = [build_shift_grid(o, 0.2, 0.2).count for o in small_offers]
    assert exhaustive_count(small_offers, 0.2, 0.2) == per[0] * per[1]


def test_exhaustive_runs_every_combination(feeder4, small_offers):
    limits = Constraints()
    grid, outcomes, report = exhaustive_pf(feeder4, small_offers, limits, 0.2, 0.2)
    assert report["power_flows"] == exhaustive_count(small_offers, 0.2, 0.2)
    assert len(outcomes) == report["power_flows"]
    assert report["feasible_count"] == int(grid.values.sum())
    assert report["lattice_counts"] == [
        build_shift_grid(o, 0.2, 0.2).count for o in small_offers
    ]


def test_exhaustive_cap_refusal(feeder4, feeder4_offers):
    with pytest.raises(IntractableError, match="cap"):
        exhaustive_pf(feeder4, feeder4_offers, Constraints(), 0.01, 0.01, cap=1000)


def test_monte_carlo_outcome_bookkeeping(feeder4, small_offers):
    grid, outcomes, report = monte_carlo_pf(
        feeder4, small_offers, Constraints(), 250, "Uniform", seed=11, dp=0.1, dq=0.1,
    )
    assert len(outcomes) == 250
    assert report["power_flows"] == 250
    assert report["feasible_count"] == sum(o.feasible for o in outcomes)
    assert int(grid.values.sum()) == report["feasible_count"]
    assert report["distribution"] == "Uniform"


def test_monte_carlo_deterministic(feeder4, small_offers):
    a = monte_carlo_pf(feeder4, small_offers, Constraints(), 100, "Hard", 2, 0.1, 0.1)
    b = monte_carlo_pf(feeder4, small_offers, Constraints(), 100, "Hard", 2, 0.1, 0.1)
    assert np.array_equal(a[0].values, b[0].values)
    assert [o.shifts for o in a[1]] == [o.shifts for o in b[1]]


def test_network_is_not_mutated(feeder4, small_offers):
    before = feeder4
    monte_carlo_pf(feeder4, small_offers, Constraints(), 50, "Uniform", 0, 0.1, 0.1)
    assert feeder4 == before  # frozen dataclasses: estimators work on copies


def test_infeasible_samples_classified(feeder4, small_offers):
    # a 1 % loading limit leaves no feasible operating point at all
    grid, outcomes, report = monte_carlo_pf(
        feeder4, small_offers, Constraints(max_loading_percent=1.0),
        60, "Uniform", 1, 0.1, 0.1,
    )
    assert report["feasible_count"] == 0
    assert all(not o.feasible for o in outcomes)
    assert all(o.violation_summary for o in outcomes)


def test_degenerate_single_point_offer(feeder4):
    frozen = [FspOffer(kind="load", index=0, p_mw=2.0, q_mvar=0.5, s_max_mva=3.0,
                       p_shift_range=(0.0, 0.0), q_shift_range=(0.0, 0.0))]
    grid, outcomes, report = exhaustive_pf(feeder4, frozen, Constraints(), 0.1, 0.1)
    assert report["power_flows"] == 1
    assert outcomes[0].feasible
    # the single feasible cell sits at the base-case PCC point
    i, j = np.argwhere(grid.values > 0)[0]
    assert grid.p_axis[i] == pytest.approx(outcomes[0].p_pcc_mw, abs=0.05)
    assert grid.q_axis[j] == pytest.approx(outcomes[0].q_pcc_mvar, abs=0.05)
