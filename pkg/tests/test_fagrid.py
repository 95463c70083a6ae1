import numpy as np
import pytest

from flexarea.errors import ContractError, RuntimeFailure
from flexarea.fagrid import (
    FaGrid,
    bilinear_upsample,
    min_combine,
    normalize,
    read_csv,
    write_csv,
)


def grid(values, p0=0.0, q0=0.0, dp=0.5, dq=0.25):
    values = np.asarray(values, dtype=float)
    p_axis = p0 + np.arange(values.shape[0]) * dp
    q_axis = q0 + np.arange(values.shape[1]) * dq
    return FaGrid(p_axis, q_axis, values)


def test_axis_validation():
    with pytest.raises(ContractError, match="dimensions"):
        FaGrid(np.array([0.0, 1.0]), np.array([0.0]), np.zeros((3, 1)))
    with pytest.raises(ContractError, match="increasing"):
        FaGrid(np.array([0.0, 2.0, 1.0]), np.array([0.0]), np.zeros((3, 1)))
    with pytest.raises(ContractError, match="uniform"):
        FaGrid(np.array([0.0, 1.0, 3.0]), np.array([0.0]), np.zeros((3, 1)))
    with pytest.raises(ContractError, match="non-negative"):
        grid([[-1.0]])


def test_min_combine_is_a_lattice_meet():
    a = grid([[1.0, 2.0], [3.0, 0.0]])
    b = grid([[0.5, 4.0], [1.0, 1.0]])
    m = min_combine([a, b])
    assert np.array_equal(m.values, [[0.5, 2.0], [1.0, 0.0]])
    # idempotent, commutative, and dominated by every argument
    assert np.array_equal(min_combine([a, a]).values, a.values)
    assert np.array_equal(min_combine([b, a]).values, m.values)
    assert np.all(m.values <= a.values) and np.all(m.values <= b.values)


def test_min_combine_rejects_mismatched_axes():
    a = grid([[1.0]])
    b = grid([[1.0]], p0=10.0)
    with pytest.raises(ContractError, match="identical axes"):
        min_combine([a, b])


def test_support_shrinks_under_min():
    a = grid([[1.0, 0.0], [2.0, 2.0]])
    b = grid([[1.0, 1.0], [0.0, 2.0]])
    m = min_combine([a, b])
    assert (m.support() <= (a.support() & b.support())).all()


def test_normalize():
    g = normalize(grid([[1.0, 4.0], [2.0, 0.0]]))
    assert g.values.max() == 1.0
    assert g.values.min() == 0.0
    with pytest.raises(RuntimeFailure, match="empty"):
        normalize(grid([[0.0, 0.0]]))


def test_upsample_preserves_nodes_and_corners():
    g = grid(np.arange(12.0).reshape(3, 4))
    f = bilinear_upsample(g, 4)
    assert len(f.p_axis) == (3 - 1) * 4 + 1
    assert len(f.q_axis) == (4 - 1) * 4 + 1
    # original nodes survive exactly
    assert np.allclose(f.values[::4, ::4], g.values)
    assert f.p_axis[0] == g.p_axis[0] and f.p_axis[-1] == g.p_axis[-1]


def test_upsample_validation():
    g = grid([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ContractError):
        bilinear_upsample(g, 1)
    with pytest.raises(ContractError):
        bilinear_upsample(grid([[1.0]]), 2)


def test_csv_roundtrip_is_identity(tmp_path):
    rng = np.random.default_rng(5)
    g = grid(rng.random((7, 5)), p0=-1.2345678901234, dp=0.05, dq=0.1)
    path = write_csv(g, tmp_path / "fa.csv")
    back = read_csv(path)
    assert np.array_equal(back.values, g.values)
    assert np.array_equal(back.p_axis, g.p_axis)
    assert np.array_equal(back.q_axis, g.q_axis)


def test_csv_header_check(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ContractError, match="header"):
        read_csv(p)
