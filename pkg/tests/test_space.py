import numpy as np
import pytest

from tabukit.space import SearchSpace


def test_construction_counts_cells():
    s = SearchSpace(lower=(0.0, -1.0), upper=(10.0, 1.0), step=(0.1, 0.5))
    assert s.dim == 2
    assert s.n_values == (101, 5)
    assert s.size == 101 * 5


@pytest.mark.parametrize("lower,upper,step", [
    ((0.0,), (1.0,), (0.3,)),      # span not a step multiple
    ((0.0,), (1.0,), (0.0,)),      # zero step
    ((0.0,), (1.0,), (-0.1,)),     # negative step
    ((2.0,), (1.0,), (0.1,)),      # inverted bounds
    ((0.0,), (np.inf,), (1.0,)),   # non-finite bound
])
def test_construction_rejects_bad_boxes(lower, upper, step):
    with pytest.raises(ValueError):
        SearchSpace(lower=lower, upper=upper, step=step)


def test_construction_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        SearchSpace(lower=(0.0, 0.0), upper=(1.0,), step=(0.1,))


def test_index_round_trip():
    s = SearchSpace(lower=(10.0, -180.0), upper=(250.0, 180.0), step=(1.0, 1.0))
    for idx in ((0, 0), (240, 360), (37, 181)):
        assert s.to_index(s.from_index(idx)) == idx


def test_last_index_snaps_to_exact_upper_bound():
    # 0.01 steps are not binary-exact; the top of the range must still be
    # representable as the exact bound value
    s = SearchSpace(lower=(0.01,), upper=(50.0,), step=(0.01,))
    top = s.from_index((s.n_values[0] - 1,))
    assert top[0] == 50.0


def test_from_index_rejects_out_of_range():
    s = SearchSpace(lower=(0.0,), upper=(1.0,), step=(0.5,))
    with pytest.raises(IndexError):
        s.from_index((3,))
    with pytest.raises(IndexError):
        s.from_index((-1,))


def test_to_index_rejects_off_grid_and_outside():
    s = SearchSpace(lower=(0.0,), upper=(10.0,), step=(0.1,))
    with pytest.raises(ValueError):
        s.to_index((0.05,))
    with pytest.raises(ValueError):
        s.to_index((10.1,))
    with pytest.raises(ValueError):
        s.to_index((0.1, 0.2))


def test_is_aligned():
    s = SearchSpace(lower=(0.0,), upper=(10.0,), step=(0.1,))
    assert s.is_aligned((0.3,))
    assert not s.is_aligned((0.31,))
    assert not s.is_aligned((-0.1,))


def test_align_snaps_and_clamps():
    s = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(0.1, 0.1))
    np.testing.assert_allclose(s.align((0.34, 99.0)), [0.3, 10.0])
    np.testing.assert_allclose(s.align((-5.0, 0.449)), [0.0, 0.4],
                               atol=1e-12)


def test_clamp_index():
    s = SearchSpace(lower=(0.0,), upper=(1.0,), step=(0.5,))
    assert s.clamp_index((-4,)) == (0,)
    assert s.clamp_index((9,)) == (2,)


def test_random_index_is_seeded_and_in_range():
    s = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 1.0), step=(0.1, 1.0))
    a = s.random_index(np.random.default_rng(5))
    b = s.random_index(np.random.default_rng(5))
    assert a == b
    assert all(0 <= k < n for k, n in zip(a, s.n_values))


def test_multiples_of_step():
    s = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 4.0), step=(0.1, 0.5))
    assert s.multiples_of_step((1.0, 2.0)) == (10, 4)
    assert s.multiples_of_step(0.5) == (5, 1)  # scalar broadcast
    with pytest.raises(ValueError):
        s.multiples_of_step((0.15, 0.5))  # not a multiple
    with pytest.raises(ValueError):
        s.multiples_of_step((0.0, 0.5))   # not positive


def test_default_initial_multiples_are_ten_percent_of_span():
    s = SearchSpace(lower=(10.0, 0.0), upper=(250.0, 0.0), step=(1.0, 1.0))
    assert s.default_initial_multiples() == (24, 1)  # floor at one cell
