import numpy as np
from hypothesis import given, strategies as st

from interp_lab.stats import chisquare_counts, pool_bins


@given(st.lists(st.floats(0, 50), min_size=1, max_size=40))
def test_pooled_groups_meet_minimum(expected):
    expected = np.array(expected)
    groups = pool_bins(expected)
    assert np.all(np.diff(groups) >= 0)
    sums = np.bincount(groups, weights=expected)
    if expected.sum() >= 5:
        assert np.all(sums >= 5 - 1e-9)


def test_zero_probability_tail_does_not_divide_by_zero():
    res = chisquare_counts([100, 0], [1.0, 0.0])
    assert res["dof"] == 0 and res["p_value"] == 1.0
    res = chisquare_counts([50, 50, 0], [0.5, 0.5, 0.0])
    assert res["dof"] == 1 and np.isfinite(res["statistic"])


def test_outside_support_counted():
    assert chisquare_counts([5, 5, 3], [0.5, 0.5, 0.0])["outside_support"] == 3
