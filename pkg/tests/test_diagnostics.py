from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from oracles import chi2_sf_mpmath, ljung_box_loop, normal_two_sided, two_way_within_dummies
from scipy import stats

from irfkit.diagnostics import (
    _two_way_within,
    acf,
    box_pierce,
    chi_squared_sf,
    ljung_box,
    panel_serial_test,
)
from irfkit.errors import DegenerateSeriesError, InsufficientSampleError, ParameterError
from irfkit.tscore import Panel, Series

ALTERNATING = [1, -1, 1, -1, 1, -1, 1, -1]


def make_panel(values: np.ndarray, name="v") -> Panel:
    """values has shape (entities, periods)."""
    data = {}
    for i, row in enumerate(values):
        data[f"e{i}"] = {name: Series(name, row, [str(t) for t in range(1, row.size + 1)])}
    return Panel(tuple(data), data)


class TestChiSquared:
    @pytest.mark.parametrize("k", [1, 2, 7, 40, 1000])
    def test_zero_is_one(self, k):
        assert chi_squared_sf(0.0, k) == 1.0

    def test_two_dof_closed_form(self):
        assert_allclose(chi_squared_sf(2.0, 2), math.exp(-1.0), rtol=1e-12)

    def test_matches_quadrature_oracle(self):
        assert abs(chi_squared_sf(55.758, 40) - chi2_sf_mpmath(55.758, 40)) < 1e-8

    @pytest.mark.parametrize("x,k", [(0.5, 1), (19.023, 40), (182.95, 40), (900.0, 1000), (12.0, 3)])
    def test_grid_against_oracle(self, x, k):
        assert abs(chi_squared_sf(x, k) - chi2_sf_mpmath(x, k)) < 1e-10

    def test_domain(self):
        with pytest.raises(ParameterError):
            chi_squared_sf(-1.0, 3)
        with pytest.raises(ParameterError):
            chi_squared_sf(1.0, 0)


class TestAcf:
    def test_alternating_lag_one(self):
        c = acf(Series("x", ALTERNATING), 1)
        assert_allclose(c.acf[0], -0.875)
        assert c.sample_size == 8

    def test_iid_small(self, rng):
        c = acf(rng.standard_normal(100_000), 40)
        assert np.max(np.abs(c.acf)) < 0.02

    def test_constant_is_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            acf(np.full(20, 3.0), 2)

    def test_m_bounds(self):
        with pytest.raises(ParameterError):
            acf(np.arange(5.0), 5)

    def test_bartlett_se(self, rng):
        x = rng.standard_normal(300)
        c = acf(x, 5)
        expected = [math.sqrt((1 + 2 * sum(c.acf[:k] ** 2)) / 300) for k in range(5)]
        assert_allclose(c.bartlett_se, expected)
        assert_allclose(c.bands(0.95), 1.959963984540054 * c.bartlett_se)

    def test_ma1_lag_one(self, rng):
        theta = 0.5
        e = rng.standard_normal(1_000_001)
        c = acf(e[1:] + theta * e[:-1], 1)
        r1 = theta / (1 + theta**2)
        mc_se = math.sqrt((1 - 3 * r1**2 + 4 * r1**4) / 1_000_000)
        assert abs(c.acf[0] - r1) < 3 * mc_se


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=60))
def test_acf_bounded(vals):
    x = np.array(vals)
    if np.ptp(x) < 1e-3:
        return
    c = acf(x, len(vals) - 1)
    assert np.all(np.abs(c.acf) <= 1 + 1e-12)


class TestLjungBox:
    def test_alternating_hand_value(self):
        r = ljung_box(Series("x", ALTERNATING), 1)
        assert_allclose(r.statistic, 8.75)
        assert r.dof == 1 and r.kind == "ljung_box"

    def test_matches_loop_oracle(self, rng):
        x = rng.standard_normal(150)
        assert_allclose(ljung_box(x, 12).statistic, ljung_box_loop(x, 12), rtol=1e-12)

    def test_p_value_is_chi_squared_tail(self, rng):
        r = ljung_box(rng.standard_normal(400), 20)
        assert abs(r.p_value - (1 - stats.chi2.cdf(r.statistic, 20))) < 1e-10

    def test_box_pierce(self, rng):
        x = rng.standard_normal(200)
        c = acf(x, 10)
        r = box_pierce(x, 10)
        assert r.kind == "box_pierce"
        assert_allclose(r.statistic, 200 * np.sum(c.acf**2))
        assert r.statistic < ljung_box(x, 10).statistic

    def test_per_lag_cumulative(self, rng):
        r = ljung_box(rng.standard_normal(200), 6)
        stats_ = [s for _, s, _ in r.per_lag]
        assert np.all(np.diff(stats_) >= 0)
        assert_allclose(stats_[-1], r.statistic)
        assert [k for k, _, _ in r.per_lag] == list(range(1, 7))

    def test_uniform_p_values_under_null(self):
        p = [ljung_box(np.random.default_rng(s).standard_normal(500), 40).p_value for s in range(2000)]
        assert stats.kstest(p, "uniform").statistic < 0.05

    def test_power_at_short_lag(self):
        from scipy.signal import lfilter

        rejections = 0
        for s in range(200):
            x = lfilter([1.0], [1.0, -0.5], np.random.default_rng(s).standard_normal(700))[200:]
            rejections += ljung_box(x, 5).p_value < 0.05
        assert rejections / 200 > 0.95

    def test_to_dict(self, rng):
        d = ljung_box(rng.standard_normal(50), 3).to_dict()
        assert d["kind"] == "ljung_box" and len(d["per_lag"]) == 3


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    m=st.integers(2, 15),
    scale=st.sampled_from([1e-6, 0.3, 2.0, -4.0, 1024.0, 1e5]),
)
def test_ljung_box_properties(seed, m, scale):
    x = np.random.default_rng(seed).standard_normal(60)
    q = ljung_box(x, m)
    assert 0.0 <= q.p_value <= 1.0
    assert q.statistic >= ljung_box(x, m - 1).statistic
    assert_allclose(ljung_box(scale * x, m).statistic, q.statistic, rtol=1e-9)


@pytest.mark.parametrize("c", [2.0, -0.5, 1024.0, 2.0**-20])
def test_power_of_two_scaling_is_exact(rng, c):
    x = rng.standard_normal(300)
    assert ljung_box(c * x, 20).statistic == ljung_box(x, 20).statistic


class TestPanel:
    def test_within_transform_matches_dummy_regression(self, rng):
        vals = rng.standard_normal((6, 9))
        panel = make_panel(vals)
        resid, ent, per, *_ = _two_way_within(panel, "v")
        assert_allclose(resid, two_way_within_dummies(vals.ravel(), ent, per), atol=1e-12)

    def test_unbalanced_within_matches_dummy_regression(self, rng):
        data = {}
        for i, (start, n) in enumerate([(1, 8), (3, 6), (2, 9), (1, 5)]):
            idx = [str(t) for t in range(start, start + n)]
            data[f"e{i}"] = {"v": Series("v", rng.standard_normal(n), idx)}
        panel = Panel(tuple(data), data)
        assert not panel.balanced
        resid, ent, per, *_ = _two_way_within(panel, "v")
        vals = np.concatenate([data[e]["v"].values for e in data])
        assert_allclose(resid, two_way_within_dummies(vals, ent, per), atol=1e-12)

    def test_single_entity_rejected(self, rng):
        with pytest.raises(InsufficientSampleError):
            panel_serial_test(make_panel(rng.standard_normal((1, 50))), "v", 2)

    def test_short_entity_named(self, rng):
        data = {"long": {"v": Series("v", rng.standard_normal(20))}, "short": {"v": Series("v", rng.standard_normal(4))}}
        with pytest.raises(InsufficientSampleError, match="short"):
            panel_serial_test(Panel(("long", "short"), data), "v", 3)

    def test_result_shape(self, rng):
        r = panel_serial_test(make_panel(rng.standard_normal((10, 30))), "v", 3)
        assert r.kind == "panel_joint" and r.dof == 3 and len(r.per_lag) == 3
        assert_allclose(r.statistic, sum(z**2 for _, z, _ in r.per_lag))
        for _, z, p in r.per_lag:
            assert_allclose(p, normal_two_sided(z))

    def test_persistent_entities_rejected(self):
        from scipy.signal import lfilter

        rng = np.random.default_rng(3)
        vals = lfilter([1.0], [1.0, -0.5], rng.standard_normal((50, 300)), axis=1)[:, 100:]
        assert panel_serial_test(make_panel(vals), "v", 5).p_value < 0.001

    def test_size_small_sample(self):
        rej = 0
        for s in range(200):
            vals = np.random.default_rng(1000 + s).standard_normal((20, 40))
            rej += panel_serial_test(make_panel(vals), "v", 3).p_value < 0.05
        assert 0.01 <= rej / 200 <= 0.10
