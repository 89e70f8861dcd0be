from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from oracles import impulse_extended

from irfkit.dgpsim import BURN_IN, RNG_ALGORITHM, DgpSpec, closed_form_irf, make_rng, simulate
from irfkit.errors import SpecError
from irfkit.tscore import Series, load_csv


class TestSpec:
    @pytest.mark.parametrize(
        "kind,params",
        [("extended", {"rho": 1.0}), ("simple", {"gamma": -1.2}), ("extended", {"sigma_u": 0.0}), ("iv", {"gamma": 1.0})],
    )
    def test_invalid_parameters(self, kind, params):
        with pytest.raises(SpecError):
            DgpSpec(kind, params, T=100)

    def test_short_sample(self):
        with pytest.raises(SpecError):
            DgpSpec.simple(T=9)

    def test_unknown_kind_and_param(self):
        with pytest.raises(SpecError):
            DgpSpec("garch", {}, T=100)
        with pytest.raises(SpecError):
            DgpSpec.simple(T=100, rho=0.5)

    def test_defaults_are_reference_calibration(self):
        p = DgpSpec.extended(T=100).params
        assert (p["rho"], p["b0"], p["b1"], p["gamma"]) == (0.9, 1.5, 1.0, 0.2)

    def test_dict_round_trip(self):
        spec = DgpSpec.extended(T=123, seed=9, gamma=0.5)
        back = DgpSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert back.to_dict() == spec.to_dict()

    def test_external_needs_shock(self):
        with pytest.raises(SpecError):
            DgpSpec("external_shock", {}, T=100)


class TestSimulate:
    def test_bit_identical(self):
        a = simulate(DgpSpec.extended(T=5000, seed=4))
        b = simulate(DgpSpec.extended(T=5000, seed=4))
        for name in a.series:
            assert_array_equal(a[name].values, b[name].values)

    def test_seeds_and_replicates_independent(self):
        # sample correlation of independent draws has standard error 1/sqrt(T) = 0.01
        T = 10_000
        corrs = []
        for s in range(20):
            a = simulate(DgpSpec.simple(T=T, seed=s))["eps"].values
            b = simulate(DgpSpec.simple(T=T, seed=s + 100))["eps"].values
            c = simulate(DgpSpec.simple(T=T, seed=s), replicate=1)["eps"].values
            corrs += [np.corrcoef(a, b)[0, 1], np.corrcoef(a, c)[0, 1]]
        corrs = np.array(corrs)
        assert np.all(np.abs(corrs) < 4 / np.sqrt(T))
        assert np.sqrt(np.mean(corrs**2)) < 1.5 / np.sqrt(T)

    def test_rng_name_and_stream(self):
        assert "PCG64" in RNG_ALGORITHM
        assert_array_equal(make_rng(7, 2).standard_normal(4), make_rng(7, 2).standard_normal(4))

    def test_noise_free_limit(self):
        d = simulate(DgpSpec.simple(T=200, seed=1, gamma=0.0, sigma_u=1e-12))
        assert_allclose(d["y"].values, 1.5 * d["x"].values, atol=1e-10)

    def test_equations_hold(self):
        d = simulate(DgpSpec.extended(T=500, seed=2))
        y, x = d["y"].values, d["x"].values
        u = y[1:] - 0.9 * y[:-1] - 1.5 * x[1:] - 1.0 * x[:-1]
        eps = d["eps"].values
        assert_allclose(x[1:] - 0.2 * x[:-1], eps[1:], atol=1e-10)
        assert np.std(u) == pytest.approx(1.0, abs=0.1)

    def test_iv_identities(self):
        d = simulate(DgpSpec.iv(T=300, seed=3))
        g = 0.5 * d["x"].values + 0.5 * d["m"].values
        assert_allclose(d["g"].values, g)
        assert_allclose(d["u"].values, d["m"].values + d["a"].values)
        assert_allclose(d["y"].values, 2 * d["g"].values + d["u"].values)
        assert_allclose(d["z"].values, d["x"].values + d["nu"].values)

    def test_extended_shock_acf(self):
        x = simulate(DgpSpec.extended(T=1_000_000, seed=8))["x"].values
        xc = x - x.mean()
        assert abs(xc[1:] @ xc[:-1] / (xc @ xc) - 0.2) < 0.005

    def test_iv_shock_variance(self):
        x = simulate(DgpSpec.iv(T=1_000_000, seed=8))["x"].values
        assert abs(x.var() - 1 / 0.96) < 0.01

    def test_external_shock_verbatim(self):
        shock = Series("s", np.linspace(-1, 1, 50), [str(2000 + i) for i in range(50)])
        d = simulate(DgpSpec.external(shock, seed=1))
        assert_array_equal(d["x"].values, shock.values)
        assert d["y"].period_index == shock.period_index
        assert len(d["y"]) == 50

    def test_burn_in_discarded(self):
        d = simulate(DgpSpec.simple(T=50, seed=0))
        assert len(d["x"]) == 50 and BURN_IN == 1000

    def test_csv_header(self, tmp_path):
        d = simulate(DgpSpec.extended(T=100, seed=5))
        path = tmp_path / "sim.csv"
        d.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# seed=5")
        assert json.loads(lines[1].split("spec=", 1)[1])["T"] == 100
        back = load_csv(path)
        assert_array_equal(back["y"].values, d["y"].values)
        assert len(back["y"]) == 100


class TestClosedForm:
    def test_simple_paths(self):
        spec = DgpSpec.simple(T=100)
        assert_allclose(closed_form_irf(spec, 3, True), [1.5, 0.3, 0.06, 0.012])
        assert_allclose(closed_form_irf(spec, 3, False), [1.5, 0, 0, 0])

    def test_extended_paths(self):
        spec = DgpSpec.extended(T=100)
        assert_allclose(closed_form_irf(spec, 3, False), [1.5, 2.35, 2.115, 1.9035])
        assert_allclose(closed_form_irf(spec, 2, True), [1.5, 2.65, 2.645])

    def test_iv_unsupported(self):
        with pytest.raises(SpecError):
            closed_form_irf(DgpSpec.iv(T=100), 3, True)


@settings(max_examples=50, deadline=None)
@given(
    rho=st.floats(-0.95, 0.95),
    b0=st.floats(-3, 3),
    b1=st.floats(-3, 3),
    gamma=st.floats(-0.95, 0.95),
    H=st.integers(0, 15),
)
def test_closed_form_matches_impulse_propagation(rho, b0, b1, gamma, H):
    spec = DgpSpec.extended(T=100, rho=rho, b0=b0, b1=b1, gamma=gamma)
    for persistent in (True, False):
        assert_allclose(
            closed_form_irf(spec, H, persistent),
            impulse_extended(rho, b0, b1, gamma, H, persistent),
            rtol=1e-10,
            atol=1e-12,
        )
    r, r_star = closed_form_irf(spec, H, True), closed_form_irf(spec, H, False)
    assert r[0] == r_star[0]
    if gamma == 0:
        assert_array_equal(r, r_star)


@pytest.mark.parametrize("kind", ["simple", "extended"])
def test_zero_persistence_paths_coincide(kind):
    spec = DgpSpec(kind, {"gamma": 0.0}, T=100)
    assert_array_equal(closed_form_irf(spec, 10, True), closed_form_irf(spec, 10, False))
