import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divisor.errors import RouteUnavailable, TailNotConverged, ValidationError
from divisor.fracpower import (
    BinomialSeriesParams,
    SmoothedAtomicDensity,
    cauchy_compound_density,
    cauchy_compound_threshold,
    compound_power_atoms,
    frac_power_grid,
    frac_power_lattice,
    frac_power_series,
    fractional_power,
    gen_binomial,
    min_and_scale,
    real_root,
    series_length,
    small_t_limit,
)
from divisor.measures import (
    AtomicLeaf,
    CauchyLeaf,
    Convolve,
    GaussianLeaf,
    SignedAtomicMeasure,
    atoms,
    convolve_atomic,
)

# (1+a)^{-t} C(t,l) a^l at a = 1/2, from 30-digit arithmetic
WEIGHTS_T15 = [
    0.54433105395181735515,
    0.40824829046386301637,
    0.051031036307982877046,
    -0.0042525863589985730871,
    0.00079735994231223245384,
    -0.00019933998557805811346,
]
WEIGHTS_T13 = [0.87358046473629886905, 0.14559674412271647817, -0.024266124020452746362, 0.006740590005681318434]

# f_t(x) for the Cauchy-smeared family at a = 1/2, x in XS, from 30-digit arithmetic
XS = np.array([-3.0, 0.0, 0.5, 1.0, 2.0, 7.25])
DENSITY_ORACLE = {
    0.5: [0.015909887822027402, 0.5449259841271691, 0.32338445457447325, 0.23087041591591659, 0.04107003905480237, 0.0032098655706697552],
    1.5: [0.034630226511222928, 0.17922326873176654, 0.18712765749781105, 0.17380354972802866, 0.1118185822110444, 0.010198254725350572],
    2.5: [0.03974674767339036, 0.1099105216652347, 0.11675410637313581, 0.11731591851929212, 0.1011138550987748, 0.017308999457432153],
}


@pytest.mark.parametrize("t, l, expected", [(1.5, 0, 1.0), (3.0, 1, 3.0), (0.5, 3, 0.0625), (1.5, 3, -0.0625), (2.0, 3, 0.0)])
def test_gen_binomial(t, l, expected):
    assert gen_binomial(t, l) == pytest.approx(expected, abs=1e-16)


def test_compound_power_atoms_matches_oracle():
    m = compound_power_atoms(BinomialSeriesParams(0.5, 1.5))
    np.testing.assert_allclose(m.weights[:6], WEIGHTS_T15, rtol=1e-13, atol=0)
    assert m.min_atom() == pytest.approx((WEIGHTS_T15[3], 3.0), rel=1e-13)
    m = compound_power_atoms(BinomialSeriesParams(0.5, 1 / 3))
    np.testing.assert_allclose(m.weights[:4], WEIGHTS_T13, rtol=1e-13, atol=0)


def test_compound_power_integer_is_exact(nu):
    m = compound_power_atoms(BinomialSeriesParams(0.5, 3.0))
    assert len(m.atoms) == 4
    assert m.max_abs_difference(convolve_atomic(convolve_atomic(nu.measure, nu.measure), nu.measure)) < 1e-15


def test_compound_power_general_theta():
    theta = SignedAtomicMeasure.from_atoms([(-1.0, 0.25), (2.0, 0.75)])
    m = compound_power_atoms(BinomialSeriesParams(0.5, 0.5, theta=theta))
    assert m.total_mass == pytest.approx(1.0, abs=1e-13)
    assert not m.is_nonnegative()


def test_series_length_and_tail():
    n = series_length(0.5, 1.5, 1e-14)
    tail = sum(abs(gen_binomial(1.5, l)) * 0.5**l for l in range(n, n + 200))
    assert tail < 1e-14
    with pytest.raises(TailNotConverged):
        series_length(0.99, 0.5, 1e-14, l_max=50)
    with pytest.raises(TailNotConverged):
        compound_power_atoms(BinomialSeriesParams(0.99, 0.5, l_max=50))


def test_params_validation():
    with pytest.raises(ValidationError):
        BinomialSeriesParams(1.0, 0.5)
    with pytest.raises(ValidationError):
        BinomialSeriesParams(0.5, 0.0)
    with pytest.raises(ValidationError):
        BinomialSeriesParams(0.5, 1.0, theta=SignedAtomicMeasure.from_atoms([(1.0, 0.5)]))


@pytest.mark.parametrize("t", sorted(DENSITY_ORACLE))
def test_cauchy_compound_density_oracle(t):
    np.testing.assert_allclose(cauchy_compound_density(0.5, t, XS), DENSITY_ORACLE[t], rtol=1e-12, atol=1e-15)


def test_cauchy_compound_density_at_t1():
    # (2/3) Cauchy(0,1) + (1/3) Cauchy(1,1) at 0
    expected = (2 / 3) / math.pi + (1 / 3) / (2 * math.pi)
    assert cauchy_compound_density(0.5, 1.0, 0.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(5 / (6 * math.pi), rel=1e-15)


def test_small_t_negativity():
    value = float(cauchy_compound_density(0.5, 0.01, 2.0))
    assert value == pytest.approx(-0.038421874223046885, rel=1e-10)
    assert small_t_limit(0.5) == pytest.approx(-0.0397887357729738, rel=1e-13)
    assert abs(value / small_t_limit(0.5) - 1) < 0.05


def test_threshold_gives_nonnegative_density():
    assert cauchy_compound_threshold(0.5) == pytest.approx(math.sqrt(2), rel=1e-15)
    x = np.linspace(-10, 20, 3001)
    assert cauchy_compound_density(0.5, 1.4143, x).min() >= 0


def test_series_route_on_mu(mu):
    res = frac_power_series(mu, 1.5)
    assert isinstance(res, SmoothedAtomicDensity)
    np.testing.assert_allclose(res(XS), DENSITY_ORACLE[1.5], rtol=1e-12, atol=1e-15)
    assert res.total_mass == pytest.approx(1.0, abs=1e-13)


def test_series_route_unavailable():
    mix = atoms([(0, 0.5), (1, 0.5)])
    with pytest.raises(RouteUnavailable):
        frac_power_series(mix, 0.5)


def test_grid_route_cauchy_closed_form():
    g = frac_power_grid(CauchyLeaf(1.0), 2.0)
    x = np.linspace(-20, 20, 401)
    exact = 2 / (math.pi * (x * x + 4))
    assert np.max(np.abs(g(x) - exact)) < 1e-4


@pytest.mark.parametrize("t", [1.0, 1.5])
def test_grid_route_matches_series(mu, t):
    g = frac_power_grid(mu, t).restrict(-15, 15)
    s = frac_power_series(mu, t)
    # compare at the grid nodes; the residual is the periodised Cauchy tail
    assert np.max(np.abs(g.values - s(g.x))) < 2e-7


def test_grid_route_gaussian():
    g = frac_power_grid(GaussianLeaf(1.0, 2.0), 0.5).restrict(-3, 5)
    exact = np.exp(-((g.x - 0.5) ** 2) / 2) / math.sqrt(2 * math.pi)
    assert np.max(np.abs(g.values - exact)) < 1e-10


def test_lattice_matches_series(nu):
    lat = frac_power_lattice(nu, 1.5)
    ser = frac_power_series(nu, 1.5)
    assert lat.max_abs_difference(ser) < 1e-13


def test_lattice_needs_integer_support():
    with pytest.raises(RouteUnavailable):
        frac_power_lattice(atoms([(0, 0.7), (0.5, 0.3)]), 0.5)


def test_real_root_recovers_base(nu):
    squared = convolve_atomic(nu.measure, nu.measure)
    for expr in (Convolve((nu, nu)), AtomicLeaf(squared)):
        root, ok = real_root(expr, 2.0)
        assert ok
        assert root.max_abs_difference(nu.measure) < 1e-10


def test_real_root_identity_and_signed(nu):
    root, ok = real_root(nu, 1.0)
    assert ok and root.max_abs_difference(nu.measure) < 1e-15
    root, ok = real_root(nu, 2 / 3)
    assert not ok
    assert root.min_atom()[0] == pytest.approx(WEIGHTS_T15[3], rel=1e-12)


def test_fractional_power_dispatch(nu):
    assert isinstance(fractional_power(nu, 0.5), SignedAtomicMeasure)
    assert fractional_power(CauchyLeaf(1.0), 0.5, route="grid").dx > 0
    with pytest.raises(ValueError):
        fractional_power(nu, 0.5, route="bogus")
    v, at, scale = min_and_scale(fractional_power(nu, 0.5))
    assert v < 0 and scale > 0 and at == int(at)


ts = st.floats(0.05, 3.0, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(s=ts, t=ts)
def test_semigroup_property(nu, s, t):
    a = frac_power_series(nu, s)
    b = frac_power_series(nu, t)
    both = frac_power_series(nu, s + t)
    assert convolve_atomic(a, b).max_abs_difference(both) < 1e-12


@settings(max_examples=30, deadline=None)
@given(t=ts, alpha=st.floats(0.05, 0.9))
def test_mass_is_one(t, alpha):
    m = compound_power_atoms(BinomialSeriesParams(alpha, t))
    assert m.total_mass == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.01, 0.99))
def test_sign_pattern_below_one(t):
    # C(t,l) alternates in sign from l = 1 for 0 < t < 1
    w = compound_power_atoms(BinomialSeriesParams(0.5, t)).weights
    signs = np.sign(w[1:12])
    assert np.all(signs == (-1.0) ** np.arange(11))


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0.05, 3.0))
def test_density_dominated_by_kernel_bound(t):
    # |f_t| <= sum |C(t,l)| a^l (1+a)^{-t} / (pi t)
    x = np.linspace(-10, 10, 201)
    f = cauchy_compound_density(0.5, t, x)
    bound = sum(abs(gen_binomial(t, l)) * 0.5**l for l in range(400)) * 1.5 ** (-t) / (math.pi * t)
    assert np.max(np.abs(f)) <= bound * (1 + 1e-12)


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.3, 3.0))
def test_routes_agree(mu, t):
    g = frac_power_grid(mu, t).restrict(-10, 10)
    s = frac_power_series(mu, t)(g.x)
    assert np.max(np.abs(g.values - s)) < 2e-7
