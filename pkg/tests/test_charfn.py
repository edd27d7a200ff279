import cmath
import math

import numpy as np
import pytest

from divisor.charfn import (
    admissibility_check,
    cf_eval,
    phase_speed_bound,
    psi_closed_form,
    psi_values,
    second_characteristic,
)
from divisor.errors import NotAdmissible, PointsOutOfRange, RefinementExhausted
from divisor.measures import CauchyLeaf, Convolve, GaussianLeaf, Mixture, Power, atoms

COIN = atoms([(0, 0.5), (1, 0.5)])
DELTA0 = atoms([(0, 1.0)])
SKEWED = atoms([(-3, 0.05), (0, 0.05), (7, 0.9)])


def test_cf_eval_examples(nu):
    assert cf_eval(DELTA0, 3.7) == 1
    assert cf_eval(CauchyLeaf(1.0), 2.0) == pytest.approx(math.exp(-2), rel=1e-15)
    # 2/3 + 1/3 e^{i pi}
    assert cf_eval(nu, math.pi) == pytest.approx(1 / 3, abs=1e-15)
    assert cf_eval(nu, 0.0) == 1


def test_cf_eval_combinators():
    y = np.linspace(-4, 4, 9)
    g = GaussianLeaf(1.0, 2.0)
    c = CauchyLeaf(0.5)
    np.testing.assert_allclose(cf_eval(Convolve((g, c)), y), cf_eval(g, y) * cf_eval(c, y))
    mix = Mixture(((0.25, g), (0.75, c)))
    np.testing.assert_allclose(cf_eval(mix, y), 0.25 * cf_eval(g, y) + 0.75 * cf_eval(c, y))
    assert np.all(np.abs(cf_eval(mix, y)) <= 1 + 1e-12)


def test_admissibility_examples(nu):
    v = admissibility_check(nu, 10.0, 64)
    assert v.admissible and v.verdict == "admissible_on_grid"
    assert v.min_modulus == pytest.approx(1 / 3, abs=1e-12)
    assert math.remainder(v.y_at - math.pi, 2 * math.pi) == pytest.approx(0, abs=1e-6)

    v = admissibility_check(COIN, 10.0, 64)
    assert not v.admissible and v.verdict == "zero_found"
    assert math.remainder(v.zero_at - math.pi, 2 * math.pi) == pytest.approx(0, abs=1e-8)

    v = admissibility_check(CauchyLeaf(1.0), 50.0, 64)
    assert v.admissible
    assert v.min_modulus == pytest.approx(math.exp(-50), rel=1e-12)


def test_admissibility_catches_zero_between_samples():
    # 0.3 + 0.4 z + 0.3 z^2 vanishes where cos y = -2/3
    v = admissibility_check(atoms([(0, 0.3), (1, 0.4), (2, 0.3)]), 20.0, 16)
    assert not v.admissible
    assert abs(math.cos(v.zero_at) + 2 / 3) < 1e-8


def test_cauchy_psi_is_minus_abs():
    tr = second_characteristic(CauchyLeaf(1.0), 50.0, 2000)
    np.testing.assert_allclose(tr.psi.real, -np.abs(tr.y), atol=1e-10)
    assert np.max(np.abs(tr.psi.imag)) < 1e-10


def test_delta0_psi_vanishes():
    tr = second_characteristic(DELTA0, 10.0, 64)
    assert np.all(tr.psi == 0)


def test_nu_psi_at_pi(nu):
    tr = second_characteristic(nu, 2 * math.pi, 64)
    assert tr.at(math.pi) == pytest.approx(math.log(1 / 3), abs=1e-12)
    assert abs(tr.at(math.pi).imag) < 1e-12


def test_not_admissible_is_raised():
    with pytest.raises(NotAdmissible):
        second_characteristic(COIN, 10.0, 64)


def test_refinement_exhausted_on_coarse_depth():
    with pytest.raises(RefinementExhausted):
        second_characteristic(SKEWED, 20.0, 16, max_depth=1)


def test_aliased_steps_are_refined():
    # 7 * 2.5 rad steps alias; the speed bound halves them three times (7 * 0.3125 < pi - 0.35)
    tr = second_characteristic(SKEWED, 20.0, 16)
    assert tr.refinement_depth == 3
    np.testing.assert_allclose(tr.psi, psi_closed_form(SKEWED, tr.y), atol=1e-10)


def test_psi_closed_form_examples(nu):
    assert psi_closed_form(CauchyLeaf(2.0), 3.0) == pytest.approx(-6.0)
    assert psi_closed_form(nu, math.pi) == pytest.approx(math.log(1 / 3), abs=1e-14)
    assert psi_closed_form(COIN, 1.0) is None
    assert psi_closed_form(Convolve((CauchyLeaf(1.0), COIN)), 1.0) is None
    g = GaussianLeaf(0.5, 2.0)
    assert psi_closed_form(g, 2.0) == pytest.approx(1j - 4.0)


EXPRS = {
    "cauchy": CauchyLeaf(1.0),
    "nu": atoms([(0, 2 / 3), (1, 1 / 3)]),
    "mu": Convolve((CauchyLeaf(1.0), atoms([(0, 2 / 3), (1, 1 / 3)]))),
    "skewed": SKEWED,
    "nu_squared": atoms([(0, 4 / 9), (1, 4 / 9), (2, 1 / 9)]),
    "gauss_mix": Mixture(((0.7, GaussianLeaf(0.0, 0.2)), (0.3, atoms([(2.5, 1.0)])))),
}


@pytest.mark.parametrize("name", sorted(EXPRS))
def test_exp_psi_matches_cf(name):
    expr = EXPRS[name]
    tr = second_characteristic(expr, 12.0, 256)
    tr.check_invariants(rel_tol=1e-9)


@pytest.mark.parametrize("name", sorted(EXPRS))
def test_trace_is_grid_independent(name):
    expr = EXPRS[name]
    coarse = second_characteristic(expr, 12.0, 128)
    fine = second_characteristic(expr, 12.0, 256)
    shared = np.isin(fine.y, coarse.y)
    lookup = dict(zip(coarse.y.tolist(), coarse.psi.tolist()))
    expected = np.array([lookup[y] for y in fine.y[shared]])
    np.testing.assert_allclose(fine.psi[shared], expected, atol=1e-9, rtol=0)


@pytest.mark.parametrize("name", sorted(EXPRS))
def test_conjugate_symmetry(name):
    tr = second_characteristic(EXPRS[name], 12.0, 256)
    lookup = dict(zip(tr.y.tolist(), tr.psi.tolist()))
    for y in tr.y[tr.y > 0]:
        assert abs(lookup[-y] - lookup[y].conjugate()) < 1e-9


def test_additivity_under_convolution():
    a, b = EXPRS["nu_squared"], EXPRS["gauss_mix"]
    both = second_characteristic(Convolve((a, b)), 10.0, 200)
    ta = second_characteristic(a, 10.0, 200)
    tb = second_characteristic(b, 10.0, 200)
    np.testing.assert_allclose(both(both.y), ta(both.y) + tb(both.y), atol=1e-9)


@pytest.mark.parametrize("name", ["cauchy", "nu", "mu", "skewed"])
def test_closed_form_agrees_with_unwinding(name):
    expr = EXPRS[name]
    tr = second_characteristic(expr, 15.0, 300)
    np.testing.assert_allclose(tr.psi, psi_closed_form(expr, tr.y), atol=1e-8)


def test_trace_evaluation_between_samples(nu):
    tr = second_characteristic(nu, 10.0, 40)
    y = np.array([0.123, 3.3, -7.77])
    np.testing.assert_allclose(tr(y), psi_closed_form(nu, y), atol=1e-12)
    with pytest.raises(PointsOutOfRange):
        tr(11.0)


def test_power_node_uses_scaled_psi():
    base = EXPRS["nu_squared"]  # no closed form
    y = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(cf_eval(Power(base, 0.5), y), cf_eval(EXPRS["nu"], y), atol=1e-12)
    np.testing.assert_allclose(psi_values(Power(base, 0.5), y), psi_closed_form(EXPRS["nu"], y), atol=1e-12)


def test_phase_speed_bound():
    assert phase_speed_bound(SKEWED) == 7.0
    assert phase_speed_bound(Convolve((SKEWED, GaussianLeaf(-2.0, 1.0)))) == 9.0
    assert phase_speed_bound(CauchyLeaf(3.0)) == 0.0
