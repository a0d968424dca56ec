import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from mhrw_scaling.clt import c_of_tau
from mhrw_scaling.estimates import Estimate
from mhrw_scaling.forms import (
    LipschitzMissingError,
    chi2_chernoff_bound,
    chi2_chernoff_check,
    discrete_form,
    domination_check,
    domination_constant,
    l2_norm,
    limit_form,
    mosco_m2_curve,
    sobolev_norm,
)
from mhrw_scaling.observables import CylinderFunction, bump, coordinate, product_bump, sin_bump
from mhrw_scaling.potential import Potential, gaussian, hyperbolic_secant
from mhrw_scaling.sampler import ChainConfig

HALF_C1 = 0.5 * 0.617075077451973792724590778783


def constant(v=1.0):
    return CylinderFunction(1, lambda x: np.full(np.shape(x)[:-1], v), lambda x: np.zeros(np.shape(x)), name="const")


def test_constant_observable_has_zero_forms():
    g = gaussian()
    est = discrete_form(constant(), ChainConfig(5, 1.0, g), 200)
    assert est.value == 0.0 and est.stderr == 0.0
    assert limit_form(constant(), 1.0, g).value == 0.0


def test_zero_observable_sobolev_zero():
    assert sobolev_norm(constant(0.0), gaussian()).value == 0.0


def test_estimate_kind_contract():
    with pytest.raises(ValueError):
        Estimate(-1.0, 0.1, 10, "discrete_form")
    with pytest.raises(ValueError):
        Estimate(1.0, 0.1, 10, "bogus")


def test_discrete_form_dimension_error():
    with pytest.raises(ValueError):
        discrete_form(coordinate(4), ChainConfig(3, 1.0, gaussian()), 200)
    with pytest.raises(ValueError):
        discrete_form(coordinate(), ChainConfig(3, 1.0, gaussian()), 50)


def test_limit_form_coordinate_value():
    assert limit_form(coordinate(), 1.0, gaussian()).value == pytest.approx(HALF_C1, abs=1e-12)


@given(st.floats(0.1, 6.0))
@settings(max_examples=25, deadline=None)
def test_limit_form_scales_with_speed(tau):
    g = gaussian()
    h = sin_bump()
    ref = limit_form(h, 1.0, g).value / c_of_tau(1.0, 1.0)
    val = limit_form(h, tau, g).value / (tau * tau * c_of_tau(tau, 1.0))
    assert val == pytest.approx(ref, rel=1e-10)


def test_sobolev_norm_of_coordinate():
    g = gaussian()
    assert sobolev_norm(coordinate(), g).value == pytest.approx(2.0, abs=1e-10)
    mc = sobolev_norm(coordinate(), g, reps=50_000, seed=1)
    assert mc.within(2.0)


@pytest.mark.parametrize("h", [bump(), sin_bump(), coordinate()])
def test_sobolev_dominates_l2(h):
    g = hyperbolic_secant()
    assert sobolev_norm(h, g).value >= l2_norm(h, g).value


def test_product_bump_uses_monte_carlo():
    h = product_bump(2)
    est = l2_norm(h, gaussian(), reps=20_000)
    one = l2_norm(bump(), gaussian()).value
    assert est.within(one**2, k=4)


def test_esjd_limit_at_n1000():
    est = discrete_form(coordinate(), ChainConfig(1000, 1.0, gaussian(), seed=3), 100_000)
    assert abs(est.value - HALF_C1) < 3 * est.stderr


def _bump1(t):
    return math.exp(-1.0 / (1.0 - t * t)) if abs(t) < 1 else 0.0


def _n1_oracle(tau=1.0):
    # 1/2 E[(h(Y) - h(X))^2 (1 ^ f(Y)/f(X))] over X ~ N(0,1), Y = X + tau W, by 2-D quadrature.
    # The integrand vanishes unless one endpoint lies in (-1, 1); symmetric in (x, y).
    def g(y, x):
        q = stats.norm.pdf(y - x, scale=tau)
        return 0.5 * (_bump1(y) - _bump1(x)) ** 2 * min(stats.norm.pdf(x), stats.norm.pdf(y)) * q

    kw = dict(epsabs=1e-13, epsrel=1e-10)
    both = integrate.dblquad(g, -1, 1, -1, 1, **kw)[0]
    right = integrate.dblquad(g, -1, 1, 1, 10, **kw)[0]
    left = integrate.dblquad(g, -1, 1, -10, -1, **kw)[0]
    return both + 2 * (left + right)


def test_discrete_form_matches_quadrature_at_n1():
    oracle = _n1_oracle()
    est = discrete_form(bump(1.0), ChainConfig(1, 1.0, gaussian(), seed=2), 400_000)
    assert abs(est.value - oracle) < 1e-3
    assert abs(est.value - oracle) < 4 * est.stderr


def test_bilinearity_on_common_stream():
    cfg = ChainConfig(30, 1.3, gaussian(), seed=4)
    a = discrete_form(bump(), cfg, 5000).value
    b = discrete_form(bump().scaled(3.0), cfg, 5000).value
    assert b == pytest.approx(9.0 * a, rel=1e-12)


def test_indicator_and_rao_blackwell_agree():
    cfg = ChainConfig(50, 2.0, gaussian(), seed=5)
    rb = discrete_form(sin_bump(), cfg, 100_000)
    ind = discrete_form(sin_bump(), cfg, 100_000, rao_blackwell=False)
    assert abs(rb.value - ind.value) < 3 * math.hypot(rb.stderr, ind.stderr)
    assert rb.stderr < ind.stderr


def test_exchangeability_of_coordinates():
    cfg = ChainConfig(20, 1.0, hyperbolic_secant(), seed=8)
    a = discrete_form(bump(2.0, 0), cfg, 50_000)
    b = discrete_form(bump(2.0, 2), cfg, 50_000)
    assert abs(a.value - b.value) < 3 * math.hypot(a.stderr, b.stderr)


def test_mosco_single_row_and_flags():
    tab = mosco_m2_curve(bump(), 1.0, gaussian(), [10], 1000)
    assert len(tab.rows) == 1 and tab.nonmonotone == [] and tab.compact_support
    assert not mosco_m2_curve(coordinate(), 1.0, gaussian(), [10], 1000).compact_support


# -- domination --------------------------------------------------------------

def test_domination_tail_sup_matches_brute_force():
    ns = np.arange(1, 10_001)
    brute = 2 * ns * stats.chi2.sf(1.1 * ns, ns)
    dc = domination_constant(1.0, 1.0, 1.0, 0.1)
    assert dc.tail_sup == pytest.approx(brute.max(), rel=1e-12)
    assert dc.tail_argmax == int(ns[np.argmax(brute)]) == 306
    assert dc.tail_sup == pytest.approx(67.532316, abs=1e-5)


def test_domination_constant_parts():
    dc = domination_constant(1.0, 1.0, 1.0, 0.1)
    assert dc.grad_coeff == pytest.approx(0.5 * math.exp(1.1), rel=1e-14)
    assert dc.sum_constant == pytest.approx(dc.tail_sup + dc.grad_coeff)
    # C must dominate both terms of the direct bound once E|grad h|^2 is written via Phi(h)
    assert dc.constant >= dc.tail_sup
    assert dc.constant * 0.5 * c_of_tau(1.0, 1.0) >= dc.grad_coeff
    with pytest.raises(ValueError):
        domination_constant(1.0, 1.0, 1.0, 0.0)


def test_domination_needs_lipschitz():
    g = gaussian()
    p = Potential(name="g", phi=g.phi, phi_prime=g.phi_prime, log_norm=g.log_norm, sampler=g.sampler)
    with pytest.raises(LipschitzMissingError):
        domination_check(bump(), 1.0, p, [10])


def test_domination_holds_constant_and_bump():
    g = gaussian()
    rep = domination_check(constant(), 1.0, g, [10], reps=200)
    assert rep.ok and rep.rows[0]["phi_n"] == 0.0
    rep = domination_check(bump(), 1.0, g, [10, 100], reps=5000)
    assert rep.ok
    assert all(r["ok_direct"] for r in rep.rows)


# -- chi-square Chernoff -----------------------------------------------------

def test_chernoff_bound_trivial_at_eps_zero():
    np.testing.assert_allclose(chi2_chernoff_bound(np.array([1, 10, 1000]), 0.0), 1.0)


def test_chernoff_exact_tail_below_bound_n100():
    rep = chi2_chernoff_check([100], 0.5)
    row = rep.rows[0]
    assert rep.ok and row["exact_tail"] <= row["bound"]


def test_chernoff_n_tail_values_and_decay():
    # scipy chi2.sf oracle, frozen
    rep = chi2_chernoff_check([10, 100, 1000, 10_000], 0.1, reps=50_000, seed=3)
    nt = [r["n_tail"] for r in rep.rows]
    np.testing.assert_allclose(nt[:3], [3.5751800242792546, 23.220478050085607, 14.614408126295192], rtol=1e-9)
    assert nt[3] == pytest.approx(3.6183295580964684e-08, rel=1e-6)
    assert nt[1] > nt[2] > nt[3]
    assert rep.ok and rep.info["vanishing"]


@given(st.integers(1, 5000), st.floats(0.01, 3.0))
@settings(max_examples=200, deadline=None)
def test_chernoff_bound_dominates_exact_tail(n, eps):
    assert stats.chi2.sf((1 + eps) * n, n) <= chi2_chernoff_bound(n, eps) * (1 + 1e-12)
