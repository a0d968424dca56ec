import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mhrw_scaling.potential import (
    DivergentIntegralError,
    GridConfig,
    Potential,
    UnsupportedTargetError,
    check_regularity,
    fisher_information,
    gaussian,
    hyperbolic_secant,
    log_normalizer,
    logistic,
    parse_target,
    spline_potential,
    tabulated_potential,
)
from mhrw_scaling._random import make_rng


def _unnormalised(p):
    # same target with the closed-form values hidden, so quadrature does the work
    return Potential(name=p.name + "-raw", phi=p.phi, phi_prime=p.phi_prime)


def _scaled_logcosh():
    r2 = math.sqrt(2.0)
    return Potential(
        name="logcosh2",
        phi=lambda x: -2.0 * np.log(np.cosh(np.asarray(x) / r2)),
        phi_prime=lambda x: -r2 * np.tanh(np.asarray(x) / r2),
    )


@pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
def test_gaussian_fisher_info_by_quadrature(sigma):
    p = _unnormalised(gaussian(sigma))
    assert fisher_information(p) == pytest.approx(1.0 / sigma**2, rel=1e-10)
    assert log_normalizer(p) == pytest.approx(math.log(sigma * math.sqrt(2 * math.pi)), abs=1e-10)


def test_catalogue_fisher_info_matches_closed_forms():
    assert fisher_information(_unnormalised(hyperbolic_secant())) == pytest.approx(0.5, rel=1e-10)
    assert fisher_information(_unnormalised(logistic())) == pytest.approx(1.0 / 3.0, rel=1e-10)


def test_scaled_logcosh_fisher_info():
    # mpmath oracle: normaliser 2*sqrt(2), I = 2/3
    p = _scaled_logcosh()
    assert fisher_information(p) == pytest.approx(2.0 / 3.0, abs=1e-8)
    assert log_normalizer(p) == pytest.approx(math.log(2 * math.sqrt(2)), abs=1e-10)


@given(st.floats(-50, 50))
@settings(max_examples=15, deadline=None)
def test_fisher_info_invariant_under_phi_shift(c):
    p = _unnormalised(hyperbolic_secant()).shifted(c)
    assert fisher_information(p) == pytest.approx(0.5, rel=1e-9)


def test_I_property_computes_lazily():
    p = _unnormalised(gaussian(2.0))
    assert p.fisher_info is None
    assert p.I == pytest.approx(0.25, rel=1e-10)
    assert p.fisher_info == pytest.approx(0.25, rel=1e-10)


def test_non_normalisable_target_raises():
    p = Potential(
        name="heavy",
        phi=lambda x: -0.5 * np.log1p(np.square(x)),
        phi_prime=lambda x: -np.asarray(x) / (1 + np.square(x)),
    )
    with pytest.raises(DivergentIntegralError):
        log_normalizer(p)


def test_holder_parameters_validated():
    base = dict(name="g", phi=lambda x: -0.5 * x * x, phi_prime=lambda x: -x, holder_k=1.0)
    with pytest.raises(ValueError):
        Potential(**base, holder_gamma=1.5, holder_alpha=1.0)
    with pytest.raises(ValueError):
        Potential(**base, holder_gamma=0.5, holder_alpha=0.5)


@pytest.mark.parametrize("make", [gaussian, hyperbolic_secant, logistic])
def test_regularity_passes_for_catalogue(make):
    rep = check_regularity(make())
    assert rep.holder_pass
    assert rep.lipschitz_pass


def test_regularity_detects_too_small_constant():
    p = hyperbolic_secant()
    p.holder_k = 0.5
    p.lipschitz = 0.5
    rep = check_regularity(p)
    assert not rep.holder_pass and not rep.lipschitz_pass
    x, v = rep.holder_witness
    assert abs(x) < 1.0  # |phi''| peaks at the origin


def test_regularity_grid_boundary_exponents_accepted():
    # gamma = alpha = 1 is the Lipschitz case and must be admissible
    rep = check_regularity(gaussian(1.0), GridConfig(num_x=51, num_v=40))
    assert rep.holder_ratio == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("make", [gaussian, hyperbolic_secant, logistic])
def test_closed_form_tail_mass_matches_quadrature(make):
    p = make()
    raw = Potential(name="raw", phi=p.phi, phi_prime=p.phi_prime, log_norm=p.log_norm)
    xs = np.array([0.0, 0.7, 2.5, 6.0])
    np.testing.assert_allclose(p.tail_mass(xs), raw.tail_mass(xs), rtol=1e-8)


@pytest.mark.parametrize("make", [gaussian, hyperbolic_secant, logistic])
def test_samplers_follow_their_density(make):
    p = make()
    x = p.sample(make_rng(3, "sampler-test"), 50_000)
    cdf = lambda t: np.where(t >= 0, 1 - 0.5 * p.tail_mass(np.abs(t)), 0.5 * p.tail_mass(np.abs(t)))
    assert stats.kstest(x, cdf).pvalue > 1e-3


def test_target_without_sampler_raises():
    with pytest.raises(UnsupportedTargetError):
        _unnormalised(gaussian()).sample(make_rng(0), 3)


def _write_gaussian_table(path, lo=-6.0, hi=6.0, num=241):
    xs = np.linspace(lo, hi, num).tolist()
    with open(path, "w") as fh:
        fh.write("x,phi\n")
        for x in xs:
            fh.write(f"{x!r},{-0.5 * x * x!r}\n")


def test_spline_loader_reproduces_gaussian(tmp_path):
    f = tmp_path / "g.csv"
    _write_gaussian_table(f)
    p = spline_potential(f)
    assert p.log_norm == pytest.approx(math.log(math.sqrt(2 * math.pi)), abs=1e-4)
    assert fisher_information(p) == pytest.approx(1.0, abs=1e-3)
    # pchip's second derivative jumps at knots; the bound is that of the interpolant
    assert 1.0 <= p.lipschitz < 5.0
    assert check_regularity(p).lipschitz_pass
    x = p.sample(make_rng(1), 40_000)
    assert stats.kstest(x, "norm").pvalue > 1e-3


def test_parse_target_spline(tmp_path):
    f = tmp_path / "g.csv"
    _write_gaussian_table(f)
    p = parse_target(f"spline({f})")
    assert float(p.phi(0.5)) == pytest.approx(-0.125, abs=1e-6)


def test_spline_loader_rejects_garbage_rows(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("x,phi\n0,0\nfoo,1\n")
    with pytest.raises(ValueError):
        spline_potential(f)


def test_spline_rejects_bad_tables():
    with pytest.raises(ValueError):
        tabulated_potential(np.array([0.0, 1.0, 1.0]), np.array([0.0, -1.0, -2.0]))
    with pytest.raises(ValueError):
        # increasing at the right end: not normalisable
        tabulated_potential(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))


def test_parse_target_catalogue():
    assert parse_target("gaussian(2)").I == pytest.approx(0.25)
    assert parse_target("tanh").I == 0.5
    assert parse_target("logistic").name == "logistic"
    for bad in ["cauchy", "gaussian(", "tanh(3)"]:
        with pytest.raises(ValueError):
            parse_target(bad)
