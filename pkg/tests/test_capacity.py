import math

import numpy as np
import pytest
from scipy import stats

from mhrw_scaling._random import make_rng
from mhrw_scaling.capacity import (
    TruncationError,
    capacity_bound,
    nest_level,
    nest_levels,
    u_n_eval,
    u_n_grad,
)
from mhrw_scaling.potential import gaussian, hyperbolic_secant

# mpmath: x with erf(x / sqrt 2) = exp(-1)
K11_QUANTILE = 0.478744282434236355343158689191


def test_level_quantile_oracle():
    lv = nest_level(gaussian(), 1, 1, rule="min")
    assert lv.quantile == pytest.approx(K11_QUANTILE, abs=1e-10)
    assert lv.k_value == lv.quantile
    assert nest_level(gaussian(), 1, 1).k_value == 1.0


def test_level_quantile_matches_normal_ppf():
    for n, ell in [(1, 3), (10, 2), (100, 10)]:
        q = math.exp(-1.0 / (n * ell * ell))
        assert nest_level(gaussian(), n, ell).quantile == pytest.approx(stats.norm.ppf(0.5 + 0.5 * q), rel=1e-9)


def test_levels_grow():
    g = hyperbolic_secant()
    assert nest_level(g, 100, 10, "min").quantile > nest_level(g, 1, 1, "min").quantile
    for rule in ("max", "min"):
        lv = nest_levels(g, 3, 50, rule)
        k = [l.k_value for l in lv]
        assert all(b >= a for a, b in zip(k, k[1:]))
        caps = [3 * l.ell for l in lv]
        if rule == "max":
            assert all(kv >= c for kv, c in zip(k, caps))
        else:
            assert all(0 < kv <= c for kv, c in zip(k, caps))


def test_level_rule_validated():
    with pytest.raises(ValueError):
        nest_levels(gaussian(), 1, 3, rule="mid")


def test_u_piecewise_values():
    k = np.array([1.0, 2.0, 3.0])
    assert u_n_eval(np.zeros(3), k) == 0.0
    assert u_n_eval(np.array([0.0, 4.5, 0.0]), k) == 1.0
    assert u_n_eval(np.array([0.0, 3.0, 0.0]), k) == pytest.approx(0.5)
    assert u_n_eval(np.array([-1.5, 0.0, 0.0]), k) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        u_n_eval(np.zeros(2), k)


def test_u_range_and_gradient_bound():
    k = np.array([0.5, 1.0, 1.5, 2.0])
    x = make_rng(1, "u").uniform(-4.5, 4.5, (20_000, 4))
    u = u_n_eval(x, k)
    assert np.all((0 <= u) & (u <= 1))
    inner = np.all(np.abs(x) <= k, axis=1)
    outer = np.any(np.abs(x) >= 2 * k, axis=1)
    assert np.all(u[inner] == 0) and np.all(u[outer] == 1)
    g = u_n_grad(x, k)
    assert np.all(np.abs(g) <= 1 / k + 1e-12)
    # central differences on the open shell region
    h = 1e-6
    shell = ~inner & ~outer
    pts = x[shell][:300]
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (u_n_eval(pts + e, k) - u_n_eval(pts - e, k)) / (2 * h)
        near_edge = np.any(np.abs(np.abs(pts) - k) < 1e-4, axis=1) | np.any(np.abs(np.abs(pts) - 2 * k) < 1e-3, axis=1)
        np.testing.assert_allclose(fd[~near_edge], u_n_grad(pts, k)[~near_edge, i], atol=1e-5)


def test_l2_bound_closed_forms():
    b1 = capacity_bound(gaussian(), 1.0, 1, reps=0)
    b100 = capacity_bound(gaussian(), 1.0, 100, reps=0)
    assert b1.l2_bound == pytest.approx(0.806974710860101956751089823272, abs=1e-12)
    assert b100.l2_bound == pytest.approx(0.016314789036344053899869836522, abs=1e-12)
    assert b1.total == b1.l2_bound + b1.form_bound


def test_bounds_strictly_decrease():
    bs = [capacity_bound(gaussian(), 1.0, n, reps=0) for n in (1, 10, 100, 1000)]
    for a, b in zip(bs, bs[1:]):
        assert b.l2_bound < a.l2_bound and b.form_bound < a.form_bound
    assert bs[-1].total < 2e-3


def test_gradient_sum_within_cap_and_both_prefactors():
    b = capacity_bound(gaussian(), 2.0, 10, reps=0)
    assert b.ok and b.gradient_sum <= b.gradient_cap * (1 + 1e-12)
    c = 0.5 * math.erfc(2.0 / (2 * math.sqrt(2))) * 2
    assert b.form_bound == pytest.approx(2.0 * c * b.gradient_sum)
    assert b.form_bound_alt == pytest.approx(1.0 * c * b.gradient_sum)


def test_literal_min_rule_energy_sum_grows():
    sums = [capacity_bound(gaussian(), 1.0, 1, L=L, reps=0, rule="min", tail_tol=1.0).gradient_sum for L in (10, 100, 1000)]
    assert sums[0] < sums[1] < sums[2]
    assert sums[0] > math.pi**2 / 6


def test_truncation_error():
    with pytest.raises(TruncationError):
        capacity_bound(gaussian(), 1.0, 1, L=100, reps=0)


def test_monte_carlo_under_bounds():
    for target in (gaussian(), hyperbolic_secant()):
        b = capacity_bound(target, 1.0, 1, L=2000, reps=3000, seed=1)
        assert b.ok
        assert b.l2_estimate <= b.l2_bound + 3 * b.l2_stderr
        assert b.form_estimate <= b.form_bound + 3 * b.form_stderr
        assert b.l2_estimate > 0


def test_capacity_thread_invariant():
    a = capacity_bound(gaussian(), 1.0, 1, L=1000, reps=2500, threads=1)
    b = capacity_bound(gaussian(), 1.0, 1, L=1000, reps=2500, threads=3)
    assert a.l2_estimate == b.l2_estimate and a.form_estimate == b.form_estimate
