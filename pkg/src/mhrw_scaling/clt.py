"""Acceptance-ratio central limit behaviour and its proof-level bounds.

As ``n`` grows the stationary log acceptance ratio approaches
``N(-tau^2 I / 2, tau^2 I)`` and the mean acceptance probability approaches
``c(tau) = 2 F(-tau sqrt(I) / 2)``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from ._random import Moments, make_rng, map_chunks, chunk_sizes
from .estimates import BoundReport, Estimate
from .potential import Potential, QuadratureConfig, _expanding_quad, log_normalizer
from .sampler import ChainConfig, step_batches


def c_of_tau(tau, I):
    """Limiting mean acceptance ``2 F(-tau sqrt(I)/2)`` (vectorised)."""
    tau = np.asarray(tau, dtype=float)
    out = special.erfc(tau * np.sqrt(I) / (2.0 * math.sqrt(2.0)))
    return float(out) if out.ndim == 0 else out


@dataclass
class CltReport:
    n: int
    tau: float
    reps: int
    mean: float
    mean_stderr: float
    variance: float
    variance_stderr: float
    limit_mean: float
    limit_variance: float
    ks_distance: float
    degenerate: bool


def _log_ratios(config: ChainConfig, reps: int, threads: int, key: str) -> np.ndarray:
    batches = step_batches(config.target, config.n, config.tau, reps, config.seed, key, threads=threads)
    return np.concatenate([b.log_ratio for b in batches])


def acceptance_clt(config: ChainConfig, reps: int, threads: int = 1) -> CltReport:
    """Stationary log-ratio sample versus its Gaussian limit (annealed over ``X``)."""
    if reps < 100:
        raise ValueError("acceptance_clt needs reps >= 100")
    lr = _log_ratios(config, reps, threads, "clt")
    I = config.target.I
    mu = 0.0 - 0.5 * config.tau**2 * I  # avoid -0.0 at tau = 0
    var_lim = config.tau**2 * I
    mean = float(lr.mean())
    var = float(lr.var(ddof=1))
    m4 = float(np.mean((lr - mean) ** 4))
    degenerate = var_lim == 0.0
    if degenerate:
        # Limit is the point mass at 0; sup-distance of the ECDFs.
        ks = float(max(np.mean(lr < 0), np.mean(lr > 0)))
    else:
        ks = float(stats.kstest(lr, "norm", args=(mu, math.sqrt(var_lim))).statistic)
    return CltReport(
        n=config.n,
        tau=config.tau,
        reps=reps,
        mean=mean,
        mean_stderr=math.sqrt(var / reps),
        variance=var,
        variance_stderr=math.sqrt(max(m4 - var**2, 0.0) / reps),
        limit_mean=mu,
        limit_variance=var_lim,
        ks_distance=ks,
        degenerate=degenerate,
    )


def mean_acceptance(config: ChainConfig, reps: int, threads: int = 1) -> Estimate:
    """Estimate of ``E[1 ^ exp(log ratio)]`` at stationarity.

    Uses the acceptance probability itself (the uniform is integrated out).
    """
    if reps < 100:
        raise ValueError("mean_acceptance needs reps >= 100")
    batches = step_batches(config.target, config.n, config.tau, reps, config.seed, "acc", threads=threads)
    m = Moments.reduce([Moments.of(b.accept_prob) for b in batches])
    return Estimate(m.mean, m.stderr, m.count)


# --------------------------------------------------------------------------
# Bounds from the proof of the CLT

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_U_NODES = 0.5 * (_GL_NODES + 1.0)
_U_WEIGHTS = 0.5 * _GL_WEIGHTS


def remainder_term(p: Potential, x, w, tau: float, n: int) -> np.ndarray:
    """``|W int_0^1 (phi'(x + tau u W / sqrt n) - phi'(x)) du|`` by Gauss-Legendre in ``u``."""
    x = np.asarray(x, dtype=float)[..., None]
    w = np.asarray(w, dtype=float)[..., None]
    s = tau / math.sqrt(n)
    inner = (p.phi_prime(x + s * _U_NODES * w) - p.phi_prime(x)) @ _U_WEIGHTS
    return np.abs(w[..., 0] * inner)


def remainder_bound(p: Potential, w, tau: float, n: int, k: float | None = None) -> np.ndarray:
    k = p.holder_k if k is None else k
    g, a = p.holder_gamma, p.holder_alpha
    aw = np.abs(tau * np.asarray(w, dtype=float))
    return k * np.abs(w) * np.maximum(aw**g, aw**a) / (n ** (g / 2) * (1 + g))


def remainder_bound_check(
    p: Potential,
    n: int,
    samples: int,
    tau: float = 1.0,
    seed: int = 0,
    k: float | None = None,
    rtol: float = 1e-9,
) -> BoundReport:
    """Sampled check of the per-coordinate Hölder remainder bound."""
    rng = make_rng(seed, "remainder", n)
    x = p.sample(rng, samples)
    w = rng.standard_normal(samples)
    lhs = remainder_term(p, x, w, tau, n)
    rhs = remainder_bound(p, w, tau, n, k)
    bad = lhs > rhs * (1 + rtol) + 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, 0.0)
    j = int(np.argmax(ratio))
    report = BoundReport(
        name="remainder_bound",
        info={
            "n": n,
            "tau": tau,
            "samples": samples,
            "k": p.holder_k if k is None else k,
            "max_ratio": float(ratio[j]),
            "min_slack": float(np.min(rhs - lhs)),
            "witness": {"x": float(x[j]), "w": float(w[j])},
        },
    )
    for i in np.flatnonzero(bad)[:20]:
        report.violations.append({"x": float(x[i]), "w": float(w[i]), "lhs": float(lhs[i]), "rhs": float(rhs[i])})
    report.info["violation_count"] = int(bad.sum())
    return report


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(80)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2 * math.pi)


def drift_term(p: Potential, x, tau: float, n: int) -> np.ndarray:
    """``Z(x) = tau sqrt(n) E_W[W int_0^1 (phi'(x + tau u W/sqrt n) - phi'(x)) du]``.

    Integrating the ``u``-integral in closed form gives
    ``Z(x) = n (E_W phi(x + tau W / sqrt n) - phi(x))``; the expectation over
    ``W`` uses 80-point Gauss-Hermite quadrature.
    """
    x = np.asarray(x, dtype=float)
    s = tau / math.sqrt(n)
    diff = p.phi(x[..., None] + s * _GH_NODES) - p.phi(x)[..., None]
    return n * (diff @ _GH_WEIGHTS)


def hoeffding_constant(p: Potential, tau: float, gamma: float | None = None) -> float:
    """``c~ = tau k/(1+gamma) E[|W| max(|tau W|^gamma, |tau W|^alpha)]``."""
    g = p.holder_gamma if gamma is None else gamma
    a = p.holder_alpha

    def integrand(w):
        aw = abs(tau * w)
        return abs(w) * max(aw**g, aw**a) * math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi)

    m = 2 * integrate.quad(integrand, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return tau * p.holder_k / (1 + g) * m


def hoeffding_bound(c_tilde: float, n: int, eps: float, gamma: float) -> float:
    return 2.0 * math.exp(-(eps**2) * n**gamma / (2.0 * c_tilde**2))


@dataclass
class TailReport:
    n: int
    eps: float
    envelope: float
    estimate: float
    stderr: float
    ok: bool
    info: dict = dataclasses.field(default_factory=dict)


def hoeffding_envelope(
    p: Potential,
    n: int,
    gamma: float | None,
    eps: float,
    reps: int,
    tau: float = 1.0,
    seed: int = 0,
    threads: int = 1,
) -> TailReport:
    """Monte Carlo tail of the averaged drift term against Hoeffding's envelope."""
    g = p.holder_gamma if gamma is None else gamma
    c_tilde = hoeffding_constant(p, tau, g)
    envelope = hoeffding_bound(c_tilde, n, eps, g)
    log_z = p.log_norm if p.log_norm is not None else log_normalizer(p)
    ez = _expanding_quad(
        lambda x: float(drift_term(p, np.array(x), tau, n)) * math.exp(float(p.phi(np.array(x))) - log_z),
        QuadratureConfig(epsrel=1e-10),
    )
    half_width = c_tilde * n ** ((1 - g) / 2)

    def chunk(j, rows):
        rng = make_rng(seed, "hoeffding", n, j)
        z = drift_term(p, p.sample(rng, (rows, n)), tau, n)
        hits = np.abs(z.mean(axis=1) - ez) > eps
        return Moments.of(hits.astype(float)), float(np.max(np.abs(z)))

    parts = map_chunks(chunk, chunk_sizes(reps, n * len(_GH_NODES)), threads)
    m = Moments.reduce([a for a, _ in parts])
    z_max = max(b for _, b in parts)
    return TailReport(
        n=n,
        eps=eps,
        envelope=envelope,
        estimate=m.mean,
        stderr=m.stderr,
        ok=m.mean <= envelope + 3 * m.stderr,
        info={
            "c_tilde": c_tilde,
            "gamma": g,
            "mean_drift": ez,
            "range_half_width": half_width,
            "max_abs_drift": z_max,
            "range_ok": z_max <= half_width * (1 + 1e-9),
        },
    )
