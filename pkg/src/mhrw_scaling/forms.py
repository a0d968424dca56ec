"""Dirichlet-form estimators for the rescaled chain and its diffusion limit.

``Phi_n(h) = (n/2) E[(h(X(1)) - h(X(0)))^2]`` for one stationary MHRW step, and
``Phi(h) = (1/2) tau^2 c(tau) E|grad h(X)|^2`` for the limiting diffusion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from ._random import Moments, make_rng, map_chunks, chunk_sizes
from .clt import c_of_tau
from .estimates import BoundReport, Estimate
from .observables import CylinderFunction
from .potential import Potential, log_normalizer
from .sampler import ChainConfig, step_batches


class LipschitzMissingError(ValueError):
    """The domination bound needs a globally Lipschitz score."""


def discrete_form(
    h: CylinderFunction,
    config: ChainConfig,
    reps: int,
    threads: int = 1,
    rao_blackwell: bool = True,
    key: str = "form",
) -> Estimate:
    """Monte Carlo estimate of ``Phi_n(h)`` from independent stationary steps.

    With ``rao_blackwell`` the acceptance indicator is replaced by its
    conditional mean ``1 ^ exp(log ratio)``; the expectation is unchanged.
    Head coordinates come from a stream shared across ``n`` so estimates along
    an ``n`` ladder use common random numbers.
    """
    if h.N > config.n:
        raise ValueError(f"observable depends on {h.N} coordinates but n = {config.n}")
    if reps < 100:
        raise ValueError("discrete_form needs reps >= 100")
    s = config.step_size
    batches = step_batches(
        config.target, config.n, config.tau, reps, config.seed, key, head=h.N, threads=threads
    )
    parts = []
    for j, b in enumerate(batches):
        dh = h(b.x_head + s * b.w_head) - h(b.x_head)
        if rao_blackwell:
            weight = b.accept_prob
        else:
            u = make_rng(config.seed, key, "u", j).random(b.log_ratio.shape)
            weight = (np.log(u) < b.log_ratio).astype(float)
        parts.append(Moments.of(0.5 * config.n * dh * dh * weight))
    m = Moments.reduce(parts)
    return Estimate(max(m.mean, 0.0), m.stderr, m.count, "discrete_form")


def _density(target: Potential):
    log_z = target.log_norm if target.log_norm is not None else log_normalizer(target)
    return lambda x: math.exp(float(target.phi(np.array(x))) - log_z)


def expectation(
    fn,
    h: CylinderFunction,
    target: Potential,
    reps: int | None = None,
    seed: int = 0,
    kind: str = "",
) -> Estimate:
    """``E[fn(X_{1:N})]`` under the product target.

    One-dimensional observables use adaptive quadrature (``stderr = 0``) unless
    ``reps`` is given; otherwise Monte Carlo with ``reps`` draws.
    """
    if h.N == 1 and reps is None:
        f = _density(target)
        g = lambda t: float(fn(np.array([[t]]))[0]) * f(t)
        kw = dict(epsabs=1e-14, epsrel=1e-11, limit=400)
        if h.compact:
            r = h.support_radius
            val = integrate.quad(g, -r, r, **kw)[0]
        else:
            val = integrate.quad(g, -np.inf, np.inf, **kw)[0]
        return Estimate(val, 0.0, 0, kind)
    reps = reps or 100_000
    rng = make_rng(seed, "expect", h.N)
    parts = []
    for m in chunk_sizes(reps, h.N):
        x = np.asarray(target.sample(rng, (m, h.N)), dtype=float)
        parts.append(Moments.of(fn(x)))
    mm = Moments.reduce(parts)
    return Estimate(mm.mean, mm.stderr, mm.count, kind)


def grad_sq_mean(h: CylinderFunction, target: Potential, reps=None, seed=0) -> Estimate:
    return expectation(lambda x: np.sum(h.grad(x) ** 2, axis=-1), h, target, reps, seed)


def l2_norm(h: CylinderFunction, target: Potential, reps=None, seed=0) -> Estimate:
    """``||h||^2 = E[h(X)^2]``."""
    return expectation(lambda x: h.eval(x) ** 2, h, target, reps, seed, "l2_norm")


def sobolev_norm(h: CylinderFunction, target: Potential, reps=None, seed=0) -> Estimate:
    """``E[h^2 + |grad h|^2]`` under the product target."""
    return expectation(
        lambda x: h.eval(x) ** 2 + np.sum(h.grad(x) ** 2, axis=-1), h, target, reps, seed, "sobolev_norm"
    )


def limit_form(h: CylinderFunction, tau: float, target: Potential, reps=None, seed=0) -> Estimate:
    """``Phi(h) = (1/2) tau^2 c(tau) E|grad h|^2``."""
    factor = 0.5 * tau * tau * c_of_tau(tau, target.I)
    g = grad_sq_mean(h, target, reps, seed)
    return Estimate(factor * g.value, factor * g.stderr, g.reps, "limit_form")


@dataclass
class ConvergenceRow:
    n: int
    phi_n: float
    phi_n_stderr: float
    phi: float
    phi_stderr: float
    rel_gap: float
    rel_gap_stderr: float


@dataclass
class ConvergenceTable:
    observable: str
    tau: float
    rows: list[ConvergenceRow]
    nonmonotone: list[int]
    compact_support: bool

    def row(self, n: int) -> ConvergenceRow:
        return next(r for r in self.rows if r.n == n)


def mosco_m2_curve(
    h: CylinderFunction,
    tau: float,
    target: Potential,
    n_ladder: Sequence[int],
    reps: int,
    seed: int = 0,
    threads: int = 1,
    k_sigma: float = 2.0,
) -> ConvergenceTable:
    """``Phi_n(h)`` against ``Phi(h)`` along an ``n`` ladder for a fixed observable.

    A rung is flagged non-monotone when its absolute gap exceeds the previous
    rung's gap by more than ``k_sigma`` combined standard errors.
    """
    phi = limit_form(h, tau, target)
    rows = []
    for n in n_ladder:
        est = discrete_form(h, ChainConfig(n, tau, target, seed), reps, threads)
        gap = abs(est.value - phi.value)
        se = math.hypot(est.stderr, phi.stderr)
        rows.append(ConvergenceRow(n, est.value, est.stderr, phi.value, phi.stderr, gap / phi.value, se / phi.value))
    flagged = []
    for prev, cur in zip(rows, rows[1:]):
        slack = k_sigma * math.hypot(prev.rel_gap_stderr, cur.rel_gap_stderr)
        if cur.rel_gap > prev.rel_gap + slack:
            flagged.append(cur.n)
    return ConvergenceTable(h.name, tau, rows, flagged, h.compact)


# --------------------------------------------------------------------------
# Domination of Phi_n by the Sobolev norm

def chi2_chernoff_bound(n, eps):
    """``((1+eps) e^{-eps})^{n/2}``, the Chernoff bound on ``P(chi2_n > (1+eps) n)``."""
    n = np.asarray(n, dtype=float)
    out = np.exp(0.5 * n * (math.log1p(eps) - eps))
    return float(out) if out.ndim == 0 else out


def chi2_tail(n, eps):
    return stats.chi2.sf((1.0 + eps) * np.asarray(n, dtype=float), n)


@dataclass
class DominationConstant:
    eps: float
    tail_sup: float  # sup_n 2 n P(chi2_n > (1+eps) n)
    tail_argmax: int
    grad_coeff: float  # (tau^2/2) exp(tau^2 k (1+eps))
    sum_constant: float  # tail_sup + grad_coeff
    constant: float  # C with Phi_n <= C (||h||^2 + Phi(h))


def domination_constant(tau: float, k: float, I: float, eps: float = 0.1, block: int = 4096) -> DominationConstant:
    """Explicit constant of the domination bound.

    The supremum over ``n`` is taken exactly from the chi-square survival
    function; the search stops once ``2 n`` times the Chernoff bound (which
    is decreasing past ``2 / (eps - log1p(eps))``) falls below the running max.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    rate = eps - math.log1p(eps)
    turn = math.ceil(2.0 / rate)
    best, arg, lo = 0.0, 1, 1
    while True:
        ns = np.arange(lo, lo + block)
        vals = 2.0 * ns * chi2_tail(ns, eps)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, arg = float(vals[j]), int(ns[j])
        lo += block
        if lo > turn and 2.0 * lo * chi2_chernoff_bound(lo, eps) < best:
            break
    grad_coeff = 0.5 * tau * tau * math.exp(tau * tau * k * (1 + eps))
    c = c_of_tau(tau, I)
    # grad_coeff * E|grad h|^2 = (2 grad_coeff / (tau^2 c)) * Phi(h)
    constant = max(best, 2.0 * grad_coeff / (tau * tau * c))
    return DominationConstant(eps, best, arg, grad_coeff, best + grad_coeff, constant)


def domination_check(
    h: CylinderFunction,
    tau: float,
    target: Potential,
    n_ladder: Sequence[int],
    eps: float = 0.1,
    reps: int = 20_000,
    seed: int = 0,
    threads: int = 1,
) -> BoundReport:
    """Check ``Phi_n(h) <= C (||h||^2 + Phi(h)) + 3 se`` along a ladder."""
    if target.lipschitz is None:
        raise LipschitzMissingError(f"{target.name}: Lipschitz constant of phi' not set")
    dc = domination_constant(tau, target.lipschitz, target.I, eps)
    norm2 = l2_norm(h, target)
    grad2 = grad_sq_mean(h, target)
    phi = limit_form(h, tau, target)
    rhs = dc.constant * (norm2.value + phi.value)
    rhs_direct = dc.tail_sup * norm2.value + dc.grad_coeff * grad2.value
    report = BoundReport(
        name="domination",
        info={
            "observable": h.name,
            "tau": tau,
            "eps": eps,
            "C": dc.constant,
            "C_sum": dc.sum_constant,
            "tail_sup": dc.tail_sup,
            "tail_argmax": dc.tail_argmax,
            "grad_coeff": dc.grad_coeff,
            "l2_norm": norm2.value,
            "limit_form": phi.value,
        },
    )
    for n in n_ladder:
        est = discrete_form(h, ChainConfig(n, tau, target, seed), reps, threads, key="domination")
        slack = 3 * math.hypot(est.stderr, dc.constant * (norm2.stderr + phi.stderr))
        row = {
            "n": n,
            "phi_n": est.value,
            "phi_n_stderr": est.stderr,
            "bound": rhs,
            "bound_direct": rhs_direct,
            "ok": est.value <= rhs + slack,
            "ok_direct": est.value <= rhs_direct + slack,
        }
        report.rows.append(row)
        if not (row["ok"] and row["ok_direct"]):
            report.violations.append(dict(row, observable=h.name))
    return report


@dataclass
class ChernoffRow:
    n: int
    exact_tail: float
    mc_tail: float
    mc_stderr: float
    bound: float
    n_tail: float
    exact_ok: bool
    mc_ok: bool


def chi2_chernoff_check(
    n_ladder: Sequence[int],
    eps: float,
    reps: int = 0,
    seed: int = 0,
    vanish_tol: float = 1e-3,
) -> BoundReport:
    """Chi-square tail against its Chernoff bound, exactly and (``reps > 0``) by Monte Carlo.

    ``info["vanishing"]`` records whether ``n P`` is nonincreasing past its
    peak on the ladder and ends below ``vanish_tol`` times the peak.
    """
    ns = np.asarray(n_ladder, dtype=int)
    exact = chi2_tail(ns, eps)
    bound = chi2_chernoff_bound(ns, eps)
    report = BoundReport(name="chi2_chernoff", info={"eps": eps})
    for i, n in enumerate(ns):
        mc = se = float("nan")
        if reps:
            draws = make_rng(seed, "chi2", int(n)).chisquare(int(n), reps)
            m = Moments.of((draws > (1 + eps) * n).astype(float))
            mc, se = m.mean, m.stderr
        row = ChernoffRow(
            int(n),
            float(exact[i]),
            mc,
            se,
            float(bound[i]),
            float(n * exact[i]),
            bool(exact[i] <= bound[i] * (1 + 1e-12)),
            bool(not reps or mc <= bound[i] + 3 * se),
        )
        report.rows.append(row.__dict__)
        if not (row.exact_ok and row.mc_ok):
            report.violations.append(row.__dict__)
    ntail = ns * exact
    peak = int(np.argmax(ntail))
    after = ntail[peak:]
    report.info["vanishing"] = bool(np.all(np.diff(after) <= 0) and after[-1] <= vanish_tol * ntail[peak])
    return report
