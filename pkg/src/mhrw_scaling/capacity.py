"""Compact boxes whose complements have vanishing capacity.

Level ``ell`` of box ``n`` has half-width ``k`` chosen so that the target puts
mass at least ``exp(-1/(n ell^2))`` on ``[-k, k]``.  The function ``u`` equals
0 on the box, 1 off the doubled box, and interpolates on the shell; its
squared norm and energy are bounded in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._random import Moments, chunk_sizes, make_rng, map_chunks
from .clt import c_of_tau
from .potential import Potential


class TruncationError(ValueError):
    """Too few coordinates for the requested analytic tail tolerance."""


RULES = ("max", "min")


@dataclass(frozen=True)
class NestLevel:
    n: int
    ell: int
    k_value: float
    quantile: float  # smallest x with pi([-x, x]) >= exp(-1/(n ell^2))
    rule: str = "max"


def _quantiles(target: Potential, q: np.ndarray, iters: int = 200, xtol: float = 1e-13) -> np.ndarray:
    """Solve ``P(|X| > x) = q`` for each entry of ``q`` by bisection in ``x``."""
    log_q = np.log(q)
    lo = np.zeros_like(q)
    hi = np.ones_like(q)
    for _ in range(64):
        short = np.log(target.tail_mass(hi)) > log_q
        if not short.any():
            break
        hi = np.where(short, 2 * hi, hi)
    else:
        raise ArithmeticError(f"{target.name}: tail mass does not fall below {q.min():g}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore"):
            above = np.log(target.tail_mass(mid)) > log_q
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= xtol * np.maximum(hi, 1.0)):
            break
    return hi


def nest_levels(target: Potential, n: int, L: int, rule: str = "max") -> list[NestLevel]:
    """Levels ``ell = 1..L`` of box ``n``.

    ``rule="max"`` takes ``k = max(n ell, quantile)``, which makes both the
    mass bound and the energy bound hold.  ``rule="min"`` takes
    ``min(n ell, quantile)``; its energy sum diverges with ``L``.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if n < 1 or L < 1:
        raise ValueError("n and L must be positive")
    ell = np.arange(1, L + 1, dtype=float)
    cap = n * ell
    q = -np.expm1(-1.0 / (n * ell * ell))
    quant = _quantiles(target, q)
    k = np.maximum(cap, quant) if rule == "max" else np.minimum(cap, quant)
    return [NestLevel(n, int(l), float(kv), float(qv), rule) for l, kv, qv in zip(ell, k, quant)]


def nest_level(target: Potential, n: int, ell: int, rule: str = "max") -> NestLevel:
    cap = float(n * ell)
    q = -math.expm1(-1.0 / (n * ell * ell))
    quant = float(_quantiles(target, np.array([q]))[0])
    k = max(cap, quant) if rule == "max" else min(cap, quant)
    return NestLevel(n, ell, k, quant, rule)


def _k_array(levels, L: int | None = None) -> np.ndarray:
    if isinstance(levels, np.ndarray):
        k = levels
    else:
        k = np.array([lv.k_value for lv in levels])
    return k if L is None else k[:L]


def _shell_sum(x, k):
    t = np.abs(x)
    shell = (t > k) & (t < 2 * k)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(shell, (t - k) / (2 * k - t), 0.0)
    b = np.where(t >= 2 * k, np.inf, b)
    return t, shell, b, np.sum(b, axis=-1)


def u_n_eval(x, levels) -> np.ndarray:
    """``s / (1 + s)`` with ``s`` the sum of the shell functions; 1 off the doubled box.

    ``x`` has shape ``(..., L)`` with ``L = len(levels)``.
    """
    x = np.asarray(x, dtype=float)
    k = _k_array(levels)
    if x.shape[-1] != k.size:
        raise ValueError(f"x has {x.shape[-1]} coordinates, levels cover {k.size}")
    _, _, _, s = _shell_sum(x, k)
    with np.errstate(invalid="ignore"):
        return np.where(np.isinf(s), 1.0, s / (1.0 + s))


def u_n_grad(x, levels) -> np.ndarray:
    """Gradient of :func:`u_n_eval`; zero where ``u`` is locally constant."""
    x = np.asarray(x, dtype=float)
    k = _k_array(levels)
    t, shell, _, s = _shell_sum(x, k)
    finite = np.isfinite(s)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        db = np.where(shell, k / np.square(2 * k - t), 0.0)
        g = np.sign(x) * db / np.square(1.0 + s)[..., None]
    return np.where(finite & shell, g, 0.0)


@dataclass
class NestBound:
    n: int
    L: int
    rule: str
    l2_bound: float
    form_bound: float  # (tau^2 c / 2) * gradient_sum
    total: float
    gradient_sum: float  # sum of 1/k^2 over all levels (analytic tail past L)
    gradient_cap: float  # pi^2 / (6 n^2)
    form_bound_alt: float  # (tau c / 2) * gradient_sum
    tail: float
    l2_estimate: float = float("nan")
    l2_stderr: float = float("nan")
    form_estimate: float = float("nan")
    form_stderr: float = float("nan")
    reps: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def capacity_bound(
    target: Potential,
    tau: float,
    n: int,
    L: int = 10_000,
    reps: int = 2000,
    seed: int = 0,
    rule: str = "max",
    tail_tol: float = 1e-3,
    threads: int = 1,
) -> NestBound:
    """Closed-form bounds for box ``n`` plus Monte Carlo values on ``L`` coordinates.

    Past ``L`` the levels are bounded below by ``n ell``, so the energy tail is
    at most ``psi'(L + 1) / n^2``; :class:`TruncationError` is raised when this
    exceeds ``tail_tol``.  ``reps = 0`` skips the Monte Carlo part.
    """
    psi = float(special.polygamma(1, L + 1))  # sum of 1/ell^2 over ell > L
    tail = psi / n**2
    if tail > tail_tol:
        raise TruncationError(f"energy tail {tail:.3g} exceeds {tail_tol:g}; increase L")
    levels = nest_levels(target, n, L, rule)
    k = _k_array(levels)
    mass_exponent = (float(np.sum(1.0 / np.arange(1, L + 1) ** 2)) + psi) / n
    l2_bound = -math.expm1(-mass_exponent)
    # the analytic tail only applies when levels dominate n * ell
    gradient_sum = float(np.sum(1.0 / k**2)) + (tail if rule == "max" else 0.0)
    c = c_of_tau(tau, target.I)
    form_bound = 0.5 * tau * tau * c * gradient_sum
    out = NestBound(
        n=n,
        L=L,
        rule=rule,
        l2_bound=l2_bound,
        form_bound=form_bound,
        total=l2_bound + form_bound,
        gradient_sum=gradient_sum,
        gradient_cap=math.pi**2 / (6 * n * n),
        form_bound_alt=0.5 * tau * c * gradient_sum,
        tail=tail,
    )
    if gradient_sum > out.gradient_cap * (1 + 1e-12):
        out.violations.append({"check": "gradient_sum", "value": gradient_sum, "bound": out.gradient_cap})
    if not reps:
        return out

    def chunk(j, rows):
        x = np.asarray(target.sample(make_rng(seed, "capacity", n, j), (rows, L)), dtype=float)
        u = u_n_eval(x, k)
        g2 = np.sum(np.square(u_n_grad(x, k)), axis=-1)
        return Moments.of(u * u), Moments.of(g2)

    parts = map_chunks(chunk, chunk_sizes(reps, L), threads)
    mu = Moments.reduce([a for a, _ in parts])
    mg = Moments.reduce([b for _, b in parts])
    out.reps = reps
    out.l2_estimate, out.l2_stderr = mu.mean, mu.stderr
    out.form_estimate = 0.5 * tau * tau * c * mg.mean
    out.form_stderr = 0.5 * tau * tau * c * mg.stderr
    if mu.mean > l2_bound + 3 * mu.stderr:
        out.violations.append({"check": "l2", "value": mu.mean, "bound": l2_bound, "stderr": mu.stderr})
    if out.form_estimate > form_bound + 3 * out.form_stderr:
        out.violations.append(
            {"check": "form", "value": out.form_estimate, "bound": form_bound, "stderr": out.form_stderr}
        )
    return out
