"""One-dimensional target potentials.

A target density on the real line is written ``f(x) = exp(phi(x) - log_norm)``.
The sampler and all limit diagnostics only need ``phi`` and its derivative;
the normalising constant matters for quantile computations (capacity module).
"""
from __future__ import annotations

import csv
import math
import warnings
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, interpolate, special, stats

ArrayFn = Callable[[np.ndarray], np.ndarray]


class DivergentIntegralError(ArithmeticError):
    """Quadrature tail did not settle within the maximal support expansion."""


class UnsupportedTargetError(ValueError):
    """The operation needs a capability (sampler, normaliser) the target lacks."""


@dataclass
class Potential:
    """Log-density ``phi`` of a one-dimensional target with regularity data.

    ``holder_k``, ``holder_gamma`` and ``holder_alpha`` are the constants of the
    growth / local Hölder bound
    ``|phi'(x+v) - phi'(x)| <= k * max(|v|**gamma, |v|**alpha)``.
    The boundary case ``gamma == alpha == 1`` (a Lipschitz score) is allowed.
    """

    name: str
    phi: ArrayFn
    phi_prime: ArrayFn
    log_norm: Optional[float] = None
    fisher_info: Optional[float] = None
    holder_k: float = 1.0
    holder_gamma: float = 1.0
    holder_alpha: float = 1.0
    lipschitz: Optional[float] = None
    sampler: Optional[Callable[[np.random.Generator, tuple], np.ndarray]] = field(
        default=None, repr=False
    )
    tail_mass_fn: Optional[ArrayFn] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.holder_k > 0:
            raise ValueError("holder_k must be positive")
        if not 0 < self.holder_gamma <= 1:
            raise ValueError("holder_gamma must lie in (0, 1]")
        if not self.holder_alpha >= 1:
            raise ValueError("holder_alpha must be >= 1")
        if self.lipschitz is not None and not self.lipschitz > 0:
            raise ValueError("lipschitz must be positive when set")
        if self.fisher_info is not None and not (0 < self.fisher_info < math.inf):
            raise ValueError("fisher_info must be positive and finite")

    @property
    def I(self) -> float:  # noqa: E743 - conventional symbol
        """Fisher information, computed by quadrature on first use."""
        if self.fisher_info is None:
            fisher_information(self)
        return self.fisher_info

    def density(self, x):
        if self.log_norm is None:
            raise UnsupportedTargetError(f"{self.name}: normalising constant unknown")
        return np.exp(self.phi(np.asarray(x, dtype=float)) - self.log_norm)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.sampler is None:
            raise UnsupportedTargetError(f"{self.name}: no exact sampler available")
        return self.sampler(rng, size)

    def tail_mass(self, x) -> np.ndarray:
        """``P(|X| > x)`` for ``x >= 0``; closed form when known, else quadrature."""
        x = np.asarray(x, dtype=float)
        if self.tail_mass_fn is not None:
            return self.tail_mass_fn(x)
        if self.log_norm is None:
            raise UnsupportedTargetError(f"{self.name}: tail mass needs log_norm")
        f = lambda y: math.exp(float(self.phi(np.array(y))) - self.log_norm)
        out = np.empty(x.shape)
        for idx, xv in np.ndenumerate(x):
            right = integrate.quad(f, xv, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
            left = integrate.quad(f, -np.inf, -xv, epsabs=0, epsrel=1e-12, limit=200)[0]
            out[idx] = right + left
        return out

    def shifted(self, c: float) -> "Potential":
        """Same target with ``phi + c`` (normaliser shifted accordingly)."""
        return Potential(
            name=f"{self.name}+{c:g}",
            phi=lambda x, _p=self.phi: _p(x) + c,
            phi_prime=self.phi_prime,
            log_norm=None if self.log_norm is None else self.log_norm + c,
            holder_k=self.holder_k,
            holder_gamma=self.holder_gamma,
            holder_alpha=self.holder_alpha,
            lipschitz=self.lipschitz,
            sampler=self.sampler,
            tail_mass_fn=self.tail_mass_fn,
        )


# --------------------------------------------------------------------------
# Quadrature

@dataclass(frozen=True)
class QuadratureConfig:
    r0: float = 8.0
    tail_tol: float = 1e-12
    max_doublings: int = 12
    epsrel: float = 1e-12
    limit: int = 500


def _core_quad(fn, r: float, cfg: QuadratureConfig) -> float:
    """``int_{-r}^{r} fn``; one looser retry when quad reports roundoff (kinked integrands)."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(fn, -r, r, epsabs=0.0, epsrel=cfg.epsrel, limit=cfg.limit)[0]
        except integrate.IntegrationWarning:
            pass
    with warnings.catch_warnings():
        # knots of tabulated targets cap the attainable accuracy near 1e-10
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, -r, r, epsabs=0.0, epsrel=1e3 * cfg.epsrel, limit=4 * cfg.limit)[0]


def _expanding_quad(fn, cfg: QuadratureConfig) -> float:
    r = cfg.r0
    kw = dict(epsabs=0.0, epsrel=cfg.epsrel, limit=cfg.limit)
    total = _core_quad(fn, r, cfg)
    for _ in range(cfg.max_doublings):
        # Tail pieces only need accuracy relative to the running total.
        kw["epsabs"] = 1e-3 * cfg.tail_tol * abs(total)
        left = integrate.quad(fn, -2 * r, -r, **kw)[0]
        right = integrate.quad(fn, r, 2 * r, **kw)[0]
        total += left + right
        r *= 2
        if abs(left) + abs(right) <= cfg.tail_tol * max(abs(total), 1e-300):
            return total
    raise DivergentIntegralError(
        f"tail contribution {abs(left) + abs(right):.3e} above tolerance at R={r:g}"
    )


def _phi_offset(p: Potential, r0: float) -> float:
    grid = np.linspace(-r0, r0, 201)
    vals = p.phi(grid)
    return float(np.max(vals[np.isfinite(vals)]))


def log_normalizer(p: Potential, quad: QuadratureConfig = QuadratureConfig()) -> float:
    shift = _phi_offset(p, quad.r0)
    z = _expanding_quad(lambda x: math.exp(float(p.phi(np.array(x))) - shift), quad)
    return shift + math.log(z)


def fisher_information(p: Potential, quad: QuadratureConfig = QuadratureConfig()) -> float:
    """``I = E[phi'(X)^2]`` by expanding adaptive quadrature.

    The density is normalised numerically, so unnormalised ``phi`` is fine and
    the result is unchanged by adding a constant to ``phi``.
    """
    shift = _phi_offset(p, quad.r0)

    def weight(x):
        return math.exp(float(p.phi(np.array(x))) - shift)

    z = _expanding_quad(weight, quad)
    num = _expanding_quad(lambda x: float(p.phi_prime(np.array(x))) ** 2 * weight(x), quad)
    value = num / z
    if not (0 < value < math.inf):
        raise DivergentIntegralError(f"{p.name}: Fisher information not finite/positive")
    p.fisher_info = value
    return value


# --------------------------------------------------------------------------
# Regularity

@dataclass(frozen=True)
class GridConfig:
    x_min: float = -10.0
    x_max: float = 10.0
    v_min: float = 1e-4
    v_max: float = 10.0
    num_x: int = 401
    num_v: int = 200
    rtol: float = 1e-9


@dataclass
class RegularityReport:
    holder_ratio: float
    holder_pass: bool
    holder_witness: tuple[float, float]
    lipschitz_ratio: float
    lipschitz_pass: Optional[bool]
    lipschitz_witness: tuple[float, float]


def check_regularity(p: Potential, grid: GridConfig = GridConfig()) -> RegularityReport:
    """Largest observed Hölder/growth and Lipschitz ratios of ``phi'`` on a grid."""
    x = np.linspace(grid.x_min, grid.x_max, grid.num_x)
    mag = np.geomspace(grid.v_min, grid.v_max, grid.num_v // 2)
    v = np.concatenate([-mag[::-1], mag])
    dphi = np.abs(p.phi_prime(x[:, None] + v[None, :]) - p.phi_prime(x)[:, None])
    av = np.abs(v)[None, :]
    holder = dphi / np.maximum(av ** p.holder_gamma, av ** p.holder_alpha)
    lip = dphi / av
    i, j = np.unravel_index(np.argmax(holder), holder.shape)
    li, lj = np.unravel_index(np.argmax(lip), lip.shape)
    h_max = float(holder[i, j])
    l_max = float(lip[li, lj])
    lip_pass = None
    if p.lipschitz is not None:
        lip_pass = l_max <= p.lipschitz * (1 + grid.rtol)
    return RegularityReport(
        holder_ratio=h_max,
        holder_pass=h_max <= p.holder_k * (1 + grid.rtol),
        holder_witness=(float(x[i]), float(v[j])),
        lipschitz_ratio=l_max,
        lipschitz_pass=lip_pass,
        lipschitz_witness=(float(x[li]), float(v[lj])),
    )


# --------------------------------------------------------------------------
# Catalogue

def gaussian(sigma: float = 1.0) -> Potential:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s2 = sigma * sigma
    return Potential(
        name=f"gaussian({sigma:g})",
        phi=lambda x: -0.5 * np.square(x) / s2,
        phi_prime=lambda x: -np.asarray(x) / s2,
        log_norm=math.log(sigma * math.sqrt(2 * math.pi)),
        fisher_info=1.0 / s2,
        holder_k=1.0 / s2,
        holder_gamma=1.0,
        holder_alpha=1.0,
        lipschitz=1.0 / s2,
        sampler=lambda rng, size: sigma * rng.standard_normal(size),
        tail_mass_fn=lambda x: 2.0 * stats.norm.sf(np.asarray(x) / sigma),
    )


def _log_cosh(x):
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def hyperbolic_secant() -> Potential:
    """``phi = -log cosh x``, score ``-tanh x``; density ``1 / (pi cosh x)``."""
    return Potential(
        name="tanh",
        phi=lambda x: -_log_cosh(np.asarray(x, dtype=float)),
        phi_prime=lambda x: -np.tanh(x),
        log_norm=math.log(math.pi),
        fisher_info=0.5,
        holder_k=1.0,
        holder_gamma=1.0,
        holder_alpha=1.0,
        lipschitz=1.0,
        sampler=lambda rng, size: np.log(np.tan(0.5 * math.pi * rng.random(size))),
        tail_mass_fn=lambda x: (4.0 / math.pi) * np.arctan(np.exp(-np.asarray(x))),
    )


def logistic() -> Potential:
    """Standard logistic density; score ``-tanh(x/2)``, ``I = 1/3``."""

    def phi(x):
        a = np.abs(np.asarray(x, dtype=float))
        return -a - 2.0 * np.log1p(np.exp(-a))

    return Potential(
        name="logistic",
        phi=phi,
        phi_prime=lambda x: -np.tanh(0.5 * np.asarray(x)),
        log_norm=0.0,
        fisher_info=1.0 / 3.0,
        holder_k=0.5,
        holder_gamma=1.0,
        holder_alpha=1.0,
        lipschitz=0.5,
        sampler=lambda rng, size: rng.logistic(size=size),
        tail_mass_fn=lambda x: 2.0 * special.expit(-np.asarray(x)),
    )


def spline_potential(path, name: Optional[str] = None) -> Potential:
    """Tabulated target from a two-column CSV ``x, phi`` (strictly increasing x).

    ``phi`` is interpolated with a monotone (PCHIP) cubic and continued linearly
    beyond the table using the end slopes, which must point downhill so the
    density has exponential tails.  Stationary draws use a tabulated inverse CDF
    with exact exponential tails.
    """
    xs, ys = [], []
    first = True
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if first:  # header line
                    first = False
                    continue
                raise ValueError(f"{path}: bad row {row!r}") from None
            first = False
            xs.append(x)
            ys.append(y)
    return tabulated_potential(np.array(xs), np.array(ys), name or f"spline({path})")


def tabulated_potential(xs: np.ndarray, ys: np.ndarray, name: str = "spline") -> Potential:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.size < 3 or xs.shape != ys.shape:
        raise ValueError("need at least three (x, phi) pairs")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x column must be strictly increasing")
    spl = interpolate.PchipInterpolator(xs, ys, extrapolate=False)
    dspl = spl.derivative()
    lo, hi = xs[0], xs[-1]
    s_lo = float(dspl(lo))
    s_hi = float(dspl(hi))
    if not (s_lo > 0 and s_hi < 0):
        raise ValueError("tabulated phi must increase at the left end and decrease at the right end")
    y_lo, y_hi = float(ys[0]), float(ys[-1])

    def phi(x):
        x = np.asarray(x, dtype=float)
        inner = spl(np.clip(x, lo, hi))
        return np.where(x < lo, y_lo + s_lo * (x - lo), np.where(x > hi, y_hi + s_hi * (x - hi), inner))

    def phi_prime(x):
        x = np.asarray(x, dtype=float)
        inner = dspl(np.clip(x, lo, hi))
        return np.where(x < lo, s_lo, np.where(x > hi, s_hi, inner))

    # Lipschitz constant of the score: |phi''| of the cubic pieces (linear in
    # each cell), so the maximum sits at cell ends.
    d2 = spl.derivative(2)
    eps = 1e-12 * (hi - lo)
    probe = np.concatenate([xs[:-1] + eps, xs[1:] - eps])
    lip = float(np.max(np.abs(d2(probe))))
    lip = max(lip, 1e-12)

    # Inverse-CDF table.
    grid = np.linspace(lo, hi, 20001)
    shift = float(np.max(phi(grid)))
    dens = np.exp(phi(grid) - shift)
    inner_cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    m_left = dens[0] / s_lo
    m_right = dens[-1] / (-s_hi)
    z = m_left + inner_cum[-1] + m_right
    cdf_grid = (m_left + inner_cum) / z
    log_norm = shift + math.log(z)

    def sampler(rng, size):
        u = rng.random(size)
        out = np.interp(u, cdf_grid, grid)
        left = u < cdf_grid[0]
        right = u > cdf_grid[-1]
        with np.errstate(divide="ignore"):
            out = np.where(left, lo + np.log(u * z * s_lo / dens[0]) / s_lo, out)
            out = np.where(right, hi + np.log((1 - u) * z * (-s_hi) / dens[-1]) / s_hi, out)
        return out

    return Potential(
        name=name,
        phi=phi,
        phi_prime=phi_prime,
        log_norm=log_norm,
        holder_k=lip,
        holder_gamma=1.0,
        holder_alpha=1.0,
        lipschitz=lip,
        sampler=sampler,
    )


_TARGET_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_target(spec: str) -> Potential:
    """Build a catalogue target from ``gaussian(sigma)``, ``tanh``, ``logistic`` or ``spline(path)``."""
    m = _TARGET_RE.match(spec)
    if not m:
        raise ValueError(f"malformed target spec {spec!r}")
    name, arg = m.group(1), m.group(2)
    if name == "gaussian":
        return gaussian(float(arg) if arg else 1.0)
    if name in ("tanh", "sech", "hyperbolic_secant") and not arg:
        return hyperbolic_secant()
    if name == "logistic" and not arg:
        return logistic()
    if name == "spline" and arg:
        return spline_potential(Path(arg.strip()))
    raise ValueError(f"unknown target {spec!r}")
