"""Langevin limit of the rescaled first coordinate.

The limit solves ``dU = (1/2) s phi'(U) dt + sqrt(s) dB`` with speed
``s = tau^2 c(tau)``.  This module simulates it by Euler-Maruyama and compares
it with the chain run on the time scale ``t -> floor(n t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from ._random import Moments, make_rng, map_chunks
from .clt import c_of_tau
from .observables import CylinderFunction, coordinate
from .potential import Potential, log_normalizer
from .sampler import ChainConfig, run_chain


class BlowUpError(FloatingPointError):
    """An Euler path left the configured bound."""


@dataclass(frozen=True)
class SdeConfig:
    tau: float
    target: Potential
    dt: float = 1e-3
    horizon: float = 1.0
    bound: float = 1e6

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("tau must be nonnegative")
        if not self.dt > 0 or not self.horizon > 0:
            raise ValueError("dt and horizon must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")

    @property
    def speed(self) -> float:
        return self.tau**2 * c_of_tau(self.tau, self.target.I) if self.tau > 0 else 0.0

    def drift(self, u):
        return 0.5 * self.speed * self.target.phi_prime(u)

    @property
    def diffusion(self) -> float:
        return math.sqrt(self.speed)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


def _euler(cfg: SdeConfig, u: np.ndarray, dw: np.ndarray, dt: float) -> np.ndarray:
    u = u + cfg.drift(u) * dt + cfg.diffusion * dw
    if not np.all(np.abs(u) <= cfg.bound):
        raise BlowUpError(f"|U| exceeded {cfg.bound:g}")
    return u


def simulate_sde(cfg: SdeConfig, u0: float, rng: np.random.Generator):
    """One Euler-Maruyama path on ``[0, horizon]``; returns ``(times, values)``."""
    if not math.isfinite(u0):
        raise ValueError("u0 must be finite")
    m = cfg.steps
    dw = rng.standard_normal(m) * math.sqrt(cfg.dt)
    vals = np.empty(m + 1)
    vals[0] = u = u0
    for i in range(m):
        u = u + float(cfg.drift(u)) * cfg.dt + cfg.diffusion * dw[i]
        if abs(u) > cfg.bound:
            raise BlowUpError(f"|U| exceeded {cfg.bound:g} at t={(i + 1) * cfg.dt:g}")
        vals[i + 1] = u
    return np.arange(m + 1) * cfg.dt, vals


def simulate_sde_ensemble(
    cfg: SdeConfig,
    u0,
    rng: np.random.Generator,
    times: Sequence[float] = (),
    coarse: bool = False,
):
    """Independent Euler paths from the entries of ``u0`` (vectorised).

    Returns the states at ``times`` (shape ``(len(times),) + u0.shape``) and the
    final state.  With ``coarse`` a second set of paths with step ``2 dt`` is
    driven by the pairwise sums of the same Brownian increments; it is returned
    as a third element and serves as a weak-error probe.
    """
    u = np.array(u0, dtype=float)
    m = cfg.steps
    idx = {int(round(t / cfg.dt)): j for j, t in enumerate(times)}
    if coarse and any(i % 2 for i in idx):
        raise ValueError("coarse paths need recording times on the 2 dt grid")
    rec = np.empty((len(times),) + u.shape)
    rec_c = np.empty_like(rec) if coarse else None
    uc = u.copy()
    if 0 in idx:
        rec[idx[0]] = u
        if coarse:
            rec_c[idx[0]] = uc
    sq = math.sqrt(cfg.dt)
    pending = None
    for i in range(1, m + 1):
        dw = rng.standard_normal(u.shape) * sq
        u = _euler(cfg, u, dw, cfg.dt)
        if coarse:
            if pending is None:
                pending = dw
            else:
                uc = _euler(cfg, uc, pending + dw, 2 * cfg.dt)
                pending = None
        if i in idx:
            rec[idx[i]] = u
            if coarse:
                rec_c[idx[i]] = uc
    return (rec, u, rec_c) if coarse else (rec, u)


def stationary_sde_sample(cfg: SdeConfig, paths: int, seed: int = 0, start: float | None = None):
    """Terminal values of ``paths`` independent Euler paths run to ``cfg.horizon``.

    Paths start at ``start`` (default: 3 standard deviations of the target
    away from the mode) so agreement with the target reflects the dynamics
    rather than the initial law.
    """
    if start is None:
        start = 3.0 / math.sqrt(cfg.target.I)
    rng = make_rng(seed, "sde-stationary")
    _, u = simulate_sde_ensemble(cfg, np.full(paths, float(start)), rng)
    return u


def target_cdf(target: Potential, lo: float, hi: float, points: int = 20_001):
    """CDF of the target on ``[lo, hi]`` by cumulative Simpson on a fine grid."""
    log_z = target.log_norm if target.log_norm is not None else log_normalizer(target)
    xs = np.linspace(lo, hi, points)
    f = np.exp(target.phi(xs) - log_z)
    left = integrate.quad(lambda y: math.exp(float(target.phi(np.array(y))) - log_z), -np.inf, lo)[0]
    cdf = left + integrate.cumulative_simpson(f, x=xs, initial=0.0)
    return lambda x: np.interp(x, xs, np.clip(cdf, 0.0, 1.0))


@dataclass
class InvarianceReport:
    paths: int
    mean: float
    variance: float
    ks: float
    ks_critical: float  # 5% asymptotic critical value 1.358 / sqrt(paths)
    ok: bool


def invariance_check(cfg: SdeConfig, paths: int, seed: int = 0, start: float | None = None) -> InvarianceReport:
    """KS distance between terminal Euler values and the target."""
    u = stationary_sde_sample(cfg, paths, seed, start)
    pad = 1.0
    cdf = target_cdf(cfg.target, float(u.min()) - pad, float(u.max()) + pad)
    ks = float(stats.kstest(u, cdf).statistic)
    crit = 1.358 / math.sqrt(paths)
    return InvarianceReport(paths, float(u.mean()), float(u.var()), ks, crit, ks <= crit)


# --------------------------------------------------------------------------
# Chain side

def rescaled_first_coordinate(config: ChainConfig, horizon: float, thin: int = 1, replica: int = 0):
    """First coordinate of a stationary chain at times ``j thin / n``, up to ``horizon``.

    Returns ``(times, values)``; the value at time ``t`` is ``X_1(floor(n t))``.
    """
    steps = int(math.floor(config.n * horizon))
    tr = run_chain(config, steps, [coordinate()], thin=thin, replica=replica)
    return tr.retained_steps / config.n, tr.observables[:, 0]


def _chain_ensemble(target: Potential, x: np.ndarray, s: float, steps: int, rng, record: dict, antithetic=False):
    """Advance every row of ``x`` by ``steps`` MHRW proposals.

    ``record`` maps step counts to output slots; the first coordinate is
    returned for each.  With ``antithetic`` rows come in consecutive pairs
    driven by ``(w, u)`` and ``(-w, 1 - u)``.
    """
    rows, n = x.shape
    out = np.empty((max(record.values(), default=-1) + 1, rows))
    if 0 in record:
        out[record[0]] = x[:, 0]
    phi_x = target.phi(x)
    half = rows // 2
    for i in range(1, steps + 1):
        if antithetic:
            w = rng.standard_normal((half, n))
            w = np.stack([w, -w], axis=1).reshape(rows, n)
            u = rng.random(half)
            u = np.stack([u, 1.0 - u], axis=1).reshape(rows)
        else:
            w = rng.standard_normal((rows, n))
            u = rng.random(rows)
        y = x + s * w
        phi_y = target.phi(y)
        acc = np.log(u) < np.sum(phi_y - phi_x, axis=1)
        x = np.where(acc[:, None], y, x)
        phi_x = np.where(acc[:, None], phi_y, phi_x)
        if i in record:
            out[record[i]] = x[:, 0]
    return out


@dataclass
class DistanceRow:
    n: int
    t: float
    rms: float  # sqrt of the debiased mean squared difference (0 if negative)
    sq_mean: float  # debiased E_x[(T^n_t h(x) - T_t h(x_1))^2]
    sq_stderr: float
    rms_lo: float
    rms_hi: float
    sde_bias: float  # RMS difference between Euler steps dt and 2 dt
    inner_noise: float  # mean inner-Monte-Carlo variance that was subtracted
    outer_reps: int
    inner_reps: int


@dataclass
class DistanceTable:
    observable: str
    tau: float
    rows: list[DistanceRow] = field(default_factory=list)

    def row(self, n: int, t: float) -> DistanceRow:
        return next(r for r in self.rows if r.n == n and abs(r.t - t) < 1e-12)

    def improves(self, n_small: int, n_large: int, t: float) -> bool:
        """Distance at ``n_large`` below that at ``n_small`` beyond both error bars and SDE bias."""
        a, b = self.row(n_small, t), self.row(n_large, t)
        return a.rms_lo - a.sde_bias > b.rms_hi + b.sde_bias


OUTER_BLOCK = 8


def semigroup_distance(
    h: CylinderFunction,
    t_grid: Sequence[float],
    config: ChainConfig,
    outer_reps: int,
    inner_reps: int,
    sde_cfg: SdeConfig | None = None,
    sde_inner: int | None = None,
    threads: int = 1,
    table: DistanceTable | None = None,
) -> DistanceTable:
    """RMS over stationary starts ``x`` of ``T^n_t h(x) - T_t h(x_1)``.

    Both semigroups are estimated by inner Monte Carlo from the same ``x``:
    ``inner_reps`` chain continuations (antithetic pairs) and ``sde_inner``
    Euler continuations.  The squared difference is debiased by subtracting
    the estimated inner variance, and the Euler weak error is probed by
    rerunning the SDE with step ``2 dt`` on the same increments.

    Start points share their first coordinate across ``n`` (and hence the SDE
    side is identical across ``n``), so rows for different ``n`` are
    common-random-number comparisons.
    """
    if h.N != 1:
        raise ValueError("semigroup distance is defined for observables of x_1 only")
    if inner_reps < 2 or inner_reps % 2:
        raise ValueError("inner_reps must be an even number >= 2")
    t_grid = [float(t) for t in t_grid]
    target, n = config.target, config.n
    horizon = max(t_grid)
    if sde_cfg is None:
        sde_cfg = SdeConfig(config.tau, target, dt=1e-3, horizon=max(horizon, 1e-3))
    elif sde_cfg.horizon < horizon:
        sde_cfg = SdeConfig(sde_cfg.tau, target, sde_cfg.dt, horizon, sde_cfg.bound)
    sde_inner = sde_inner or 2 * inner_reps
    steps_at = {t: int(math.floor(n * t)) for t in t_grid}
    chain_slots = {}
    for t in t_grid:
        chain_slots.setdefault(steps_at[t], len(chain_slots))
    sde_slots = [int(round(t / sde_cfg.dt / 2)) * 2 * sde_cfg.dt for t in t_grid]
    s = config.step_size
    blocks = [OUTER_BLOCK] * (outer_reps // OUTER_BLOCK)
    if outer_reps % OUTER_BLOCK:
        blocks.append(outer_reps % OUTER_BLOCK)

    def one(j, m):
        seed = config.seed
        x1 = np.asarray(target.sample(make_rng(seed, "sg-start", "head", j), (m, 1)), dtype=float)
        if n > 1:
            rest = np.asarray(target.sample(make_rng(seed, "sg-start", "tail", n, j), (m, n - 1)), dtype=float)
            x = np.hstack([x1, rest])
        else:
            x = x1
        xc = np.repeat(x, inner_reps, axis=0)
        rng = make_rng(seed, "sg-chain", n, j)
        chain = _chain_ensemble(target, xc, s, max(chain_slots), rng, chain_slots, antithetic=True)
        hv = h.eval(chain[..., None]).reshape(len(chain_slots), m, inner_reps // 2, 2)
        pair = hv.mean(axis=3)  # antithetic pair means are iid
        chain_mean = pair.mean(axis=2)
        chain_var = pair.var(axis=2, ddof=1) / pair.shape[2]

        uc = np.repeat(x1[:, 0], sde_inner)
        rec, _, rec_c = simulate_sde_ensemble(sde_cfg, uc, make_rng(seed, "sg-sde", j), sde_slots, coarse=True)
        sv = h.eval(rec[..., None]).reshape(len(t_grid), m, sde_inner)
        sv_c = h.eval(rec_c[..., None]).reshape(len(t_grid), m, sde_inner)
        sde_mean = sv.mean(axis=2)
        sde_var = sv.var(axis=2, ddof=1) / sde_inner
        bias = np.abs(sde_mean - sv_c.mean(axis=2))

        out = []
        for i, t in enumerate(t_grid):
            c = chain_slots[steps_at[t]]
            d = chain_mean[c] - sde_mean[i]
            v = chain_var[c] + sde_var[i]
            out.append((d * d - v, v, bias[i] ** 2))
        return out

    parts = map_chunks(one, blocks, threads)
    table = table or DistanceTable(h.name, config.tau)
    for i, t in enumerate(t_grid):
        sq = Moments.reduce([Moments.of(p[i][0]) for p in parts])
        noise = Moments.reduce([Moments.of(p[i][1]) for p in parts])
        b2 = Moments.reduce([Moments.of(p[i][2]) for p in parts])
        lo = math.sqrt(max(sq.mean - 2 * sq.stderr, 0.0))
        hi = math.sqrt(max(sq.mean + 2 * sq.stderr, 0.0))
        table.rows.append(
            DistanceRow(
                n=n,
                t=t,
                rms=math.sqrt(max(sq.mean, 0.0)),
                sq_mean=sq.mean,
                sq_stderr=sq.stderr,
                rms_lo=lo,
                rms_hi=hi,
                sde_bias=math.sqrt(b2.mean),
                inner_noise=noise.mean,
                outer_reps=outer_reps,
                inner_reps=inner_reps,
            )
        )
    return table


# --------------------------------------------------------------------------
# Autocorrelation

@dataclass
class AcfRow:
    lag: float
    chain_acf: float
    chain_stderr: float
    sde_acf: float
    sde_stderr: float


def _corr(a: np.ndarray, b: np.ndarray):
    r = float(np.corrcoef(a, b)[0, 1])
    return r, (1 - r * r) / math.sqrt(len(a))


def autocorrelation_compare(
    config: ChainConfig,
    sde_cfg: SdeConfig,
    lags: Sequence[float],
    reps: int,
    block: int = 256,
    threads: int = 1,
) -> list[AcfRow]:
    """Stationary lag-``t`` autocorrelation of the rescaled first coordinate and of the SDE.

    Both sides use ``reps`` independent stationary starts; standard errors
    are the normal-theory ``(1 - r^2) / sqrt(reps)``.
    """
    lags = [float(t) for t in lags]
    if max(lags) > sde_cfg.horizon:
        raise ValueError("lags exceed the SDE horizon")
    target, n = config.target, config.n
    slots = {}
    for t in [0.0, *lags]:
        slots.setdefault(int(math.floor(n * t)), len(slots))
    sizes = [block] * (reps // block) + ([reps % block] if reps % block else [])

    def one(j, m):
        x = np.asarray(target.sample(make_rng(config.seed, "acf-start", n, j), (m, n)), dtype=float)
        return _chain_ensemble(target, x, config.step_size, max(slots), make_rng(config.seed, "acf", n, j), slots)

    chain = np.concatenate(map_chunks(one, sizes, threads), axis=1)
    times = [0.0] + [round(t / sde_cfg.dt) * sde_cfg.dt for t in lags]
    u0 = np.asarray(target.sample(make_rng(config.seed, "acf-sde-start"), reps), dtype=float)
    rec, _ = simulate_sde_ensemble(sde_cfg, u0, make_rng(config.seed, "acf-sde"), times)
    rows = []
    for i, t in enumerate(lags):
        c = chain[slots[int(math.floor(n * t))]]
        r_c, se_c = _corr(chain[slots[0]], c) if t > 0 else (1.0, 0.0)
        r_s, se_s = _corr(rec[0], rec[i + 1]) if t > 0 else (1.0, 0.0)
        rows.append(AcfRow(t, r_c, se_c, r_s, se_s))
    return rows
