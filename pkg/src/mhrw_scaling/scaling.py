"""Speed of the limiting diffusion and the optimal proposal scale."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from ._random import Moments
from .clt import c_of_tau
from .potential import Potential
from .sampler import step_batches


class BracketError(RuntimeError):
    """The coarse scan did not isolate an interior maximum."""


def speed(tau, I: float = 1.0):
    """``tau^2 c(tau)``, the time-change factor of the limiting diffusion."""
    if not I > 0:
        raise ValueError("Fisher information must be positive")
    tau = np.asarray(tau, dtype=float)
    out = tau * tau * c_of_tau(tau, I)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OptimalScale:
    tau_star: float
    speed_star: float
    acc_star: float


def optimize_tau(I: float = 1.0, tol: float = 1e-10, scan: int = 64) -> OptimalScale:
    """Maximise ``speed(., I)`` over ``(0, 20/sqrt(I)]``.

    A coarse grid scan supplies a three-point bracket which golden-section
    search then refines to ``tol`` (relative in ``tau``).
    """
    if not I > 0 or not tol > 0:
        raise ValueError("I and tol must be positive")
    hi = 20.0 / math.sqrt(I)
    grid = np.linspace(hi / scan, hi, scan)
    vals = speed(grid, I)
    j = int(np.argmax(vals))
    if j == 0 or j == scan - 1:
        raise BracketError(f"speed maximum at grid end (tau={grid[j]:g})")
    res = optimize.minimize_scalar(
        lambda t: -speed(t, I),
        bracket=(grid[j - 1], grid[j], grid[j + 1]),
        method="golden",
        options={"xtol": tol},
    )
    t = float(res.x)
    return OptimalScale(t, speed(t, I), c_of_tau(t, I))


@dataclass
class SpeedRow:
    tau: float
    esjd: float
    stderr: float
    asymptote: float
    acc_rate: float
    acc_stderr: float


@dataclass
class SpeedCurve:
    n: int
    rows: list[SpeedRow]

    @property
    def argmax(self) -> float:
        return max(self.rows, key=lambda r: r.esjd).tau

    def row(self, tau: float) -> SpeedRow:
        return min(self.rows, key=lambda r: abs(r.tau - tau))


def empirical_speed_curve(
    target: Potential,
    n: int,
    tau_grid: Sequence[float],
    reps: int,
    seed: int = 0,
    threads: int = 1,
) -> SpeedCurve:
    """Finite-``n`` ESJD ``n E[(dX_1)^2]`` (rejections count as zero jumps) over a grid.

    Every grid point reuses the same states and standard-normal increments,
    so differences between columns are common-random-number comparisons.
    The acceptance indicator is integrated out.
    """
    if not len(tau_grid):
        raise ValueError("empty tau grid")
    rows = []
    for tau in tau_grid:
        jump, acc = [], []
        for b in step_batches(target, n, float(tau), reps, seed, "speed", threads=threads):
            a = b.accept_prob
            jump.append(Moments.of(tau * tau * b.w_head[:, 0] ** 2 * a))
            acc.append(Moments.of(a))
        mj, ma = Moments.reduce(jump), Moments.reduce(acc)
        rows.append(SpeedRow(float(tau), mj.mean, mj.stderr, speed(tau, target.I), ma.mean, ma.stderr))
    return SpeedCurve(n, rows)
