"""Metropolis-Hastings random walk on product targets.

Each of the ``n`` coordinates receives an independent ``N(0, tau^2 / n)``
increment; the move is accepted with probability ``1 ^ f(y) / f(x)``.  Only
the first ``n`` coordinates of the infinite-dimensional state are ever
materialised: every observable here is a cylinder function, so the static
tail coordinates drop out.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._random import CHUNK_CELLS, make_rng, map_chunks
from .potential import Potential

# Replicates per head-block; fixed so that head coordinates are shared
# across dimensions (common random numbers along an n ladder).
HEAD_BLOCK = 1024


class NonFiniteValueError(FloatingPointError):
    """phi evaluated to a non-finite number inside the acceptance ratio."""


class ObservableError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"observable {index} failed: {cause!r}")
        self.index = index


@dataclass(frozen=True)
class ChainConfig:
    n: int
    tau: float
    target: Potential
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.tau >= 0:  # tau == 0 is the degenerate identity proposal
            raise ValueError("tau must be nonnegative")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def step_size(self) -> float:
        return self.tau / math.sqrt(self.n)


@dataclass
class ChainState:
    x: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class StepRecord:
    log_ratio: float
    accepted: bool
    delta_x1: float
    log_u: float


def draw_stationary(config: ChainConfig, rng: np.random.Generator) -> ChainState:
    """Exact draw from the product target: ``n`` i.i.d. coordinates."""
    x = np.asarray(config.target.sample(rng, config.n), dtype=float)
    return ChainState(x=x, step=0)


def _checked_sum(d: np.ndarray) -> float:
    if not np.all(np.isfinite(d)):
        raise NonFiniteValueError("non-finite phi difference in acceptance ratio")
    return math.fsum(d)


def log_acceptance_ratio(x, w, tau: float, n: int, p: Potential) -> float:
    """``sum_i phi(x_i + tau w_i / sqrt(n)) - phi(x_i)`` with exactly rounded summation."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (n,) or w.shape != (n,):
        raise ValueError("x and w must both have length n")
    return _checked_sum(p.phi(x + (tau / math.sqrt(n)) * w) - p.phi(x))


def step(state: ChainState, config: ChainConfig, rng: np.random.Generator):
    """One MHRW proposal.  Returns ``(new_state, record)``; rejection keeps ``x``."""
    x = state.x
    if x.shape != (config.n,):
        raise ValueError("state dimension does not match config.n")
    w = rng.standard_normal(config.n)
    y = x + config.step_size * w
    log_ratio = _checked_sum(config.target.phi(y) - config.target.phi(x))
    log_u = math.log(rng.random())
    accepted = log_u < log_ratio
    if accepted:
        return ChainState(y, state.step + 1), StepRecord(log_ratio, True, float(y[0] - x[0]), log_u)
    return ChainState(x, state.step + 1), StepRecord(log_ratio, False, 0.0, log_u)


@dataclass
class Trace:
    """Output of :func:`run_chain`.

    ``accepted``, ``log_ratio`` and ``delta_x1`` hold every proposal; the
    observables are kept at the retained steps ``0, thin, 2*thin, ...``.
    """

    n: int
    tau: float
    retained_steps: np.ndarray
    observables: np.ndarray
    accepted: np.ndarray
    log_ratio: np.ndarray
    delta_x1: np.ndarray
    wall_time: float
    observable_names: list[str] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.accepted.size else float("nan")

    @property
    def esjd(self) -> float:
        """``n * mean((X1(t+1) - X1(t))^2)``, rejections counting as zero jumps."""
        if not self.delta_x1.size:
            return float("nan")
        return float(self.n * np.mean(self.delta_x1**2))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "tau": self.tau,
            "steps": int(self.accepted.size),
            "acceptance_rate": self.acceptance_rate,
            "esjd": self.esjd,
            "wall_time": self.wall_time,
        }

    def to_csv(self, fh=None) -> str:
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        names = self.observable_names or [f"h{j}" for j in range(self.observables.shape[1])]
        writer.writerow(["step", "accepted", "log_ratio", *names])
        for row, t in enumerate(self.retained_steps):
            if t == 0:
                acc, lr = "", ""
            else:
                acc, lr = int(self.accepted[t - 1]), repr(float(self.log_ratio[t - 1]))
            writer.writerow([int(t), acc, lr, *(repr(float(v)) for v in self.observables[row])])
        return out.getvalue() if fh is None else ""

    def summary_json(self, deterministic: bool = False) -> str:
        data = self.summary()
        if deterministic:
            data.pop("wall_time")
        return json.dumps(data, indent=2, sort_keys=True)


def run_chain(
    config: ChainConfig,
    steps: int,
    observables: Sequence = (),
    thin: int = 1,
    replica: int = 0,
) -> Trace:
    """Run a stationary-start chain and record cylinder observables.

    The chain starts from an exact stationary draw, then discards
    ``config.burn_in`` proposals.  Fully determined by ``(config.seed, replica)``.
    """
    if steps < 0 or thin < 1:
        raise ValueError("steps must be >= 0 and thin >= 1")
    rng = make_rng(config.seed, "chain", replica)
    t0 = time.perf_counter()
    state = draw_stationary(config, rng)
    for _ in range(config.burn_in):
        state, _ = step(state, config, rng)
    state = ChainState(state.x, 0)

    def observe(x):
        vals = []
        for j, h in enumerate(observables):
            try:
                vals.append(float(h(x[: h.N])))
            except Exception as exc:  # noqa: BLE001 - re-raised with index
                raise ObservableError(j, exc) from exc
        return vals

    n_keep = steps // thin + 1
    obs = np.empty((n_keep, len(observables)))
    kept = np.arange(n_keep) * thin
    accepted = np.empty(steps, dtype=bool)
    log_ratio = np.empty(steps)
    delta = np.empty(steps)
    obs[0] = observe(state.x)

    # Inlined copy of ``step`` with phi(x) cached; same draws, same arithmetic.
    phi = config.target.phi
    s = config.step_size
    x = state.x
    phi_x = phi(x)
    for t in range(steps):
        w = rng.standard_normal(config.n)
        y = x + s * w
        phi_y = phi(y)
        lr = _checked_sum(phi_y - phi_x)
        acc = math.log(rng.random()) < lr
        accepted[t] = acc
        log_ratio[t] = lr
        if acc:
            delta[t] = y[0] - x[0]
            x, phi_x = y, phi_y
        else:
            delta[t] = 0.0
        if (t + 1) % thin == 0:
            obs[(t + 1) // thin] = observe(x)

    names = [getattr(h, "name", f"h{j}") for j, h in enumerate(observables)]
    return Trace(
        n=config.n,
        tau=config.tau,
        retained_steps=kept,
        observables=obs,
        accepted=accepted,
        log_ratio=log_ratio,
        delta_x1=delta,
        wall_time=time.perf_counter() - t0,
        observable_names=names,
    )


# --------------------------------------------------------------------------
# Batched single steps from stationarity (Monte Carlo building block)

@dataclass
class StepBatch:
    """Independent single proposals from stationarity.

    ``x_head``/``w_head`` are the first ``head`` coordinates of state and
    standard-normal increment; ``log_ratio`` uses all ``n`` coordinates.
    """

    x_head: np.ndarray
    w_head: np.ndarray
    log_ratio: np.ndarray

    @property
    def accept_prob(self) -> np.ndarray:
        return np.exp(np.minimum(self.log_ratio, 0.0))


def stationary_step_batch(
    target: Potential,
    n: int,
    tau: float,
    rows: int,
    rng_head: np.random.Generator,
    rng_tail: np.random.Generator,
    head: int = 1,
) -> StepBatch:
    if head > n:
        raise ValueError(f"head dimension {head} exceeds chain dimension {n}")
    s = tau / math.sqrt(n)
    xh = np.asarray(target.sample(rng_head, (rows, head)), dtype=float)
    wh = rng_head.standard_normal((rows, head))
    lr = np.sum(target.phi(xh + s * wh) - target.phi(xh), axis=1)
    tail = n - head
    if tail:
        sub = max(1, CHUNK_CELLS // tail)
        for lo in range(0, rows, sub):
            m = min(sub, rows - lo)
            xt = np.asarray(target.sample(rng_tail, (m, tail)), dtype=float)
            wt = rng_tail.standard_normal((m, tail))
            lr[lo : lo + m] += np.sum(target.phi(xt + s * wt) - target.phi(xt), axis=1)
    if not np.all(np.isfinite(lr)):
        raise NonFiniteValueError("non-finite phi difference in acceptance ratio")
    return StepBatch(xh, wh, lr)


def step_batches(
    target: Potential,
    n: int,
    tau: float,
    reps: int,
    seed: int,
    key: str,
    head: int = 1,
    threads: int = 1,
):
    """Yield :class:`StepBatch` objects covering ``reps`` replicates.

    Block ``j`` uses streams ``(seed, key, "head", j)`` and
    ``(seed, key, "tail", j)``; the head stream does not depend on ``n``.
    """
    sizes = [HEAD_BLOCK] * (reps // HEAD_BLOCK)
    if reps % HEAD_BLOCK:
        sizes.append(reps % HEAD_BLOCK)

    def one(j, m):
        return stationary_step_batch(
            target, n, tau, m, make_rng(seed, key, "head", j), make_rng(seed, key, "tail", j), head
        )

    return map_chunks(one, sizes, threads)
