"""Cylinder test functions: smooth observables of the first ``N`` coordinates."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CylinderFunction:
    """``h(x_1, ..., x_N)`` with its gradient.

    ``eval`` maps an array of shape ``(..., N)`` to ``(...)`` and ``grad`` maps
    it to ``(..., N)``.  ``support_radius`` is ``inf`` when ``h`` is not
    compactly supported.
    """

    N: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    support_radius: float = math.inf
    name: str = "h"

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support_radius)

    def scaled(self, a: float) -> "CylinderFunction":
        return CylinderFunction(
            self.N,
            lambda x: a * self.eval(x),
            lambda x: a * self.grad(x),
            self.support_radius,
            f"{a:g}*{self.name}",
        )


def _bump_parts(t, r):
    """``exp(-1/(1-(t/r)^2))`` on ``|t| < r`` and its derivative."""
    q = np.square(t / r)
    inside = q < 1.0
    qs = np.where(inside, q, 0.0)
    val = np.where(inside, np.exp(-1.0 / (1.0 - qs)), 0.0)
    dval = np.where(inside, val * (-2.0 * t / r**2) / np.square(1.0 - qs), 0.0)
    return val, dval


def _on_coordinate(g, dg, coord: int, support: float, name: str) -> CylinderFunction:
    N = coord + 1

    def ev(x):
        return g(x[..., coord])

    def gr(x):
        out = np.zeros(np.shape(x))
        out[..., coord] = dg(x[..., coord])
        return out

    return CylinderFunction(N, ev, gr, support, name)


def coordinate(coord: int = 0) -> CylinderFunction:
    """``h(x) = x_{coord+1}``; square integrable but not compactly supported."""
    return _on_coordinate(lambda t: t, np.ones_like, coord, math.inf, f"coord{coord + 1}")


def bump(r: float = 2.0, coord: int = 0) -> CylinderFunction:
    if not r > 0:
        raise ValueError("bump radius must be positive")
    return _on_coordinate(
        lambda t: _bump_parts(t, r)[0],
        lambda t: _bump_parts(t, r)[1],
        coord,
        r,
        f"bump({r:g})" if coord == 0 else f"bump({r:g},{coord})",
    )


def sin_bump(r: float = 2.0, coord: int = 0) -> CylinderFunction:
    """``sin(pi t / r) * bump_r(t)``: an odd, compactly supported observable."""
    if not r > 0:
        raise ValueError("bump radius must be positive")
    k = math.pi / r

    def g(t):
        return np.sin(k * t) * _bump_parts(t, r)[0]

    def dg(t):
        v, dv = _bump_parts(t, r)
        return k * np.cos(k * t) * v + np.sin(k * t) * dv

    name = f"sin_bump({r:g})" if coord == 0 else f"sin_bump({r:g},{coord})"
    return _on_coordinate(g, dg, coord, r, name)


def product_bump(N: int, r: float = 2.0) -> CylinderFunction:
    """``prod_i bump_r(x_i)`` over the first ``N`` coordinates."""

    def ev(x):
        return np.prod(_bump_parts(x, r)[0], axis=-1)

    def gr(x):
        v, dv = _bump_parts(x, r)
        out = np.empty(np.shape(x))
        for i in range(N):
            others = np.prod(np.delete(v, i, axis=-1), axis=-1)
            out[..., i] = dv[..., i] * others
        return out

    return CylinderFunction(N, ev, gr, r * math.sqrt(N), f"product_bump({N},{r:g})")


def catalogue() -> list[CylinderFunction]:
    return [coordinate(), bump(), sin_bump()]


_OBS_RE = re.compile(r"^\s*([a-z_]+\d*)\s*(?:\((.*)\))?\s*$")


def parse_observable(spec: str) -> CylinderFunction:
    """``coord1``, ``coordK``, ``bump(r)``, ``sin_bump(r)`` or ``product_bump(N, r)``."""
    m = _OBS_RE.match(spec)
    if not m:
        raise ValueError(f"malformed observable {spec!r}")
    name, arg = m.group(1), m.group(2)
    args = [a.strip() for a in arg.split(",")] if arg else []
    coord = re.fullmatch(r"coord(\d+)", name)
    if coord and not args:
        return coordinate(int(coord.group(1)) - 1)
    if name == "bump":
        return bump(float(args[0])) if args else bump()
    if name == "sin_bump":
        return sin_bump(float(args[0])) if args else sin_bump()
    if name == "product_bump" and args:
        return product_bump(int(args[0]), float(args[1]) if len(args) > 1 else 2.0)
    raise ValueError(f"unknown observable {spec!r}")


def gradient_error(h: CylinderFunction, points: np.ndarray, step: float = 1e-6) -> float:
    """Max relative mismatch between ``h.grad`` and central differences at ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g = h.grad(points)
    fd = np.empty_like(g)
    for i in range(h.N):
        e = np.zeros(h.N)
        e[i] = step
        fd[:, i] = (h.eval(points + e) - h.eval(points - e)) / (2 * step)
    scale = np.maximum(np.abs(g), 1e-3)
    return float(np.max(np.abs(g - fd) / scale))
