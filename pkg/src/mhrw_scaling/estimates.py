"""Small result containers shared across the diagnostics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Any, Sequence

FORM_KINDS = ("discrete_form", "limit_form", "l2_norm", "sobolev_norm", "")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo (or quadrature, ``stderr == 0``) estimate."""

    value: float
    stderr: float
    reps: int
    kind: str = ""

    def __post_init__(self):
        if self.kind not in FORM_KINDS and not self.kind.startswith("custom"):
            raise ValueError(f"unknown estimate kind {self.kind!r}")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.kind in FORM_KINDS[:-1] and self.value < 0:
            raise ValueError(f"{self.kind} estimate must be nonnegative")

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr


FormEstimate = Estimate


@dataclass
class BoundReport:
    """Outcome of an inequality suite: rows of checked cases plus violations."""

    name: str
    rows: list[dict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def _plain(v: Any):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return int(v)
    return v


def rows_to_csv(rows: Sequence) -> str:
    rows = [asdict(r) if is_dataclass(r) else dict(r) for r in rows]
    out = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(out, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for r in rows:
        writer.writerow([_plain(r[k]) for k in header])
    return out.getvalue()


def to_json(obj) -> str:
    def default(o):
        if is_dataclass(o):
            return asdict(o)
        if hasattr(o, "tolist"):
            return o.tolist()
        raise TypeError(type(o))

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    data = asdict(obj) if is_dataclass(obj) else obj
    return json.dumps(clean(json.loads(json.dumps(data, default=default))), indent=2, sort_keys=True)


def dataclass_rows(table) -> list[dict]:
    return [{f.name: getattr(r, f.name) for f in fields(r)} for r in table]
