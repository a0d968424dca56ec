"""Command-line front end: ``mhrw-scaling <subcommand> [options]``.

Exit status is 0 on success, 1 when a checked inequality is violated and 2
on a configuration error.  Options may also come from a JSON file given by
``--config`` (keys are the long option names with dashes or underscores);
explicit flags win over the file.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import capacity, clt, diffusion, forms, scaling
from .estimates import rows_to_csv, to_json
from .observables import parse_observable
from .potential import check_regularity, fisher_information, log_normalizer, parse_target
from .sampler import ChainConfig, run_chain


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _opt_float(text):
    return None if text in ("", None) else float(text)


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


# name -> (type, default); default None means "required unless noted"
COMMON = {"seed": (int, 0), "threads": (int, 1), "out": (str, "-"), "format": (str, "csv")}
OPTIONS = {
    "fisher": {"target": (str, None)},
    "clt": {"target": (str, None), "tau": (float, 1.0), "n": (int, 1000), "reps": (int, 10_000)},
    "forms": {
        "target": (str, ""),
        "h": (str, "bump(2)"),
        "n_ladder": (_ints, "10,100,1000"),
        "tau": (float, 1.0),
        "reps": (int, 20_000),
        "mode": (str, "mosco"),
        "eps": (float, 0.1),
    },
    "speed": {
        "target": (str, ""),
        "I": (float, 0.0),
        "n": (int, 1000),
        "tau_grid": (_floats, "0.5,1,1.5,2,2.38,3,4"),
        "reps": (int, 20_000),
        "tol": (float, 1e-10),
    },
    "diffusion": {
        "target": (str, None),
        "mode": (str, "sde"),
        "tau": (float, 1.0),
        "dt": (float, 1e-3),
        "horizon": (float, 40.0),
        "paths": (int, 10_000),
        "u0": (_opt_float, ""),
        "n_ladder": (_ints, "10,500"),
        "t_grid": (_floats, "0.25,0.5,1"),
        "outer": (int, 32),
        "inner": (int, 256),
        "h": (str, "bump(2)"),
        "n": (int, 1000),
        "lags": (_floats, "0.5,1"),
        "reps": (int, 2000),
    },
    "capacity": {
        "target": (str, None),
        "n_ladder": (_ints, "1,10,100"),
        "L": (int, 10_000),
        "tau": (float, 1.0),
        "reps": (int, 2000),
        "rule": (str, "max"),
        "tail_tol": (float, 1e-3),
    },
    "chain": {
        "target": (str, None),
        "n": (int, 100),
        "tau": (float, 2.38),
        "steps": (int, 1000),
        "thin": (int, 1),
        "burn_in": (int, 0),
        "h": (str, "coord1"),
    },
}
CHOICES = {
    "format": ("csv", "json"),
    ("forms", "mode"): ("mosco", "domination", "chi2"),
    ("diffusion", "mode"): ("sde", "semigroup", "acf"),
    "rule": capacity.RULES,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhrw-scaling", description="Random-walk Metropolis scaling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option values")
        for key in {**COMMON, **opts}:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS)
    return parser


def resolve(command: str, flags: dict) -> dict:
    """Defaults, then the config file, then explicit flags; values are type-converted."""
    spec = {**COMMON, **OPTIONS[command]}
    values = {k: d for k, (_, d) in spec.items()}
    if "config" in flags:
        try:
            with open(flags["config"]) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in spec:
                raise ConfigError(f"unknown config key {k!r} for {command}")
            values[key] = v
    values.update({k: v for k, v in flags.items() if k != "config"})
    out = {}
    for key, (conv, _) in spec.items():
        v = values[key]
        if v is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required for {command}")
        try:
            out[key] = conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for --{key}: {v!r}") from exc
    for key, choices in CHOICES.items():
        k = key[1] if isinstance(key, tuple) else key
        if (not isinstance(key, tuple) or key[0] == command) and k in out and out[k] not in choices:
            raise ConfigError(f"--{k} must be one of {choices}")
    if out["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    return out


def _target(text):
    try:
        return parse_target(text)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def _observable(text):
    try:
        return parse_observable(text)
    except (ValueError, IndexError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(args, rows, summary=None):
    if args["format"] == "json":
        text = to_json({"rows": [asdict(r) if hasattr(r, "__dataclass_fields__") else r for r in rows], **(summary or {})}) + "\n"
    else:
        text = rows_to_csv(rows)
    if args["out"] == "-":
        sys.stdout.write(text)
    else:
        with open(args["out"], "w", newline="") as fh:
            fh.write(text)


def cmd_fisher(a):
    p = _target(a["target"])
    I = fisher_information(p)
    reg = check_regularity(p) if p.holder_k is not None else None
    row = {
        "target": p.name,
        "fisher_info": I,
        "log_norm": p.log_norm if p.log_norm is not None else log_normalizer(p),
        "regularity_checked": reg is not None,
        "holder_ratio": reg.holder_ratio if reg else float("nan"),
        "lipschitz_ratio": reg.lipschitz_ratio if reg else float("nan"),
        "regularity_ok": bool(reg.holder_pass and reg.lipschitz_pass is not False) if reg else True,
    }
    _emit(a, [row])
    return 0 if row["regularity_ok"] else 1


def cmd_clt(a):
    cfg = ChainConfig(a["n"], a["tau"], _target(a["target"]), a["seed"])
    rep = clt.acceptance_clt(cfg, a["reps"], a["threads"])
    acc = clt.mean_acceptance(cfg, a["reps"], a["threads"])
    row = asdict(rep)
    row.update(mean_acceptance=acc.value, mean_acceptance_stderr=acc.stderr, limit_acceptance=clt.c_of_tau(cfg.tau, cfg.target.I))
    _emit(a, [row])
    return 0


def cmd_forms(a):
    if a["mode"] == "chi2":
        rep = forms.chi2_chernoff_check(a["n_ladder"], a["eps"], a["reps"], a["seed"])
        _emit(a, rep.rows, {"info": rep.info})
        return 0 if rep.ok and rep.info["vanishing"] else 1
    if not a["target"]:
        raise ConfigError("--target is required for forms")
    p = _target(a["target"])
    h = _observable(a["h"])
    if a["mode"] == "domination":
        try:
            rep = forms.domination_check(h, a["tau"], p, a["n_ladder"], a["eps"], a["reps"], a["seed"], a["threads"])
        except forms.LipschitzMissingError as exc:
            raise ConfigError(str(exc)) from exc
        _emit(a, rep.rows, {"info": rep.info})
        return 0 if rep.ok else 1
    if min(a["n_ladder"]) < h.N:
        raise ConfigError("observable needs more coordinates than the smallest n")
    tab = forms.mosco_m2_curve(h, a["tau"], p, a["n_ladder"], a["reps"], a["seed"], a["threads"])
    _emit(a, tab.rows, {"observable": tab.observable, "nonmonotone": tab.nonmonotone, "compact_support": tab.compact_support})
    return 0


def cmd_speed(a):
    if a["target"]:
        p = _target(a["target"])
        curve = scaling.empirical_speed_curve(p, a["n"], a["tau_grid"], a["reps"], a["seed"], a["threads"])
        rows = [
            {"tau": r.tau, "esjd": r.esjd, "stderr": r.stderr, "asymptote": r.asymptote, "acc_rate": r.acc_rate}
            for r in curve.rows
        ]
        _emit(a, rows, {"argmax": curve.argmax})
        return 0
    if not a["I"] > 0:
        raise ConfigError("speed needs --I > 0 or --target")
    opt = scaling.optimize_tau(a["I"], a["tol"])
    _emit(a, [asdict(opt)])
    return 0


def cmd_diffusion(a):
    p = _target(a["target"])
    if a["mode"] == "sde":
        cfg = diffusion.SdeConfig(a["tau"], p, a["dt"], a["horizon"])
        rep = diffusion.invariance_check(cfg, a["paths"], a["seed"], start=a["u0"])
        row = {"target": p.name, "tau": a["tau"], "dt": a["dt"], "horizon": a["horizon"], **asdict(rep)}
        _emit(a, [row])
        return 0 if rep.ok else 1
    h = _observable(a["h"])
    if a["mode"] == "semigroup":
        tab = None
        sde = diffusion.SdeConfig(a["tau"], p, a["dt"], max(a["t_grid"]))
        for n in a["n_ladder"]:
            tab = diffusion.semigroup_distance(
                h, a["t_grid"], ChainConfig(n, a["tau"], p, a["seed"]), a["outer"], a["inner"], sde,
                threads=a["threads"], table=tab,
            )
        rows = sorted(tab.rows, key=lambda r: (r.n, r.t))
        _emit(a, rows)
        return 0
    sde = diffusion.SdeConfig(a["tau"], p, a["dt"], max(a["lags"]))
    rows = diffusion.autocorrelation_compare(ChainConfig(a["n"], a["tau"], p, a["seed"]), sde, a["lags"], a["reps"], threads=a["threads"])
    _emit(a, rows)
    return 0


def cmd_capacity(a):
    p = _target(a["target"])
    rows, ok = [], True
    for n in a["n_ladder"]:
        try:
            b = capacity.capacity_bound(p, a["tau"], n, a["L"], a["reps"], a["seed"], a["rule"], a["tail_tol"], a["threads"])
        except capacity.TruncationError as exc:
            raise ConfigError(str(exc)) from exc
        ok &= b.ok
        row = asdict(b)
        row["violations"] = len(b.violations)
        rows.append(row)
    _emit(a, rows)
    return 0 if ok else 1


def cmd_chain(a):
    cfg = ChainConfig(a["n"], a["tau"], _target(a["target"]), a["seed"], a["burn_in"])
    obs = [_observable(s) for s in a["h"].split(";")]
    if any(h.N > cfg.n for h in obs):
        raise ConfigError("observable needs more coordinates than n")
    tr = run_chain(cfg, a["steps"], obs, a["thin"])
    if a["format"] == "json":
        text = tr.summary_json(deterministic=True) + "\n"
        if a["out"] == "-":
            sys.stdout.write(text)
        else:
            with open(a["out"], "w") as fh:
                fh.write(text)
    elif a["out"] == "-":
        sys.stdout.write(tr.to_csv())
    else:
        with open(a["out"], "w", newline="") as fh:
            tr.to_csv(fh)
    return 0


COMMANDS = {
    "fisher": cmd_fisher,
    "clt": cmd_clt,
    "forms": cmd_forms,
    "speed": cmd_speed,
    "diffusion": cmd_diffusion,
    "capacity": cmd_capacity,
    "chain": cmd_chain,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(ns)
    command = flags.pop("command")
    try:
        args = resolve(command, flags)
        return COMMANDS[command](args)
    except (ConfigError, ValueError) as exc:
        print(f"mhrw-scaling {command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
