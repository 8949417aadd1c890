"""Command-line entry point: ``qbsg {simulate,bounds,classical,threshold,selftest}``.

Every command writes a JSON report (sorted keys, schema version, full
parameter echo) into ``--out``; sweeps additionally write CSV tables.
Exit codes: 0 success, 1 self-test failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import yaml

from . import bounds, classical, harness, qcore, strategies
from .protocol import PROTOCOL1, PROTOCOL2, VARIANTS, ProtocolParams

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2

_ANGLE = {
    "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi / 2 + 1e-12},
    "sin2_theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
}

SCHEMAS = {
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n", "alice", "bob"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "n": {"type": "integer", "minimum": 1},
            **_ANGLE,
            "f_star": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "variant": {"enum": list(VARIANTS)},
            "channel_fidelity": {"type": "number", "minimum": 0.5, "maximum": 1},
            "alice": {"enum": list(strategies.ALICE_NAMES)},
            "bob": {"enum": list(strategies.BOB_NAMES)},
            "target": {"type": "string", "pattern": "^[01]+$"},
            "trials": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "path": {"enum": ["auto", "kernel", "reference"]},
            "martingale_l": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
    "bounds": {
        "type": "object",
        "additionalProperties": False,
        "required": ["regime", "n"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "regime": {"enum": ["noiseless", "noisy"]},
            "n": {"oneOf": [{"type": "integer", "minimum": 3},
                            {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 3}}]},
            **_ANGLE,
            "f_star": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "l": {"type": "number", "exclusiveMinimum": 0},
            "channel_fidelity": {"type": "number", "minimum": 0.5, "maximum": 1},
        },
    },
    "classical": {
        "type": "object",
        "additionalProperties": False,
        "required": ["protocol", "n"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "protocol": {"enum": ["trivial", "strikeout"]},
            "n": {"type": "integer", "minimum": 1},
            "method": {"enum": ["exhaustive", "greedy_local"]},
        },
    },
    "threshold": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "n": {"oneOf": [{"type": "integer", "minimum": 3},
                            {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 3}}]},
            **_ANGLE,
            "l": {"type": "number", "exclusiveMinimum": 0},
            "delta_target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
    },
}


class ConfigError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def _validate(command: str, cfg: dict) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config failed schema validation:\n" + "\n".join(lines))
    if "theta" in cfg and "sin2_theta" in cfg:
        raise ConfigError("give either theta or sin2_theta, not both")
    return cfg


def _theta(cfg: dict, default: float | None = None) -> float:
    if "theta" in cfg:
        return float(cfg["theta"])
    if "sin2_theta" in cfg:
        return bounds.theta_from_sin2(float(cfg["sin2_theta"]))
    if default is None:
        raise ConfigError("theta or sin2_theta is required")
    return default


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats, which JSON cannot carry, by strings."""
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps_report(doc: dict) -> str:
    return json.dumps(_clean(json.loads(json.dumps(doc, default=_json_default))),
                      sort_keys=True, indent=2) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _base(command: str, cfg: dict, seed: int | None = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "params": dict(sorted(cfg.items()))}
    if seed is not None:
        doc["seed"] = seed
    return doc


# -- commands --------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path, seed: int | None, trials: int | None) -> dict:
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    if trials is not None:
        cfg["trials"] = trials
    cfg = _validate("simulate", cfg)
    n = cfg["n"]
    theta = _theta(cfg, math.pi / 4)
    f_star = cfg.get("f_star", 1.0)
    target = cfg.get("target", "0")
    if len(target) not in (1, n):
        raise ConfigError(f"target must be one bit or {n} bits")
    f0 = cfg.get("channel_fidelity", 1.0)
    alice_name, bob_name = cfg["alice"], cfg["bob"]
    variant = cfg.get("variant", PROTOCOL1 if alice_name == "honest" else PROTOCOL2)
    if alice_name != "honest" and bob_name != "honest":
        raise ConfigError("at most one party may cheat")
    params = ProtocolParams(n, theta, f_star, variant, qcore.depolarizing_from_fidelity(f0))
    alice = strategies.make_alice(alice_name, theta, n, f_star, target)
    bob = strategies.make_bob(bob_name, theta, n, target)
    master = cfg.get("seed", 0)
    batch = harness.TrialBatch(params, alice, bob, cfg.get("trials", 10_000), master, target,
                               cfg.get("path", "auto"))
    try:
        outcomes = harness.run_trials(batch)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    stats = harness.summarize(batch, outcomes)
    doc = _base("simulate", cfg, master)
    doc["stats"] = stats.to_dict()
    analytic = {
        "bob_bias_bound": bounds.bob_bias_bound(theta),
        "bob_entropy_bound": bounds.bob_entropy_bound(n, theta),
        "helstrom_success": strategies.helstrom_success(theta),
    }
    if n >= 3:
        analytic["alice_bias_bound"] = bounds.alice_bias_bound(n, theta, f_star)
        analytic["alice_entropy_bound"] = bounds.alice_entropy_bound(n, theta, f_star)
    if f0 >= f_star:
        analytic["correctness_delta"] = bounds.correctness_delta(n, f0, f_star)
    doc["bounds"] = analytic
    if "martingale_l" in cfg:
        if variant != PROTOCOL2 or bob_name != "honest":
            raise ConfigError("martingale checks need Protocol2 with an honest Bob")
        checks = harness.martingale_tail_check(batch, cfg["martingale_l"], outcomes=outcomes)
        doc["stats"]["martingale"] = [c.to_dict() for c in checks]
    atomic_write(out / "simulate_report.json", dumps_report(doc))
    return doc


def _bounds_row(cfg: dict, n: int) -> dict:
    if cfg["regime"] == "noiseless":
        rep = bounds.noiseless_report(n, cfg.get("l"))
    else:
        theta = _theta(cfg)
        f_star = cfg.get("f_star")
        if f_star is None:
            raise ConfigError("noisy regime requires f_star")
        rep = bounds.noisy_report(n, theta, f_star, cfg.get("channel_fidelity"), cfg.get("l"))
    return rep.to_dict()


def cmd_bounds(cfg: dict, out: Path) -> dict:
    cfg = _validate("bounds", dict(cfg))
    ns = cfg["n"] if isinstance(cfg["n"], list) else [cfg["n"]]
    rows = [_bounds_row(cfg, n) for n in ns]
    doc = _base("bounds", cfg)
    doc["reports"] = rows
    if len(rows) > 1:
        keys = sorted(k for k in rows[0] if not isinstance(rows[0][k], (dict, list)))
        atomic_write(out / "bounds_sweep.csv", _csv_text(keys, [[r[k] for k in keys] for r in rows]))
    atomic_write(out / "bounds_report.json", dumps_report(doc))
    return doc


def cmd_classical(cfg: dict, out: Path) -> dict:
    cfg = _validate("classical", dict(cfg))
    n = cfg["n"]
    method = cfg.get("method", "greedy_local")
    try:
        tree = classical.build_trivial(n) if cfg["protocol"] == "trivial" else classical.build_strikeout(n)
        rep = classical.cheat_report(tree, method)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    doc = _base("classical", cfg)
    doc["report"] = rep.to_dict()
    doc["report"]["move_order"] = "Alice first, strict alternation"
    doc["report"]["tie_break"] = "earliest message (lexicographic for strike-out)"
    doc["strategy_tables"] = {k: [list(r) for r in v] for k, v in rep.strategy_tables.items()}
    for who, rows in rep.strategy_tables.items():
        atomic_write(out / f"classical_strategy_{who}.csv",
                     _csv_text(("state", "history", "move"), rows))
    atomic_write(out / "classical_report.json", dumps_report(doc))
    return doc


def cmd_threshold(cfg: dict, out: Path) -> dict:
    cfg = _validate("threshold", dict(cfg))
    theta = _theta(cfg)
    ns = cfg["n"] if isinstance(cfg["n"], list) else [cfg["n"]]
    delta = cfg.get("delta_target", 0.01)
    rows = []
    for n in ns:
        r = bounds.quantum_vs_classical_threshold(theta, n, cfg.get("l"))
        rows.append({
            "n": n, "theta": theta, "l": r.l,
            "f_star": r.f_star if r.attainable else "UNATTAINABLE",
            "closed_form_f_star": r.closed_form_f_star,
            "asymptotic_f_star": r.asymptotic_f_star,
            "required_channel_fidelity": r.required_channel_fidelity(delta) if r.attainable else None,
            "delta_target": delta,
        })
    doc = _base("threshold", cfg)
    doc["rows"] = rows
    header = ("n", "theta", "l", "f_star", "closed_form_f_star", "asymptotic_f_star",
              "required_channel_fidelity", "delta_target")
    atomic_write(out / "threshold.csv", _csv_text(header, [["" if r[h] is None else r[h] for h in header]
                                                           for r in rows]))
    atomic_write(out / "threshold_report.json", dumps_report(doc))
    return doc


def cmd_selftest(out: Path, seed: int, trials: int | None) -> tuple[dict, bool]:
    """Quick reduced-size acceptance checks."""
    trials = trials or 20_000
    checks = []

    def record(name, ok, detail):
        checks.append({"check": name, "passed": bool(ok), "detail": detail})

    theta = math.pi / 4
    ch = qcore.depolarizing_from_fidelity(0.99)
    batch = harness.TrialBatch(ProtocolParams(1000, theta, 0.9, channel=ch), strategies.honest_alice(theta),
                               strategies.honest_bob(theta), trials, seed)
    o = harness.run_trials(batch)
    st = harness.summarize(batch, o)
    delta = bounds.correctness_delta(1000, 0.99, 0.9)
    sig = math.sqrt(delta * (1 - delta) / trials)
    record("abort_rate", st.abort_rate <= delta + 3 * sig, {"abort_rate": st.abort_rate, "bound": delta})
    chi = harness.chi_square_uniformity(o.leading_bits(4), 4)
    record("uniform_output", chi.passed, {"p_value": chi.p_value})
    for th in (math.pi / 6, math.pi / 4, math.pi / 3):
        b = harness.TrialBatch(ProtocolParams(100, th), strategies.honest_alice(th),
                               strategies.helstrom_bob(th, "0", 100), max(trials // 100, 10), seed)
        s = harness.monte_carlo(b)
        p = strategies.helstrom_success(th)
        se = math.sqrt(p * (1 - p) / (b.trials * 100))
        record(f"helstrom_{th:.4f}", abs(s.mean_match - p) <= 3 * se, {"success": s.mean_match, "expected": p})
    bad = sum(not strategies.analyze_single_round(strategies.random_single_round_strategy(k), theta).within_cap
              for k in range(200))
    record("bias_cap", bad == 0, {"violations": bad})
    tr = classical.cheat_report(classical.build_strikeout(4))
    record("strikeout_4", abs(tr.H_A - 2.39) <= 0.02 and abs(tr.H_B - 2.78) <= 0.02,
           {"H_A": tr.H_A, "H_B": tr.H_B})
    thr = bounds.quantum_vs_classical_threshold(bounds.theta_from_sin2(0.5), 10**8)
    record("threshold", thr.attainable and abs(thr.f_star - thr.closed_form_f_star) <= 1e-4,
           {"f_star": thr.f_star, "closed_form": thr.closed_form_f_star})
    ok = all(c["passed"] for c in checks)
    doc = {"schema_version": SCHEMA_VERSION, "command": "selftest", "seed": seed, "trials": trials,
           "checks": checks, "passed": ok}
    atomic_write(out / "selftest_report.json", dumps_report(doc))
    return doc, ok


# -- argument parsing --------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON configuration file")
    common.add_argument("--out", default="qbsg-out", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--trials", type=int, help="trial count override")

    p = argparse.ArgumentParser(prog="qbsg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo runs with analytic bounds")
    s.add_argument("--n", type=int)
    s.add_argument("--theta", type=float)
    s.add_argument("--sin2-theta", dest="sin2_theta", type=float)
    s.add_argument("--f-star", dest="f_star", type=float)
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--channel-fidelity", dest="channel_fidelity", type=float)
    s.add_argument("--alice", choices=strategies.ALICE_NAMES)
    s.add_argument("--bob", choices=strategies.BOB_NAMES)
    s.add_argument("--target")
    s.add_argument("--path", choices=("auto", "kernel", "reference"))

    b = sub.add_parser("bounds", parents=[common], help="evaluate the security bounds")
    b.add_argument("--regime", choices=("noiseless", "noisy"))
    b.add_argument("--n", type=_int_list, help="one n or a comma-separated sweep")
    b.add_argument("--theta", type=float)
    b.add_argument("--sin2-theta", dest="sin2_theta", type=float)
    b.add_argument("--f-star", dest="f_star", type=float)
    b.add_argument("--l", type=float)
    b.add_argument("--channel-fidelity", dest="channel_fidelity", type=float)

    c = sub.add_parser("classical", parents=[common], help="optimal cheating in classical protocols")
    c.add_argument("--protocol", choices=("trivial", "strikeout"))
    c.add_argument("--n", type=int)
    c.add_argument("--method", choices=("exhaustive", "greedy_local"))

    t = sub.add_parser("threshold", parents=[common], help="minimal f* beating every classical protocol")
    t.add_argument("--n", type=_int_list)
    t.add_argument("--theta", type=float)
    t.add_argument("--sin2-theta", dest="sin2_theta", type=float)
    t.add_argument("--l", type=float)
    t.add_argument("--delta-target", dest="delta_target", type=float)

    sub.add_parser("selftest", parents=[common], help="reduced acceptance checks")
    return p


_SKIP = {"command", "config", "out", "seed", "trials"}


def _merged(args) -> dict:
    cfg = _load_config(args.config)
    for k, v in vars(args).items():
        if k in _SKIP or v is None:
            continue
        if k == "n" and isinstance(v, list) and len(v) == 1:
            v = v[0]
        cfg[k] = v
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "selftest":
            doc, ok = cmd_selftest(out, args.seed if args.seed is not None else 20240601, args.trials)
            for c in doc["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['check']}")
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        cfg = _merged(args)
        if args.command == "simulate":
            doc = cmd_simulate(cfg, out, args.seed, args.trials)
        elif args.command == "bounds":
            doc = cmd_bounds(cfg, out)
        elif args.command == "classical":
            doc = cmd_classical(cfg, out)
        else:
            doc = cmd_threshold(cfg, out)
    except (ConfigError, ValueError) as e:
        print(f"qbsg: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {args.command} report to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
