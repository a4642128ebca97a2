"""Command-line front end: ``simulate``, ``verify-rates`` and ``sweep``.

Exit codes: 0 success, 1 strict-mode statistical failure (or an instance no
rate family matches), 2 configuration error, 3 oracle mismatch at f=0.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Iterable

from . import rates
from .core import AssignmentMode, ConfigError, MixConfig, validate_config
from .montecarlo import compare_to_theory, default_workers, run_experiment
from .oracle import exact_rate
from .rates import RatePrediction

EXIT_OK, EXIT_STAT, EXIT_CONFIG, EXIT_ORACLE = 0, 1, 2, 3

CONFIG_KEYS = {"n", "k", "s", "f", "assignment", "rounds", "trials", "seed"}
# config-file key -> argparse dest
_FILE_TO_DEST = {"n": "n", "k": "k", "s": "honest", "f": "fake", "assignment": "assignment",
                 "rounds": "rounds", "trials": "trials", "seed": "seed"}

SIMULATE_HEADER = ("round", "mean_phi", "stderr", "predicted_phi", "z_score")
VERIFY_HEADER = ("name", "n", "k", "s", "f", "value_exact", "value_float", "oracle_value", "verified")
SWEEP_HEADER = ("n", "k", "m", "s", "f", "b", "rate", "rounds_for_target", "markov_rounds")

RATE_FAMILIES = (
    "rate_uniform",
    "rate_corrupt_servers",
    "rate_fake_paper",
    "rate_fake_derived",
    "rate_combined_paper",
    "rate_combined_derived",
)


class UsageError(ConfigError):
    pass


# --- formatting ---------------------------------------------------------

def fmt_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def to_json(obj, indent: int = 2, level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become ``null``.
    """
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{pad}{json.dumps(str(k))}: {to_json(v, indent, level + 1)}" for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = (pad + to_json(v, indent, level + 1) for v in obj)
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, Fraction):
        return json.dumps(fmt_number(obj))
    return json.dumps(obj)


def to_csv(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_number(v) for v in row])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- config files and grids ---------------------------------------------

def read_config_file(path: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _merge_config(args: argparse.Namespace) -> None:
    if not args.config:
        return
    for key, value in read_config_file(args.config).items():
        dest = _FILE_TO_DEST[key]
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _int(name: str, value) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise UsageError(f"--{name} expects an integer, got {value!r}") from None


def parse_int_list(name: str, text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    return [_int(name, tok) for tok in text.split(",")]


def _k_values(spec: str, n: int) -> list[int]:
    out = []
    for tok in (t.strip() for t in spec.split(",") if t.strip()):
        if tok == "half":
            k = n // 2
        elif tok == "n":
            k = n
        else:
            k = _int("k", tok)
        if k not in out:
            out.append(k)
    return out


def _honest_values(spec: str, m: int) -> list[int]:
    out: list[int] = []
    for tok in (t.strip() for t in spec.split(",") if t.strip()):
        if tok == "M":
            vals = [m]
        elif tok == "1..M":
            vals = list(range(1, m + 1))
        else:
            vals = [_int("honest", tok)]
        out.extend(v for v in vals if v not in out)
    return out


def expand_grid(n_spec: str, k_spec: str, honest_spec: str, fake_spec: str) -> list[MixConfig]:
    """Cartesian grid of validated configs; any invalid point is a usage error."""
    configs = []
    fakes = parse_int_list("fake", fake_spec)
    for n in parse_int_list("n", n_spec):
        for k in _k_values(k_spec, n):
            if k < 2 or k > n or n % k:
                raise UsageError(f"grid point n={n}, k={k}: k must divide n and satisfy 2 <= k <= n")
            for s in _honest_values(honest_spec, n // k):
                for f in fakes:
                    configs.append(validate_config(n, k, s, f))
    return configs


# --- simulate -----------------------------------------------------------

def prediction_for(config: MixConfig) -> tuple[str, Fraction]:
    n, k, s, f = config.n, config.k, config.s, config.f
    if config.assignment_mode is AssignmentMode.BINOMIAL:
        return "rate_binomial_derived", rates.rate_binomial_derived(n, k, s, f)
    if f == 0 and s == config.m:
        return "rate_uniform", rates.rate_uniform(n, k)
    if f == 0:
        return "rate_corrupt_servers", rates.rate_corrupt_servers(n, k, s)
    return "rate_combined_derived", rates.rate_combined_derived(n, k, s, f)


def cmd_simulate(args: argparse.Namespace) -> int:
    _merge_config(args)
    if args.n is None or args.k is None:
        raise UsageError("simulate needs --n and --k (on the command line or in --config)")
    config = validate_config(
        _int("n", args.n),
        _int("k", args.k),
        None if args.honest is None else _int("honest", args.honest),
        0 if args.fake is None else _int("fake", args.fake),
        args.assignment or "exact",
    )
    rounds = _int("rounds", 10 if args.rounds is None else args.rounds)
    trials = _int("trials", 1000 if args.trials is None else args.trials)
    seed = _int("seed", 0 if args.seed is None else args.seed)
    if rounds < 0:
        raise UsageError("--rounds must be non-negative")
    if trials < 2:
        raise UsageError("--trials must be at least 2")
    if seed < 0:
        raise UsageError("--seed must be non-negative")
    workers = default_workers() if args.workers is None else _int("workers", args.workers)

    family, rate = prediction_for(config)
    phi0 = Fraction(config.unmarked - 1, config.unmarked)
    result = run_experiment(config, rounds, trials, seed, workers=workers)
    comparison = compare_to_theory(result, RatePrediction(rate, phi0))

    if args.format == "json":
        doc = {
            "config": {**config.as_dict(), "rounds": rounds, "trials": trials, "seed": seed},
            "rows": [
                {
                    "round": stats.round,
                    "mean_phi": stats.mean_phi,
                    "sample_std": stats.sample_std,
                    "stderr": stats.stderr,
                    "trials": stats.trials,
                    "predicted_phi": row.predicted,
                    "z_score": row.z_score,
                    "within_3_sigma": row.within_3_sigma,
                    "checked": row.checked,
                }
                for stats, row in zip(result.rows, comparison.rows)
            ],
            "verdict": {
                "rate_family": family,
                "rate_exact": rate,
                "rate": float(rate),
                "phi0": float(phi0),
                "passed": comparison.passed,
            },
        }
        text = to_json(doc) + "\n"
    else:
        text = to_csv(
            SIMULATE_HEADER,
            ((s.round, s.mean_phi, s.stderr, r.predicted, r.z_score) for s, r in zip(result.rows, comparison.rows)),
        )
    emit(text, args.out)
    if args.strict and not comparison.passed:
        print("simulate: empirical curve departs from the predicted rate by more than 3 standard errors",
              file=sys.stderr)
        return EXIT_STAT
    return EXIT_OK


# --- verify-rates -------------------------------------------------------

def family_values(config: MixConfig) -> dict[str, Fraction]:
    n, k, s, f = config.n, config.k, config.s, config.f
    return {
        "rate_uniform": rates.rate_uniform(n, k),
        "rate_corrupt_servers": rates.rate_corrupt_servers(n, k, s),
        "rate_fake_paper": rates.rate_fake_paper(n, k, f),
        "rate_fake_derived": rates.rate_fake_derived(n, k, f),
        "rate_combined_paper": rates.rate_combined_paper(n, k, s, f),
        "rate_combined_derived": rates.rate_combined_derived(n, k, s, f),
    }


def applicable_families(config: MixConfig) -> tuple[str, ...]:
    """Families whose model assumptions cover this instance."""
    full = config.s == config.m
    names = []
    if full and config.f == 0:
        names.append("rate_uniform")
    if config.f == 0:
        names.append("rate_corrupt_servers")
    if full:
        names += ["rate_fake_paper", "rate_fake_derived"]
    names += ["rate_combined_paper", "rate_combined_derived"]
    return tuple(names)


def verify_grid(configs: Iterable[MixConfig]) -> tuple[list[dict], dict]:
    rows = []
    unmatched = []
    f0_failures = []
    for config in configs:
        oracle = exact_rate(config).rate
        values = family_values(config)
        applicable = applicable_families(config)
        for name in RATE_FAMILIES:
            value = values[name]
            rows.append({
                "name": name,
                "n": config.n,
                "k": config.k,
                "s": config.s,
                "f": config.f,
                "value_exact": value,
                "value_float": float(value),
                "oracle_value": oracle,
                "verified": value == oracle,
                "applicable": name in applicable,
            })
        instance = (config.n, config.k, config.s, config.f)
        if not any(values[name] == oracle for name in applicable):
            unmatched.append(instance)
        if config.f == 0 and any(values[name] != oracle for name in applicable):
            f0_failures.append(instance)
    verdict = {
        "instances": len(rows) // len(RATE_FAMILIES),
        "unmatched": [list(i) for i in unmatched],
        "f0_failures": [list(i) for i in f0_failures],
    }
    return rows, verdict


def cmd_verify_rates(args: argparse.Namespace) -> int:
    configs = expand_grid(args.n, args.k, args.honest, args.fake)
    rows, verdict = verify_grid(configs)
    if verdict["f0_failures"]:
        code = EXIT_ORACLE
    elif verdict["unmatched"]:
        code = EXIT_STAT
    else:
        code = EXIT_OK
    verdict["exit_code"] = code
    if args.format == "json":
        doc = {
            "config": {"n": args.n, "k": args.k, "honest": args.honest, "fake": args.fake},
            "rows": rows,
            "verdict": verdict,
        }
        text = to_json(doc) + "\n"
    else:
        text = to_csv(VERIFY_HEADER, ([row[h] for h in VERIFY_HEADER] for row in rows))
    emit(text, args.out)
    for instance in verdict["f0_failures"]:
        print(f"verify-rates: oracle disagrees with the closed forms at f=0 for (n,k,s,f)={tuple(instance)}",
              file=sys.stderr)
    for instance in verdict["unmatched"]:
        print(f"verify-rates: no rate family matches the oracle for (n,k,s,f)={tuple(instance)}", file=sys.stderr)
    return code


# --- sweep --------------------------------------------------------------

def _rate_for(config: MixConfig, family: str) -> Fraction:
    n, k, s, f = config.n, config.k, config.s, config.f
    if family == "paper":
        return rates.rate_combined_paper(n, k, s, f)
    return rates.rate_combined_derived(n, k, s, f)


def sweep_rows(configs: Iterable[MixConfig], bs: list[int], family: str = "derived") -> list[dict]:
    rows = []
    for config in configs:
        rate = _rate_for(config, family)
        for b in bs:
            if rate > 0:
                target = rates.rounds_for_target(rate, config.n, b)
                markov = rates.markov_rounds(rate, config.n, b)
            else:
                target = markov = None
            rows.append({
                "n": config.n, "k": config.k, "m": config.m, "s": config.s, "f": config.f, "b": b,
                "rate": float(rate), "rounds_for_target": target, "markov_rounds": markov,
            })
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    configs = expand_grid(args.n, args.k, args.honest, args.fake)
    bs = parse_int_list("b", args.b)
    if any(b < 1 for b in bs):
        raise UsageError("--b values must be at least 1")
    rows = sweep_rows(configs, bs, args.rate_family)
    if args.format == "json":
        doc = {
            "config": {"n": args.n, "k": args.k, "honest": args.honest, "fake": args.fake, "b": args.b,
                       "rate_family": args.rate_family},
            "rows": rows,
            "verdict": {"points": len(rows)},
        }
        text = to_json(doc) + "\n"
    else:
        text = to_csv(SWEEP_HEADER, ([row[h] for h in SWEEP_HEADER] for row in rows))
    emit(text, args.out)
    return EXIT_OK


# --- entry point --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bufshuf", description="Buffer-shuffling anonymity simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", metavar="PATH", help="write here instead of stdout")

    sim = sub.add_parser("simulate", help="Monte Carlo estimate of E[Phi(t)] against the predicted curve")
    sim.add_argument("--config", metavar="PATH", help="flat key=value file; flags override it")
    sim.add_argument("--n")
    sim.add_argument("--k")
    sim.add_argument("--honest", help="honest server count (default: all)")
    sim.add_argument("--fake", help="marked card count (default: 0)")
    sim.add_argument("--rounds")
    sim.add_argument("--trials")
    sim.add_argument("--seed")
    sim.add_argument("--assignment", choices=("exact", "binomial"))
    sim.add_argument("--workers", help="worker processes (default: $BUFSHUF_WORKERS or 1)")
    sim.add_argument("--strict", action="store_true", help="exit 1 if the comparison fails")
    output_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify-rates", help="check every closed-form rate against the enumeration oracle")
    ver.add_argument("--n", default="4,6,8", help="comma list")
    ver.add_argument("--k", default="2,half", help="comma list; 'half' is n/2, 'n' is n")
    ver.add_argument("--honest", default="1..M", help="comma list; 'M' is all servers, '1..M' every count")
    ver.add_argument("--fake", default="0,1,2", help="comma list")
    output_flags(ver)
    ver.set_defaults(func=cmd_verify_rates)

    sw = sub.add_parser("sweep", help="tabulate round counts over a parameter grid")
    sw.add_argument("--n", default="256")
    sw.add_argument("--k", default="16")
    sw.add_argument("--honest", default="M")
    sw.add_argument("--fake", default="0")
    sw.add_argument("--b", default="1")
    sw.add_argument("--rate-family", choices=("derived", "paper"), default="derived")
    output_flags(sw)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bufshuf {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
