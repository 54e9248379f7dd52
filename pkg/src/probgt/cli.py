"""Command-line entry point: ``probgt <subcommand> [flags]``.

Subcommands: ``params``, ``grouptest``, ``analysis``, ``pipeline``, ``sweep``.
Every subcommand accepts ``--config FILE`` (a JSON object keyed by flag
name, with dashes or underscores); flags given on the command line win.
The effective configuration is echoed to stderr as canonical JSON
before anything runs, so a run can be replayed from that line alone.

Exit codes: 0 on success, 1 when an invariant is violated or an
``--assert`` threshold is missed, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

from . import __version__, analysis
from .field import DEFAULT_PRIME, MAX_PRIME, is_prime
from .gt_core import DEFAULT_SEED, ETA, THETA, ExperimentParams, select_parameters
from .harness import (
    COVERAGE_COLUMNS,
    SWEEP_AXES,
    SWEEP_COLUMNS,
    THEORY_COLUMNS,
    SweepSpec,
    run_grouptest_sweep,
    run_grouptest_trials,
    run_coverage_check,
    run_pipeline_trials,
    run_theory_comparison,
    wilson_interval,
    write_csv,
)
from .records import GROUPTEST_COLUMNS, PIPELINE_COLUMNS

DEFAULTS = {
    "n": None, "L": None, "alpha": None, "beta": 1.0, "theta": THETA, "eta": ETA,
    "lambda": None, "m": None, "Z": None, "T": None, "field_prime": DEFAULT_PRIME,
    "seed": DEFAULT_SEED, "csv": "-", "assert": False, "workers": 1,
}
SUBCOMMAND_DEFAULTS = {
    "params": {},
    "grouptest": {"trials": 100},
    "analysis": {"check_bounds": False, "compare_trials": 0, "coverage_trials": 0},
    "pipeline": {"trials": 10, "r": None, "c": 8, "dump_shares": None},
    "sweep": {"trials": 100, "axis": None, "values": None},
}
REQUIRED = ("n", "L", "alpha")


class UsageError(Exception):
    pass


def _add_param_flags(p: argparse.ArgumentParser, coding: bool = False) -> None:
    g = p.add_argument_group("parameters")
    g.add_argument("--n", type=int, help="number of workers")
    g.add_argument("--L", type=int, help="number of unreliable workers")
    g.add_argument("--alpha", type=float, help="per-slot attack probability")
    g.add_argument("--beta", type=float, help="target error exponent (default 1)")
    g.add_argument("--theta", type=float, help=f"test density design parameter (default {THETA})")
    g.add_argument("--eta", type=float, help=f"threshold margin (default {ETA})")
    g.add_argument("--lambda", dest="lambda", type=float, help="slot multiplier override")
    g.add_argument("--m", type=int, help="tests per slot (overrides the derived value)")
    g.add_argument("--Z", type=int, help="tested slots (overrides the derived value)")
    if coding:
        g.add_argument("--field-prime", dest="field_prime", type=int,
                       help=f"prime modulus of the field (default {DEFAULT_PRIME})")
        g.add_argument("--T", type=int, help="total time slots (default 2*Z)")


def _add_common(p: argparse.ArgumentParser, trials: bool = True) -> None:
    p.add_argument("--config", help="JSON file with flag values; command-line flags override it")
    p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--csv", help="output CSV path, '-' for stdout (default '-')")
    p.add_argument("--assert", dest="assert", action="store_const", const=True, default=None,
                   help="exit 1 unless the acceptance thresholds are met")
    if trials:
        p.add_argument("--trials", type=int, help="number of independent trials")
        p.add_argument("--workers", type=int, help="worker processes for trials (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probgt",
        description="Group testing for attacked workers in coded distributed matrix-vector products.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("params", help="print the design parameters for (n, L, alpha, beta)")
    _add_param_flags(p)
    _add_common(p, trials=False)

    p = sub.add_parser("grouptest", help="repeated pure group-testing trials")
    _add_param_flags(p)
    _add_common(p)

    p = sub.add_parser("analysis", help="closed-form score statistics and bound checks")
    _add_param_flags(p)
    _add_common(p, trials=False)
    p.add_argument("--check-bounds", dest="check_bounds", action="store_const", const=True,
                   default=None, help="run the h_L bound grid; exit 1 on any violation")
    p.add_argument("--compare-trials", dest="compare_trials", type=int,
                   help="also simulate this many trials and compare with the closed forms")
    p.add_argument("--coverage-trials", dest="coverage_trials", type=int,
                   help="also measure reconstruction-criterion coverage over this many trials")

    p = sub.add_parser("pipeline", help="end-to-end coded computation with identification and decoding")
    _add_param_flags(p, coding=True)
    _add_common(p)
    p.add_argument("--r", type=int, help="rows of the data matrix (default 2k)")
    p.add_argument("--c", type=int, help="columns of the data matrix (default 8)")
    p.add_argument("--dump-shares", dest="dump_shares",
                   help="directory for parity, generator and share matrices (one subdirectory per trial)")

    p = sub.add_parser("sweep", help="error rate with Wilson intervals along one parameter axis")
    _add_param_flags(p)
    _add_common(p)
    p.add_argument("--axis", choices=SWEEP_AXES, help="parameter to vary")
    p.add_argument("--values", help="comma-separated sweep points")
    return parser


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def effective_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    sub = args.subcommand
    config = dict(DEFAULTS)
    config.update(SUBCOMMAND_DEFAULTS[sub])
    given = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config") and v is not None}
    if args.config:
        from_file = _load_config(args.config)
        # an echoed config can be fed back verbatim
        if from_file.pop("subcommand", sub) != sub:
            raise UsageError("config file was written for a different subcommand")
        unknown = set(from_file) - set(config) - set(given)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config.update(from_file)
    config.update(given)
    if sub in ("params", "analysis"):
        for key in ("trials", "workers"):
            config.pop(key, None)
    if sub not in ("pipeline",):
        for key in ("field_prime", "T"):
            config.pop(key, None)
    config["subcommand"] = sub
    return config


def echo_config(config: dict, stream=None) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    print(text, file=stream or sys.stderr)
    return text


def params_from_config(config: dict) -> ExperimentParams:
    missing = [k for k in REQUIRED if config.get(k) is None]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join('--' + k for k in missing)}")
    n, L, alpha = int(config["n"]), int(config["L"]), float(config["alpha"])
    beta, theta, eta = float(config["beta"]), float(config["theta"]), float(config["eta"])
    if n < 2:
        raise UsageError("--n must be >= 2")
    if not 1 <= L < n:
        raise UsageError("--L must satisfy 1 <= L < n")
    if not 0.0 < alpha <= 1.0:
        raise UsageError("--alpha must lie in (0, 1]")
    if not 0.0 < theta <= 1.0:
        raise UsageError("--theta must lie in (0, 1]")
    if beta <= 0:
        raise UsageError("--beta must be > 0")
    if eta <= 0:
        raise UsageError("--eta must be > 0")
    prime = int(config.get("field_prime") or DEFAULT_PRIME)
    if not (3 <= prime < MAX_PRIME and is_prime(prime)):
        raise UsageError(f"--field-prime must be a prime in [3, 2**62), got {prime}")
    seed = int(config["seed"])
    if not 0 <= seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    lam = config.get("lambda")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = select_parameters(n, L, alpha, beta=beta, theta=theta, eta=eta,
                                 lambda_override=lam, prime=prime, seed=seed)
    changes = {}
    for key in ("m", "Z"):
        if config.get(key) is not None:
            if int(config[key]) < 1:
                raise UsageError(f"--{key} must be >= 1")
            changes[key] = int(config[key])
    if config.get("T") is not None:
        changes["T"] = int(config["T"])
    if changes:
        try:
            base = base.with_updates(**changes)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return base


def _count(config: dict, key: str) -> int:
    value = int(config[key])
    if value < 1:
        raise UsageError(f"--{key} must be >= 1")
    return value


def _allowed_failures(params: ExperimentParams, trials: int) -> int:
    """Failures tolerated under ``--assert``: the expected count at rate ``n**-beta``, rounded up."""
    return math.ceil(trials * params.n ** (-params.beta) - 1e-12)


def cmd_params(config: dict) -> int:
    params = params_from_config(config)
    rows = [{"quantity": k, "value": v} for k, v in params.as_dict().items()]
    rows.append({"quantity": "test_bound", "value": params.test_bound})
    write_csv(config["csv"], rows, ("quantity", "value"))
    if config["assert"]:
        from .gt_core import unrounded_tests
        return 0 if unrounded_tests(params) <= params.test_bound * (1 + 1e-12) else 1
    return 0


def cmd_grouptest(config: dict) -> int:
    params = params_from_config(config)
    trials = _count(config, "trials")
    records = run_grouptest_trials(params, trials, params.seed, _count(config, "workers"))
    write_csv(config["csv"], records, GROUPTEST_COLUMNS)
    errors = sum(not rec.exact_recovery for rec in records)
    lo, hi = wilson_interval(errors, trials)
    print(f"non-exact recoveries: {errors}/{trials} (95% Wilson CI {lo:.4g}..{hi:.4g})", file=sys.stderr)
    if config["assert"] and errors > _allowed_failures(params, trials):
        return 1
    return 0


def cmd_analysis(config: dict) -> int:
    if config["check_bounds"]:
        rows = []
        bad = 0
        for L, theta, alpha, q, m, rep in analysis.bound_grid():
            bad += not rep.ok
            rows.append({"L": L, "theta": theta, "alpha": alpha, "q": q, "m": m,
                         "lower_ok": rep.lower_ok, "upper_ok": rep.upper_ok, "diff_ok": rep.diff_ok,
                         "lower_slack": rep.lower_slack, "upper_slack": rep.upper_slack,
                         "diff_slack": rep.diff_slack})
        write_csv(config["csv"], rows, tuple(rows[0]))
        print(f"bound violations: {bad}/{len(rows)}", file=sys.stderr)
        return 1 if bad else 0

    params = params_from_config(config)
    probs = analysis.slot_score_probabilities(params)
    mu_f, mu_m = analysis.expected_scores(params)
    rows = [
        {"quantity": "h_L", "value": analysis.h(params.L, params.q, params.m, params.alpha)},
        {"quantity": "h_L_minus_1", "value": analysis.h(params.L - 1, params.q, params.m, params.alpha)},
        {"quantity": "empty_column_probability", "value": probs["p_eps"]},
        {"quantity": "p_one_reliable", "value": probs["p_one_reliable"]},
        {"quantity": "p_one_unreliable", "value": probs["p_one_unreliable"]},
        {"quantity": "mu_f", "value": mu_f},
        {"quantity": "mu_m", "value": mu_m},
        {"quantity": "d", "value": params.d},
    ]
    status = 0
    if config["assert"] and not mu_m > mu_f:
        status = 1
    tables = [(rows, ("quantity", "value"))]
    if config["compare_trials"]:
        trials = int(config["compare_trials"])
        if trials < 100:
            raise UsageError("--compare-trials must be >= 100")
        comp = run_theory_comparison(params, trials, params.seed)
        tables.append((comp, THEORY_COLUMNS))
        if config["assert"] and any(abs(r["z_score"]) > 4 for r in comp):
            status = 1
    if config["coverage_trials"]:
        res = run_coverage_check(params, int(config["coverage_trials"]), params.seed)
        tables.append((res.rows(), COVERAGE_COLUMNS))
        if config["assert"] and (res.failures or abs(res.row_z_score) > 4):
            status = 1
    if len(tables) == 1:
        write_csv(config["csv"], *tables[0])
    else:
        # several tables go to one stream, separated by a blank line
        from .harness import format_csv
        text = "\n".join(format_csv(r, c) for r, c in tables)
        if config["csv"] == "-":
            sys.stdout.write(text)
        else:
            Path(config["csv"]).write_text(text, encoding="utf-8", newline="")
    return status


def cmd_pipeline(config: dict) -> int:
    params = params_from_config(config)
    if params.M >= params.n:
        raise UsageError(f"M = m*Z = {params.M} must be < n = {params.n}; pass smaller --m/--Z")
    trials = _count(config, "trials")
    c = _count(config, "c")
    r = None if config.get("r") is None else _count(config, "r")
    records = run_pipeline_trials(params, trials, r, c, config.get("T"), params.seed,
                                  _count(config, "workers"), config.get("dump_shares"))
    write_csv(config["csv"], records, PIPELINE_COLUMNS)
    eligible = [rec for rec in records if rec.decode_eligible]
    exact_decodes = sum(rec.all_decoded for rec in eligible)
    errors = sum(not rec.exact_recovery for rec in records)
    print(f"identification errors: {errors}/{trials}; "
          f"eligible trials fully decoded: {exact_decodes}/{len(eligible)}", file=sys.stderr)
    # a parity check can pass by cancellation but never fail on honest results
    if any(rec.parity_false_fails for rec in records):
        return 1
    if config["assert"] and exact_decodes != len(eligible):
        return 1
    return 0


def _parse_values(axis: str, text) -> list:
    if text is None:
        raise UsageError("--values is required")
    items = text if isinstance(text, list) else [v for v in str(text).split(",") if v.strip()]
    try:
        conv = float if axis in ("alpha", "lambda") else int
        values = [conv(v) for v in items]
    except ValueError:
        raise UsageError(f"bad --values for axis {axis}: {text}") from None
    if not values:
        raise UsageError("--values must list at least one point")
    return values


def cmd_sweep(config: dict) -> int:
    if config.get("axis") not in SWEEP_AXES:
        raise UsageError(f"--axis must be one of {', '.join(SWEEP_AXES)}")
    params = params_from_config(config)
    values = _parse_values(config["axis"], config["values"])
    trials = _count(config, "trials")
    try:
        spec = SweepSpec(config["axis"], tuple(values), trials, params)
        for v in values:
            spec.params_at(v)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = run_grouptest_sweep(spec, params.seed, _count(config, "workers"))
    write_csv(config["csv"], rows, SWEEP_COLUMNS)
    if config["assert"]:
        for v, row in zip(values, rows):
            if row["errors"] > _allowed_failures(spec.params_at(v), trials):
                return 1
    return 0


COMMANDS = {
    "params": cmd_params,
    "grouptest": cmd_grouptest,
    "analysis": cmd_analysis,
    "pipeline": cmd_pipeline,
    "sweep": cmd_sweep,
}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = effective_config(args)
        if config["subcommand"] in ("params", "grouptest", "analysis", "sweep", "pipeline") \
                and not (config["subcommand"] == "analysis" and config.get("check_bounds")):
            params_from_config(config)  # validate before echoing
        echo_config(config)
        return COMMANDS[config["subcommand"]](config)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    return 2


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
