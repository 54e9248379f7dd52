"""Monte Carlo orchestration: repeated trials, sweeps, theory checks and CSV output.

Every trial draws from its own generator seeded by :func:`trial_seed`,
so a trial's outcome depends only on the master seed and its index.
Results are sorted by trial index before anything is emitted, which
keeps CSV output identical whether trials ran serially or in a pool.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .gt_core import (
    ExperimentParams,
    choose_unreliable,
    derive_sampling_matrix,
    evaluate_tests,
    generate_contact_matrix,
    run_group_test,
    sample_attacks,
    score_slots,
)
from .records import GROUPTEST_COLUMNS, PIPELINE_COLUMNS, TrialRecord
from .sim import criterion_rows, run_pipeline_trial

Z95 = 1.959963984540054
SWEEP_AXES = ("n", "L", "alpha", "M", "lambda", "Z")
SWEEP_COLUMNS = (
    "axis", "point", "trials", "errors", "error_rate", "wilson_ci_low", "wilson_ci_high",
    "mean_false_alarms", "mean_misses",
)
THEORY_COLUMNS = ("quantity", "theory", "empirical", "std_err", "z_score")
COVERAGE_COLUMNS = ("quantity", "theory", "empirical", "std_err", "z_score")


def trial_seed(master: int, index: int) -> int:
    """64-bit seed of trial ``index``: a hash of ``(master, index)``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def trial_rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(master, index))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


# trial runners (module level so they pickle for process pools)

def _grouptest_one(args) -> TrialRecord:
    params, seed, index = args
    s = trial_seed(seed, index)
    out = run_group_test(params, np.random.default_rng(s))
    return TrialRecord(
        trial=index, seed=s, n=params.n, L=params.L, alpha=params.alpha, m=params.m,
        Z=params.Z, M=params.M, d=params.d,
        false_alarms=out.false_alarms, misses=out.misses,
    )


def _pipeline_one(args) -> TrialRecord:
    params, seed, index, r, c, T, dump = args
    s = trial_seed(seed, index)
    dump_dir = None if dump is None else Path(dump) / f"trial-{index:04d}"
    return run_pipeline_trial(params, r, c, T, np.random.default_rng(s), trial=index, seed=s,
                              dump_dir=dump_dir)


def _run(fn, jobs, workers: int) -> list[TrialRecord]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(fn, jobs))
    else:
        records = [fn(job) for job in jobs]
    return sorted(records, key=lambda rec: rec.trial)


def run_grouptest_trials(params: ExperimentParams, trials: int, seed: int | None = None,
                         workers: int = 1) -> list[TrialRecord]:
    seed = params.seed if seed is None else seed
    return _run(_grouptest_one, [(params, seed, i) for i in range(trials)], workers)


def run_pipeline_trials(params: ExperimentParams, trials: int, r: int | None = None, c: int = 8,
                        T: int | None = None, seed: int | None = None,
                        workers: int = 1, dump_dir=None) -> list[TrialRecord]:
    """End-to-end trials; with ``dump_dir`` each trial writes its matrices to ``trial-XXXX/``."""
    seed = params.seed if seed is None else seed
    jobs = [(params, seed, i, r, c, T, dump_dir) for i in range(trials)]
    return _run(_pipeline_one, jobs, workers)


# CSV

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, TrialRecord):
            row = row.row(columns)
        writer.writerow([_fmt(row[col]) for col in columns])
    return buf.getvalue()


def write_csv(target, rows, columns) -> str:
    """Write rows as CSV to a path, or to stdout when ``target`` is ``"-"``; returns the text."""
    text = format_csv(rows, columns)
    if target == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    elif target is not None:
        Path(target).write_text(text, encoding="utf-8", newline="")
    return text


def grouptest_csv(records) -> str:
    return format_csv(records, GROUPTEST_COLUMNS)


def pipeline_csv(records) -> str:
    return format_csv(records, PIPELINE_COLUMNS)


# sweeps

@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    trials_per_point: int
    base: ExperimentParams

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        object.__setattr__(self, "values", tuple(self.values))

    def params_at(self, value) -> ExperimentParams:
        """Base parameters moved to one sweep point.

        ``lambda`` recomputes ``Z = ceil(lambda ln(n) / alpha)``; ``M``
        keeps ``m`` and sets ``Z = ceil(M / m)``.  Moving ``n``, ``L`` or
        ``alpha`` keeps ``m`` and ``Z`` fixed (``q`` follows ``L``).
        """
        b = self.base
        if self.axis == "n":
            return b.with_updates(n=int(value))
        if self.axis == "L":
            return b.with_updates(L=int(value))
        if self.axis == "alpha":
            return b.with_updates(alpha=float(value))
        if self.axis == "Z":
            return b.with_updates(Z=int(value), T=None)
        if self.axis == "M":
            return b.with_updates(Z=max(1, math.ceil(int(value) / b.m)), T=None)
        lam = float(value)
        Z = math.ceil(lam * math.log(b.n) / b.alpha - 1e-9)
        return b.with_updates(lam=lam, Z=Z, T=None)


def summarise_point(axis: str, point, records) -> dict:
    trials = len(records)
    errors = sum(1 for rec in records if not rec.exact_recovery)
    lo, hi = wilson_interval(errors, trials)
    return {
        "axis": axis, "point": point, "trials": trials, "errors": errors,
        "error_rate": errors / trials, "wilson_ci_low": lo, "wilson_ci_high": hi,
        "mean_false_alarms": sum(rec.false_alarms for rec in records) / trials,
        "mean_misses": sum(rec.misses for rec in records) / trials,
    }


def run_grouptest_sweep(spec: SweepSpec, seed: int | None = None, workers: int = 1) -> list[dict]:
    """Per-point empirical error rate with a 95% Wilson interval.

    Every point reuses the same master seed, so a one-point sweep
    reproduces :func:`run_grouptest_trials` exactly.
    """
    seed = spec.base.seed if seed is None else seed
    rows = []
    for value in spec.values:
        params = spec.params_at(value)
        records = run_grouptest_trials(params, spec.trials_per_point, seed, workers)
        rows.append(summarise_point(spec.axis, value, records))
    return rows


# theory against simulation

def _mean_and_se(per_trial: np.ndarray) -> tuple[float, float]:
    per_trial = np.asarray(per_trial, dtype=float)
    mean = float(per_trial.mean())
    se = float(per_trial.std(ddof=1) / math.sqrt(per_trial.size)) if per_trial.size > 1 else 0.0
    return mean, se


def _z(empirical: float, theory: float, se: float) -> float:
    diff = empirical - theory
    if se == 0.0:
        return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
    return diff / se


def run_theory_comparison(params: ExperimentParams, trials: int, seed: int | None = None) -> list[dict]:
    """Closed-form score statistics against their simulated counterparts.

    Each trial draws a fresh contact matrix, unreliable set and attack
    schedule.  Per-trial averages (over workers and slots) are the
    samples; standard errors are taken across trials.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    seed = params.seed if seed is None else seed
    mu_f_t, mu_m_t = analysis.expected_scores(params)
    probs = analysis.slot_score_probabilities(params)
    eps = params.epsilon
    samples = {key: np.empty(trials) for key in ("mu_f", "mu_m", "eps", "one_f", "one_m")}
    for i in range(trials):
        rng = trial_rng(seed, i)
        unreliable = choose_unreliable(params, rng)
        contact = generate_contact_matrix(params, rng)
        schedule = sample_attacks(params, unreliable, rng)
        y = evaluate_tests(derive_sampling_matrix(contact, schedule), schedule.indicator(params.n))
        slot = score_slots(contact, y, eps).slot_scores
        bad = schedule.indicator(params.n)
        present = slot != eps
        one = present & (slot == 1.0)
        totals = slot.sum(axis=0)
        samples["mu_f"][i] = totals[~bad].mean()
        samples["mu_m"][i] = totals[bad].mean()
        samples["eps"][i] = (~present).mean()
        samples["one_f"][i] = one[:, ~bad].mean()
        samples["one_m"][i] = one[:, bad].mean()
    theory = {
        "mu_f": mu_f_t,
        "mu_m": mu_m_t,
        "eps": probs["p_eps"],
        "one_f": probs["p_one_reliable"],
        "one_m": probs["p_one_unreliable"],
    }
    names = {
        "mu_f": "mu_f",
        "mu_m": "mu_m",
        "eps": "P(I=eps)",
        "one_f": "P(I=1|reliable)",
        "one_m": "P(I=1|unreliable)",
    }
    rows = []
    for key, label in names.items():
        emp, se = _mean_and_se(samples[key])
        rows.append({"quantity": label, "theory": theory[key], "empirical": emp,
                     "std_err": se, "z_score": _z(emp, theory[key], se)})
    return rows


def criterion_row_probability(n: int, L: int, q: float) -> float:
    """Chance that a given row meets a given unreliable worker's reconstruction criterion."""
    return q * (1 - q) ** (L - 1) * (1 - (1 - q) ** (n - L))


@dataclass(frozen=True)
class CoverageResult:
    trials: int
    failures: int
    row_successes: int
    row_draws: int
    row_probability: float

    @property
    def failure_fraction(self) -> float:
        return self.failures / self.trials

    @property
    def empirical_row_probability(self) -> float:
        return self.row_successes / self.row_draws

    @property
    def row_std_err(self) -> float:
        p = self.row_probability
        return math.sqrt(p * (1 - p) / self.row_draws)

    @property
    def row_z_score(self) -> float:
        return _z(self.empirical_row_probability, self.row_probability, self.row_std_err)

    def rows(self) -> list[dict]:
        return [
            {"quantity": "failure_fraction", "theory": "", "empirical": self.failure_fraction,
             "std_err": "", "z_score": ""},
            {"quantity": "row_success_probability", "theory": self.row_probability,
             "empirical": self.empirical_row_probability, "std_err": self.row_std_err,
             "z_score": self.row_z_score},
        ]


def run_coverage_check(params: ExperimentParams, trials: int, seed: int | None = None) -> CoverageResult:
    """How often some unreliable worker has no criterion row, and the per-row success rate.

    A (row, unreliable worker) pair succeeds when the row contains that
    worker, no other unreliable worker, and at least one reliable worker.
    """
    seed = params.seed if seed is None else seed
    failures = 0
    successes = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        unreliable = choose_unreliable(params, rng)
        contact = generate_contact_matrix(params, rng)
        found = criterion_rows(contact, unreliable)
        if len(found) < params.L:
            failures += 1
        inside = np.zeros(params.n, dtype=bool)
        inside[unreliable] = True
        rows = contact.entry_rows()
        hit = inside[contact.indices]
        count_in = np.bincount(rows[hit], minlength=contact.M)
        good = (count_in == 1) & (contact.row_sizes() > 1)
        successes += int(good.sum())
    return CoverageResult(trials, failures, successes, trials * params.M * params.L,
                        criterion_row_probability(params.n, params.L, params.q))
