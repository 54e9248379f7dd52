"""Noisy non-adaptive group testing with intermittently attacked workers.

Tests are organised in slots: slot ``z`` (0-based) owns rows
``z*m .. (z+1)*m - 1`` of the contact matrix.  Within a slot, an
unreliable worker only influences test outcomes if it is attacked in
that slot.  Workers are indexed from 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .field import DEFAULT_PRIME

THETA = 0.15
ETA = 1.0
ZETA = 0.015  # exponent constant shared by the false-alarm and miss bounds
TEST_BOUND_FACTOR = 450
DEFAULT_SEED = 20240101
SCORE_ATOL = 1e-9


@dataclass(frozen=True)
class ExperimentParams:
    n: int
    L: int
    alpha: float
    theta: float
    m: int
    Z: int
    eta: float = ETA
    beta: float = 1.0
    lam: float | None = None
    q: float = field(init=False)
    M: int = field(init=False)
    epsilon: float = field(init=False)
    d: float | None = None
    T: int | None = None
    prime: int = DEFAULT_PRIME
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "q", self.theta / self.L if self.L else 0.0)
        object.__setattr__(self, "M", self.m * self.Z)
        object.__setattr__(self, "epsilon", self.theta * self.alpha)
        if self.T is None:
            object.__setattr__(self, "T", self.Z)
        if not (1 <= self.L < self.n):
            raise ValueError(f"need 1 <= L < n, got L={self.L}, n={self.n}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.theta <= self.L:
            raise ValueError(f"theta must give q = theta/L in [0, 1], got {self.theta}")
        if self.m < 1 or self.Z < 1:
            raise ValueError("m and Z must be >= 1")
        if self.T < self.Z:
            raise ValueError(f"T={self.T} must be >= Z={self.Z}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.d is None:
            object.__setattr__(self, "d", analysis.threshold_d(self))
        if self.d < 0 or self.d > self.Z * (1.0 + self.eta) + SCORE_ATOL:
            raise ValueError(f"threshold d={self.d} outside [0, Z*(1+eta)]")

    @property
    def test_bound(self) -> float:
        """The ``450 (1+beta) L ln(n) / alpha`` test budget."""
        return TEST_BOUND_FACTOR * (1.0 + self.beta) * self.L * math.log(self.n) / self.alpha

    def with_updates(self, **changes) -> ExperimentParams:
        """Copy with some fields changed; ``d`` is recomputed unless given."""
        changes.setdefault("d", None)
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "n": self.n, "L": self.L, "alpha": self.alpha, "theta": self.theta,
            "eta": self.eta, "beta": self.beta, "lam": self.lam, "q": self.q,
            "m": self.m, "Z": self.Z, "M": self.M, "epsilon": self.epsilon,
            "d": self.d, "T": self.T, "prime": self.prime, "seed": self.seed,
        }


def select_parameters(n, L, alpha, beta=1.0, theta=THETA, eta=ETA, lambda_override=None,
                      T=None, prime=DEFAULT_PRIME, seed=DEFAULT_SEED) -> ExperimentParams:
    """Design parameters that drive the identification error below ``n**-beta``.

    ``m = ceil(L/theta)`` and ``Z = ceil(lambda ln(n) / alpha)`` with
    ``lambda = (1+beta)/0.015``.  The ``450 (1+beta) L ln(n)/alpha`` budget
    applies to the un-rounded product ``(L/theta) * lambda ln(n)/alpha``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (1 <= L < n):
        raise ValueError(f"need 1 <= L < n, got L={L}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    lam = (1.0 + beta) / ZETA if lambda_override is None else float(lambda_override)
    m = math.ceil(L / theta - 1e-9)
    Z = math.ceil(lam * math.log(n) / alpha - 1e-9)
    params = ExperimentParams(n=n, L=L, alpha=alpha, theta=theta, m=m, Z=Z, eta=eta,
                              beta=beta, lam=lam, T=T, prime=prime, seed=seed)
    if params.M >= n:
        warnings.warn(
            f"M={params.M} >= n={n}: the parity-check code has no message dimension",
            stacklevel=2,
        )
    return params


def unrounded_tests(params: ExperimentParams) -> float:
    lam = params.lam if params.lam is not None else (1.0 + params.beta) / ZETA
    return (params.L / params.theta) * lam * math.log(params.n) / params.alpha


class TestMatrix:
    """Sparse binary ``M x n`` test matrix in CSR form, ``m`` rows per slot."""

    __test__ = False  # not a pytest class

    def __init__(self, indptr, indices, n: int, m: int):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.n = int(n)
        self.m = int(m)
        if (self.indptr.size - 1) % self.m:
            raise ValueError("row count must be a multiple of m")

    @property
    def M(self) -> int:
        return self.indptr.size - 1

    @property
    def Z(self) -> int:
        return self.M // self.m

    @property
    def shape(self) -> tuple[int, int]:
        return self.M, self.n

    @property
    def nnz(self) -> int:
        return self.indices.size

    def slot_rows(self, z: int) -> range:
        return range(z * self.m, (z + 1) * self.m)

    def row_support(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def entry_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.M), self.row_sizes())

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.entry_rows(), self.indices] = True
        return out

    @classmethod
    def from_dense(cls, bits, m: int | None = None):
        bits = np.asarray(bits, dtype=bool)
        rows, cols = np.nonzero(bits)
        indptr = np.concatenate([[0], np.cumsum(bits.sum(axis=1))])
        return cls(indptr, cols, bits.shape[1], bits.shape[0] if m is None else m)

    def __eq__(self, other):
        return (type(self) is type(other) and self.n == other.n and self.m == other.m
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self):
        return f"{type(self).__name__}(M={self.M}, n={self.n}, m={self.m}, nnz={self.nnz})"


class ContactMatrix(TestMatrix):
    """Which workers take part in which test."""


class SamplingMatrix(TestMatrix):
    """Contact matrix with the slot blocks of unattacked unreliable workers zeroed."""


@dataclass(frozen=True, eq=False)
class AttackSchedule:
    """Unreliable workers and, per slot, which of them are attacked.

    ``attacked[t, j]`` tells whether ``unreliable[j]`` is attacked in slot ``t``.
    """

    unreliable: np.ndarray
    attacked: np.ndarray

    @property
    def T(self) -> int:
        return self.attacked.shape[0]

    def attacked_in(self, t: int) -> frozenset[int]:
        return frozenset(int(w) for w in self.unreliable[self.attacked[t]])

    @property
    def per_slot(self) -> list[frozenset[int]]:
        return [self.attacked_in(t) for t in range(self.T)]

    def indicator(self, n: int) -> np.ndarray:
        x = np.zeros(n, dtype=bool)
        x[self.unreliable] = True
        return x

    def attacked_matrix(self, n: int, slots: int | None = None) -> np.ndarray:
        """Dense ``(slots, n)`` mask of attacked workers."""
        slots = self.T if slots is None else slots
        out = np.zeros((slots, n), dtype=bool)
        out[:, self.unreliable] = self.attacked[:slots]
        return out

    @classmethod
    def from_sets(cls, unreliable, per_slot):
        unreliable = np.array(sorted(unreliable), dtype=np.int64)
        attacked = np.array([[int(w) in s for w in unreliable] for s in per_slot], dtype=bool)
        attacked = attacked.reshape(len(per_slot), unreliable.size)
        return cls(unreliable, attacked)


@dataclass(frozen=True, eq=False)
class ScoreTable:
    slot_scores: np.ndarray  # (Z, n)

    @property
    def totals(self) -> np.ndarray:
        return self.slot_scores.sum(axis=0)


def bernoulli_positions(total: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of the ones in ``total`` i.i.d. Bernoulli(q) draws.

    Gaps between consecutive ones are geometric, so drawing the gaps gives
    the same law as drawing every entry, at a cost proportional to the
    number of ones.
    """
    if q <= 0.0 or total == 0:
        return np.zeros(0, dtype=np.int64)
    if q >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        expected = (total - pos - 1) * q
        gaps = rng.geometric(q, size=int(expected + 6.0 * math.sqrt(expected) + 32))
        run = pos + np.cumsum(gaps)
        chunks.append(run)
        pos = int(run[-1])
        if pos >= total:
            break
    out = np.concatenate(chunks)
    return out[out < total]


def generate_contact_matrix(params: ExperimentParams, rng: np.random.Generator) -> ContactMatrix:
    M, n = params.M, params.n
    pos = bernoulli_positions(M * n, params.q, rng)
    rows = pos // n
    cols = pos % n
    indptr = np.searchsorted(rows, np.arange(M + 1))
    return ContactMatrix(indptr, cols, n, params.m)


def choose_unreliable(params: ExperimentParams, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(params.n, size=params.L, replace=False)).astype(np.int64)


def sample_attacks(params: ExperimentParams, unreliable, rng: np.random.Generator,
                   T: int | None = None) -> AttackSchedule:
    unreliable = np.sort(np.asarray(list(unreliable), dtype=np.int64))
    if unreliable.size != params.L:
        raise ValueError(f"expected {params.L} unreliable workers, got {unreliable.size}")
    T = params.T if T is None else T
    attacked = rng.random((T, unreliable.size)) < params.alpha
    return AttackSchedule(unreliable, attacked)


def _active_mask(n: int, schedule: AttackSchedule, slots: int) -> np.ndarray:
    """``(slots, n)`` mask: False exactly for unattacked unreliable workers."""
    active = np.ones((slots, n), dtype=bool)
    active[:, schedule.unreliable] = schedule.attacked[:slots]
    return active


def derive_sampling_matrix(contact: ContactMatrix, schedule: AttackSchedule) -> SamplingMatrix:
    if schedule.T < contact.Z:
        raise ValueError(f"schedule covers {schedule.T} slots, need {contact.Z}")
    rows = contact.entry_rows()
    keep = _active_mask(contact.n, schedule, contact.Z)[rows // contact.m, contact.indices]
    sizes = np.bincount(rows[keep], minlength=contact.M)
    indptr = np.concatenate([[0], np.cumsum(sizes)])
    return SamplingMatrix(indptr, contact.indices[keep], contact.n, contact.m)


def evaluate_tests(matrix: TestMatrix, x) -> np.ndarray:
    """Boolean product: ``y_i = OR_j (matrix[i, j] AND x[j])``."""
    x = np.asarray(x, dtype=bool)
    if x.shape != (matrix.n,):
        raise ValueError(f"x must have length {matrix.n}")
    y = np.zeros(matrix.M, dtype=bool)
    y[matrix.entry_rows()[x[matrix.indices]]] = True
    return y


def score_worker_slot(column_block, y_slot, epsilon: float) -> float:
    column_block = np.asarray(column_block, dtype=bool)
    y_slot = np.asarray(y_slot, dtype=bool)
    if column_block.shape != y_slot.shape:
        raise ValueError("column block and slot outcomes differ in length")
    if not column_block.any():
        return epsilon
    if np.any(column_block & ~y_slot):
        return 0.0
    return 1.0


def score_slots(contact: TestMatrix, y, epsilon: float) -> ScoreTable:
    """Score every worker in every slot against the observed outcomes ``y``."""
    y = np.asarray(y, dtype=bool)
    if y.shape != (contact.M,):
        raise ValueError(f"y must have length {contact.M}")
    Z, n = contact.Z, contact.n
    rows = contact.entry_rows()
    slots = rows // contact.m
    present = np.zeros((Z, n), dtype=bool)
    present[slots, contact.indices] = True
    violated = np.zeros((Z, n), dtype=bool)
    bad = ~y[rows]
    violated[slots[bad], contact.indices[bad]] = True
    scores = np.where(present, np.where(violated, 0.0, 1.0), epsilon)
    return ScoreTable(scores)


def threshold_decode(scores: ScoreTable | np.ndarray, d: float, atol: float = SCORE_ATOL) -> np.ndarray:
    """Indices of workers whose total score reaches ``d`` (ties count as reaching it)."""
    totals = scores.totals if isinstance(scores, ScoreTable) else np.asarray(scores, dtype=float)
    return np.flatnonzero(totals >= d - atol)


@dataclass(frozen=True)
class GroupTestOutcome:
    unreliable: np.ndarray
    estimated: np.ndarray
    false_alarms: int
    misses: int

    @property
    def exact_recovery(self) -> bool:
        return self.false_alarms == 0 and self.misses == 0


def compare_sets(unreliable, estimated) -> tuple[int, int]:
    """``(false_alarms, misses)`` of an estimate against the truth."""
    truth = set(int(w) for w in unreliable)
    est = set(int(w) for w in estimated)
    return len(est - truth), len(truth - est)


def run_group_test(params: ExperimentParams, rng: np.random.Generator, unreliable=None) -> GroupTestOutcome:
    """One draw of the pure group-testing pipeline (no field arithmetic)."""
    if unreliable is None:
        unreliable = choose_unreliable(params, rng)
    unreliable = np.sort(np.asarray(unreliable, dtype=np.int64))
    contact = generate_contact_matrix(params, rng)
    schedule = sample_attacks(params, unreliable, rng)
    y = evaluate_tests(derive_sampling_matrix(contact, schedule), schedule.indicator(params.n))
    estimated = threshold_decode(score_slots(contact, y, params.epsilon), params.d)
    fa, miss = compare_sets(unreliable, estimated)
    return GroupTestOutcome(unreliable, estimated, fa, miss)
