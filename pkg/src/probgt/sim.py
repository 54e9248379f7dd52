"""Workers, attacks, parity-check identification, reconstruction and decoding.

Slot ``t`` responses are held as an ``(n, s)`` array of returned vectors.
The attack flags travel alongside for test oracles only; nothing on the
server side (``identify``, ``reconstruct``, ``decode_product``) reads them.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .coding import EncodedShares, GeneratorMatrix, ParityMatrix, build_code, encode
from .field import PrimeField, matmul_mod
from .gt_core import (
    AttackSchedule,
    ExperimentParams,
    ScoreTable,
    TestMatrix,
    choose_unreliable,
    compare_sets,
    derive_sampling_matrix,
    evaluate_tests,
    generate_contact_matrix,
    sample_attacks,
    score_slots,
    threshold_decode,
)
from .records import TrialRecord


class ContractViolation(ValueError):
    """An operation was called outside its precondition."""


class DecodeFailure(RuntimeError):
    """A systematic worker flagged as unreliable has no usable reconstruction."""


@dataclass
class OpCounter:
    gamma_calls: int = 0
    gamma_mult_adds: int = 0
    reconstruct_mult_adds: int = 0


@dataclass(frozen=True, eq=False)
class WorkerResponse:
    worker: int
    slot: int
    vector: np.ndarray
    truth_attacked: bool


@dataclass(frozen=True, eq=False)
class SlotResponses:
    slot: int
    vectors: np.ndarray  # (n, s)
    truth_attacked: np.ndarray  # (n,) bool, oracle only

    def __getitem__(self, w: int) -> WorkerResponse:
        return WorkerResponse(int(w), self.slot, self.vectors[w], bool(self.truth_attacked[w]))

    def __len__(self):
        return self.vectors.shape[0]

    def __iter__(self):
        return (self[w] for w in range(len(self)))


@dataclass(frozen=True, eq=False)
class IdentificationResult:
    y_hat: np.ndarray
    estimated_set: np.ndarray
    scores: ScoreTable


def nonzero_noise(field: PrimeField, rng: np.random.Generator, s: int) -> np.ndarray:
    """Uniform over ``GF(p)^s`` without the zero vector."""
    while True:
        z = field.random_array(rng, s)
        if np.any(z != 0):
            return z


def share_products(shares: EncodedShares, V, field: PrimeField) -> np.ndarray:
    """Correct results ``W^(w) v_t`` for every slot: array ``(T, n, s)`` from ``V`` of shape ``(c, T)``."""
    n, s, c = shares.shares.shape
    V = field.array(V)
    if V.ndim == 1:
        V = V[:, None]
    out = matmul_mod(shares.shares.reshape(n * s, c), V, field.p)
    return out.T.reshape(V.shape[1], n, s)


def worker_round(shares: EncodedShares, v_t, schedule: AttackSchedule, t: int,
                 rng: np.random.Generator, field: PrimeField, products=None) -> SlotResponses:
    """Every worker's returned vector in slot ``t``.

    Attacked workers add independent noise drawn uniformly from the
    nonzero vectors of ``GF(p)^s``; everyone else returns ``W^(w) v_t``.
    """
    if products is None:
        products = share_products(shares, v_t, field)[0]
    n, s = products.shape
    vectors = products.copy()
    attacked = np.zeros(n, dtype=bool)
    for w in sorted(schedule.attacked_in(t)):
        vectors[w] = field.add_arrays(vectors[w], nonzero_noise(field, rng, s))
        attacked[w] = True
    return SlotResponses(t, vectors, attacked)


def _vectors(responses, support) -> np.ndarray:
    if isinstance(responses, SlotResponses):
        return responses.vectors[support]
    if isinstance(responses, Mapping):
        try:
            return np.stack([np.asarray(responses[int(j)]) for j in support])
        except KeyError as exc:
            raise ContractViolation(f"no response from worker {exc.args[0]}") from None
    return np.asarray(responses)[support]


def _width(responses) -> int:
    if isinstance(responses, SlotResponses):
        return responses.vectors.shape[1]
    if isinstance(responses, Mapping):
        return np.asarray(next(iter(responses.values()))).shape[-1]
    return np.asarray(responses).shape[-1]


def gamma(parity: ParityMatrix, i: int, responses, counter: OpCounter | None = None) -> np.ndarray:
    """Parity-check value ``sum_{j in U_i} parity[i, j] * response_j`` for row ``i``.

    Only the support of row ``i`` is touched: ``|U_i| * s`` multiply-adds.
    """
    support = parity.row_support(i)
    coef = parity.row_values(i)
    vecs = _vectors(responses, support)
    field = parity.field
    if counter is not None:
        counter.gamma_calls += 1
    if support.size == 0:
        return field.zeros(_width(responses))
    s = vecs.shape[1]
    if counter is not None:
        counter.gamma_mult_adds += support.size * s
    return field.mul_arrays(coef[:, None], vecs).sum(axis=0) % field.p


def slot_parity_checks(parity: ParityMatrix, rows: range, vectors: np.ndarray,
                       counter: OpCounter | None = None) -> np.ndarray:
    """``gamma`` for a contiguous block of rows at once: array ``(len(rows), s)``."""
    field = parity.field
    lo, hi = rows.start, rows.stop
    e0, e1 = int(parity.indptr[lo]), int(parity.indptr[hi])
    s = vectors.shape[1]
    out = field.zeros((hi - lo, s))
    if e1 > e0:
        prod = field.mul_arrays(parity.values[e0:e1, None], vectors[parity.indices[e0:e1]])
        sizes = np.diff(parity.indptr[lo:hi + 1])
        nonempty = sizes > 0
        starts = (parity.indptr[lo:hi] - e0)[nonempty]
        out[nonempty] = np.add.reduceat(prod, starts, axis=0) % field.p
    if counter is not None:
        counter.gamma_calls += hi - lo
        counter.gamma_mult_adds += (e1 - e0) * s
    return out


def identify(parity: ParityMatrix, responses, params: ExperimentParams,
             counter: OpCounter | None = None) -> IdentificationResult:
    """Run the slot-``z`` parity checks on the slot-``z`` responses and threshold-decode.

    ``responses`` holds at least ``Z`` slots (SlotResponses or ``(n, s)`` arrays).
    """
    if len(responses) < parity.Z:
        raise ContractViolation(f"need responses for {parity.Z} slots, got {len(responses)}")
    y_hat = np.zeros(parity.M, dtype=bool)
    for z in range(parity.Z):
        slot = responses[z]
        vectors = slot.vectors if isinstance(slot, SlotResponses) else np.asarray(slot)
        rows = parity.slot_rows(z)
        checks = slot_parity_checks(parity, rows, vectors, counter)
        y_hat[rows.start:rows.stop] = np.any(checks != 0, axis=1)
    scores = score_slots(parity, y_hat, params.epsilon)
    return IdentificationResult(y_hat, threshold_decode(scores, params.d), scores)


def criterion_rows(matrix: TestMatrix, members) -> dict[int, int]:
    """Smallest row whose support meets ``members`` exactly in one worker and also has an outsider.

    Returns ``{worker: row}`` for every member that has such a row.
    """
    inside = np.zeros(matrix.n, dtype=bool)
    inside[np.asarray(list(members), dtype=np.int64)] = True
    rows = matrix.entry_rows()
    hit = inside[matrix.indices]
    count_in = np.bincount(rows[hit], minlength=matrix.M)
    good = (count_in == 1) & (matrix.row_sizes() > count_in)
    sel = np.flatnonzero(hit & good[rows])
    workers = matrix.indices[sel]
    uniq, first = np.unique(workers, return_index=True)
    return {int(w): int(rows[sel[f]]) for w, f in zip(uniq, first)}


def satisfies_criterion(matrix: TestMatrix, i: int, w: int, members) -> bool:
    support = set(int(j) for j in matrix.row_support(i))
    members = set(int(j) for j in members)
    return (support & members) == {int(w)} and bool(support - members)


def find_reconstruction_row(matrix: TestMatrix, w: int, estimated_set) -> int | None:
    if int(w) not in set(int(j) for j in estimated_set):
        raise ContractViolation(f"worker {w} is not in the estimated set")
    return criterion_rows(matrix, estimated_set).get(int(w))


def reconstruct(parity: ParityMatrix, i: int, w: int, responses, estimated_set,
                counter: OpCounter | None = None) -> np.ndarray:
    """Correct result of worker ``w`` from parity row ``i``.

    ``a_w = c^-1 (c * returned_w - gamma_i)`` with ``c = parity[i, w]``;
    exact whenever the other members of row ``i`` answered correctly.
    """
    if not satisfies_criterion(parity, i, w, estimated_set):
        raise ContractViolation(f"row {i} does not satisfy the reconstruction criterion for {w}")
    field = parity.field
    coef = parity.entry(i, w)
    g = gamma(parity, i, responses)
    own = _vectors(responses, np.array([w]))[0]
    if counter is not None:
        counter.reconstruct_mult_adds += parity.row_support(i).size * g.size + g.size
    return field.mul_arrays(pow(coef, -1, field.p), field.sub_arrays(field.mul_arrays(coef, own), g))


def decode_product(generator: GeneratorMatrix, responses, estimated_set, reconstructions,
                   r: int | None = None) -> np.ndarray:
    """Stack the systematic workers' results, substituting reconstructions for flagged workers."""
    S = generator.systematic_positions
    stacked = np.array(_vectors(responses, S), copy=True)
    slot_of = {int(w): j for j, w in enumerate(S)}
    for w in estimated_set:
        j = slot_of.get(int(w))
        if j is None:
            continue
        if int(w) not in reconstructions:
            raise DecodeFailure(f"no reconstruction for systematic worker {int(w)}")
        stacked[j] = reconstructions[int(w)]
    out = stacked.reshape(-1)
    return out if r is None else out[:r]


def naive_matvec(B, v, p: int) -> np.ndarray:
    """``B @ v mod p`` one column at a time, reducing after every product."""
    B = np.asarray(B)
    v = np.asarray(v)
    acc = np.zeros(B.shape[0], dtype=B.dtype)
    for j in range(B.shape[1]):
        acc = (acc + B[:, j] * v[j] % p) % p
    return acc


def run_pipeline_trial(params: ExperimentParams, r: int | None, c: int, T: int | None,
                       rng: np.random.Generator, trial: int = 0, seed: int = 0,
                       dump_dir=None) -> TrialRecord:
    """Encode, serve ``T`` slots with attacks, identify on the first ``Z``, reconstruct and decode all.

    ``T`` defaults to ``2 Z`` so that decoding also runs on slots that carry no tests.
    """
    field = PrimeField(params.prime)
    T = 2 * params.Z if T is None else T
    if T < params.Z:
        raise ValueError(f"T={T} must be >= Z={params.Z}")
    if params.M >= params.n:
        raise ValueError(f"M={params.M} must be < n={params.n} for a nontrivial code")
    n = params.n

    unreliable = choose_unreliable(params, rng)
    contact = generate_contact_matrix(params, rng)
    parity, generator = build_code(contact, field, rng)
    k = generator.k
    r = 2 * k if r is None else r
    B = field.random_array(rng, (r, c))
    shares = encode(B, generator)
    if dump_dir is not None:
        from .coding import dump_code
        dump_code(dump_dir, parity, generator, shares)

    V = field.random_array(rng, (c, T))
    schedule = sample_attacks(params, unreliable, rng, T=T)
    products = share_products(shares, V, field)
    responses = [worker_round(shares, V[:, t], schedule, t, rng, field, products[t]) for t in range(T)]

    counter = OpCounter()
    ident = identify(parity, responses, params, counter)
    estimated = ident.estimated_set
    false_alarms, misses = compare_sets(unreliable, estimated)

    y = evaluate_tests(derive_sampling_matrix(contact, schedule), schedule.indicator(n))
    collisions = int(np.sum(y & ~ident.y_hat))
    false_fails = int(np.sum(ident.y_hat & ~y))

    rows = criterion_rows(parity, estimated)
    criterion_failures = len(estimated) - len(rows)
    systematic = set(int(w) for w in generator.systematic_positions)
    criterion_ok = all(int(w) in criterion_rows(parity, unreliable)
                       for w in unreliable if int(w) in systematic)

    decode_failures = 0
    correct = 0
    for t in range(T):
        recon = {w: reconstruct(parity, i, w, responses[t], estimated, counter) for w, i in rows.items()}
        try:
            decoded = decode_product(generator, responses[t], estimated, recon, r)
        except DecodeFailure:
            decode_failures += 1
            continue
        if np.array_equal(decoded, naive_matvec(B, V[:, t], field.p)):
            correct += 1

    return TrialRecord(
        trial=trial, seed=seed, n=n, L=params.L, alpha=params.alpha, m=params.m, Z=params.Z,
        M=params.M, d=params.d, false_alarms=false_alarms, misses=misses,
        k=k, p=field.p, r=r, c=c, T=T, systematic_standard=generator.standard,
        criterion_failures=criterion_failures, criterion_ok_systematic=criterion_ok,
        decode_failures=decode_failures, decode_correct_slots=correct,
        parity_collisions=collisions, parity_false_fails=false_fails,
        gamma_mult_adds=counter.gamma_mult_adds, reconstruct_mult_adds=counter.reconstruct_mult_adds,
    )
