import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probgt.gt_core import (
    AttackSchedule,
    ContactMatrix,
    ExperimentParams,
    ScoreTable,
    bernoulli_positions,
    choose_unreliable,
    derive_sampling_matrix,
    evaluate_tests,
    generate_contact_matrix,
    run_group_test,
    sample_attacks,
    score_slots,
    score_worker_slot,
    select_parameters,
    threshold_decode,
    unrounded_tests,
)

# worked example: 5 workers, 3 tests; tests 1-2 form slot 1 and test 3 slot 2.
# Unreliable workers are 3 and 4 (1-based), worker 4 is attacked in both slots.
EXAMPLE_CONTACT = np.array([[1, 0, 0, 1, 0], [0, 1, 1, 0, 0], [1, 1, 0, 1, 0]], dtype=bool)
EXAMPLE_SAMPLING = np.array([[1, 0, 0, 1, 0], [0, 1, 0, 0, 0], [1, 1, 0, 1, 0]], dtype=bool)


def small_params(**kw):
    base = dict(n=60, L=3, alpha=0.5, theta=0.15, m=20, Z=8)
    base.update(kw)
    return ExperimentParams(**base)


def test_select_parameters_reference_instance():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = select_parameters(1024, 8, 0.5, 1.0)
    assert p.q == pytest.approx(0.01875, rel=1e-15)
    assert p.m == 54
    assert p.lam == pytest.approx(400 / 3)
    assert p.Z == 1849
    assert p.epsilon == pytest.approx(0.075)
    assert p.M == 54 * 1849


def test_integral_ratio_gives_exact_m():
    p = select_parameters(4096, 3, 0.6, 1.0, lambda_override=1.0)
    assert p.m == 20


@pytest.mark.parametrize("n,L,alpha,beta", [(500, 5, 0.3, 1.0), (1024, 8, 0.5, 1.0), (50, 1, 1.0, 2.0)])
def test_unrounded_test_count_within_bound(n, L, alpha, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = select_parameters(n, L, alpha, beta)
    assert unrounded_tests(p) <= p.test_bound
    # rounding adds at most one test per slot and one slot
    assert p.M <= (L / p.theta + 1) * (p.lam * math.log(n) / alpha + 1)


def test_large_test_count_warns():
    with pytest.warns(UserWarning, match="no message dimension"):
        select_parameters(500, 5, 0.3, 1.0)


@pytest.mark.parametrize("kw", [dict(L=0), dict(L=60), dict(alpha=1.5), dict(m=0), dict(Z=0), dict(T=3)])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        small_params(**kw)


def test_params_invariants():
    p = small_params()
    assert p.q == p.theta / p.L
    assert p.epsilon == p.theta * p.alpha
    assert p.M == p.m * p.Z
    assert 0 < p.d <= p.Z * (1 + p.eta)
    assert p.T == p.Z


def test_contact_matrix_extremes(rng):
    zero = generate_contact_matrix(small_params(theta=0.0), rng)
    assert zero.nnz == 0
    full = generate_contact_matrix(small_params(theta=3.0), rng)
    assert full.to_dense().all()


def test_contact_density_binomial(rng):
    p = ExperimentParams(n=1000, L=10, alpha=0.5, theta=0.15, m=100, Z=10)
    c = generate_contact_matrix(p, rng)
    total = p.M * p.n
    sigma = math.sqrt(total * p.q * (1 - p.q))
    assert abs(c.nnz - total * p.q) <= 4 * sigma


def test_bernoulli_positions_gaps(rng):
    pos = bernoulli_positions(200_000, 0.3, rng)
    assert np.all(np.diff(pos) > 0)
    assert pos[-1] < 200_000
    # successive entries are independent: P(both set) = q^2
    bits = np.zeros(200_000, dtype=bool)
    bits[pos] = True
    pairs = (bits[:-1] & bits[1:]).mean()
    # overlapping pairs are weakly dependent, hence the wider band
    assert abs(pairs - 0.09) < 8 * math.sqrt(0.09 * 0.91 / 200_000)


def test_row_slots_partition():
    c = ContactMatrix(np.zeros(13, dtype=np.int64), [], 5, 4)
    assert c.Z == 3
    covered = [i for z in range(c.Z) for i in c.slot_rows(z)]
    assert covered == list(range(12))


def test_attack_extremes(rng):
    unreliable = [1, 4, 7]
    always = sample_attacks(small_params(alpha=1.0), unreliable, rng)
    assert all(s == frozenset(unreliable) for s in always.per_slot)
    never = sample_attacks(small_params(alpha=0.0), unreliable, rng)
    assert all(s == frozenset() for s in never.per_slot)


def test_attack_frequency(rng):
    p = small_params(alpha=0.3, L=1, Z=10_000)
    sched = sample_attacks(p, [5], rng)
    freq = sched.attacked.mean()
    assert abs(freq - 0.3) <= 4 * math.sqrt(0.3 * 0.7 / 10_000)
    assert all(s <= {5} for s in sched.per_slot)


def test_wrong_unreliable_count(rng):
    with pytest.raises(ValueError):
        sample_attacks(small_params(), [1, 2], rng)


def example_schedule():
    # one row per "slot"; rows 1 and 2 share the first slot's attack set
    return AttackSchedule.from_sets({2, 3}, [{3}, {3}, {3}])


def test_worked_example_sampling_matrix():
    contact = ContactMatrix.from_dense(EXAMPLE_CONTACT, m=1)
    sampling = derive_sampling_matrix(contact, example_schedule())
    assert np.array_equal(sampling.to_dense(), EXAMPLE_SAMPLING)


def test_worked_example_outcomes():
    sampling = ContactMatrix.from_dense(EXAMPLE_SAMPLING, m=1)
    x = np.array([0, 0, 1, 1, 0], dtype=bool)
    assert evaluate_tests(sampling, x).tolist() == [True, False, True]


def test_worked_example_scores():
    y_slot1 = [1, 0]
    assert score_worker_slot([1, 0], y_slot1, 0.1) == 1.0
    assert score_worker_slot([0, 1], y_slot1, 0.1) == 0.0
    assert score_worker_slot([0, 0], y_slot1, 0.1) == 0.1
    with pytest.raises(ValueError):
        score_worker_slot([1], y_slot1, 0.1)


def test_trivial_outcomes(rng):
    p = small_params()
    c = generate_contact_matrix(p, rng)
    assert not evaluate_tests(c, np.zeros(p.n, dtype=bool)).any()
    ones = evaluate_tests(c, np.ones(p.n, dtype=bool))
    assert np.array_equal(ones, c.row_sizes() > 0)


def test_no_unreliable_keeps_contact(rng):
    p = small_params()
    c = generate_contact_matrix(p, rng)
    sched = AttackSchedule(np.zeros(0, dtype=np.int64), np.zeros((p.Z, 0), dtype=bool))
    assert np.array_equal(derive_sampling_matrix(c, sched).to_dense(), c.to_dense())


def test_full_attack_is_classical(rng):
    p = small_params(alpha=1.0)
    c = generate_contact_matrix(p, rng)
    unreliable = choose_unreliable(p, rng)
    sched = sample_attacks(p, unreliable, rng)
    s = derive_sampling_matrix(c, sched)
    assert np.array_equal(s.to_dense(), c.to_dense())
    x = sched.indicator(p.n)
    y = evaluate_tests(s, x)
    assert np.array_equal(y, (c.to_dense() & x).any(axis=1))


def test_sampling_only_zeroes_unattacked_unreliable(rng):
    p = small_params(alpha=0.4)
    c = generate_contact_matrix(p, rng)
    unreliable = choose_unreliable(p, rng)
    sched = sample_attacks(p, unreliable, rng)
    dc, ds = c.to_dense(), derive_sampling_matrix(c, sched).to_dense()
    assert not np.any(ds & ~dc)
    reliable = np.setdiff1d(np.arange(p.n), unreliable)
    assert np.array_equal(dc[:, reliable], ds[:, reliable])
    for z in range(p.Z):
        rows = list(c.slot_rows(z))
        for j, w in enumerate(unreliable):
            want = dc[rows, w] if sched.attacked[z, j] else np.zeros(len(rows), dtype=bool)
            assert np.array_equal(ds[rows, w], want)


def test_score_slots_matches_per_worker_rule(rng):
    p = small_params()
    c = generate_contact_matrix(p, rng)
    y = rng.random(p.M) < 0.5
    table = score_slots(c, y, p.epsilon)
    dense = c.to_dense()
    for z in range(p.Z):
        rows = list(c.slot_rows(z))
        for w in range(p.n):
            assert table.slot_scores[z, w] == score_worker_slot(dense[rows, w], y[rows], p.epsilon)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 159))
def test_scores_monotone_in_outcomes(seed, flip):
    rng = np.random.default_rng(seed)
    p = small_params()
    c = generate_contact_matrix(p, rng)
    y = rng.random(p.M) < 0.5
    before = score_slots(c, y, p.epsilon).slot_scores
    y2 = y.copy()
    y2[flip] = True
    after = score_slots(c, y2, p.epsilon).slot_scores
    assert np.all(after >= before)


def test_threshold_rule():
    assert threshold_decode(np.zeros(4), 1.0).size == 0
    assert threshold_decode(np.array([0.5, 2.0, 1.999]), 2.0).tolist() == [1]
    eps = 0.1
    table = ScoreTable(np.array([[1.0], [eps], [1.0]]))
    assert table.totals[0] == pytest.approx(2.1)
    assert threshold_decode(table, 2.0).tolist() == [0]
    # a total within the score tolerance of d counts as reaching it
    assert threshold_decode(np.array([0.1 + 0.2]), 0.3).tolist() == [0]


def test_group_test_is_deterministic():
    p = small_params()
    a = run_group_test(p, np.random.default_rng(5))
    b = run_group_test(p, np.random.default_rng(5))
    assert np.array_equal(a.estimated, b.estimated)
    assert np.array_equal(a.unreliable, b.unreliable)
    ca = generate_contact_matrix(p, np.random.default_rng(9))
    assert ca == generate_contact_matrix(p, np.random.default_rng(9))


def test_unreliable_score_higher_on_average():
    p = ExperimentParams(n=100, L=4, alpha=0.5, theta=0.15, m=26, Z=20)
    assert p.q * p.m <= 1 and p.q * p.L < 1
    rng = np.random.default_rng(77)
    good, bad = [], []
    for _ in range(1000):
        unreliable = choose_unreliable(p, rng)
        c = generate_contact_matrix(p, rng)
        sched = sample_attacks(p, unreliable, rng)
        y = evaluate_tests(derive_sampling_matrix(c, sched), sched.indicator(p.n))
        totals = score_slots(c, y, p.epsilon).totals
        mask = sched.indicator(p.n)
        good.append(totals[~mask].mean())
        bad.append(totals[mask].mean())
    assert np.mean(bad) > np.mean(good)
