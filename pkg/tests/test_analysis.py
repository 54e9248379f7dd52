import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from probgt import analysis
from probgt.gt_core import ExperimentParams

import oracles

unit = st.floats(0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 40), unit, st.integers(1, 200), unit)
def test_h_matches_direct_sum(x, q, m, alpha):
    assert analysis.h(x, q, m, alpha) == pytest.approx(oracles.h_direct(x, q, m, alpha), rel=1e-10, abs=1e-300)


def test_h_log_weights_beyond_exact_range():
    for x in (51, 80, 200):
        assert analysis.h(x, 0.01, 30, 0.3) == pytest.approx(oracles.h_direct(x, 0.01, 30, 0.3), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(unit, st.integers(1, 100), unit)
def test_h_special_cases(q, m, alpha):
    assert analysis.h(0, q, m, alpha) == pytest.approx((1 - q) ** m)
    assert analysis.h(7, q, m, 0.0) == pytest.approx((1 - q) ** m)
    assert analysis.h(7, q, m, 1.0) == pytest.approx((1 - q * (1 - q) ** 7) ** m)


def test_h_monte_carlo():
    rng = np.random.default_rng(4)
    ell = rng.binomial(2, 0.5, size=1_000_000)
    samples = (1 - 0.1 * 0.9**ell) ** 5
    se = samples.std() / math.sqrt(samples.size)
    assert abs(samples.mean() - analysis.h(2, 0.1, 5, 0.5)) <= 3 * se


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 30), st.floats(0.001, 0.5), st.integers(1, 60), st.floats(0.01, 1.0))
def test_h_range_and_monotonicity(x, q, m, alpha):
    # more (potentially attacked) unreliable workers in the pool make a
    # compatible column more likely; more tests make it less likely
    v = analysis.h(x, q, m, alpha)
    assert 0.0 <= v <= 1.0
    assert analysis.h(x + 1, q, m, alpha) >= v * (1 - 1e-12)
    assert analysis.h(x, q, m, min(1.0, alpha + 0.1)) >= v * (1 - 1e-12)
    assert analysis.h(x, q, m + 1, alpha) <= v * (1 + 1e-12)


def params(**kw):
    base = dict(n=200, L=10, alpha=0.3, theta=0.15, m=50, Z=200)
    base.update(kw)
    return ExperimentParams(**base)


def test_expected_scores_dual_implementation():
    p = params()
    assert p.epsilon == pytest.approx(0.045)
    mu_f, mu_m = analysis.expected_scores(p)
    want_f, want_m = oracles.mu_direct(p.L, p.q, p.m, p.alpha, p.Z, p.epsilon)
    assert mu_f == pytest.approx(want_f, rel=1e-12)
    assert mu_m == pytest.approx(want_m, rel=1e-12)
    assert analysis.threshold_d(p) == pytest.approx(2 * want_f, rel=1e-12)


def test_full_attack_scores():
    p = params(alpha=1.0)
    _, mu_m = analysis.expected_scores(p)
    assert mu_m == pytest.approx(p.Z * (1 - (1 - p.epsilon) * (1 - p.q) ** p.m))
    assert p.d == pytest.approx(2 * p.Z * (analysis.h(p.L, p.q, p.m, 1.0) - (1 - p.theta) * (1 - p.q) ** p.m))


def test_threshold_margin():
    p = params(eta=0.0)
    assert p.d == analysis.expected_scores(p)[0]


def test_slot_probabilities_sum_with_epsilon_branch():
    p = params()
    probs = analysis.slot_score_probabilities(p)
    mu_f, mu_m = analysis.expected_scores(p)
    assert p.Z * (probs["p_one_reliable"] + p.epsilon * probs["p_eps"]) == pytest.approx(mu_f)
    assert p.Z * (probs["p_one_unreliable"] + p.epsilon * probs["p_eps"]) == pytest.approx(mu_m)


def test_bounds_at_zero_density():
    rep = analysis.check_h_bounds(5, 0.0, 10, 0.4)
    assert rep.ok
    assert analysis.h(5, 0.0, 10, 0.4) == 1.0


def test_bounds_tight_without_attacks():
    rep = analysis.check_h_bounds(5, 0.03, 30, 0.0)
    assert rep.ok
    assert rep.lower_slack == 0.0


def test_bounds_precondition():
    with pytest.raises(ValueError):
        analysis.check_h_bounds(5, 0.1, 11, 0.5)


def test_bound_grid_size_and_result():
    rows = list(analysis.bound_grid())
    assert len(rows) == 4 * 4 * 10
    assert all(rep.ok for *_, rep in rows)
    assert all(q * m <= 1 + 1e-12 for _, _, _, q, m, _ in rows)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.floats(0.001, 0.3), st.floats(0.01, 1.0), st.integers(0, 2**31))
def test_unreliable_expected_score_exceeds_reliable(L, q, alpha, seed):
    assume(q * L < 1)
    m = max(1, int(np.random.default_rng(seed).integers(1, math.floor(1 / q) + 1)))
    assume(q * m <= 1)
    rep = analysis.check_h_bounds(L, q, m, alpha)
    assert rep.ok
    mu_m_minus_mu_f = alpha + (1 - alpha) * analysis.h(L - 1, q, m, alpha) - analysis.h(L, q, m, alpha)
    assert mu_m_minus_mu_f >= alpha * m * q * (1 - q * L) / 2 * (1 - 1e-9)
