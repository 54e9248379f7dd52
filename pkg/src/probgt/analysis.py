"""Closed-form expected scores and the bounds on ``h_x``.

``h(x, q, m, alpha)`` is the probability that a Bernoulli(q) column of
``m`` tests is compatible with the slot outcome when ``x`` unreliable
workers (each attacked with probability ``alpha``) sit in the pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BOUND_RTOL = 1e-12
_EXACT_BINOMIAL_MAX = 50


def h(x: int, q: float, m: int, alpha: float) -> float:
    x = int(x)
    if x < 0:
        raise ValueError("x must be >= 0")
    if not (0.0 <= q <= 1.0 and 0.0 <= alpha <= 1.0):
        raise ValueError("q and alpha must lie in [0, 1]")
    if q == 0.0:
        return 1.0
    ell = np.arange(x + 1)
    compat = (1.0 - q * (1.0 - q) ** ell) ** m
    if alpha == 0.0:
        return float(compat[0])
    if alpha == 1.0:
        return float(compat[-1])
    if x <= _EXACT_BINOMIAL_MAX:
        weights = np.array(
            [math.comb(x, k) for k in range(x + 1)], dtype=float
        ) * alpha ** ell * (1.0 - alpha) ** (x - ell)
    else:
        log_w = (
            math.lgamma(x + 1)
            - np.array([math.lgamma(k + 1) + math.lgamma(x - k + 1) for k in range(x + 1)])
            + ell * math.log(alpha)
            + (x - ell) * math.log1p(-alpha)
        )
        weights = np.exp(log_w)
    return float(np.dot(weights, compat))


def empty_column_probability(q: float, m: int) -> float:
    """Chance that a worker sits in none of the ``m`` tests of a slot."""
    return (1.0 - q) ** m


def slot_score_probabilities(params) -> dict[str, float]:
    """Per-slot probabilities of the score outcomes."""
    L, q, m, alpha = params.L, params.q, params.m, params.alpha
    empty = empty_column_probability(q, m)
    h_L = h(L, q, m, alpha)
    h_L1 = h(L - 1, q, m, alpha) if L >= 1 else h_L
    return {
        "p_eps": empty,
        "p_one_reliable": h_L - empty,
        "p_one_unreliable": alpha + (1.0 - alpha) * h_L1 - empty,
    }


def expected_scores(params) -> tuple[float, float]:
    """Expected total scores ``(mu_f, mu_m)`` of a reliable and an unreliable worker."""
    L, q, m, alpha, Z, eps = params.L, params.q, params.m, params.alpha, params.Z, params.epsilon
    empty = empty_column_probability(q, m)
    h_L = h(L, q, m, alpha)
    mu_f = Z * (h_L - (1.0 - eps) * empty)
    if L >= 1:
        mu_m = Z * (alpha + (1.0 - alpha) * h(L - 1, q, m, alpha) - (1.0 - eps) * empty)
    else:
        mu_m = float("nan")
    return mu_f, mu_m


def threshold_d(params) -> float:
    mu_f, _ = expected_scores(params)
    return (1.0 + params.eta) * mu_f


@dataclass(frozen=True)
class BoundReport:
    lower_ok: bool
    upper_ok: bool
    diff_ok: bool
    lower_slack: float
    upper_slack: float
    diff_slack: float

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok and self.diff_ok

    @property
    def slacks(self) -> dict[str, float]:
        return {"lower": self.lower_slack, "upper": self.upper_slack, "diff": self.diff_slack}


def _leq(lhs: float, rhs: float, rtol: float) -> bool:
    return lhs <= rhs + rtol * max(abs(lhs), abs(rhs))


def check_h_bounds(L: int, q: float, m: int, alpha: float, rtol: float = BOUND_RTOL) -> BoundReport:
    """Evaluate the sandwich bounds on ``h_L`` and the bound on ``h_L - (1-alpha) h_{L-1}``.

    The bounds are only claimed when ``q * m <= 1``.
    """
    if q * m > 1.0 + 1e-12:
        raise ValueError(f"bounds require q*m <= 1, got {q * m}")
    if L < 1:
        raise ValueError("L must be >= 1")
    empty = (1.0 - q) ** m
    h_L = h(L, q, m, alpha)
    h_L1 = h(L - 1, q, m, alpha)
    upper = empty + m * L * q * q * alpha
    diff = h_L - (1.0 - alpha) * h_L1
    diff_bound = alpha * (1.0 - m * q * (1.0 - q * L) / 2.0)
    return BoundReport(
        lower_ok=_leq(empty, h_L, rtol),
        upper_ok=_leq(h_L, upper, rtol),
        diff_ok=_leq(diff, diff_bound, rtol),
        lower_slack=h_L - empty,
        upper_slack=upper - h_L,
        diff_slack=diff_bound - diff,
    )


def bound_grid(
    Ls=(2, 5, 10, 20),
    thetas=(0.05, 0.1, 0.15, 0.3),
    alphas=tuple(round(0.1 * i, 1) for i in range(1, 11)),
):
    """Yield ``(L, theta, alpha, q, m, report)`` over the bound-check grid (m = floor(L/theta))."""
    for L in Ls:
        for theta in thetas:
            q = theta / L
            m = math.floor(L / theta + 1e-9)
            for alpha in alphas:
                yield L, theta, alpha, q, m, check_h_bounds(L, q, m, alpha)
