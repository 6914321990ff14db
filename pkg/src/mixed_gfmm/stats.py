"""Friedman rank test and Nemenyi critical difference for comparing methods
over several datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import NumericError

# Studentized range quantiles divided by sqrt(2), eps = 0.05, for 2..20 methods.
NEMENYI_Q_05 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.949, 8: 3.031,
    9: 3.102, 10: 3.164, 11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354,
    15: 3.391, 16: 3.426, 17: 3.458, 18: 3.489, 19: 3.517, 20: 3.544,
}


@dataclass(frozen=True, eq=False)
class RankTable:
    """Scores of ``M`` methods (columns) on ``Z`` datasets (rows)."""

    scores: np.ndarray
    methods: tuple[str, ...]
    datasets: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        if scores.ndim != 2 or scores.shape != (len(self.datasets), len(self.methods)):
            raise ValueError("score matrix shape does not match dataset and method names")
        if scores.shape[0] < 2 or scores.shape[1] < 2:
            raise ValueError("need at least two datasets and two methods")
        if not np.all(np.isfinite(scores)):
            raise ValueError("score table has missing cells")


def average_ranks(table: RankTable, higher_is_better: bool = True) -> np.ndarray:
    """Mean rank of every method over datasets (1 = best, ties share the mean rank)."""
    s = -table.scores if higher_is_better else table.scores
    return np.mean([rankdata(row, method="average") for row in s], axis=0)


def friedman_chi2(ranks: Sequence[float], Z: int) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    M = ranks.shape[0]
    return 12.0 * Z / (M * (M + 1)) * (float(np.sum(ranks**2)) - M * (M + 1) ** 2 / 4.0)


def friedman_f(chi2: float, Z: int, M: int) -> float:
    denom = Z * (M - 1) - chi2
    if denom <= 0:
        raise NumericError("Friedman F undefined: chi-square at its maximum")
    return (Z - 1) * chi2 / denom


# regularized incomplete beta ---------------------------------------------------

_TINY = 1e-300


def _beta_cf(x: float, a: float, b: float, max_iter=10_000, eps=1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def betainc_reg(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the fraction converges fast on this side of the mean; use symmetry otherwise
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(x, a, b) / a
    return 1.0 - front * _beta_cf(1.0 - x, b, a) / b


def f_cdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    return betainc_reg(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0)


def f_critical(d1: int, d2: int, eps: float = 0.05, tol: float = 1e-7) -> float:
    """Upper ``eps`` quantile of the F(d1, d2) distribution by bisection."""
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    target = 1.0 - eps
    lo, hi = 0.0, 1.0
    while f_cdf(hi, d1, d2) < target:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise NumericError("could not bracket the F quantile")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f_cdf(mid, d1, d2) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            return 0.5 * (lo + hi)
    raise NumericError("F quantile bisection did not converge")


def friedman_decision(f_f: float, Z: int, M: int, eps: float = 0.05) -> bool:
    """Reject "all methods perform alike" when ``F_F`` exceeds the critical value."""
    return f_f > f_critical(M - 1, (M - 1) * (Z - 1), eps)


def nemenyi_cd(M: int, Z: int, eps: float = 0.05) -> float:
    if eps != 0.05:
        raise ValueError("only eps = 0.05 is tabulated")
    if M not in NEMENYI_Q_05:
        raise ValueError(f"number of methods must be within 2..20, got {M}")
    if Z < 1:
        raise ValueError("need at least one dataset")
    return NEMENYI_Q_05[M] * math.sqrt(M * (M + 1) / (6.0 * Z))


def cd_groups(ranks: Sequence[float], methods: Sequence[str], cd: float) -> list[tuple[str, ...]]:
    """Maximal runs of methods (sorted by rank) whose rank spread is within ``cd``.

    Runs contained in a longer run are dropped, as in a critical difference diagram.
    """
    order = sorted(range(len(methods)), key=lambda k: (ranks[k], methods[k]))
    runs = []
    for i in range(len(order)):
        j = i
        while j + 1 < len(order) and ranks[order[j + 1]] - ranks[order[i]] <= cd:
            j += 1
        if j > i:
            runs.append((i, j))
    maximal = [r for r in runs if not any(o != r and o[0] <= r[0] and r[1] <= o[1] for o in runs)]
    return [tuple(methods[order[k]] for k in range(a, b + 1)) for a, b in maximal]


@dataclass
class FriedmanSummary:
    methods: tuple[str, ...]
    ranks: np.ndarray
    chi2: float
    f_f: float
    critical: float
    reject: bool
    cd: float | None
    groups: list[tuple[str, ...]]


def friedman_report(table: RankTable, eps: float = 0.05, higher_is_better: bool = True) -> FriedmanSummary:
    Z, M = table.scores.shape
    ranks = average_ranks(table, higher_is_better)
    chi2 = friedman_chi2(ranks, Z)
    f_f = friedman_f(chi2, Z, M)
    critical = f_critical(M - 1, (M - 1) * (Z - 1), eps)
    cd = nemenyi_cd(M, Z, eps) if eps == 0.05 and M in NEMENYI_Q_05 else None
    groups = cd_groups(list(ranks), table.methods, cd) if cd is not None else []
    return FriedmanSummary(table.methods, ranks, chi2, f_f, critical, f_f > critical, cd, groups)
