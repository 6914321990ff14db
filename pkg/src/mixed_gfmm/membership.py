"""Degree-of-fit between patterns and hyperboxes.

The scalar functions take a single :class:`Hyperbox`; the ``*_all`` variants
evaluate every box of a :class:`GfmmModel` at once.  Both follow the same
operation order, so they agree to the last bit.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .model import CategoryCounter, GfmmModel, HyperParams, Hyperbox, MixedPattern


def ramp(xi, gamma):
    """Saturating linear ramp: 0 below zero, ``xi * gamma`` in between, 1 above one."""
    if np.any(np.asarray(gamma) <= 0):
        raise ValueError("gamma must be positive")
    return np.clip(np.multiply(xi, gamma), 0.0, 1.0)


def _numeric_terms(lower, upper, v, w, gamma):
    above = 1.0 - np.clip((upper - w) * gamma, 0.0, 1.0)
    below = 1.0 - np.clip((v - lower) * gamma, 0.0, 1.0)
    return np.minimum(above, below)


def numeric_membership(x: MixedPattern, b: Hyperbox, gamma=1.0) -> float:
    if x.n != b.n:
        raise DimensionError(f"pattern has {x.n} continuous attributes, hyperbox has {b.n}")
    if x.n == 0:
        return 1.0
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (x.n,))
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    return float(_numeric_terms(x.lower, x.upper, b.v, b.w, gamma).min())


def categorical_probability(value, counter: CategoryCounter) -> float:
    total = counter.total()
    if total < 1:
        raise ValueError("empty category counter")
    return counter.get(value, 0) / total


def _combine(alpha: float, numeric, cat_sum, r: int):
    if r == 0:
        return alpha * numeric
    return alpha * numeric + (1.0 - alpha) * (cat_sum / r)


def mixed_membership(x: MixedPattern, b: Hyperbox, params: HyperParams) -> float:
    if x.n != b.n or x.r != b.r:
        raise DimensionError(f"pattern has n={x.n}, r={x.r} but hyperbox has n={b.n}, r={b.r}")
    numeric = numeric_membership(x, b, params.gamma_vector(x.n)) if x.n else 1.0
    cat_sum = 0.0
    for value, counter in zip(x.cats, b.d):
        cat_sum = cat_sum + categorical_probability(value, counter)
    return float(_combine(params.alpha, numeric, cat_sum, x.r))


def numeric_membership_all(model: GfmmModel, x: MixedPattern, idx=None) -> np.ndarray:
    """Numeric membership of ``x`` in every box (or the boxes listed in ``idx``)."""
    V, W = model.V, model.W
    if idx is not None:
        V, W = V[idx], W[idx]
    if model.n == 0:
        return np.ones(V.shape[0])
    gamma = model.params.gamma_vector(model.n)
    return _numeric_terms(x.lower, x.upper, V, W, gamma).min(axis=1)


def categorical_sum_all(model: GfmmModel, x: MixedPattern, idx=None) -> np.ndarray:
    """Sum over categorical attributes of the probability of ``x``'s value."""
    totals = model.n_samples if idx is None else model.n_samples[idx]
    out = np.zeros(totals.shape[0])
    for j, value in enumerate(x.cats):
        counts = model.value_counts(j, value)
        if counts is None:
            continue  # value never seen by any box on this attribute
        if idx is not None:
            counts = counts[idx]
        out = out + counts / totals
    return out


def mixed_membership_all(model: GfmmModel, x: MixedPattern, idx=None) -> np.ndarray:
    model.check_pattern(x)
    numeric = numeric_membership_all(model, x, idx)
    cat_sum = categorical_sum_all(model, x, idx) if model.r else 0.0
    return _combine(model.params.alpha, numeric, cat_sum, model.r)

