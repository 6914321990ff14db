"""Entropy-based admission test for growing a hyperbox on categorical attributes.

When a box holding ``n_i`` samples absorbs one more, the change on attribute
``j`` is ``Z_j = H_j(after) - n_i / (n_i + 1) * H_j(before)``.  It lies in
[0, 1], peaks exactly when the value is new to the box, and the peak
``log2(n_i + 1) - n_i / (n_i + 1) * log2(n_i)`` shrinks towards zero as the
box fills up.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import DimensionError
from .model import CategoryCounter, Hyperbox, MixedPattern


def _entropy_of_counts(counts: Iterable[int], total: int) -> float:
    h = 0.0
    for c in counts:
        p = c / total
        h -= p * math.log2(p)
    return h


def attribute_entropy(counter: CategoryCounter) -> float:
    total = counter.total()
    if total < 1:
        raise ValueError("empty category counter")
    return _entropy_of_counts(counter.values(), total)


def entropy_change(counter: CategoryCounter, value) -> float:
    """Entropy change if one more ``value`` were absorbed; ``counter`` is untouched."""
    total = counter.total()
    if total < 1:
        raise ValueError("empty category counter")
    grown = total + 1
    before = after = 0.0
    for v, c in counter.items():
        p = c / total
        before -= p * math.log2(p)
        q = (c + 1 if v == value else c) / grown
        after -= q * math.log2(q)
    if value not in counter:
        q = 1 / grown
        after -= q * math.log2(q)
    return after - total / grown * before


def entropy_change_upper_bound(n_i: int) -> float:
    if n_i < 1:
        raise ValueError("a hyperbox holds at least one sample")
    return math.log2(n_i + 1) - n_i / (n_i + 1) * math.log2(n_i)


def categorical_expansion_admissible(
    box: Hyperbox, x: MixedPattern, delta: float, variant: str = "v1"
) -> tuple[bool, np.ndarray]:
    """Entropy test for absorbing ``x`` into ``box``.

    ``v1`` bounds every attribute's change by ``delta``; ``v2`` bounds their
    mean.  Returns the verdict and the per-attribute changes.
    """
    if box.r != x.r:
        raise DimensionError(f"pattern has {x.r} categorical attributes, hyperbox has {box.r}")
    if x.r == 0:
        return True, np.zeros(0)
    z = np.array([entropy_change(c, v) for c, v in zip(box.d, x.cats)])
    if variant == "v1":
        ok = z.max() <= delta
    elif variant == "v2":
        ok = z.sum() / x.r <= delta
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return bool(ok), z


def numeric_expansion_admissible(box: Hyperbox, x: MixedPattern, theta: float) -> bool:
    """Would every edge of the grown box stay within ``theta``?"""
    if box.n != x.n:
        raise DimensionError(f"pattern has {x.n} continuous attributes, hyperbox has {box.n}")
    if x.n == 0:
        return True
    span = np.maximum(box.w, x.upper) - np.minimum(box.v, x.lower)
    return bool(np.all(span <= theta))
