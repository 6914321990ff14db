"""Single-pass online training of a mixed-attribute GFMM model.

Each labeled pattern is either already covered by a box of its class, is
absorbed by the best same-class box that may grow without breaking the size,
entropy and overlap constraints, or seeds a new point box.  Boxes are never
contracted, merged or deleted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .entropy import categorical_expansion_admissible
from .errors import DimensionError, PatternError
from .membership import mixed_membership_all
from .model import GfmmModel, Hyperbox, MixedPattern, absorb_pattern, create_point_hyperbox

log = logging.getLogger(__name__)


@dataclass
class FitReport:
    boxes_created: int = 0
    expansions: int = 0
    containments: int = 0
    overlap_rejections: int = 0

    def __add__(self, other: FitReport) -> FitReport:
        return FitReport(
            self.boxes_created + other.boxes_created,
            self.expansions + other.expansions,
            self.containments + other.containments,
            self.overlap_rejections + other.overlap_rejections,
        )

    @property
    def samples(self) -> int:
        return self.boxes_created + self.expansions + self.containments


def overlap_numeric(a: Hyperbox, b: Hyperbox) -> float:
    """Gap-based similarity of two boxes; exactly 1 when they overlap or touch."""
    if a.n != b.n:
        raise DimensionError(f"hyperboxes differ in continuous dimensions: {a.n} vs {b.n}")
    if a.n == 0:
        return 1.0
    left = 1.0 - np.clip(b.v - a.w, 0.0, 1.0)
    right = 1.0 - np.clip(a.v - b.w, 0.0, 1.0)
    return float(np.minimum(left, right).min())


def _same_share(ca, cb) -> bool:
    ta, tb = ca.total(), cb.total()
    # integer cross-multiplication keeps probability equality exact
    return any(ca[v] * tb == cb[v] * ta for v in ca.keys() & cb.keys())


def overlap_categorical(a: Hyperbox, b: Hyperbox) -> bool:
    """True when, on every categorical attribute, the boxes share a value
    with the same relative frequency."""
    if a.r != b.r:
        raise DimensionError(f"hyperboxes differ in categorical dimensions: {a.r} vs {b.r}")
    return all(_same_share(ca, cb) for ca, cb in zip(a.d, b.d))


def _numeric_overlap_mask(model: GfmmModel, box: Hyperbox, idx: np.ndarray) -> np.ndarray:
    if model.n == 0:
        return np.ones(len(idx), dtype=bool)
    V, W = model.V[idx], model.W[idx]
    left = 1.0 - np.clip(V - box.w, 0.0, 1.0)
    right = 1.0 - np.clip(box.v - W, 0.0, 1.0)
    return np.minimum(left, right).min(axis=1) == 1.0


def _other_class_indices(model: GfmmModel, label: str) -> np.ndarray:
    own = set(model.indices_of(label))
    return np.array([i for i in range(len(model)) if i not in own], dtype=np.intp)


def joint_overlap_with_other_classes(model: GfmmModel, candidate: Hyperbox) -> bool:
    """Does ``candidate`` overlap, numerically and categorically, a box of another class?"""
    model.check_box(candidate)
    others = _other_class_indices(model, candidate.label)
    if others.size == 0:
        return False
    hits = others[_numeric_overlap_mask(model, candidate, others)]
    return any(overlap_categorical(candidate, model.boxes[k]) for k in hits)


def _joint_overlap_scalar(model: GfmmModel, candidate: Hyperbox, skip: int) -> list[int]:
    """Box-by-box recheck used by the invariant guard."""
    return [
        k
        for k, other in enumerate(model.boxes)
        if k != skip
        and other.label != candidate.label
        and overlap_numeric(candidate, other) == 1.0
        and overlap_categorical(candidate, other)
    ]


class Learner:
    """Drives training of one model.

    ``update_on_containment`` controls whether a pattern already covered by
    a box is counted into that box (its categorical counts and ``n_i``).
    ``check_invariants`` re-verifies every committed expansion with an
    independent box-by-box overlap test and raises on violation.
    """

    def __init__(self, model: GfmmModel, *, update_on_containment=True, check_invariants=False):
        self.model = model
        self.update_on_containment = update_on_containment
        self.check_invariants = check_invariants
        self.report = FitReport()
        self.committed_checks = 0

    def fit_one(self, x: MixedPattern) -> FitReport:
        model = self.model
        model.check_pattern(x, labeled=True, normalized=True)
        delta = FitReport()
        idx = np.array(model.indices_of(x.label), dtype=np.intp)
        if idx.size:
            mem = mixed_membership_all(model, x, idx)
            # stable sort keeps creation order among equal memberships
            order = idx[np.argsort(-mem, kind="stable")]
            if mem.max() == 1.0:
                self._contain(int(order[0]), x)
                delta.containments = 1
            else:
                fits = self._within_size(order, x)
                for i in order[fits]:
                    outcome = self._try_expand(int(i), x)
                    if outcome == "expanded":
                        delta.expansions = 1
                        break
                    if outcome == "overlap":
                        delta.overlap_rejections += 1
        if not (delta.containments or delta.expansions):
            model.append(create_point_hyperbox(x, model.next_seq))
            delta.boxes_created = 1
        self.report = self.report + delta
        return delta

    def _contain(self, i: int, x: MixedPattern):
        if not self.update_on_containment:
            return
        box = self.model.boxes[i].copy()
        for counter, value in zip(box.d, x.cats):
            counter[value] += 1
        box.n_samples += 1
        self.model.replace(i, box)

    def _within_size(self, order: np.ndarray, x: MixedPattern) -> np.ndarray:
        """Mask of candidates whose grown edges all stay within theta."""
        if self.model.n == 0:
            return np.ones(order.size, dtype=bool)
        span = np.maximum(self.model.W[order], x.upper) - np.minimum(self.model.V[order], x.lower)
        return np.all(span <= self.model.params.theta, axis=1)

    def _try_expand(self, i: int, x: MixedPattern) -> str:
        model = self.model
        params = model.params
        box = model.boxes[i]
        ok, _ = categorical_expansion_admissible(box, x, params.delta, params.variant)
        if not ok:
            return "entropy"
        trial = absorb_pattern(box.copy(), x)
        if joint_overlap_with_other_classes(model, trial):
            return "overlap"
        if self.check_invariants:
            clash = _joint_overlap_scalar(model, trial, i)
            if clash:
                raise AssertionError(f"expanded box {i} overlaps other-class boxes {clash}")
            self.committed_checks += 1
        model.replace(i, trial)
        return "expanded"

    def fit_stream(self, patterns: Iterable[MixedPattern]) -> FitReport:
        total = FitReport()
        for k, x in enumerate(patterns):
            try:
                total = total + self.fit_one(x)
            except PatternError as exc:
                raise type(exc)(f"pattern {k}: {exc}") from exc
        log.debug("fit_stream: %s, %d boxes", total, len(self.model))
        return total


def fit_one(model: GfmmModel, x: MixedPattern, **kwargs) -> FitReport:
    return Learner(model, **kwargs).fit_one(x)


def fit_stream(model: GfmmModel, patterns: Iterable[MixedPattern], **kwargs) -> FitReport:
    return Learner(model, **kwargs).fit_stream(patterns)
