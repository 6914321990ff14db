"""Classification by maximum membership.

When boxes of several classes share the top membership, each tied class is
scored by the membership-weighted share of training samples its winning
boxes hold, and the best share wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GfmmError, PatternError
from .membership import mixed_membership_all
from .model import GfmmModel, MixedPattern


@dataclass
class Prediction:
    label: str
    winning_membership: float
    per_class_scores: dict[str, float] = field(default_factory=dict)
    tie_broken: bool = False


def _weighted_shares(labels, weights) -> dict[str, float]:
    totals: dict[str, float] = {}
    for lab, wgt in zip(labels, weights):
        totals[lab] = totals.get(lab, 0.0) + wgt
    denom = sum(weights)
    return {lab: t / denom for lab, t in totals.items()}


def predict(model: GfmmModel, x: MixedPattern) -> Prediction:
    if len(model) == 0:
        raise GfmmError("no hyperboxes")
    mem = mixed_membership_all(model, x)
    b_win = float(mem.max())
    winners = np.flatnonzero(mem == b_win)
    labels = [model.boxes[i].label for i in winners]
    classes = set(labels)
    if len(classes) == 1:
        return Prediction(labels[0], b_win, {labels[0]: 1.0}, False)
    n = model.n_samples[winners]
    # with b_win == 0 every weight vanishes; the common factor cancels anyway
    weights = (n * b_win if b_win > 0 else n.astype(np.float64)).tolist()
    scores = _weighted_shares(labels, weights)
    best = max(scores.values())
    label = min(lab for lab, s in scores.items() if s == best)
    return Prediction(label, b_win, scores, True)


def predict_batch(model: GfmmModel, patterns: Sequence[MixedPattern]) -> list[Prediction]:
    out = []
    for k, x in enumerate(patterns):
        try:
            out.append(predict(model, x))
        except PatternError as exc:
            raise type(exc)(f"pattern {k}: {exc}") from exc
    return out
