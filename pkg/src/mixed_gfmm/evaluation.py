"""Class balanced accuracy, repeated stratified cross-validation and the ways
of choosing the numeric/categorical trade-off ``alpha``."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import persist
from .errors import DataError, NumericError
from .learner import Learner
from .model import ColumnKind, FeatureSchema, GfmmModel, HyperParams, MixedPattern, patterns_only
from .predictor import predict_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in ``classes`` order."""

    classes: tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_labels(cls, y_true, y_pred, classes=None) -> ConfusionMatrix:
        if classes is None:
            classes = sorted(set(y_true) | set(y_pred))
        classes = tuple(classes)
        pos = {c: k for k, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[pos[t], pos[p]] += 1
        return cls(classes, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def cba(cm: ConfusionMatrix | np.ndarray, *, skip_absent=False) -> float:
    """Class balanced accuracy: mean over classes of ``C_ii / max(row_i, col_i)``.

    A class with no true samples makes the score undefined; with
    ``skip_absent`` such classes are left out of the average instead.
    """
    counts = np.asarray(cm.counts if isinstance(cm, ConfusionMatrix) else cm)
    rows, cols = counts.sum(axis=1), counts.sum(axis=0)
    present = rows > 0
    if not present.all():
        if not skip_absent:
            raise DataError("class absent from evaluation set")
        if not present.any():
            raise DataError("empty evaluation set")
    diag = np.diag(counts)[present]
    return float(np.mean(diag / np.maximum(rows, cols)[present]))


def cba_score(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    return cba(ConfusionMatrix.from_labels(y_true, y_pred), skip_absent=True)


# splitting -----------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    repeats: int = 10
    folds: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


def stratified_folds(labels: Sequence, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Partition indices into ``folds`` test folds, class by class.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so fold sizes stay balanced as well.
    """
    labels = list(labels)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    start = 0
    for cls in sorted(set(labels)):
        members = np.array([i for i, lab in enumerate(labels) if lab == cls])
        members = members[rng.permutation(len(members))]
        for k, i in enumerate(members):
            buckets[(start + k) % folds].append(int(i))
        start = (start + len(members)) % folds
    return [np.array(sorted(b), dtype=np.intp) for b in buckets]


def stratified_repeated_kfold(labels: Sequence, plan: CvPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """``repeats * folds`` (train, test) index pairs, indices ascending."""
    n = len(labels)
    splits = []
    for rep in range(plan.repeats):
        rng = np.random.default_rng(plan.seed + rep)
        for test in stratified_folds(labels, plan.folds, rng):
            train = np.setdiff1d(np.arange(n), test)
            splits.append((train, test))
    return splits


# alpha -------------------------------------------------------------------------


def fixed_alpha(n: int, r: int) -> float:
    if n + r < 1:
        raise ValueError("need at least one feature")
    return n / (n + r)


def estimate_alpha_v1(cba_num, cba_cat, n: int, r: int) -> float:
    """Feature-count weighted share of the numeric-only scores."""
    num = float(np.sum(cba_num)) * n
    den = num + float(np.sum(cba_cat)) * r
    if den == 0:
        raise NumericError("alpha estimate undefined: all scores are zero")
    return num / den


def estimate_alpha_v2(cba_num, cba_cat) -> float:
    """Share of the numeric-only scores in the total."""
    num = float(np.sum(cba_num))
    den = num + float(np.sum(cba_cat))
    if den == 0:
        raise NumericError("alpha estimate undefined: all scores are zero")
    return num / den


# training helpers ----------------------------------------------------------


def train(patterns: Sequence[MixedPattern], schema: FeatureSchema, params: HyperParams, **kwargs) -> GfmmModel:
    model = GfmmModel(schema, params)
    Learner(model, **kwargs).fit_stream(patterns)
    return model


def evaluate(model: GfmmModel, patterns: Sequence[MixedPattern]) -> float:
    preds = predict_batch(model, patterns)
    return cba_score([p.label for p in patterns], [p.label for p in preds])


def _inner_splits(patterns: Sequence[MixedPattern], folds: int, seed: int):
    labels = [p.label for p in patterns]
    test_folds = stratified_folds(labels, folds, np.random.default_rng(seed))
    everything = np.arange(len(patterns))
    for test in test_folds:
        if test.size == 0:
            continue
        train_idx = np.setdiff1d(everything, test)
        yield [patterns[i] for i in train_idx], [patterns[i] for i in test]


def run_alpha_estimation(
    patterns: Sequence[MixedPattern],
    schema: FeatureSchema,
    params: HyperParams,
    method: str,
    *,
    inner_folds: int = 3,
    seed: int = 0,
) -> float:
    """Estimate alpha on a (normalized) training fold.

    For every inner split a numeric-only and a categorical-only model are
    trained and scored on the held-out part; the scores feed
    :func:`estimate_alpha_v1` or :func:`estimate_alpha_v2`.
    """
    n, r = schema.n, schema.r
    if n == 0 or r == 0:
        raise DataError("estimation undefined: dataset needs continuous and categorical features")
    if method not in ("v1", "v2"):
        raise ValueError(f"unknown estimation method {method!r}")
    num_schema = schema.only(ColumnKind.CONTINUOUS)
    cat_schema = schema.only(ColumnKind.CATEGORICAL)
    num_scores, cat_scores = [], []
    for tr, va in _inner_splits(patterns, inner_folds, seed):
        m_num = train(patterns_only(tr, "continuous"), num_schema, replace(params, alpha=1.0))
        m_cat = train(patterns_only(tr, "categorical"), cat_schema, replace(params, alpha=0.0))
        num_scores.append(evaluate(m_num, patterns_only(va, "continuous")))
        cat_scores.append(evaluate(m_cat, patterns_only(va, "categorical")))
    log.debug("alpha estimation: numeric %s categorical %s", num_scores, cat_scores)
    if method == "v1":
        return estimate_alpha_v1(num_scores, cat_scores, n, r)
    return estimate_alpha_v2(num_scores, cat_scores)


# grid search -----------------------------------------------------------------

THETA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))
DELTA_GRID = (0.1, 0.3, 0.5, 0.9, 1.0)
ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(0, 11))


@dataclass(frozen=True)
class ParamGrid:
    theta: tuple[float, ...] = THETA_GRID
    delta: tuple[float, ...] = DELTA_GRID
    alpha: tuple[float, ...] = ALPHA_GRID

    def __post_init__(self):
        if not (self.theta and self.delta and self.alpha):
            raise ValueError("every grid axis needs at least one value")


def tune_grid(
    patterns: Sequence[MixedPattern],
    schema: FeatureSchema,
    grid: ParamGrid,
    *,
    base: HyperParams | None = None,
    inner_folds: int = 3,
    seed: int = 0,
) -> HyperParams:
    """Best (theta, delta, alpha) by mean inner-validation CBA.

    Ties go to the smaller theta, then the smaller delta, then the alpha
    closest to ``n / (n + r)``.
    """
    base = base or HyperParams()
    ref = fixed_alpha(schema.n, schema.r)
    splits = list(_inner_splits(patterns, inner_folds, seed))
    best_key, best = None, None
    for theta, delta, alpha in itertools.product(grid.theta, grid.delta, grid.alpha):
        params = replace(base, theta=theta, delta=delta, alpha=alpha)
        score = float(np.mean([evaluate(train(tr, schema, params), va) for tr, va in splits]))
        key = (-score, theta, delta, abs(alpha - ref), alpha)
        if best_key is None or key < best_key:
            best_key, best = key, params
    return best


# cross-validation --------------------------------------------------------------

ALPHA_MODES = ("auto", "est-v1", "est-v2", "tune")


@dataclass
class CvResult:
    fold_cba: list[float]
    alphas: list[float] = field(default_factory=list)
    boxes: list[int] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_cba))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_cba))


def _fold_params(train_pats, schema, params, alpha, inner_seed):
    if alpha == "auto":
        return replace(params, alpha=fixed_alpha(schema.n, schema.r))
    if alpha in ("est-v1", "est-v2"):
        a = run_alpha_estimation(train_pats, schema, params, alpha[-2:], seed=inner_seed)
        return replace(params, alpha=a)
    if alpha == "tune":
        grid = ParamGrid(theta=(params.theta,), delta=(params.delta,))
        return tune_grid(train_pats, schema, grid, base=params, seed=inner_seed)
    return replace(params, alpha=float(alpha))


def _run_fold(data, train_idx, test_idx, params, alpha, inner_seed, order_seed):
    schema = data.schema
    train_raw = data.subset(train_idx)
    scaler = persist.fit_scaler(train_raw, schema)
    train_pats = scaler.apply(train_raw)
    test_pats = scaler.apply(data.subset(test_idx))
    if order_seed is not None:
        perm = np.random.default_rng(order_seed).permutation(len(train_pats))
        train_pats = [train_pats[i] for i in perm]
    fold_params = _fold_params(train_pats, schema, params, alpha, inner_seed)
    model = train(train_pats, schema, fold_params)
    return evaluate(model, test_pats), model.params.alpha, len(model)


def run_cv(
    data: persist.RawDataset,
    params: HyperParams,
    plan: CvPlan = CvPlan(),
    *,
    alpha: str | float = "auto",
    shuffle_seed: int | None = None,
    jobs: int = 1,
) -> CvResult:
    """Repeated stratified CV; the scaler is fitted on each training fold only.

    Training follows file order within a fold unless ``shuffle_seed`` is set.
    ``alpha`` is a number or one of ``auto``, ``est-v1``, ``est-v2``, ``tune``.
    """
    if isinstance(alpha, str) and alpha not in ALPHA_MODES:
        alpha = float(alpha)
    splits = stratified_repeated_kfold(data.labels, plan)
    tasks = []
    for k, (tr, te) in enumerate(splits):
        inner_seed = int(np.random.SeedSequence([plan.seed, k]).generate_state(1)[0])
        order_seed = None
        if shuffle_seed is not None:
            order_seed = int(np.random.SeedSequence([shuffle_seed, k]).generate_state(1)[0])
        tasks.append((data, tr, te, params, alpha, inner_seed, order_seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_fold, *zip(*tasks)))
    else:
        outcomes = [_run_fold(*t) for t in tasks]
    result = CvResult([o[0] for o in outcomes], [o[1] for o in outcomes], [o[2] for o in outcomes])
    log.info("cv: mean CBA %.5f over %d folds", result.mean, len(outcomes))
    return result
