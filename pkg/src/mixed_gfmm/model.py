"""Hyperboxes, patterns and schemas for mixed continuous/categorical data.

A hyperbox keeps a min point ``v`` and max point ``w`` over the ``n``
continuous attributes (normalized to the unit cube) and, for each of the
``r`` categorical attributes, a count of every symbolic value it has
absorbed.  :class:`GfmmModel` owns an ordered list of hyperboxes together
with dense numeric caches used by the vectorized membership code.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, PatternError


class ColumnKind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"
    CLASS = "class"
    IGNORE = "ignore"


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind
    range: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ColumnKind(self.kind))
        if self.range is not None:
            if self.kind is not ColumnKind.CONTINUOUS:
                raise ValueError(f"column {self.name!r}: only continuous columns take a range")
            lo, hi = (float(v) for v in self.range)
            if not lo < hi:
                raise ValueError(f"column {self.name!r}: range min must be < max")
            object.__setattr__(self, "range", (lo, hi))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column declarations of a dataset."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        n_class = sum(c.kind is ColumnKind.CLASS for c in cols)
        if n_class != 1:
            raise ValueError(f"schema must declare exactly one class column, found {n_class}")
        if self.n + self.r < 1:
            raise ValueError("schema declares no continuous or categorical feature")

    @property
    def continuous(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.kind is ColumnKind.CONTINUOUS)

    @property
    def categorical(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.kind is ColumnKind.CATEGORICAL)

    @property
    def class_column(self) -> Column:
        return next(c for c in self.columns if c.kind is ColumnKind.CLASS)

    @property
    def n(self) -> int:
        return len(self.continuous)

    @property
    def r(self) -> int:
        return len(self.categorical)

    def only(self, kind: ColumnKind | str) -> FeatureSchema:
        """Copy keeping one feature kind; the other kind becomes ``ignore``."""
        kind = ColumnKind(kind)
        drop = {ColumnKind.CONTINUOUS, ColumnKind.CATEGORICAL} - {kind}
        cols = tuple(
            Column(c.name, ColumnKind.IGNORE) if c.kind in drop else c for c in self.columns
        )
        return FeatureSchema(cols)


@dataclass(frozen=True, eq=False)
class MixedPattern:
    """One sample: interval ``[lower, upper]`` over continuous attributes plus
    one symbolic value per categorical attribute."""

    lower: np.ndarray
    upper: np.ndarray
    cats: tuple[str, ...] = ()
    label: str | None = None

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError("lower and upper bounds differ in length")
        if np.any(lower > upper):
            raise PatternError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cats", tuple(sys.intern(str(c)) for c in self.cats))

    @classmethod
    def point(cls, values: Iterable[float], cats: Iterable[str] = (), label: str | None = None):
        values = np.asarray(list(values), dtype=np.float64)
        return cls(values, values.copy(), tuple(cats), label)

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def r(self) -> int:
        return len(self.cats)

    def is_normalized(self) -> bool:
        return bool(np.all(self.lower >= 0.0) and np.all(self.upper <= 1.0))

    def __eq__(self, other):
        if not isinstance(other, MixedPattern):
            return NotImplemented
        return (
            self.lower.tolist() == other.lower.tolist()
            and self.upper.tolist() == other.upper.tolist()
            and self.cats == other.cats
            and self.label == other.label
        )

    def __hash__(self):
        return hash((tuple(self.lower.tolist()), tuple(self.upper.tolist()), self.cats, self.label))


class CategoryCounter(Counter):
    """Multiset of symbolic values seen on one categorical attribute of a box."""

    def added(self, value) -> CategoryCounter:
        """Copy with ``value`` counted once more."""
        out = CategoryCounter(self)
        out[value] += 1
        return out


@dataclass(frozen=True)
class BoxSnapshot:
    v: tuple[float, ...]
    w: tuple[float, ...]
    d: tuple[tuple[tuple[str, int], ...], ...]
    label: str
    n_samples: int
    created_seq: int


@dataclass(eq=False)
class Hyperbox:
    v: np.ndarray
    w: np.ndarray
    d: list[CategoryCounter]
    label: str
    n_samples: int = 1
    created_seq: int = 0

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def r(self) -> int:
        return len(self.d)

    def copy(self) -> Hyperbox:
        return Hyperbox(
            self.v.copy(),
            self.w.copy(),
            [CategoryCounter(c) for c in self.d],
            self.label,
            self.n_samples,
            self.created_seq,
        )

    def __eq__(self, other):
        if not isinstance(other, Hyperbox):
            return NotImplemented
        return snapshot_box(self) == snapshot_box(other)

    def __repr__(self):
        d = [dict(c) for c in self.d]
        return (
            f"Hyperbox(label={self.label!r}, n={self.n_samples}, v={self.v.tolist()}, "
            f"w={self.w.tolist()}, d={d})"
        )


VARIANTS = ("v1", "v2")


@dataclass(frozen=True)
class HyperParams:
    """Learning hyper-parameters.

    ``theta`` caps the hyperbox edge length, ``delta`` caps the entropy
    change on categorical attributes, ``alpha`` weighs numeric against
    categorical membership and ``gamma`` is the ramp sensitivity (scalar or
    one value per continuous attribute).
    """

    theta: float = 0.1
    delta: float = 0.1
    alpha: float = 0.5
    gamma: float | tuple[float, ...] = 1.0
    variant: str = "v1"

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        gamma = self.gamma
        if np.ndim(gamma) == 0:
            gamma = float(gamma)
            if gamma <= 0:
                raise ValueError("gamma must be positive")
        else:
            gamma = tuple(float(g) for g in gamma)
            if any(g <= 0 for g in gamma):
                raise ValueError("gamma must be positive")
        object.__setattr__(self, "gamma", gamma)

    def gamma_vector(self, n: int) -> np.ndarray:
        if isinstance(self.gamma, tuple):
            if len(self.gamma) != n:
                raise DimensionError(f"gamma has {len(self.gamma)} entries, expected {n}")
            return np.array(self.gamma, dtype=np.float64)
        return np.full(n, self.gamma, dtype=np.float64)

    def resolved(self, n: int, r: int) -> HyperParams:
        """Force alpha to 1 without categorical and to 0 without continuous attributes."""
        if r == 0 and self.alpha != 1.0:
            return replace(self, alpha=1.0)
        if n == 0 and self.alpha != 0.0:
            return replace(self, alpha=0.0)
        return self


def create_point_hyperbox(x: MixedPattern, seq: int = 0) -> Hyperbox:
    if x.label is None:
        raise PatternError("unlabeled pattern cannot seed a hyperbox")
    return Hyperbox(
        x.lower.copy(),
        x.upper.copy(),
        [CategoryCounter({c: 1}) for c in x.cats],
        x.label,
        1,
        seq,
    )


def _check_dims(b: Hyperbox, x: MixedPattern):
    if b.n != x.n or b.r != x.r:
        raise DimensionError(
            f"pattern has n={x.n}, r={x.r} but hyperbox has n={b.n}, r={b.r}"
        )


def absorb_pattern(b: Hyperbox, x: MixedPattern) -> Hyperbox:
    """Grow ``b`` in place to cover ``x`` and count its categorical values."""
    if x.label != b.label:
        raise PatternError(f"pattern label {x.label!r} differs from hyperbox label {b.label!r}")
    _check_dims(b, x)
    np.minimum(b.v, x.lower, out=b.v)
    np.maximum(b.w, x.upper, out=b.w)
    for counter, value in zip(b.d, x.cats):
        counter[value] += 1
    b.n_samples += 1
    return b


def snapshot_box(b: Hyperbox) -> BoxSnapshot:
    return BoxSnapshot(
        tuple(b.v.tolist()),
        tuple(b.w.tolist()),
        tuple(tuple(sorted(c.items())) for c in b.d),
        b.label,
        b.n_samples,
        b.created_seq,
    )


def restore_box(b: Hyperbox, s: BoxSnapshot) -> Hyperbox:
    b.v = np.array(s.v, dtype=np.float64)
    b.w = np.array(s.w, dtype=np.float64)
    b.d = [CategoryCounter(dict(items)) for items in s.d]
    b.label = s.label
    b.n_samples = s.n_samples
    b.created_seq = s.created_seq
    return b


@dataclass(eq=False)
class GfmmModel:
    """Ordered hyperbox collection plus hyper-parameters and schema.

    Boxes must be added and modified through :meth:`append` and
    :meth:`replace`; the model mirrors them into contiguous arrays so that
    membership against every box is a handful of numpy operations.
    """

    schema: FeatureSchema
    params: HyperParams
    boxes: list[Hyperbox] = field(default_factory=list)
    next_seq: int = 0

    def __post_init__(self):
        self.params = self.params.resolved(self.n, self.r)
        self.params.gamma_vector(self.n)
        boxes, self.boxes = self.boxes, []
        self._reset_cache(max(16, len(boxes)))
        for b in boxes:
            self.append(b)

    @property
    def n(self) -> int:
        return self.schema.n

    @property
    def r(self) -> int:
        return self.schema.r

    def __len__(self):
        return len(self.boxes)

    # cache maintenance -------------------------------------------------

    def _reset_cache(self, cap):
        self._cap = cap
        self._V = np.zeros((cap, self.n))
        self._W = np.zeros((cap, self.n))
        self._counts = np.zeros(cap, dtype=np.int64)
        # per categorical attribute: value -> count of that value in every box
        self._cat_index: list[dict[str, np.ndarray]] = [{} for _ in range(self.r)]
        self._by_label: dict[str, list[int]] = {}

    def _grow(self):
        cap = self._cap * 2
        self._V = np.resize(self._V, (cap, self.n))
        self._W = np.resize(self._W, (cap, self.n))
        self._counts = np.concatenate([self._counts, np.zeros(cap - self._cap, np.int64)])
        for index in self._cat_index:
            for value, arr in index.items():
                index[value] = np.concatenate([arr, np.zeros(cap - self._cap, np.int64)])
        self._cap = cap

    def _write(self, i: int, b: Hyperbox, old: Hyperbox | None):
        self._V[i] = b.v
        self._W[i] = b.w
        self._counts[i] = b.n_samples
        for j, counter in enumerate(b.d):
            index = self._cat_index[j]
            if old is not None:
                for value in old.d[j]:
                    index[value][i] = 0
            for value, count in counter.items():
                arr = index.get(value)
                if arr is None:
                    arr = index[value] = np.zeros(self._cap, np.int64)
                arr[i] = count

    def check_box(self, b: Hyperbox):
        if b.n != self.n or b.r != self.r:
            raise DimensionError(
                f"hyperbox has n={b.n}, r={b.r} but model expects n={self.n}, r={self.r}"
            )

    def append(self, b: Hyperbox) -> int:
        self.check_box(b)
        if len(self.boxes) == self._cap:
            self._grow()
        i = len(self.boxes)
        self.boxes.append(b)
        self._write(i, b, None)
        self._by_label.setdefault(b.label, []).append(i)
        self.next_seq = max(self.next_seq, b.created_seq + 1)
        return i

    def replace(self, i: int, b: Hyperbox):
        self.check_box(b)
        old = self.boxes[i]
        if old.label != b.label:
            raise ValueError("replacement hyperbox must keep its class label")
        self.boxes[i] = b
        self._write(i, b, old)

    # read-only views -----------------------------------------------------

    @property
    def V(self) -> np.ndarray:
        return self._V[: len(self.boxes)]

    @property
    def W(self) -> np.ndarray:
        return self._W[: len(self.boxes)]

    @property
    def n_samples(self) -> np.ndarray:
        return self._counts[: len(self.boxes)]

    @property
    def labels(self) -> list[str]:
        return [b.label for b in self.boxes]

    def classes(self) -> list[str]:
        return sorted(self._by_label)

    def indices_of(self, label: str) -> list[int]:
        return self._by_label.get(label, [])

    def value_counts(self, j: int, value: str) -> np.ndarray | None:
        """Count of ``value`` on categorical attribute ``j`` for every box."""
        arr = self._cat_index[j].get(value)
        return None if arr is None else arr[: len(self.boxes)]

    def check_pattern(self, x: MixedPattern, *, labeled=False, normalized=False):
        if x.n != self.n or x.r != self.r:
            raise DimensionError(
                f"pattern has n={x.n}, r={x.r} but model expects n={self.n}, r={self.r}"
            )
        if labeled and x.label is None:
            raise PatternError("unlabeled pattern cannot be learned")
        if normalized and not x.is_normalized():
            raise PatternError("continuous values must be normalized into [0, 1]")

    def copy(self) -> GfmmModel:
        return GfmmModel(self.schema, self.params, [b.copy() for b in self.boxes], self.next_seq)

    def same_as(self, other: GfmmModel) -> bool:
        """Field-wise equality of parameters and every hyperbox."""
        return (
            self.schema == other.schema
            and self.params == other.params
            and len(self.boxes) == len(other.boxes)
            and all(a == b for a, b in zip(self.boxes, other.boxes))
        )


def patterns_only(patterns: Sequence[MixedPattern], kind: ColumnKind | str) -> list[MixedPattern]:
    """Drop the categorical or the continuous part of every pattern."""
    kind = ColumnKind(kind)
    empty = np.zeros(0)
    if kind is ColumnKind.CONTINUOUS:
        return [MixedPattern(p.lower, p.upper, (), p.label) for p in patterns]
    return [MixedPattern(empty, empty, p.cats, p.label) for p in patterns]
