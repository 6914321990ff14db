"""Reading and writing schemas, CSV datasets, models and results tables.

Schema files hold one column per line, ``name,kind[,min,max]`` with kind in
``continuous``, ``categorical``, ``class`` or ``ignore``; ``#`` starts a
comment.  Models are written in a line-oriented text format::

    GFMM-MODEL 1
    params theta=<r> delta=<r> alpha=<r> gamma=<r|r,r,...> variant=<v1|v2>
    schema <k>
    column <name>,<kind>[,<min>,<max>]        (k lines)
    box label=<id> seq=<int> n=<int> V=<r,...> W=<r,...> D=<attr>:{<val>=<count>;...}|...
    end boxes=<m> sha256=<hex digest of every preceding line>

Reals use 17 significant digits so a save/load round trip is bit-exact.
Labels, attribute names and categorical values are percent-encoded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import quote, unquote

import numpy as np

from .errors import DataError, ModelFormatError
from .model import (
    CategoryCounter,
    Column,
    ColumnKind,
    FeatureSchema,
    GfmmModel,
    HyperParams,
    Hyperbox,
    MixedPattern,
)

MODEL_HEADER = "GFMM-MODEL 1"
MISSING_MARKERS = {"", "?", "NA", "NaN", "nan"}


# schema --------------------------------------------------------------------


def parse_schema(text: str) -> FeatureSchema:
    columns = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 4) or not parts[0]:
            raise DataError("malformed schema line, expected name,kind[,min,max]", line=lineno)
        name, kind = parts[0], parts[1]
        try:
            kind = ColumnKind(kind)
        except ValueError:
            raise DataError(f"unknown column kind {kind!r}", line=lineno) from None
        rng = None
        if len(parts) == 4:
            try:
                rng = (float(parts[2]), float(parts[3]))
            except ValueError:
                raise DataError("range bounds must be numbers", line=lineno) from None
        if kind is ColumnKind.CLASS and any(c.kind is ColumnKind.CLASS for c in columns):
            raise DataError("duplicate class column", line=lineno)
        try:
            columns.append(Column(name, kind, rng))
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
    try:
        return FeatureSchema(tuple(columns))
    except ValueError as exc:
        raise DataError(str(exc)) from None


def load_schema(path) -> FeatureSchema:
    return parse_schema(Path(path).read_text())


def format_schema(schema: FeatureSchema) -> str:
    lines = []
    for c in schema.columns:
        line = f"{c.name},{c.kind.value}"
        if c.range is not None:
            line += f",{_real(c.range[0])},{_real(c.range[1])}"
        lines.append(line)
    return "\n".join(lines) + "\n"


# datasets ------------------------------------------------------------------


@dataclass
class RawDataset:
    """Typed rows of a CSV file, before normalization.

    ``cont`` is an ``(N, n)`` float array, ``cats`` one tuple of symbolic
    values per row and ``labels`` the class cells (``None`` when the file has
    no class column).
    """

    schema: FeatureSchema
    cont: np.ndarray
    cats: list[tuple[str, ...]]
    labels: list[str | None]
    header: list[str] = field(default_factory=list)
    rows: list[list[str]] = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx: Sequence[int]) -> RawDataset:
        idx = list(idx)
        return RawDataset(
            self.schema,
            self.cont[idx],
            [self.cats[i] for i in idx],
            [self.labels[i] for i in idx],
            self.header,
            [self.rows[i] for i in idx] if self.rows else [],
        )


def read_dataset(stream, schema: FeatureSchema, *, require_label=True) -> RawDataset:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty data file", line=1) from None
    position = {name: k for k, name in enumerate(header)}
    wanted = [c for c in schema.columns if c.kind is not ColumnKind.IGNORE]
    for c in wanted:
        if c.name in position:
            continue
        if c.kind is ColumnKind.CLASS and not require_label:
            continue
        raise DataError(f"header lacks schema column {c.name!r}", line=1)
    schema_names = [c.name for c in schema.columns]
    if require_label and header != schema_names:
        raise DataError("header does not match the schema column order", line=1)

    cont_cols = [position[c.name] for c in schema.continuous]
    cat_cols = [position[c.name] for c in schema.categorical]
    class_name = schema.class_column.name
    class_col = position.get(class_name)

    cont, cats, labels, rows = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} cells, found {len(row)}", line=lineno)
        row = [cell.strip() for cell in row]
        values = []
        for k in cont_cols:
            cell = row[k]
            if cell in MISSING_MARKERS:
                raise DataError("missing value", line=lineno, column=header[k])
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r}", line=lineno, column=header[k]) from None
            if not math.isfinite(val):
                raise DataError(f"non-finite value {cell!r}", line=lineno, column=header[k])
            values.append(val)
        symbols = []
        for k in cat_cols:
            if row[k] in MISSING_MARKERS:
                raise DataError("missing value", line=lineno, column=header[k])
            symbols.append(sys.intern(row[k]))
        label = None
        if class_col is not None:
            label = row[class_col]
            if label in MISSING_MARKERS:
                raise DataError("missing class label", line=lineno, column=class_name)
            label = sys.intern(label)
        cont.append(values)
        cats.append(tuple(symbols))
        labels.append(label)
        rows.append(row)
    arr = np.array(cont, dtype=np.float64).reshape(len(cont), len(cont_cols))
    return RawDataset(schema, arr, cats, labels, header, rows)


def load_dataset(path, schema: FeatureSchema, *, require_label=True) -> RawDataset:
    with open(path, newline="") as fh:
        return read_dataset(fh, schema, require_label=require_label)


# normalization -------------------------------------------------------------


@dataclass(frozen=True)
class Scaler:
    """Per continuous column ``(min, max)``; values map linearly onto [0, 1]."""

    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, cont: np.ndarray) -> np.ndarray:
        cont = np.asarray(cont, dtype=np.float64)
        span = self.maxs - self.mins
        const = span <= 0
        safe = np.where(const, 1.0, span)
        out = np.clip((cont - self.mins) / safe, 0.0, 1.0)
        # constant columns sit in the middle of the unit interval
        return np.where(const, 0.5, out)

    def apply(self, data: RawDataset) -> list[MixedPattern]:
        scaled = self.transform(data.cont)
        return [
            MixedPattern(row, row.copy(), cats, label)
            for row, cats, label in zip(scaled, data.cats, data.labels)
        ]

    def schema_with_ranges(self, schema: FeatureSchema) -> FeatureSchema:
        """Schema whose continuous columns declare this scaler's ranges."""
        ranges = iter(zip(self.mins.tolist(), self.maxs.tolist()))
        cols = []
        for c in schema.columns:
            if c.kind is ColumnKind.CONTINUOUS:
                lo, hi = next(ranges)
                cols.append(Column(c.name, c.kind, (lo, hi) if lo < hi else None))
            else:
                cols.append(c)
        return FeatureSchema(tuple(cols))


def fit_scaler(data: RawDataset, schema: FeatureSchema | None = None) -> Scaler:
    schema = schema or data.schema
    if len(data) == 0:
        raise DataError("cannot fit a scaler on zero rows")
    mins = data.cont.min(axis=0) if data.cont.size else np.zeros(schema.n)
    maxs = data.cont.max(axis=0) if data.cont.size else np.zeros(schema.n)
    for j, c in enumerate(schema.continuous):
        if c.range is not None:
            mins[j], maxs[j] = c.range
    return Scaler(np.asarray(mins, dtype=np.float64), np.asarray(maxs, dtype=np.float64))


def apply_scaler(scaler: Scaler, data: RawDataset) -> list[MixedPattern]:
    return scaler.apply(data)


def scaler_from_schema(schema: FeatureSchema) -> Scaler:
    """Scaler reconstructed from declared ranges (columns without one are constant)."""
    mins = [c.range[0] if c.range else 0.0 for c in schema.continuous]
    maxs = [c.range[1] if c.range else 0.0 for c in schema.continuous]
    return Scaler(np.array(mins, dtype=np.float64), np.array(maxs, dtype=np.float64))


# model files ---------------------------------------------------------------


def _real(x: float) -> str:
    return format(float(x), ".17g")


def _reals(xs: Iterable[float]) -> str:
    return ",".join(_real(x) for x in xs)


def _enc(s: str) -> str:
    return quote(str(s), safe="")


def format_model(model: GfmmModel) -> str:
    p = model.params
    gamma = _reals(p.gamma) if isinstance(p.gamma, tuple) else _real(p.gamma)
    lines = [
        MODEL_HEADER,
        f"params theta={_real(p.theta)} delta={_real(p.delta)} alpha={_real(p.alpha)} "
        f"gamma={gamma} variant={p.variant}",
        f"schema {len(model.schema.columns)}",
    ]
    for c in model.schema.columns:
        line = f"column {_enc(c.name)},{c.kind.value}"
        if c.range is not None:
            line += f",{_real(c.range[0])},{_real(c.range[1])}"
        lines.append(line)
    names = [_enc(c.name) for c in model.schema.categorical]
    for b in model.boxes:
        d = "|".join(
            f"{name}:{{" + ";".join(f"{_enc(v)}={k}" for v, k in sorted(counter.items())) + "}"
            for name, counter in zip(names, b.d)
        )
        lines.append(
            f"box label={_enc(b.label)} seq={b.created_seq} n={b.n_samples} "
            f"V={_reals(b.v)} W={_reals(b.w)} D={d}"
        )
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"end boxes={len(model.boxes)} sha256={digest}\n"


def _fields(line: str, lineno: int, keyword: str) -> dict[str, str]:
    head, _, rest = line.partition(" ")
    if head != keyword:
        raise ModelFormatError(f"expected a {keyword!r} line", line=lineno)
    out = {}
    for tok in rest.split(" "):
        if not tok:
            continue
        key, eq, val = tok.partition("=")
        if not eq:
            raise ModelFormatError(f"malformed field {tok!r}", line=lineno)
        out[key] = val
    return out


def _parse_reals(text: str, lineno: int) -> list[float]:
    if text == "":
        return []
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise ModelFormatError("malformed real list", line=lineno) from None


def parse_model(text: str) -> GfmmModel:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MODEL_HEADER:
        found = lines[0][:40] if lines else ""
        raise ModelFormatError(f"unsupported model version or header {found!r}", line=1)
    if len(lines) < 4 or not lines[-1].startswith("end "):
        raise ModelFormatError("truncated model file", line=len(lines))
    end = _fields(lines[-1], len(lines), "end")
    body = "\n".join(lines[:-1]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != end.get("sha256"):
        raise ModelFormatError("checksum mismatch", line=len(lines))

    try:
        pf = _fields(lines[1], 2, "params")
        gamma_vals = _parse_reals(pf["gamma"], 2)
        gamma = gamma_vals[0] if "," not in pf["gamma"] else tuple(gamma_vals)
        params = HyperParams(
            float(pf["theta"]), float(pf["delta"]), float(pf["alpha"]), gamma, pf["variant"]
        )
        head, _, count = lines[2].partition(" ")
        if head != "schema":
            raise ModelFormatError("expected a 'schema' line", line=3)
        k = int(count)
        columns = []
        for lineno in range(4, 4 + k):
            head, _, spec = lines[lineno - 1].partition(" ")
            if head != "column":
                raise ModelFormatError("expected a 'column' line", line=lineno)
            parts = spec.split(",")
            rng = (float(parts[2]), float(parts[3])) if len(parts) == 4 else None
            columns.append(Column(unquote(parts[0]), ColumnKind(parts[1]), rng))
        schema = FeatureSchema(tuple(columns))
        names = [_enc(c.name) for c in schema.categorical]
        boxes = []
        for lineno in range(4 + k, len(lines)):
            bf = _fields(lines[lineno - 1], lineno, "box")
            d = []
            if schema.r:
                chunks = bf["D"].split("|")
                if len(chunks) != schema.r:
                    raise ModelFormatError("wrong number of categorical sets", line=lineno)
                for name, chunk in zip(names, chunks):
                    key, _, inner = chunk.partition(":")
                    if key != name or not (inner.startswith("{") and inner.endswith("}")):
                        raise ModelFormatError(f"malformed categorical set {chunk!r}", line=lineno)
                    counter = CategoryCounter()
                    for item in filter(None, inner[1:-1].split(";")):
                        val, _, cnt = item.rpartition("=")
                        counter[sys.intern(unquote(val))] = int(cnt)
                    d.append(counter)
            boxes.append(
                Hyperbox(
                    np.array(_parse_reals(bf["V"], lineno), dtype=np.float64),
                    np.array(_parse_reals(bf["W"], lineno), dtype=np.float64),
                    d,
                    sys.intern(unquote(bf["label"])),
                    int(bf["n"]),
                    int(bf["seq"]),
                )
            )
    except ModelFormatError:
        raise
    except (KeyError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    if int(end.get("boxes", -1)) != len(boxes):
        raise ModelFormatError("box count does not match the end marker", line=len(lines))
    return GfmmModel(schema, params, boxes)


def save_model(model: GfmmModel, path):
    Path(path).write_text(format_model(model))


def load_model(path) -> GfmmModel:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError:
        raise ModelFormatError("model file is not text", line=1) from None
    return parse_model(text)


# results tables ------------------------------------------------------------

RESULTS_HEADER = ["dataset", "method", "params", "mean_cba", "std_cba"]


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    method: str
    params: str
    mean_cba: float
    std_cba: float

    def key(self):
        return (self.dataset, self.method, self.params)

    def cells(self) -> list[str]:
        return [self.dataset, self.method, self.params, f"{self.mean_cba:.6f}", f"{self.std_cba:.6f}"]


def format_results(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def read_results_table(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise DataError("not a results table (unexpected header)", line=1)
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(RESULTS_HEADER):
                raise DataError("wrong number of cells", line=lineno)
            try:
                rows.append(ResultRow(cells[0], cells[1], cells[2], float(cells[3]), float(cells[4])))
            except ValueError:
                raise DataError("non-numeric score", line=lineno) from None
        return rows


def write_results_table(rows: Iterable[ResultRow], path, *, append=False):
    """Write ``rows``; with ``append`` merge into an existing table, newer rows
    replacing older ones with the same (dataset, method, params) key."""
    rows = list(rows)
    if append and os.path.exists(path):
        merged = {r.key(): r for r in read_results_table(path)}
        for r in rows:
            merged[r.key()] = r
        rows = list(merged.values())
    Path(path).write_text(format_results(rows))
