"""CSV series, model files and posterior exports.

Numbers are written with 17 significant digits so that every finite double
survives a write/read cycle unchanged. Model files are small JSON documents
tagged with a format version; matrices are stored row by row.
"""
from __future__ import annotations

import csv
import json
import os
from typing import Optional, Sequence, Union

import numpy as np

from .core import MhmmrParams, PosteriorSet, Segmentation, TimeSeries
from .errors import (FormatVersionMismatch, InvariantViolation, LabelLengthMismatch,
                     MissingTimeColumn, NonMonotonicTime, ParseError, ValidationError)

MODEL_FORMAT = "mhmmr-model/1"
TIME_COLUMN = "t"
LABEL_COLUMN = "label"

PathLike = Union[str, os.PathLike]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_rows(path: PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise MissingTimeColumn(f"{path}: empty file, expected a header row")
    return [h.strip() for h in rows[0]], rows[1:]


def _float_cell(text: str, row: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(row, col, f"not a number: {text!r}") from None


def _int_cell(text: str, row: int, col: str) -> int:
    try:
        return int(text)
    except ValueError:
        v = _float_cell(text, row, col)
        if not float(v).is_integer():
            raise ParseError(row, col, f"not an integer label: {text!r}") from None
        return int(v)


def load_csv(path: PathLike, time_column: str = TIME_COLUMN,
             label_column: Optional[str] = LABEL_COLUMN) -> TimeSeries:
    """Read a series with a time column, channel columns and an optional label column.

    Rows are numbered from 1 for the first data row (the header is row 0).
    """
    header, rows = _read_rows(path)
    if time_column not in header:
        raise MissingTimeColumn(f"{path}: no {time_column!r} column in header {header}")
    ti = header.index(time_column)
    li = header.index(label_column) if label_column and label_column in header else None
    chan = [j for j in range(len(header)) if j not in (ti, li)]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    t = np.empty(len(rows))
    Y = np.empty((len(rows), len(chan)))
    labels = [] if li is not None else None
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            if li is not None and len(row) == len(header) - 1 and li == len(header) - 1:
                raise LabelLengthMismatch(f"{path}: row {r} has no label")
            raise ParseError(r, len(row), f"{len(row)} fields, header has {len(header)}")
        t[r - 1] = _float_cell(row[ti], r, time_column)
        for c, j in enumerate(chan):
            Y[r - 1, c] = _float_cell(row[j], r, header[j])
        if labels is not None:
            if row[li].strip() == "":
                raise LabelLengthMismatch(f"{path}: row {r} has an empty label")
            labels.append(_int_cell(row[li], r, label_column))
    steps = np.diff(t)
    if np.any(~(steps > 0)):
        raise NonMonotonicTime(int(np.flatnonzero(~(steps > 0))[0]) + 2,
                               f"{path}: time does not increase at row "
                               f"{int(np.flatnonzero(~(steps > 0))[0]) + 2}")
    return TimeSeries(t, Y, tuple(header[j] for j in chan),
                      None if labels is None else np.array(labels, dtype=np.int64))


def write_csv(series: TimeSeries, path: PathLike, labels: Optional[Sequence[int]] = None) -> None:
    """Write ``t``, every channel and, when present, ``label``."""
    lab = series.labels if labels is None else np.asarray(labels)
    if lab is not None and len(lab) != series.n:
        raise LabelLengthMismatch(f"{len(lab)} labels for {series.n} samples")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([TIME_COLUMN, *series.channel_names] + ([LABEL_COLUMN] if lab is not None else []))
        for i in range(series.n):
            row = [fmt(series.timestamps[i])] + [fmt(v) for v in series.values[i]]
            if lab is not None:
                row.append(str(int(lab[i])))
            w.writerow(row)


# --- model files ----------------------------------------------------------------

def _rows(a: np.ndarray) -> str:
    """JSON for a 1-, 2- or 3-D array with one innermost row per line."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return json.dumps([float(v) for v in a])
    inner = ",\n".join(_rows(sub) for sub in a)
    return "[\n" + inner + "\n]"


def dumps_model(params: MhmmrParams) -> str:
    parts = [
        f'"format": {json.dumps(MODEL_FORMAT)}',
        f'"K": {params.K}',
        f'"p": {params.p}',
        f'"d": {params.d}',
        '"time_normalization": {"offset": %s, "scale": %s}' % (
            json.dumps(float(params.time_offset)), json.dumps(float(params.time_scale))),
        f'"pi": {_rows(params.pi)}',
        f'"trans": {_rows(params.trans)}',
        f'"regressions": {_rows(params.regressions)}',
        f'"covariances": {_rows(params.covariances)}',
    ]
    return "{\n" + ",\n".join(parts) + "\n}\n"


def save_model(params: MhmmrParams, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(params))


def _array(doc: dict, key: str, shape: tuple[int, ...]) -> np.ndarray:
    if key not in doc:
        raise InvariantViolation(key, "missing from model file")
    try:
        a = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise InvariantViolation(key, "not a numeric array") from None
    if a.shape != shape:
        raise InvariantViolation(key, f"shape {a.shape}, expected {shape}")
    return a


def loads_model(text: str, source: str = "<string>") -> MhmmrParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.colno, f"{source}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        found = doc.get("format") if isinstance(doc, dict) else None
        raise FormatVersionMismatch(f"{source}: expected format {MODEL_FORMAT!r}, found {found!r}")
    norm = doc.get("time_normalization")
    if not isinstance(norm, dict) or "offset" not in norm or "scale" not in norm:
        raise FormatVersionMismatch(f"{source}: no time normalization; not a {MODEL_FORMAT} file")
    try:
        K, p, d = int(doc["K"]), int(doc["p"]), int(doc["d"])
    except (KeyError, TypeError, ValueError):
        raise InvariantViolation("dimensions", "K, p and d must be integers") from None
    if K < 1 or p < 0 or d < 1:
        raise InvariantViolation("dimensions", f"K={K}, p={p}, d={d}")
    return MhmmrParams(
        _array(doc, "pi", (K,)),
        _array(doc, "trans", (K, K)),
        _array(doc, "regressions", (K, p + 1, d)),
        _array(doc, "covariances", (K, d, d)),
        float(norm["offset"]),
        float(norm["scale"]),
    )


def load_model(path: PathLike) -> MhmmrParams:
    """Read a model file; every parameter invariant is re-checked on construction."""
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read(), str(path))


# --- decoding outputs -----------------------------------------------------------

def export_posteriors(post: PosteriorSet, seg: Segmentation, timestamps, path: PathLike) -> None:
    """One row per sample: ``t, tau_1..tau_K, viterbi_state``."""
    t = np.asarray(timestamps, dtype=float)
    if not (t.size == post.n == seg.n):
        raise LabelLengthMismatch(f"{t.size} timestamps, {post.n} posterior rows, {seg.n} states")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([TIME_COLUMN] + [f"tau_{k + 1}" for k in range(post.K)] + ["viterbi_state"])
        for i in range(post.n):
            w.writerow([fmt(t[i])] + [fmt(v) for v in post.tau[i]] + [str(int(seg.states[i]))])


def read_posteriors(path: PathLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(t, tau, states)`` from an ``export_posteriors`` file."""
    header, rows = _read_rows(path)
    if not header or header[0] != TIME_COLUMN or header[-1] != "viterbi_state":
        raise ParseError(0, 0, f"{path}: not a posterior export")
    K = len(header) - 2
    data = np.array([[_float_cell(v, r, header[j]) for j, v in enumerate(row)]
                     for r, row in enumerate(rows, start=1)], dtype=float).reshape(len(rows), K + 2)
    return data[:, 0], data[:, 1:-1], data[:, -1].astype(np.int64)


def write_segmentation(seg: Segmentation, timestamps, path: PathLike) -> None:
    """One row per sample: ``t, state, confidence``."""
    t = np.asarray(timestamps, dtype=float)
    if t.size != seg.n:
        raise LabelLengthMismatch(f"{t.size} timestamps for {seg.n} states")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([TIME_COLUMN, "state", "confidence"])
        for i in range(seg.n):
            w.writerow([fmt(t[i]), str(int(seg.states[i])), fmt(seg.confidences[i])])


def read_states(path: PathLike, column: str = "state") -> tuple[np.ndarray, np.ndarray]:
    """``(t, states)`` from a segmentation file; ``column`` may also be ``label``."""
    header, rows = _read_rows(path)
    if TIME_COLUMN not in header:
        raise MissingTimeColumn(f"{path}: no {TIME_COLUMN!r} column")
    if column not in header:
        raise ParseError(0, column, f"{path}: no {column!r} column")
    ti, si = header.index(TIME_COLUMN), header.index(column)
    t = np.array([_float_cell(r[ti], i, TIME_COLUMN) for i, r in enumerate(rows, start=1)])
    s = np.array([_int_cell(r[si], i, column) for i, r in enumerate(rows, start=1)], dtype=np.int64)
    return t, s
