"""Scoring unsupervised segmentations against ground truth.

Predicted classes carry arbitrary names, so they are first matched one-to-one
onto the true classes with the assignment that minimizes the number of
misclassified samples. Predicted classes left without a partner receive fresh
labels above every true class and therefore earn no credit.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import EvalReport, TimeSeries
from .errors import LengthMismatch, MissingLabels, UnknownChannel

METHODS = ("kmeans", "gmm", "hmm_p0", "mhmmr")


def _labels(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise LengthMismatch("label sequences must be one-dimensional")
    if a.size and (np.any(a < 1) or not np.all(a == np.round(a))):
        raise ValueError("labels must be positive integers")
    return a.astype(np.int64)


def counts(truth: np.ndarray, pred: np.ndarray, n_true: int, n_pred: int) -> np.ndarray:
    C = np.zeros((n_true, n_pred), dtype=np.int64)
    np.add.at(C, (truth - 1, pred - 1), 1)
    return C


def match_labels(pred, truth) -> tuple[dict[int, int], np.ndarray]:
    """Relabel ``pred`` by the one-to-one class matching with the fewest errors.

    Returns the mapping ``{predicted: matched}`` and the relabelled sequence.
    """
    pred, truth = _labels(pred), _labels(truth)
    if pred.size != truth.size:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} truth labels")
    if pred.size == 0:
        raise LengthMismatch("empty label sequences")
    kt, kp = int(truth.max()), int(pred.max())
    C = counts(truth, pred, kt, kp)
    rows, cols = linear_sum_assignment(C, maximize=True)
    mapping = {int(c) + 1: int(r) + 1 for r, c in zip(rows, cols)}
    spare = kt
    for c in range(1, kp + 1):
        if c not in mapping:
            spare += 1
            mapping[c] = spare
    lookup = np.zeros(kp + 1, dtype=np.int64)
    for src, dst in mapping.items():
        lookup[src] = dst
    return mapping, lookup[pred]


def confusion_and_scores(matched_pred, truth, matching: Optional[dict[int, int]] = None,
                         n_classes: Optional[int] = None) -> EvalReport:
    """Confusion matrix (rows: truth, columns: prediction), accuracy, per-class precision and recall.

    Precision and recall of a class with no predicted (resp. true) samples are 0.
    """
    pred, truth = _labels(matched_pred), _labels(truth)
    if pred.size != truth.size:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} truth labels")
    C_size = max(int(truth.max(initial=0)), int(pred.max(initial=0)), n_classes or 0)
    C = counts(truth, pred, C_size, C_size)
    diag = np.diag(C).astype(float)
    col, row = C.sum(axis=0), C.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros(C_size), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(C_size), where=row > 0)
    acc = float(diag.sum() / pred.size) if pred.size else 0.0
    return EvalReport(C, acc, precision, recall, matching or {})


def evaluate(pred, truth) -> EvalReport:
    """Match, then score."""
    matching, matched = match_labels(pred, truth)
    return confusion_and_scores(matched, truth, matching)


def channel_subset(series: TimeSeries, keep: Iterable[str]) -> TimeSeries:
    """Keep the named channels, where a sensor name (``chest``) stands for all its ``chest_*`` axes.

    Columns keep their original order.
    """
    names = series.channel_names
    chosen: set[int] = set()
    for item in keep:
        if item in names:
            chosen.add(names.index(item))
            continue
        group = [j for j, nm in enumerate(names) if nm.rsplit("_", 1)[0] == item and "_" in nm]
        if not group:
            raise UnknownChannel(f"no channel or sensor named {item!r}")
        chosen.update(group)
    if not chosen:
        raise UnknownChannel("empty channel selection")
    cols = sorted(chosen)
    return TimeSeries(series.timestamps, series.values[:, cols],
                      tuple(names[j] for j in cols), series.labels)


def run_method(method: str, series: TimeSeries, cfg) -> np.ndarray:
    """1-based hard labels produced by one unsupervised method."""
    from . import baselines, em
    from .inference import decode

    if method == "kmeans":
        return baselines.kmeans_fit(series.values, cfg.K, cfg.seed).assignments
    if method == "gmm":
        return baselines.gmm_fit(series.values, cfg.K, cfg.seed).assignments
    if method == "hmm_p0":
        result = baselines.hmm_gaussian_fit(series, cfg.K, cfg)
    elif method == "mhmmr":
        result = em.fit(series, cfg)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    seg, _ = decode(result.params, series, "viterbi")
    return seg.states


def compare_methods(series: TimeSeries, methods: Sequence[str], cfg) -> dict[str, EvalReport]:
    """Run each method on the same labelled series and score it; keys follow ``METHODS`` order."""
    if series.labels is None:
        raise MissingLabels("comparison needs a series with ground-truth labels")
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise ValueError(f"unknown methods: {', '.join(unknown)}")
    out = {}
    for m in METHODS:
        if m in methods:
            out[m] = evaluate(run_method(m, series, cfg), series.labels)
    return out


def format_table(reports: dict[str, EvalReport], spread: Optional[dict[str, float]] = None,
                 accuracy: Optional[dict[str, float]] = None) -> str:
    """Plain-text table of accuracy, macro precision and macro recall, in percent.

    ``accuracy`` overrides the shown accuracy (e.g. a mean over seeds) and
    ``spread`` appends a +/- column to it.
    """
    lines = [f"{'method':<8} {'correct (%)':>14} {'precision (%)':>14} {'recall (%)':>11}"]
    for name, rep in reports.items():
        acc = f"{100 * (accuracy[name] if accuracy and name in accuracy else rep.accuracy):.1f}"
        if spread and name in spread:
            acc += f" ± {100 * spread[name]:.2f}"
        lines.append(f"{name:<8} {acc:>14} {100 * rep.macro_precision:>14.1f} {100 * rep.macro_recall:>11.1f}")
    return "\n".join(lines)


def format_report(rep: EvalReport, class_names: Optional[Sequence[str]] = None) -> str:
    """Per-class precision/recall table, one column per class."""
    C = rep.confusion.shape[0]
    names = list(class_names or [f"A{k + 1}" for k in range(C)])[:C]
    width = max(6, *(len(s) for s in names)) + 1
    head = "Class".ljust(14) + "".join(s.rjust(width) for s in names)
    prec = "Precision (%)".ljust(14) + "".join(f"{100 * v:.1f}".rjust(width) for v in rep.precision)
    rec = "Recall (%)".ljust(14) + "".join(f"{100 * v:.1f}".rjust(width) for v in rep.recall)
    return "\n".join([f"accuracy: {100 * rep.accuracy:.2f}% (n={rep.n})", head, prec, rec])
