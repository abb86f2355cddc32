"""Domain types shared by every module.

All containers are frozen dataclasses holding read-only numpy arrays. Every
constructor validates its invariants and raises a typed error otherwise, so a
partially valid object is never observable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import (
    InvariantViolation,
    LabelLengthMismatch,
    NonFiniteValue,
    NonMonotonicTime,
    ValidationError,
)

PROB_TOL = 1e-12
POSTERIOR_TOL = 1e-10
MARGINAL_TOL = 1e-8


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """n timestamped observations of d channels, with optional ground truth."""

    timestamps: np.ndarray
    values: np.ndarray
    channel_names: tuple[str, ...] = ()
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "timestamps", _frozen(np.ravel(self.timestamps)))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.channel_names) or tuple(f"y{j + 1}" for j in range(values.shape[1]))
        object.__setattr__(self, "channel_names", names)
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(np.ravel(self.labels), dtype=np.int64))
        validate(self)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_labels(self, labels: Optional[Sequence[int]]) -> "TimeSeries":
        return TimeSeries(self.timestamps, self.values, self.channel_names, labels)


def validate(series: TimeSeries) -> None:
    """Check every TimeSeries invariant; raise the matching error on the first failure."""
    t = np.asarray(series.timestamps)
    y = np.asarray(series.values)
    if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
        raise ValidationError(f"values must be a non-empty n x d matrix, got shape {y.shape}")
    if t.shape != (y.shape[0],):
        raise ValidationError(f"{t.shape[0]} timestamps for {y.shape[0]} observations")
    if not np.all(np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0])
        raise NonMonotonicTime(bad, f"non-finite timestamp at index {bad}")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise NonMonotonicTime(int(np.flatnonzero(steps <= 0)[0]) + 1)
    if not np.all(np.isfinite(y)):
        row, col = np.argwhere(~np.isfinite(y))[0]
        raise NonFiniteValue(int(row), int(col))
    if len(series.channel_names) != y.shape[1]:
        raise ValidationError(f"{len(series.channel_names)} channel names for {y.shape[1]} channels")
    if len(set(series.channel_names)) != len(series.channel_names):
        raise ValidationError("duplicate channel names")
    if series.labels is not None and len(series.labels) != y.shape[0]:
        raise LabelLengthMismatch(f"{len(series.labels)} labels for {y.shape[0]} observations")


@dataclass(frozen=True)
class MhmmrParams:
    """Parameters of a K-state hidden Markov model with polynomial regression emissions.

    ``regressions`` has shape (K, p+1, d) and ``covariances`` (K, d, d). The
    affine map ``u = (t - time_offset) / time_scale`` sends raw timestamps onto
    the normalized axis the polynomials are expressed in.
    """

    pi: np.ndarray
    trans: np.ndarray
    regressions: np.ndarray
    covariances: np.ndarray
    time_offset: float = 0.0
    time_scale: float = 1.0

    def __post_init__(self):
        for name in ("pi", "trans", "regressions", "covariances"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "time_offset", float(self.time_offset))
        object.__setattr__(self, "time_scale", float(self.time_scale))
        self._check()

    @property
    def K(self) -> int:
        return self.pi.shape[0]

    @property
    def p(self) -> int:
        return self.regressions.shape[1] - 1

    @property
    def d(self) -> int:
        return self.regressions.shape[2]

    def _check(self) -> None:
        K = self.pi.shape[0] if self.pi.ndim == 1 else 0
        if K < 1:
            raise InvariantViolation("pi", "must be a non-empty vector")
        if self.trans.shape != (K, K):
            raise InvariantViolation("trans", f"shape {self.trans.shape}, expected {(K, K)}")
        if self.regressions.ndim != 3 or self.regressions.shape[0] != K or self.regressions.shape[1] < 1:
            raise InvariantViolation("regressions", f"shape {self.regressions.shape}")
        d = self.regressions.shape[2]
        if d < 1 or self.covariances.shape != (K, d, d):
            raise InvariantViolation("covariances", f"shape {self.covariances.shape}, expected {(K, d, d)}")
        for name, arr in (("pi", self.pi), ("trans", self.trans),
                          ("regressions", self.regressions), ("covariances", self.covariances)):
            if not np.all(np.isfinite(arr)):
                raise InvariantViolation(name, "non-finite entry")
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1.0) > PROB_TOL:
            raise InvariantViolation("pi", f"sum {self.pi.sum()!r}")
        if np.any(self.trans < 0):
            raise InvariantViolation("trans", "negative entry")
        rows = self.trans.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > PROB_TOL)
        if bad.size:
            raise InvariantViolation("trans row", f"row {bad[0] + 1} sums to {rows[bad[0]]!r}")
        for k, S in enumerate(self.covariances):
            if np.max(np.abs(S - S.T)) > PROB_TOL:
                raise InvariantViolation("covariance symmetry", f"state {k + 1}")
            try:
                np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                raise InvariantViolation("covariance positive definite", f"state {k + 1}") from None
        if not np.isfinite(self.time_offset) or not np.isfinite(self.time_scale) or self.time_scale <= 0:
            raise InvariantViolation("time normalization", f"offset={self.time_offset}, scale={self.time_scale}")

    def permuted(self, order: Sequence[int]) -> "MhmmrParams":
        """Return the same model with state ``order[j]`` (0-based) relabelled as state j."""
        o = np.asarray(order)
        return MhmmrParams(self.pi[o], self.trans[np.ix_(o, o)], self.regressions[o],
                           self.covariances[o], self.time_offset, self.time_scale)


@dataclass(frozen=True)
class PosteriorSet:
    """State posteriors ``tau`` (n, K), pairwise posteriors ``xi`` (n-1, K, K) and log-likelihood.

    ``xi[i - 1, l, k]`` is p(z_{i-1} = l, z_i = k | Y) for i = 1..n-1 (0-based).
    """

    tau: np.ndarray
    xi: np.ndarray
    loglik: float

    def __post_init__(self):
        object.__setattr__(self, "tau", _frozen(self.tau))
        object.__setattr__(self, "xi", _frozen(self.xi))
        object.__setattr__(self, "loglik", float(self.loglik))
        tau, xi = self.tau, self.xi
        if tau.ndim != 2:
            raise InvariantViolation("tau", f"shape {tau.shape}")
        n, K = tau.shape
        if xi.shape != (max(n - 1, 0), K, K):
            raise InvariantViolation("xi", f"shape {xi.shape}, expected {(n - 1, K, K)}")
        if np.any(tau < 0) or np.any(tau > 1 + POSTERIOR_TOL):
            raise InvariantViolation("tau", "entry outside [0, 1]")
        if np.max(np.abs(tau.sum(axis=1) - 1.0)) > POSTERIOR_TOL:
            raise InvariantViolation("tau", "row does not sum to 1")
        if n > 1:
            if np.max(np.abs(xi.sum(axis=(1, 2)) - 1.0)) > POSTERIOR_TOL:
                raise InvariantViolation("xi", "slice does not sum to 1")
            if np.max(np.abs(xi.sum(axis=1) - tau[1:])) > MARGINAL_TOL:
                raise InvariantViolation("xi", "marginal disagrees with tau")

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def K(self) -> int:
        return self.tau.shape[1]


@dataclass(frozen=True)
class Segmentation:
    """Decoded 1-based state sequence and the posterior weight of each chosen state."""

    states: np.ndarray
    confidences: np.ndarray
    source: Literal["viterbi", "max_posterior"] = "viterbi"

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(self.states, dtype=np.int64))
        object.__setattr__(self, "confidences", _frozen(self.confidences))
        if self.states.shape != self.confidences.shape or self.states.ndim != 1:
            raise ValidationError("states and confidences must be equal-length vectors")
        if np.any(self.states < 1):
            raise InvariantViolation("states", "state index below 1")
        c = self.confidences
        if np.any(c < 0) or np.any(c > 1 + POSTERIOR_TOL):
            raise InvariantViolation("confidences", "outside [0, 1]")
        if self.source not in ("viterbi", "max_posterior"):
            raise ValidationError(f"unknown segmentation source {self.source!r}")

    @property
    def n(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class EvalReport:
    """Confusion matrix and scores after matching predicted classes onto the truth."""

    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    matching: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "confusion", _frozen(self.confusion, dtype=np.int64))
        object.__setattr__(self, "precision", _frozen(self.precision))
        object.__setattr__(self, "recall", _frozen(self.recall))
        object.__setattr__(self, "accuracy", float(self.accuracy))
        object.__setattr__(self, "matching", {int(k): int(v) for k, v in self.matching.items()})
        C = self.confusion
        if C.ndim != 2 or np.any(C < 0):
            raise InvariantViolation("confusion", "must be a non-negative count matrix")
        n = int(C.sum())
        diag = int(np.trace(C)) if C.shape[0] == C.shape[1] else 0
        if n > 0 and abs(self.accuracy - diag / n) > 1e-12:
            raise InvariantViolation("accuracy", "differs from trace/n")

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean()) if self.precision.size else 0.0

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean()) if self.recall.size else 0.0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "confusion": self.confusion.tolist(),
            "matching": {str(k): v for k, v in sorted(self.matching.items())},
        }
