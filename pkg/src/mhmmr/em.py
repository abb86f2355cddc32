"""Maximum-likelihood fitting by EM (Baum-Welch) for polynomial-regression HMMs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .core import MhmmrParams, PosteriorSet, TimeSeries
from .design import DesignMatrix, build_design, weighted_covariance, weighted_mv_least_squares
from .errors import TooFewSamples, ValidationError
from .inference import emission_logdensities, forward_backward
from .initialization import changepoint_partition, cluster_partition

log = logging.getLogger(__name__)

PI_SMOOTH = 1e-10
INIT_PI_SMOOTH = 1e-3
INIT_STRATEGIES = ("auto", "changepoint", "cluster", "contiguous", "random_responsibilities")


@dataclass(frozen=True)
class FitConfig:
    K: int
    p: int
    max_iter: int = 500
    rel_tol: float = 1e-6
    n_restarts: int = 1
    init_strategy: Literal["auto", "changepoint", "cluster", "contiguous",
                           "random_responsibilities"] = "auto"
    seed: int = 0
    self_transition_init: float = 0.98

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError(f"K must be >= 1, got {self.K}")
        if self.p < 0:
            raise ValidationError(f"p must be >= 0, got {self.p}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be > 0")
        if self.n_restarts < 1:
            raise ValidationError("n_restarts must be >= 1")
        if not 0 < self.self_transition_init < 1:
            raise ValidationError("self_transition_init must lie in (0, 1)")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(f"unknown init strategy {self.init_strategy!r}")


@dataclass(frozen=True)
class FitResult:
    params: MhmmrParams
    loglik_trace: tuple[float, ...]
    iterations: int
    converged: bool
    restart_index: int = 0
    low_support_states: tuple[int, ...] = field(default=())

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def default_transitions(K: int, stay: float) -> np.ndarray:
    if K == 1:
        return np.ones((1, 1))
    A = np.full((K, K), (1.0 - stay) / (K - 1))
    np.fill_diagonal(A, stay)
    return A


def _design(series: TimeSeries, p: int) -> DesignMatrix:
    return build_design(series.timestamps, p)


def _regressions(X: DesignMatrix, Y: np.ndarray, tau: np.ndarray):
    K = tau.shape[1]
    B = np.empty((K, X.p + 1, Y.shape[1]))
    S = np.empty((K, Y.shape[1], Y.shape[1]))
    for k in range(K):
        w = tau[:, k]
        if not w.sum() > 0:
            # an exactly empty state is refit on the whole series
            w = np.ones_like(w)
        B[k] = weighted_mv_least_squares(X, Y, w)
        S[k] = weighted_covariance(X, Y, B[k], w)
    return B, S


def _from_labels(series: TimeSeries, cfg: FitConfig, labels: np.ndarray,
                 X: DesignMatrix) -> MhmmrParams:
    K = cfg.K
    tau = np.zeros((series.n, K))
    tau[np.arange(series.n), labels] = 1.0
    B, S = _regressions(X, series.values, tau)
    pi = np.full(K, INIT_PI_SMOOTH)
    pi[labels[0]] += 1.0
    pi /= pi.sum()
    return MhmmrParams(pi, default_transitions(K, cfg.self_transition_init), B, S,
                       X.norm_offset, X.norm_scale)


def _start_labels(series: TimeSeries, cfg: FitConfig, strategy: str) -> np.ndarray:
    n, K = series.n, cfg.K
    if strategy == "changepoint":
        labels = changepoint_partition(series.values, K, cfg.p)
        if labels is not None:
            return labels
        log.info("series too short for change-point initialization; using equal blocks")
    elif strategy == "cluster":
        return cluster_partition(series.values, K, cfg.seed)
    labels = np.empty(n, dtype=np.int64)
    for k, block in enumerate(np.array_split(np.arange(n), K)):
        labels[block] = k
    return labels


def init_params(series: TimeSeries, cfg: FitConfig, strategy: Optional[str] = None) -> MhmmrParams:
    """Starting point for EM: one M-step from a hard partition or from random responsibilities.

    ``contiguous`` cuts the series into K equal consecutive blocks;
    ``changepoint`` places the K consecutive blocks at detected regime changes;
    ``cluster`` groups samples by value with seeded k-means, ignoring time;
    ``random_responsibilities`` draws seeded Dirichlet responsibilities.
    ``auto`` is resolved by ``fit``, which tries both ``changepoint`` and
    ``cluster``; here it falls back to ``changepoint``.
    """
    strategy = strategy or cfg.init_strategy
    if strategy == "auto":
        strategy = "changepoint"
    n, K = series.n, cfg.K
    if n < K:
        raise TooFewSamples(f"{n} samples cannot seed {K} states")
    if n < K * (cfg.p + 2):
        log.warning("only %d samples for %d states of order %d", n, K, cfg.p)
    X = _design(series, cfg.p)
    if strategy == "random_responsibilities":
        return _random_init(series, cfg, np.random.default_rng(cfg.seed), X)
    return _from_labels(series, cfg, _start_labels(series, cfg, strategy), X)


def _random_init(series: TimeSeries, cfg: FitConfig, rng: np.random.Generator,
                 X: DesignMatrix) -> MhmmrParams:
    tau = rng.dirichlet(np.ones(cfg.K), size=series.n)
    xi = tau[:-1, :, None] * tau[1:, None, :]
    return m_step(series, PosteriorSet(tau, xi, float("nan")), cfg, X)


def e_step(params: MhmmrParams, series: TimeSeries,
           X: Optional[DesignMatrix] = None) -> PosteriorSet:
    return forward_backward(params, emission_logdensities(params, series, X))


def m_step(series: TimeSeries, post: PosteriorSet, cfg: FitConfig,
           X: Optional[DesignMatrix] = None) -> MhmmrParams:
    """Closed-form parameter updates from the current posteriors.

    Transition rows are the expected transition counts normalized to sum to one;
    a row with no expected visits keeps the initial transition profile.
    """
    if X is None:
        X = _design(series, cfg.p)
    tau = post.tau
    K = tau.shape[1]
    pi = tau[0] + PI_SMOOTH
    pi = pi / pi.sum()
    fallback = default_transitions(K, cfg.self_transition_init)
    if post.xi.shape[0]:
        counts = post.xi.sum(axis=0)
        rows = counts.sum(axis=1, keepdims=True)
        A = np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), fallback)
    else:
        A = fallback
    B, S = _regressions(X, series.values, tau)
    return MhmmrParams(pi, A, B, S, X.norm_offset, X.norm_scale)


def run_em(series: TimeSeries, params: MhmmrParams, cfg: FitConfig,
           restart_index: int = 0) -> FitResult:
    """Iterate E and M steps from ``params`` until the relative gain drops below ``rel_tol``.

    The returned parameters are always the ones whose log-likelihood closes the trace.
    """
    X = _design(series, cfg.p)
    trace: list[float] = []
    converged = False
    post = None
    for it in range(cfg.max_iter):
        post = e_step(params, series, X)
        trace.append(post.loglik)
        if it > 0 and trace[-1] - trace[-2] < cfg.rel_tol * abs(trace[-2]):
            converged = True
            break
        if it == cfg.max_iter - 1:
            break
        params = m_step(series, post, cfg, X)
    support = post.tau.sum(axis=0)
    low = tuple(int(k) + 1 for k in np.flatnonzero(support < cfg.p + 2))
    if low:
        log.warning("states %s hold fewer than p+2 expected samples", low)
    return FitResult(params, tuple(trace), len(trace), converged, restart_index, low)


def fit(series: TimeSeries, cfg: FitConfig) -> FitResult:
    """Fit by EM from several starts and keep the highest final log-likelihood.

    The ``auto`` strategy runs two starts (change-point blocks, then value
    clusters); any other strategy runs one. ``n_restarts - 1`` further starts
    draw random responsibilities from generators seeded by ``(cfg.seed, r)``.
    Ties keep the earlier start.
    """
    if series.n < cfg.K:
        raise TooFewSamples(f"{series.n} samples cannot seed {cfg.K} states")
    first = ("changepoint", "cluster") if cfg.init_strategy == "auto" else (cfg.init_strategy,)
    best: Optional[FitResult] = None
    for r, strategy in enumerate(first):
        best = _keep_best(best, run_em(series, init_params(series, cfg, strategy), cfg, r))
    X = _design(series, cfg.p)
    for r in range(1, cfg.n_restarts):
        start = _random_init(series, cfg, np.random.default_rng([cfg.seed, r]), X)
        best = _keep_best(best, run_em(series, start, cfg, len(first) + r - 1))
    return best


def _keep_best(best: Optional[FitResult], result: FitResult) -> FitResult:
    log.info("start %d: loglik %.6f after %d iterations", result.restart_index,
             result.loglik, result.iterations)
    if best is None or result.loglik > best.loglik:
        return result
    return best
