"""Emission densities, scaled forward-backward and Viterbi decoding.

The recursions run in compiled kernels. Forward filtering is normalized at
every step (the scaling constants give the log-likelihood); the backward pass
is carried in the log domain relative to the same constants so that states
the filter has ruled out cannot overflow it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from numba import njit

from .core import MhmmrParams, PosteriorSet, Segmentation, TimeSeries
from .design import DesignMatrix, build_design
from .errors import CovarianceNotPD, DimensionMismatch, NumericalUnderflow

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class EmissionTable:
    """``logdens[i, k] = log N(y_i; B_k^T x_i, Sigma_k)``."""

    logdens: np.ndarray

    @property
    def n(self) -> int:
        return self.logdens.shape[0]

    @property
    def K(self) -> int:
        return self.logdens.shape[1]


def design_for(params: MhmmrParams, series: TimeSeries) -> DesignMatrix:
    """Design matrix of ``series`` under the time normalization stored in ``params``."""
    return build_design(series.timestamps, params.p, params.time_offset, params.time_scale)


def gaussian_logpdf(Y: np.ndarray, means: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Row-wise multivariate normal log-density via a Cholesky factor of ``cov``."""
    d = cov.shape[0]
    try:
        L = scipy.linalg.cholesky(cov, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise CovarianceNotPD(str(exc)) from exc
    z = scipy.linalg.solve_triangular(L, (Y - means).T, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * LOG_2PI + logdet + np.einsum("ji,ji->i", z, z))


def emission_logdensities(params: MhmmrParams, series: TimeSeries,
                          X: Optional[DesignMatrix] = None) -> EmissionTable:
    if series.d != params.d:
        raise DimensionMismatch(f"series has {series.d} channels, model expects {params.d}")
    if X is None:
        X = design_for(params, series)
    Xm = np.asarray(X.X if isinstance(X, DesignMatrix) else X, dtype=float)
    if Xm.shape != (series.n, params.p + 1):
        raise DimensionMismatch(f"design shape {Xm.shape}, expected {(series.n, params.p + 1)}")
    Y = series.values
    out = np.empty((series.n, params.K))
    for k in range(params.K):
        out[:, k] = gaussian_logpdf(Y, Xm @ params.regressions[k], params.covariances[k])
    return EmissionTable(out)


@njit(cache=True)
def _forward(pi, A, logb):
    n, K = logb.shape
    log_alpha = np.empty((n, K))
    log_c = np.empty(n)
    pred = np.empty(K)
    prev = np.empty(K)
    for i in range(n):
        if i == 0:
            for k in range(K):
                pred[k] = pi[k]
        else:
            for l in range(K):
                prev[l] = np.exp(log_alpha[i - 1, l])
            for k in range(K):
                s = 0.0
                for l in range(K):
                    s += prev[l] * A[l, k]
                pred[k] = s
        m = -np.inf
        for k in range(K):
            v = np.log(pred[k]) + logb[i, k]
            log_alpha[i, k] = v
            if v > m:
                m = v
        if m == -np.inf:
            return log_alpha, log_c, i
        s = 0.0
        for k in range(K):
            s += np.exp(log_alpha[i, k] - m)
        lc = m + np.log(s)
        log_c[i] = lc
        for k in range(K):
            log_alpha[i, k] -= lc
    return log_alpha, log_c, -1


@njit(cache=True)
def _backward(logA, logb, log_c):
    n, K = logb.shape
    log_beta = np.zeros((n, K))
    tmp = np.empty(K)
    for i in range(n - 2, -1, -1):
        for l in range(K):
            m = -np.inf
            for k in range(K):
                v = logA[l, k] + logb[i + 1, k] + log_beta[i + 1, k]
                tmp[k] = v
                if v > m:
                    m = v
            if m == -np.inf:
                log_beta[i, l] = -np.inf
                continue
            s = 0.0
            for k in range(K):
                s += np.exp(tmp[k] - m)
            log_beta[i, l] = m + np.log(s) - log_c[i + 1]
    return log_beta


@njit(cache=True)
def _pairwise(log_alpha, logA, logb, log_beta, log_c):
    n, K = logb.shape
    xi = np.empty((max(n - 1, 0), K, K))
    for i in range(1, n):
        tot = 0.0
        for l in range(K):
            for k in range(K):
                v = np.exp(log_alpha[i - 1, l] + logA[l, k] + logb[i, k] - log_c[i] + log_beta[i, k])
                xi[i - 1, l, k] = v
                tot += v
        for l in range(K):
            for k in range(K):
                xi[i - 1, l, k] /= tot
    return xi


@njit(cache=True)
def _viterbi(log_pi, logA, logb):
    n, K = logb.shape
    delta = np.empty(K)
    nxt = np.empty(K)
    back = np.zeros((n, K), dtype=np.int64)
    for k in range(K):
        delta[k] = log_pi[k] + logb[0, k]
    for i in range(1, n):
        for k in range(K):
            best = -np.inf
            arg = 0
            for l in range(K):
                v = delta[l] + logA[l, k]
                if v > best:
                    best = v
                    arg = l
            back[i, k] = arg
            nxt[k] = best + logb[i, k]
        for k in range(K):
            delta[k] = nxt[k]
    path = np.empty(n, dtype=np.int64)
    best = -np.inf
    arg = 0
    for k in range(K):
        if delta[k] > best:
            best = delta[k]
            arg = k
    path[n - 1] = arg
    for i in range(n - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, best


def _logs(params: MhmmrParams):
    with np.errstate(divide="ignore"):
        return np.log(params.pi), np.log(params.trans)


def _check_table(params: MhmmrParams, emis: EmissionTable) -> np.ndarray:
    logb = np.ascontiguousarray(emis.logdens, dtype=float)
    if logb.ndim != 2 or logb.shape[1] != params.K or logb.shape[0] < 1:
        raise DimensionMismatch(f"emission table shape {logb.shape} for K={params.K}")
    return logb


def forward_backward(params: MhmmrParams, emis: EmissionTable) -> PosteriorSet:
    """State posteriors, pairwise posteriors and the observed-data log-likelihood."""
    logb = _check_table(params, emis)
    log_pi, logA = _logs(params)
    log_alpha, log_c, bad = _forward(np.asarray(params.pi), np.asarray(params.trans), logb)
    if bad >= 0:
        raise NumericalUnderflow(f"forward variables vanished at step {bad}")
    log_beta = _backward(logA, logb, log_c)
    tau = np.exp(log_alpha + log_beta)
    tau /= tau.sum(axis=1, keepdims=True)
    xi = _pairwise(log_alpha, logA, logb, log_beta, log_c)
    return PosteriorSet(tau, xi, float(np.sum(log_c)))


def loglikelihood(params: MhmmrParams, emis: EmissionTable) -> float:
    """Observed-data log-likelihood from the forward pass alone."""
    logb = _check_table(params, emis)
    _, log_c, bad = _forward(np.asarray(params.pi), np.asarray(params.trans), logb)
    if bad >= 0:
        return float("-inf")
    return float(np.sum(log_c))


def viterbi_path(params: MhmmrParams, emis: EmissionTable) -> tuple[np.ndarray, float]:
    """Most probable 0-based state path and its joint log-probability."""
    logb = _check_table(params, emis)
    log_pi, logA = _logs(params)
    path, score = _viterbi(log_pi, logA, logb)
    return path, float(score)


def path_logprob(params: MhmmrParams, emis: EmissionTable, path) -> float:
    """log p(z, y) of a 0-based state path under ``params``."""
    z = np.asarray(path, dtype=np.int64)
    log_pi, logA = _logs(params)
    lb = emis.logdens
    return float(log_pi[z[0]] + logA[z[:-1], z[1:]].sum() + lb[np.arange(z.size), z].sum())


def viterbi(params: MhmmrParams, emis: EmissionTable,
            post: Optional[PosteriorSet] = None) -> Segmentation:
    """Viterbi segmentation; confidences are the forward-backward posteriors of the chosen states."""
    path, _ = viterbi_path(params, emis)
    if post is None:
        post = forward_backward(params, emis)
    conf = post.tau[np.arange(path.size), path]
    return Segmentation(path + 1, np.clip(conf, 0.0, 1.0), "viterbi")


def max_posterior_decode(post: PosteriorSet) -> Segmentation:
    idx = np.argmax(post.tau, axis=1)
    conf = post.tau[np.arange(idx.size), idx]
    return Segmentation(idx + 1, np.clip(conf, 0.0, 1.0), "max_posterior")


def decode(params: MhmmrParams, series: TimeSeries, method: str = "viterbi"
           ) -> tuple[Segmentation, PosteriorSet]:
    """Posteriors plus the requested segmentation (``viterbi`` or ``map``) of a series."""
    emis = emission_logdensities(params, series)
    post = forward_backward(params, emis)
    if method == "viterbi":
        return viterbi(params, emis, post), post
    if method in ("map", "max_posterior"):
        return max_posterior_decode(post), post
    raise ValueError(f"unknown decoding method {method!r}")
