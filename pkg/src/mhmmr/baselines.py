"""Order-blind and constant-mean comparison methods: k-means, Gaussian mixture, Gaussian HMM."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import TimeSeries
from .design import weighted_covariance
from .em import FitConfig, FitResult, fit
from .errors import TooFewSamples
from .inference import gaussian_logpdf
from .initialization import lloyd


@dataclass(frozen=True)
class HardClustering:
    """1-based assignments plus the fitted component parameters.

    ``objective`` is the k-means inertia or the mixture log-likelihood.
    """

    assignments: np.ndarray
    centers: np.ndarray
    objective: float
    trace: tuple[float, ...] = ()
    covariances: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    iterations: int = 0


def _check(Y, K: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if K < 1 or Y.shape[0] < K:
        raise TooFewSamples(f"{Y.shape[0]} samples for {K} clusters")
    return Y


def kmeans_fit(Y, K: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-7) -> HardClustering:
    """Lloyd's k-means started from K distinct samples chosen by ``seed``."""
    Y = _check(Y, K)
    rng = np.random.default_rng(seed)
    start = Y[rng.choice(Y.shape[0], size=K, replace=False)]
    labels, centers, trace, it = lloyd(Y, start, max_iter, tol)
    return HardClustering(labels + 1, centers, trace[-1], tuple(trace), iterations=it)


def gmm_fit(Y, K: int, seed: int = 0, max_iter: int = 500, rel_tol: float = 1e-6) -> HardClustering:
    """Full-covariance Gaussian mixture by EM, initialized from seeded k-means."""
    Y = _check(Y, K)
    n, d = Y.shape
    ones = np.ones((n, 1))
    resp = np.zeros((n, K))
    resp[np.arange(n), kmeans_fit(Y, K, seed).assignments - 1] = 1.0

    def m_step(resp):
        weights = resp.sum(axis=0) / n
        means = np.empty((K, d))
        covs = np.empty((K, d, d))
        for k in range(K):
            w = resp[:, k]
            if not w.sum() > 0:
                w = np.ones(n)
            means[k] = w @ Y / w.sum()
            covs[k] = weighted_covariance(ones, Y, means[k][None, :], w)
        return weights, means, covs

    weights, means, covs = m_step(resp)
    trace: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(divide="ignore"):
            logw = np.log(weights)
        logp = np.column_stack([logw[k] + gaussian_logpdf(Y, means[k], covs[k]) for k in range(K)])
        norm = logsumexp(logp, axis=1)
        trace.append(float(norm.sum()))
        if len(trace) > 1 and trace[-1] - trace[-2] < rel_tol * abs(trace[-2]):
            break
        if it == max_iter:
            break
        resp = np.exp(logp - norm[:, None])
        weights, means, covs = m_step(resp)
    labels = np.argmax(logp, axis=1)
    return HardClustering(labels + 1, means, trace[-1], tuple(trace), covs, weights, it)


def hmm_gaussian_fit(series: TimeSeries, K: int, cfg: Optional[FitConfig] = None) -> FitResult:
    """Standard Gaussian-emission HMM: the regression HMM with a constant (order 0) mean."""
    cfg = FitConfig(K=K, p=0) if cfg is None else dataclasses.replace(cfg, K=K, p=0)
    return fit(series, cfg)
