"""Hard partitions used to seed EM.

Two complementary starts are provided. ``changepoint_partition`` assumes the
regimes occupy long consecutive stretches (activity protocols, ordered
schedules): it over-segments the series top-down with a Gaussian change cost
and then merges neighbours bottom-up under an order-p trend cost, so that a
smooth transition ramp is not cut into several constant pieces.
``cluster_partition`` ignores time and groups samples by value, which suits
regimes that recur many times.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .design import COV_FLOOR

KMEANS_STARTS = 5
MIN_PIECE = 10
PIECES_PER_STATE = 2


def sq_dists(Y: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def lloyd(Y: np.ndarray, centers: np.ndarray, max_iter: int = 300, tol: float = 1e-7):
    """Lloyd iterations from given centers.

    Returns ``(labels, centers, inertia_trace, iterations)`` with 0-based labels.
    An emptied cluster is moved onto the point farthest from its own center.
    """
    centers = np.array(centers, dtype=float, copy=True)
    K = centers.shape[0]
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        D = sq_dists(Y, centers)
        labels = np.argmin(D, axis=1)
        own = D[np.arange(Y.shape[0]), labels]
        trace.append(float(own.sum()))
        new = np.empty_like(centers)
        taken = np.zeros(Y.shape[0], dtype=bool)
        for k in range(K):
            members = labels == k
            if members.any():
                new[k] = Y[members].mean(axis=0)
            else:
                far = int(np.argmax(np.where(taken, -1.0, own)))
                taken[far] = True
                new[k] = Y[far]
        shift = float(np.max(np.sqrt(((new - centers) ** 2).sum(axis=1))))
        centers = new
        if shift < tol:
            break
    D = sq_dists(Y, centers)
    labels = np.argmin(D, axis=1)
    inertia = float(D[np.arange(Y.shape[0]), labels].sum())
    trace.append(inertia)
    return labels, centers, trace, it


def kmeanspp_centers(Y: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; falls back to uniform picks once every point is a center."""
    n = Y.shape[0]
    idx = [int(rng.integers(n))]
    d2 = sq_dists(Y, Y[idx]).min(axis=1)
    for _ in range(1, K):
        tot = d2.sum()
        if tot > 0:
            j = int(rng.choice(n, p=d2 / tot))
        else:
            j = int(rng.choice(np.setdiff1d(np.arange(n), idx)))
        idx.append(j)
        d2 = np.minimum(d2, sq_dists(Y, Y[j:j + 1])[:, 0])
    return Y[idx]


def cluster_partition(Y: np.ndarray, K: int, seed: int = 0, starts: int = KMEANS_STARTS) -> np.ndarray:
    """0-based labels of the lowest-inertia k-means run among ``starts`` k-means++ seedings."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(starts):
        labels, _, trace, _ = lloyd(Y, kmeanspp_centers(Y, K, rng))
        if best is None or trace[-1] < best[0]:
            best = (trace[-1], labels)
    return best[1]


# --- change-point segmentation ------------------------------------------------

def _floored_logdet(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[-1]
    tr = np.trace(cov, axis1=-2, axis2=-1) / d
    cov = cov + (COV_FLOOR * np.maximum(tr, 1.0))[..., None, None] * np.eye(d)
    return np.linalg.slogdet(cov)[1]


class _GaussianCost:
    """Negative profile log-likelihood (up to constants) of a constant-mean, full-covariance piece."""

    def __init__(self, Y: np.ndarray):
        d = Y.shape[1]
        self.S1 = np.vstack([np.zeros(d), np.cumsum(Y, axis=0)])
        outer = Y[:, :, None] * Y[:, None, :]
        self.S2 = np.concatenate([np.zeros((1, d, d)), np.cumsum(outer, axis=0)])

    def __call__(self, a, b) -> np.ndarray:
        a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
        m = (b - a).astype(float)
        mean = (self.S1[b] - self.S1[a]) / m[..., None]
        cov = (self.S2[b] - self.S2[a]) / m[..., None, None] - mean[..., :, None] * mean[..., None, :]
        return 0.5 * m * _floored_logdet(cov)


def _best_split(cost: _GaussianCost, a: int, b: int, min_len: int):
    if b - a < 2 * min_len:
        return -np.inf, None
    s = np.arange(a + min_len, b - min_len + 1)
    tot = cost(a, s) + cost(s, b)
    j = int(np.argmin(tot))
    return float(cost(a, b) - tot[j]), int(s[j])


def binary_segmentation(Y: np.ndarray, n_pieces: int, min_len: int) -> list[int]:
    """Greedy top-down splitting; returns the piece boundaries ``[0, ..., n]``.

    Stops early when no piece can be split further.
    """
    n = Y.shape[0]
    cost = _GaussianCost(Y)
    pieces = {(0, n): _best_split(cost, 0, n, min_len)}
    while len(pieces) < n_pieces:
        (a, b), (gain, s) = max(pieces.items(), key=lambda kv: kv[1][0])
        if s is None:
            break
        del pieces[(a, b)]
        pieces[(a, s)] = _best_split(cost, a, s, min_len)
        pieces[(s, b)] = _best_split(cost, s, b, min_len)
    return [a for a, _ in sorted(pieces)] + [n]


def trend_cost(Y: np.ndarray, p: int) -> float:
    """Order-p polynomial fit of a piece with independent per-channel noise.

    Uses the unbiased residual variance so that short pieces are not favoured
    by their small sample size.
    """
    m, d = Y.shape
    u = np.arange(m, dtype=float) / m
    X = np.vander(u, p + 1, increasing=True)
    Yc = Y - Y.mean(axis=0)
    coef, *_ = np.linalg.lstsq(X, Yc, rcond=None)
    resid = Yc - X @ coef
    var = (resid ** 2).sum(axis=0) / max(m - p - 1, 1)
    var = var + COV_FLOOR * max(float(var.mean()), 1.0)
    return 0.5 * m * float(np.log(var).sum())


def merge_adjacent(Y: np.ndarray, bounds: list[int], K: int, p: int) -> list[int]:
    """Merge neighbouring pieces, cheapest first under ``trend_cost``, until K remain."""
    bounds = list(bounds)
    piece = {}

    def cost(a, b):
        if (a, b) not in piece:
            piece[(a, b)] = trend_cost(Y[a:b], p)
        return piece[(a, b)]

    while len(bounds) - 1 > K:
        loss = [cost(bounds[j - 1], bounds[j + 1]) - cost(bounds[j - 1], bounds[j])
                - cost(bounds[j], bounds[j + 1]) for j in range(1, len(bounds) - 1)]
        del bounds[1 + int(np.argmin(loss))]
    return bounds


def changepoint_partition(Y: np.ndarray, K: int, p: int,
                          n_pieces: Optional[int] = None) -> Optional[np.ndarray]:
    """0-based labels of K consecutive blocks, or None when the series is too short to cut."""
    n = Y.shape[0]
    n_pieces = PIECES_PER_STATE * K if n_pieces is None else max(n_pieces, K)
    min_len = max(p + 2, min(MIN_PIECE, n // (2 * n_pieces)))
    bounds = binary_segmentation(Y, n_pieces, min_len)
    if len(bounds) - 1 < K:
        return None
    bounds = merge_adjacent(Y, bounds, K, p)
    labels = np.empty(n, dtype=np.int64)
    for k in range(K):
        labels[bounds[k]:bounds[k + 1]] = k
    return labels
