"""Polynomial design matrices and the weighted multivariate regression solves.

Raw timestamps are mapped affinely onto [0, 1] before being raised to powers;
a cubic Vandermonde on raw seconds is hopelessly ill-conditioned, while the
normalization only reparameterizes the polynomial and leaves fitted means
unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .errors import DegenerateWeights, DimensionMismatch, SingularSystem

RIDGE_REL = 1e-8
RANK_TOL = 1e-10
COV_FLOOR = 1e-6


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    norm_offset: float
    norm_scale: float

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1

    def __array__(self, dtype=None, copy=None):
        return self.X if dtype is None else self.X.astype(dtype)


ArrayOrDesign = Union[np.ndarray, DesignMatrix]


def normalization(timestamps) -> tuple[float, float]:
    """Offset and scale sending the first timestamp to 0 and the last to 1."""
    t = np.asarray(timestamps, dtype=float)
    offset = float(t[0])
    span = float(t[-1] - t[0])
    return offset, (span if span > 0 else 1.0)


def build_design(timestamps, p: int, offset: Optional[float] = None,
                 scale: Optional[float] = None) -> DesignMatrix:
    """Rows ``(1, u, u**2, ..., u**p)`` on normalized time ``u = (t - offset) / scale``.

    Pass ``offset``/``scale`` from a stored model to rebuild the exact design it
    was trained on; otherwise the series itself defines the map.
    """
    if p < 0:
        raise ValueError(f"polynomial order must be >= 0, got {p}")
    t = np.asarray(timestamps, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("timestamps must be a non-empty vector")
    if offset is None or scale is None:
        offset, scale = normalization(t)
    u = (t - offset) / scale
    X = np.vander(u, p + 1, increasing=True)
    X.setflags(write=False)
    return DesignMatrix(X, float(offset), float(scale))


def _as_matrix(X: ArrayOrDesign) -> np.ndarray:
    return X.X if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)


def _weights(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatch(f"{w.shape[0] if w.ndim else 0} weights for {n} samples")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DegenerateWeights("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise DegenerateWeights("weights sum to zero")
    return w


def _local_basis(u: np.ndarray, w: np.ndarray, p: int):
    """Vandermonde in ``v = (u - m) / s`` centred on the weighted time window, and the
    matrix ``M`` with ``x(u) = M @ x_local(v)`` that maps local coefficients back."""
    sw = w.sum()
    m = float(w @ u / sw)
    s = float(np.sqrt(w @ (u - m) ** 2 / sw))
    if not s > 0:
        s = 1.0
    V = np.vander((u - m) / s, p + 1, increasing=True)
    M = np.zeros((p + 1, p + 1))
    for j in range(p + 1):
        for i in range(j + 1):
            M[j, i] = comb(j, i) * m ** (j - i) * s ** i
    return V, M


def _ridge_solve(V: np.ndarray, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
    Vw = V * w[:, None]
    G = Vw.T @ V
    rhs = Vw.T @ Y
    q = G.shape[0]
    G[np.diag_indices(q)] += RIDGE_REL * np.trace(G) / q
    try:
        return scipy.linalg.solve(G, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    try:
        return scipy.linalg.solve(G, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystem(str(exc)) from exc


def weighted_mv_least_squares(X: ArrayOrDesign, Y, w) -> np.ndarray:
    """Solve ``min_B sum_i w_i ||y_i - B^T x_i||^2`` for a (p+1, d) coefficient matrix.

    ``X`` must be a polynomial design (columns ``1, u, ..., u^p``). The solve
    runs by QR in a basis centred and scaled on the weighted time window, so a
    regime confined to a short stretch of the series is fitted as accurately
    as one spanning all of it; the coefficients are then mapped back exactly.
    When the weighted design is rank-deficient (fewer distinct supported time
    points than coefficients) the normal equations are solved with a ridge
    ``1e-8 * trace(G) / (p + 1)`` instead.
    """
    X = _as_matrix(X)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"design has {X.shape[0]} rows, data {Y.shape[0]}")
    w = _weights(w, X.shape[0])
    q = X.shape[1]
    if q == 1:
        return (w @ Y / w.sum())[None, :]
    V, M = _local_basis(X[:, 1], w, q - 1)
    sw = np.sqrt(w / w.max())
    Q, R = np.linalg.qr(V * sw[:, None])
    r = np.abs(np.diag(R))
    if r.min() > RANK_TOL * r.max():
        Bl = scipy.linalg.solve_triangular(R, Q.T @ (Y * sw[:, None]))
    else:
        Bl = _ridge_solve(V, Y, w)
    B = scipy.linalg.solve_triangular(M.T, Bl, lower=False)
    if not np.all(np.isfinite(B)):
        raise SingularSystem("non-finite regression coefficients")
    return B


def floor_covariance(S: np.ndarray) -> np.ndarray:
    """Inflate the diagonal by ``1e-6 * max(trace/d, 1)`` and symmetrize."""
    d = S.shape[0]
    S = S + COV_FLOOR * max(np.trace(S) / d, 1.0) * np.eye(d)
    return 0.5 * (S + S.T)


def weighted_covariance(X: ArrayOrDesign, Y, B, w) -> np.ndarray:
    """Weighted residual covariance ``R^T W R / sum(w)`` with ``R = Y - X B``, floored."""
    X = _as_matrix(X)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    w = _weights(w, X.shape[0])
    R = Y - X @ np.asarray(B, dtype=float)
    S = (R * w[:, None]).T @ R / w.sum()
    return floor_covariance(S)


def predict_mean(B, t_row) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    t_row = np.asarray(t_row, dtype=float)
    if B.ndim != 2 or t_row.shape[-1] != B.shape[0]:
        raise DimensionMismatch(f"covariate length {t_row.shape[-1]} vs {B.shape[0]} coefficient rows")
    return t_row @ B
