"""Slow, deliberately naive reference computations used to cross-check the package.

Nothing here imports the package under test; each function recomputes its
quantity by the most direct route available (enumeration, explicit inverses,
plain loops).
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def mvn_logpdf(y, mean, cov) -> float:
    """Gaussian log-density with an explicit inverse and determinant."""
    y, mean, cov = (np.asarray(a, dtype=float) for a in (y, mean, cov))
    d = y.size
    diff = y - mean
    quad = float(diff @ np.linalg.inv(cov) @ diff)
    return -0.5 * (d * math.log(2 * math.pi) + math.log(np.linalg.det(cov)) + quad)


def enumerate_paths(pi, A, logb):
    """Exhaustive marginalization over all K**n state paths.

    Returns ``(loglik, tau, xi, best_path)`` where ``xi[i-1, l, k]`` is
    p(z_{i-1}=l, z_i=k | y) and ``best_path`` is the 0-based joint argmax
    (lexicographically first among exact ties).
    """
    pi, A, logb = (np.asarray(a, dtype=float) for a in (pi, A, logb))
    n, K = logb.shape
    paths = list(itertools.product(range(K), repeat=n))
    logp = np.empty(len(paths))
    with np.errstate(divide="ignore"):
        lpi, lA = np.log(pi), np.log(A)
    for j, z in enumerate(paths):
        s = lpi[z[0]] + logb[0, z[0]]
        for i in range(1, n):
            s += lA[z[i - 1], z[i]] + logb[i, z[i]]
        logp[j] = s
    top = logp.max()
    weights = np.exp(logp - top)
    total = math.fsum(weights)
    loglik = top + math.log(total)
    tau = np.zeros((n, K))
    xi = np.zeros((max(n - 1, 0), K, K))
    for wgt, z in zip(weights, paths):
        for i in range(n):
            tau[i, z[i]] += wgt
        for i in range(1, n):
            xi[i - 1, z[i - 1], z[i]] += wgt
    best = np.array(paths[int(np.argmax(logp))])
    return loglik, tau / total, xi / total, best


def path_logprob(pi, A, logb, z) -> float:
    with np.errstate(divide="ignore"):
        s = math.log(pi[z[0]]) + logb[0, z[0]] if pi[z[0]] > 0 else -math.inf
        for i in range(1, len(z)):
            s += (math.log(A[z[i - 1], z[i]]) if A[z[i - 1], z[i]] > 0 else -math.inf) + logb[i, z[i]]
    return s


def normal_equations(X, Y, w):
    """``(X^T W X)^{-1} X^T W Y`` with an explicitly formed inverse."""
    X, Y, w = (np.asarray(a, dtype=float) for a in (X, Y, w))
    W = np.diag(w)
    return np.linalg.inv(X.T @ W @ X) @ (X.T @ W @ Y)


def two_pass_covariance(X, Y, B, w, eps=1e-6):
    """Weighted residual covariance by explicit loops, then the relative diagonal floor."""
    X, Y, B, w = (np.asarray(a, dtype=float) for a in (X, Y, B, w))
    n, d = Y.shape
    resid = [Y[i] - X[i] @ B for i in range(n)]
    S = np.zeros((d, d))
    for i in range(n):
        S += w[i] * np.outer(resid[i], resid[i])
    S /= math.fsum(w)
    S += eps * max(np.trace(S) / d, 1.0) * np.eye(d)
    return (S + S.T) / 2


def centered_covariance(Y):
    """Maximum-likelihood covariance: mean first, then the centred cross-product."""
    Y = np.asarray(Y, dtype=float)
    mean = Y.sum(axis=0) / Y.shape[0]
    C = Y - mean
    return C.T @ C / Y.shape[0]


def horner(B, u):
    """Evaluate every channel's polynomial with coefficients ``B[:, c]`` at ``u`` by Horner's rule."""
    B = np.asarray(B, dtype=float)
    out = np.zeros(B.shape[1])
    for c in range(B.shape[1]):
        acc = 0.0
        for coef in B[::-1, c]:
            acc = acc * u + coef
        out[c] = acc
    return out


def best_matching_correct(pred, truth) -> int:
    """Largest number of agreements over every one-to-one relabelling of ``pred``."""
    pred, truth = list(map(int, pred)), list(map(int, truth))
    kp, kt = max(pred), max(truth)
    size = max(kp, kt)
    table = [[0] * (size + 1) for _ in range(size + 1)]
    for a, b in zip(pred, truth):
        table[a][b] += 1
    best = 0
    for perm in itertools.permutations(range(1, size + 1)):
        # predicted class c -> true class perm[c-1]; classes above kt earn nothing
        best = max(best, sum(table[c][perm[c - 1]] for c in range(1, kp + 1)))
    return best


def lloyd(Y, centers, max_iter=300, tol=1e-7):
    """Textbook Lloyd iterations; an empty cluster is moved to the point farthest from its center."""
    Y = np.asarray(Y, dtype=float)
    centers = [np.array(c, dtype=float) for c in centers]
    n, K = Y.shape[0], len(centers)

    def assign(cs):
        labels, dist = [], []
        for i in range(n):
            ds = [float(np.sum((Y[i] - c) ** 2)) for c in cs]
            k = min(range(K), key=lambda j: (ds[j], j))
            labels.append(k)
            dist.append(ds[k])
        return labels, dist

    for _ in range(max_iter):
        labels, dist = assign(centers)
        used = set()
        new = []
        for k in range(K):
            members = [Y[i] for i in range(n) if labels[i] == k]
            if members:
                new.append(np.mean(members, axis=0))
            else:
                far = max((i for i in range(n) if i not in used), key=lambda i: (dist[i], -i))
                used.add(far)
                new.append(Y[far].copy())
        shift = max(float(np.sqrt(np.sum((a - b) ** 2))) for a, b in zip(new, centers))
        centers = new
        if shift < tol:
            break
    labels, dist = assign(centers)
    return np.array(labels), np.array(centers), math.fsum(dist)
