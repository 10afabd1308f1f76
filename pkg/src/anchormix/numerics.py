"""Numerical kernels: symmetric eigendecomposition, k-means, exact anchor
assignment, and seedable samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import AnchorSet


class RngStream:
    """Seeded random stream; ``spawn`` derives independent child streams."""

    def __init__(self, seed: int = 0, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n: int) -> list["RngStream"]:
        return [RngStream(self.seed, s) for s in self._seq.spawn(n)]

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def as_rng(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(0 if rng is None else int(rng))


# -- eigendecomposition ------------------------------------------------------


@dataclass(frozen=True)
class SymEigResult:
    values: np.ndarray
    vectors: np.ndarray


def sym_eig(S) -> SymEigResult:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector's largest-magnitude entry is made positive so the
    output is reproducible.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if not np.all(np.isfinite(S)):
        raise ValueError("S has non-finite entries")
    S = 0.5 * (S + S.T)
    values, vectors = np.linalg.eigh(S)
    order = np.argsort(values, kind="stable")[::-1]
    values, vectors = values[order], vectors[:, order]
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return SymEigResult(values, vectors * signs)


# -- k-means -----------------------------------------------------------------


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    degenerate: bool = False
    restart_objectives: tuple = ()
    history: tuple = ()


def _sqdist(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(points, k, gen):
    n = points.shape[0]
    first = gen.integers(n)
    centers = [points[first]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = gen.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2) / total, gen.random(), side="right"))
            idx = min(idx, n - 1)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(points, centroids, max_iter):
    k = centroids.shape[0]
    prev = np.inf
    history = []
    for _ in range(max_iter):
        d2 = _sqdist(points, centroids)
        labels = np.argmin(d2, axis=1)
        for j in range(k):
            members = labels == j
            if not members.any():
                # reseed an empty cluster at the point currently worst served
                far = int(np.argmax(d2[np.arange(len(points)), labels]))
                labels[far] = j
                d2[far] = 0.0
                members = labels == j
            centroids[j] = points[members].mean(axis=0)
        obj = float(_sqdist(points, centroids).min(axis=1).sum())
        history.append(obj)
        if obj >= prev - 1e-14 * max(1.0, abs(prev)):
            break
        prev = obj
    return centroids, history


def kmeans(points, k: int, restarts: int = 25, rng=None, max_iter: int = 300) -> KMeansResult:
    """Best-of-``restarts`` Lloyd's algorithm with k-means++ seeding.

    Labels are nearest-centroid with ties going to the lowest cluster id.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    gen = as_rng(rng).gen
    distinct = np.unique(points, axis=0).shape[0]
    best = None
    objectives = []
    for _ in range(max(1, restarts)):
        cents, history = _lloyd(points, _kmeanspp(points, k, gen), max_iter)
        labels = np.argmin(_sqdist(points, cents), axis=1)
        obj = float(((points - cents[labels]) ** 2).sum())
        objectives.append(obj)
        if best is None or obj < best[2]:
            best = (labels, cents.copy(), obj, tuple(history))
    labels, cents, obj, history = best
    return KMeansResult(labels, cents, obj, distinct < k, tuple(objectives), history)


def wcss(points, labels) -> float:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    total = 0.0
    for j in np.unique(labels):
        grp = points[labels == j]
        total += float(((grp - grp.mean(axis=0)) ** 2).sum())
    return total


# -- anchor assignment -------------------------------------------------------


def assign_anchors(r, m) -> AnchorSet:
    """Disjoint sets of sizes ``m`` maximizing the summed responsibilities.

    Solved exactly as a rectangular assignment problem with one row per
    anchor slot (``m_j`` copies of component j) and one column per point.
    """
    r = np.asarray(r, dtype=float)
    n, k = r.shape
    m = np.asarray(m, dtype=int)
    if m.shape != (k,) or np.any(m < 0):
        raise ValueError(f"m must be {k} non-negative sizes")
    if m.sum() > n:
        raise ValueError(f"cannot anchor {m.sum()} points among n={n}")
    slots = np.repeat(np.arange(k), m)
    if slots.size == 0:
        return AnchorSet.empty(k)
    rows, cols = linear_sum_assignment(r[:, slots].T, maximize=True)
    sets = [[] for _ in range(k)]
    for row, col in zip(rows, cols):
        sets[slots[row]].append(int(col))
    return AnchorSet(tuple(tuple(s) for s in sets))


def anchor_score(r, anchors: AnchorSet) -> float:
    r = np.asarray(r)
    return float(sum(r[list(s), j].sum() for j, s in enumerate(anchors.sets)))


# -- samplers ----------------------------------------------------------------


def sample_normal(mean, var, rng, size=None):
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be non-negative")
    return as_rng(rng).gen.normal(mean, np.sqrt(var), size=size)


def sample_mvn(mean, cov, rng):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    try:
        chol = np.linalg.cholesky(0.5 * (cov + cov.T))
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    return mean + chol @ as_rng(rng).gen.standard_normal(mean.size)


def sample_gamma(shape, rate, rng, size=None):
    """Gamma draw with mean ``shape / rate``."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise ValueError("shape and rate must be positive")
    return as_rng(rng).gen.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def sample_dirichlet(conc, rng):
    conc = np.asarray(conc, dtype=float)
    if conc.ndim != 1 or np.any(conc <= 0):
        raise ValueError("concentrations must be a positive vector")
    g = as_rng(rng).gen.gamma(conc)
    if g.sum() == 0:
        # every gamma underflowed (tiny concentrations): fall back to the largest
        g = (conc == conc.max()).astype(float)
    return g / g.sum()


def sample_categorical(probs, rng):
    """Draw an index from each row of ``probs`` (a vector or n x k matrix).

    Zero-probability categories are never returned.
    """
    probs = np.asarray(probs, dtype=float)
    single = probs.ndim == 1
    p2 = np.atleast_2d(probs)
    if np.any(p2 < 0) or np.any(np.abs(p2.sum(axis=1) - 1.0) > 1e-8):
        raise ValueError("probabilities must be simplex points")
    cdf = np.cumsum(p2, axis=1)
    cdf /= cdf[:, -1:]
    u = as_rng(rng).gen.random(p2.shape[0])
    draws = (u[:, None] >= cdf).sum(axis=1)
    draws = np.minimum(draws, p2.shape[1] - 1)
    return int(draws[0]) if single else draws
