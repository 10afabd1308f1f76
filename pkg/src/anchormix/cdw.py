"""Anchor selection from case-deletion importance-sampling weights.

A single Bayesian linear regression is fitted by Gibbs sampling. Each draw
gives log case-deletion weights, and their covariance across draws measures
how similarly cases influence the fit. Clustering the leading eigenvectors of
that covariance, then sub-clustering each cluster, yields anchors: the member
closest to each sub-cluster centroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from .core import AnchorSet, Dataset, RegPrior, log_normal_pdf
from .numerics import as_rng, kmeans, sym_eig


@dataclass(frozen=True)
class SlrChain:
    beta: np.ndarray    # M x p
    sigma2: np.ndarray  # M

    def __len__(self):
        return self.sigma2.size


@dataclass(frozen=True)
class WeightMatrix:
    logw: np.ndarray
    normalized: Optional[np.ndarray] = None


@dataclass(frozen=True)
class InfluenceSummary:
    c_hat: np.ndarray
    scores: np.ndarray
    eigenvalues: np.ndarray


def gibbs_slr(data: Dataset, prior: RegPrior, n_samples: int = 10_000, burn_in: int = 1_000,
              rng=None) -> SlrChain:
    """Two-block Gibbs sampler for ``y ~ N(X beta, sigma2)`` under the mixture's prior with k=1."""
    X, y = data.x, data.y
    n, p = X.shape
    if n < p:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    if prior.mu_beta.size != p:
        raise ValueError("prior dimension does not match the design matrix")
    gen = as_rng(rng).gen
    vinv = prior.v_inv
    vinv_mu = vinv @ prior.mu_beta
    xtx, xty = X.T @ X, X.T @ y
    shape = prior.a + n / 2.0

    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    total = burn_in + n_samples
    betas = np.empty((n_samples, p))
    sig = np.empty(n_samples)
    z = gen.standard_normal((total, p))
    for t in range(total):
        resid = y - X @ beta
        tau = gen.gamma(shape, 1.0 / (prior.b + 0.5 * resid @ resid))
        prec = tau * xtx + vinv
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, tau * xty + vinv_mu)
        # chol^-T z has covariance prec^-1
        beta = mean + np.linalg.solve(chol.T, z[t])
        if t >= burn_in:
            betas[t - burn_in] = beta
            sig[t - burn_in] = 1.0 / tau
    return SlrChain(betas, sig)


def log_case_deletion_weights(data: Dataset, chain: SlrChain) -> WeightMatrix:
    """n x M log weights; with independent cases ``w_i(theta) = 1 / f(y_i | theta)``."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    means = data.x @ chain.beta.T
    return WeightMatrix(-log_normal_pdf(data.y[:, None], means, chain.sigma2[None, :]))


def normalize_weights(w: WeightMatrix) -> WeightMatrix:
    logw = np.asarray(w.logw)
    norm = np.exp(logw - logw.max(axis=1, keepdims=True))
    norm /= norm.sum(axis=1, keepdims=True)
    return WeightMatrix(logw, norm)


def case_deleted_mean(values, w: WeightMatrix) -> np.ndarray:
    """Importance-sampling estimates of case-deleted posterior means.

    ``values`` is M x q (a draw per row); the result is n x q.
    """
    if w.normalized is None:
        w = normalize_weights(w)
    return w.normalized @ np.asarray(values)


def influence_summary(w: WeightMatrix, d: int = 3) -> InfluenceSummary:
    logw = np.asarray(w.logw)
    n, M = logw.shape
    if M < 2:
        raise ValueError("need at least two draws")
    if d > n:
        raise ValueError(f"d={d} exceeds n={n}")
    c_hat = np.cov(logw)
    c_hat = 0.5 * (c_hat + c_hat.T)
    eig = sym_eig(c_hat)
    return InfluenceSummary(c_hat, eig.vectors[:, :d], eig.values[:d])


def _relabel_by_size(labels, k):
    sizes = np.bincount(labels, minlength=k)
    # largest first; equal sizes keep the lower original id first
    order = np.lexsort((np.arange(k), -sizes))
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(k)
    return remap[labels]


def cdw_select_anchors(summary: InfluenceSummary, k: int = 3, m: int = 3, rng=None,
                       restarts: int = 25):
    """Two-level k-means on the PCA scores; returns ``(AnchorSet, cluster_labels)``.

    Components are numbered by descending cluster size.
    """
    scores = np.asarray(summary.scores)
    n = scores.shape[0]
    if k * m > n:
        raise ValueError(f"k*m = {k * m} exceeds n = {n}")
    rng = as_rng(rng)
    top = kmeans(scores, k, restarts=restarts, rng=rng)
    labels = _relabel_by_size(top.labels, k)
    sets = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if members.size < m:
            raise ValueError(f"cluster {j} has {members.size} members, fewer than m={m}; "
                             "reduce m for this cluster")
        sub = kmeans(scores[members], m, restarts=restarts, rng=rng)
        chosen = []
        for c in range(m):
            in_sub = members[sub.labels == c]
            if in_sub.size == 0:
                raise ValueError(f"cluster {j} has fewer than m={m} distinct score vectors")
            dist = ((scores[in_sub] - sub.centroids[c]) ** 2).sum(axis=1)
            chosen.append(int(in_sub[np.argmin(dist)]))
        sets.append(tuple(chosen))
    return AnchorSet(tuple(sets)), labels


def cdw_anchors(data: Dataset, prior: Optional[RegPrior] = None, k: int = 3, m: int = 3,
                n_samples: int = 10_000, burn_in: int = 1_000, d: int = 3, rng=None):
    """Full CDW-reg pipeline; returns ``(AnchorSet, labels, summary)``."""
    prior = RegPrior() if prior is None else prior
    rng = as_rng(rng)
    chain_rng, cluster_rng = rng.spawn(2)
    chain = gibbs_slr(data, prior, n_samples, burn_in, chain_rng)
    summary = influence_summary(log_case_deletion_weights(data, chain), d)
    anchors, labels = cdw_select_anchors(summary, k, m, cluster_rng)
    return anchors, labels, summary
