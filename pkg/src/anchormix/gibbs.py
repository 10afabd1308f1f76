"""Gibbs sampling for the anchored mixture of regressions and posterior summaries.

Components are indexed from 0 throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb

from .core import AnchorSet, Dataset, RegPrior, log_normal_pdf
from .numerics import as_rng, sample_categorical


@dataclass(frozen=True)
class PosteriorChain:
    beta: np.ndarray    # M x k x p
    sigma2: np.ndarray  # M
    eta: np.ndarray     # M x k
    s: np.ndarray       # M x n
    anchors: AnchorSet
    seed: Optional[int] = None
    burn_in: int = 0
    eta_counts_anchored: bool = True

    def __len__(self):
        return self.sigma2.size

    @property
    def k(self) -> int:
        return self.beta.shape[1]

    def check_anchored(self) -> None:
        """Raise if any draw moves an anchored point off its component."""
        for j, idx in enumerate(self.anchors.sets):
            if idx and np.any(self.s[:, list(idx)] != j):
                raise AssertionError(f"anchored points of component {j} were reallocated")


@dataclass(frozen=True)
class FitSummary:
    beta_mean: np.ndarray
    lines: np.ndarray
    s_hat: np.ndarray
    allocation_probs: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.s_hat, minlength=self.beta_mean.shape[0])


@dataclass(frozen=True)
class SwitchDiagnostic:
    n_switches: int
    switch_draws: np.ndarray
    slope_traces: np.ndarray


@dataclass(frozen=True)
class CrossTab:
    table: np.ndarray
    components: tuple
    labels: tuple
    ari: float


def _draw_beta(X, y, tau, vinv, vinv_mu, z):
    prec = tau * (X.T @ X) + vinv
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, tau * (X.T @ y) + vinv_mu)
    return mean + np.linalg.solve(chol.T, z)


def gibbs_anchored_mixreg(data: Dataset, anchors: AnchorSet, prior: RegPrior, k: int = 3,
                          n_samples: int = 20_000, burn_in: int = 2_000, rng=None,
                          eta_counts_anchored: bool = True, thin: int = 1) -> PosteriorChain:
    """Systematic-scan Gibbs sampler for the anchored mixture of regressions.

    Each sweep updates, in order, the coefficients of every component, the
    shared precision, the weights and the allocations of unanchored points.
    Anchored allocations never move. A component with no allocated points
    draws its coefficients from the prior.

    With ``eta_counts_anchored`` the weights are drawn from
    ``Dirichlet(alpha + n_j)`` counting every point allocated to j; otherwise
    anchored points are left out of ``n_j``.
    """
    X, y = data.x, data.y
    n, p = X.shape
    anchors.check(n, k)
    if prior.mu_beta.size != p:
        raise ValueError("prior dimension does not match the design matrix")
    stream = as_rng(rng)
    gen = stream.gen
    vinv = prior.v_inv
    vinv_mu = vinv @ prior.mu_beta
    prior_sd = np.sqrt(prior.v)
    fixed = anchors.labels(n)
    free = np.flatnonzero(fixed < 0)
    anchored_counts = np.bincount(fixed[fixed >= 0], minlength=k)

    s = fixed.copy()
    s[free] = gen.integers(k, size=free.size)
    tau = 1.0 / max(float(np.var(y)), 1e-12)
    eta = np.full(k, 1.0 / k)
    beta = np.empty((k, p))

    total = burn_in + n_samples * thin
    out_beta = np.empty((n_samples, k, p))
    out_sig = np.empty(n_samples)
    out_eta = np.empty((n_samples, k))
    out_s = np.empty((n_samples, n), dtype=np.int16 if k < 32000 else np.int32)
    for t in range(total):
        z = gen.standard_normal((k, p))
        for j in range(k):
            rows = s == j
            if rows.any():
                beta[j] = _draw_beta(X[rows], y[rows], tau, vinv, vinv_mu, z[j])
            else:
                beta[j] = prior.mu_beta + prior_sd * z[j]
        resid = y - np.einsum("ij,ij->i", X, beta[s])
        tau = gen.gamma(prior.a + n / 2.0, 1.0 / (prior.b + 0.5 * resid @ resid))
        counts = np.bincount(s, minlength=k)
        if not eta_counts_anchored:
            counts = counts - anchored_counts
        g = gen.gamma(prior.alpha + counts)
        eta = g / g.sum()
        if free.size:
            with np.errstate(divide="ignore"):
                logp = np.log(eta) + log_normal_pdf(y[free, None], X[free] @ beta.T, 1.0 / tau)
            logp -= logp.max(axis=1, keepdims=True)
            prob = np.exp(logp)
            prob /= prob.sum(axis=1, keepdims=True)
            s[free] = sample_categorical(prob, stream)
        if t >= burn_in and (t - burn_in) % thin == 0:
            m = (t - burn_in) // thin
            out_beta[m] = beta
            out_sig[m] = 1.0 / tau
            out_eta[m] = eta
            out_s[m] = s
    return PosteriorChain(out_beta, out_sig, out_eta, out_s, anchors, stream.seed, burn_in,
                          eta_counts_anchored)


def allocation_counts(s, k: int) -> np.ndarray:
    """n x k table of how often each point is allocated to each component."""
    s = np.asarray(s)
    M, n = s.shape
    counts = np.zeros((n, k), dtype=np.int64)
    for j in range(k):
        counts[:, j] = (s == j).sum(axis=0)
    return counts


def map_allocations(chain: PosteriorChain) -> FitSummary:
    if len(chain) == 0:
        raise ValueError("empty chain")
    counts = allocation_counts(chain.s, chain.k)
    probs = counts / counts.sum(axis=1, keepdims=True)
    s_hat = np.argmax(counts, axis=1)
    beta_mean = chain.beta.mean(axis=0)
    return FitSummary(beta_mean, beta_mean[:, :2].copy(), s_hat, probs)


def label_switch_diagnostic(chain: PosteriorChain) -> SwitchDiagnostic:
    """Count draws whose best relabeling relative to the previous draw is not the identity.

    Consecutive coefficient arrays (all of beta, so near-equal slopes are told
    apart by their intercepts) are matched over all k! relabelings by squared
    distance; the identity wins ties. Slope traces are returned for plotting.
    """
    beta = chain.beta
    k = beta.shape[1]
    perms = np.array(list(itertools.permutations(range(k))))
    prev, cur = beta[:-1], beta[1:]
    cost = ((cur[:, perms, :] - prev[:, None, :, :]) ** 2).sum(axis=(2, 3))
    switched = cost.min(axis=1) < cost[:, 0]
    draws = np.flatnonzero(switched) + 1
    col = 1 if beta.shape[2] > 1 else 0
    return SwitchDiagnostic(int(draws.size), draws, beta[:, :, col].copy())


def adjusted_rand_index(table) -> float:
    """Adjusted Rand index from a contingency table of two partitions."""
    table = np.asarray(table, dtype=np.int64)
    n = table.sum()
    sum_cells = comb(table, 2).sum()
    sum_rows = comb(table.sum(axis=1), 2).sum()
    sum_cols = comb(table.sum(axis=0), 2).sum()
    total = comb(n, 2)
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        # both partitions trivial in the same way
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def taxonomy_crosstab(s_hat, labels: Optional[Sequence], k: Optional[int] = None) -> CrossTab:
    """Components x taxa contingency table with its adjusted Rand index."""
    if labels is None:
        raise ValueError("taxonomy labels are missing")
    s_hat = np.asarray(s_hat, dtype=int)
    labels = list(labels)
    if len(labels) != s_hat.size:
        raise ValueError("labels and allocations differ in length")
    k = int(s_hat.max()) + 1 if k is None else k
    names = tuple(sorted(set(labels)))
    col = {name: c for c, name in enumerate(names)}
    table = np.zeros((k, len(names)), dtype=np.int64)
    for comp, lab in zip(s_hat, labels):
        table[comp, col[lab]] += 1
    return CrossTab(table, tuple(range(k)), names, adjusted_rand_index(table))
