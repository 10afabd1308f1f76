"""Anchored EM for choosing anchor points.

Each iteration runs an E step, then an anchor step (the m_j points with the
largest responsibilities for each component become one-hot rows, chosen
jointly and disjointly), then a MAP M step under the anchored
responsibilities. Two models are provided: a mixture of regressions
(``"reg"``) and a multivariate Gaussian mixture on ``z = (y, x_2..x_p)``
(``"mvn"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp, multigammaln, xlogy

from .core import (AnchorSet, Dataset, MixRegParams, RegPrior, component_logpdf,
                   log_normal_pdf)
from .numerics import as_rng, assign_anchors

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MvnMixParams:
    theta: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        eta = np.array(self.eta, dtype=float)
        k, p = theta.shape
        if sigma.shape != (k, p, p) or eta.shape != (k,):
            raise ValueError("inconsistent MvnMixParams shapes")
        if np.any(eta < 0) or abs(eta.sum() - 1.0) > 1e-12:
            raise ValueError("eta must lie on the simplex")
        for s in sigma:
            if not np.allclose(s, s.T, atol=1e-10) or np.linalg.eigvalsh(s)[0] <= 0:
                raise ValueError("covariances must be symmetric positive definite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "eta", eta)

    @property
    def k(self) -> int:
        return self.theta.shape[0]

    def permuted(self, perm) -> "MvnMixParams":
        perm = np.asarray(perm)
        return MvnMixParams(self.theta[perm], self.sigma[perm], self.eta[perm])


@dataclass(frozen=True)
class MvnPrior:
    """Normal-Wishart prior on each ``(theta_j, Sigma_j)``.

    The prior on ``theta_j`` given ``Sigma_j`` has covariance ``kappa * Sigma_j``;
    with that reading the M-step updates below are the exact MAP updates.
    ``Sigma_j^{-1}`` is Wishart with ``nu`` degrees of freedom and scale ``w``.
    """

    mu: np.ndarray
    kappa: float = 1.25
    w: np.ndarray = field(default_factory=lambda: 1.5 * np.eye(2))
    nu: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        w = np.array(self.w, dtype=float)
        if w.shape != (mu.size, mu.size):
            raise ValueError("w must be p x p")
        if self.kappa <= 0 or self.alpha <= 0:
            raise ValueError("kappa and alpha must be positive")
        if np.linalg.eigvalsh(0.5 * (w + w.T))[0] <= 0:
            raise ValueError("w must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "w", w)

    @classmethod
    def default_for(cls, z, **overrides) -> "MvnPrior":
        """Defaults centred at the sample mean of ``z``."""
        z = np.asarray(z, dtype=float)
        kw = dict(mu=z.mean(axis=0), kappa=1.25, w=1.5 * np.eye(z.shape[1]), nu=2.0)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class EmTrace:
    """Result of :func:`run_anchored_em` (the winning start)."""

    objective: np.ndarray
    n_iter: int
    converged: bool
    anchors: AnchorSet
    params: object
    responsibilities: np.ndarray
    log_posterior: np.ndarray
    start_objectives: tuple = ()
    best_start: int = 0

    @property
    def final_objective(self) -> float:
        return float(self.objective[-1])


# -- shared pieces -----------------------------------------------------------


def _normalize_log(logp):
    # shift by the row max before exponentiating; dividing by the sum keeps rows exact
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def _log_eta(eta):
    with np.errstate(divide="ignore"):
        return np.log(eta)


def update_eta(r_tilde, alpha: float) -> np.ndarray:
    """MAP mixture weights ``(n_j + alpha - 1) / (n + k(alpha - 1))``.

    For ``alpha < 1`` negative numerators are clipped at zero.
    """
    counts = np.asarray(r_tilde).sum(axis=0) + alpha - 1.0
    counts = np.clip(counts, 0.0, None)
    return counts / counts.sum()


def apply_anchors(r, anchors: AnchorSet) -> np.ndarray:
    """Responsibilities with anchored rows replaced by one-hot vectors."""
    rt = np.array(r, dtype=float)
    for j, s in enumerate(anchors.sets):
        idx = list(s)
        rt[idx] = 0.0
        rt[idx, j] = 1.0
    return rt


def anchor_step(r, m):
    anchors = assign_anchors(r, m)
    return anchors, apply_anchors(r, anchors)


def log_dirichlet(eta, alpha: float) -> float:
    k = len(eta)
    return float(gammaln(k * alpha) - k * gammaln(alpha) + xlogy(alpha - 1.0, eta).sum())


# -- mixture of regressions --------------------------------------------------


def em_reg_estep(data: Dataset, params: MixRegParams) -> np.ndarray:
    logp = component_logpdf(data, params) + _log_eta(params.eta)
    if np.any(np.isnan(logp)):
        raise FloatingPointError("NaN in component densities")
    return _normalize_log(logp)


def _weighted_ridge(X, y, r_tilde, vinv, mu, tau):
    k = r_tilde.shape[1]
    betas = np.empty((k, X.shape[1]))
    for j in range(k):
        w = tau * r_tilde[:, j]
        A = X.T @ (w[:, None] * X) + vinv
        betas[j] = np.linalg.solve(A, X.T @ (w * y) + vinv @ mu)
    return betas


def em_reg_mstep(data: Dataset, r_tilde, prior: RegPrior, max_sweeps: int = 1000,
                 rtol: float = 1e-14) -> MixRegParams:
    """Joint MAP update of ``(beta, sigma2, eta)`` given anchored responsibilities.

    With ``tau = 1/sigma2`` the coefficient update is the weighted ridge
    solution ``(tau X'R_jX + V^-1)^-1 (tau X'R_j y + V^-1 mu)`` and the precision
    update is ``(a + n/2 - 1) / (b + RSS/2)`` for the new coefficients. The two
    are alternated (coordinate ascent) until ``tau`` is stationary, so the result
    is a stationary point of the expected log posterior in every argument.
    """
    X, y = data.x, data.y
    r_tilde = np.asarray(r_tilde, dtype=float)
    vinv = prior.v_inv
    shape = prior.a + data.n / 2.0 - 1.0
    if not shape > 0:
        raise FloatingPointError("non-positive precision update; need a + n/2 > 1")
    tau = 1.0
    for _ in range(max_sweeps):
        betas = _weighted_ridge(X, y, r_tilde, vinv, prior.mu_beta, tau)
        rss = float((r_tilde * (y[:, None] - X @ betas.T) ** 2).sum())
        new_tau = shape / (prior.b + 0.5 * rss)
        done = abs(new_tau - tau) <= rtol * new_tau
        tau = new_tau
        if done:
            break
    betas = _weighted_ridge(X, y, r_tilde, vinv, prior.mu_beta, tau)
    return MixRegParams(betas, 1.0 / tau, update_eta(r_tilde, prior.alpha))


def reg_log_prior(params: MixRegParams, prior: RegPrior) -> float:
    """Log prior density; the variance prior is the Gamma density of ``1/sigma2``."""
    log_beta = float(log_normal_pdf(params.beta, prior.mu_beta, prior.v).sum())
    tau = 1.0 / params.sigma2
    log_tau = (prior.a * math.log(prior.b) - gammaln(prior.a)
               + (prior.a - 1) * math.log(tau) - prior.b * tau)
    return log_beta + float(log_tau) + log_dirichlet(params.eta, prior.alpha)


def em_reg_objective(data: Dataset, r_tilde, params: MixRegParams, prior: RegPrior) -> float:
    """Expected complete-data log posterior, dropping the constant ``-log p(y)``."""
    r_tilde = np.asarray(r_tilde)
    logf = component_logpdf(data, params)
    expected = float((r_tilde * logf).sum() + xlogy(r_tilde, params.eta[None, :]).sum())
    return expected + reg_log_prior(params, prior)


def reg_log_posterior(data: Dataset, params: MixRegParams, prior: RegPrior,
                      anchors: AnchorSet) -> float:
    """Observed-data log posterior (up to ``-log p(y)``) of the model EM climbs.

    Anchored point i in A_j contributes ``log eta_j + log f_j(y_i)``, matching the
    M step, which counts anchored rows in the weight update.
    """
    logp = component_logpdf(data, params) + _log_eta(params.eta)
    terms = logsumexp(logp, axis=1)
    for j, s in enumerate(anchors.sets):
        terms[list(s)] = logp[list(s), j]
    return float(terms.sum()) + reg_log_prior(params, prior)


def _init_reg(data: Dataset, k: int, prior: RegPrior, gen) -> MixRegParams:
    n = data.n
    seeds = gen.choice(n, size=k, replace=False)
    feats = np.column_stack([data.x[:, 1:], data.y])
    scale = feats.std(axis=0)
    scale[scale == 0] = 1.0
    feats = feats / scale
    size = min(n, max(data.p + 1, int(math.ceil(n / (2 * k)))))
    vinv = prior.v_inv
    betas, sq = [], []
    for s in seeds:
        near = np.argsort(((feats - feats[s]) ** 2).sum(axis=1), kind="stable")[:size]
        X, y = data.x[near], data.y[near]
        b = np.linalg.solve(X.T @ X + vinv, X.T @ y + vinv @ prior.mu_beta)
        betas.append(b)
        sq.append(np.mean((y - X @ b) ** 2))
    sigma2 = max(float(np.mean(sq)), 1e-3 * float(np.var(data.y)) + 1e-12)
    return MixRegParams(np.array(betas), sigma2, np.full(k, 1.0 / k))


# -- multivariate Gaussian mixture -------------------------------------------


def mvn_logpdf(z, mean, cov) -> np.ndarray:
    z = np.atleast_2d(z)
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, (z - mean).T)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (z.shape[1] * _LOG_2PI + logdet + (sol ** 2).sum(axis=0))


def _mvn_component_logpdf(z, params: MvnMixParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[1] != params.theta.shape[1]:
        raise ValueError("dimension mismatch between z and theta")
    try:
        return np.column_stack([mvn_logpdf(z, params.theta[j], params.sigma[j])
                                for j in range(params.k)])
    except np.linalg.LinAlgError:
        raise ValueError("component covariance is not positive definite") from None


def em_mvn_estep(z, params: MvnMixParams) -> np.ndarray:
    return _normalize_log(_mvn_component_logpdf(z, params) + _log_eta(params.eta))


def em_mvn_mstep(z, r_tilde, prior: MvnPrior) -> MvnMixParams:
    z = np.asarray(z, dtype=float)
    r_tilde = np.asarray(r_tilde, dtype=float)
    n, p = z.shape
    k = r_tilde.shape[1]
    kinv = 1.0 / prior.kappa
    winv = np.linalg.inv(prior.w)
    theta = np.empty((k, p))
    sigma = np.empty((k, p, p))
    for j in range(k):
        w = r_tilde[:, j]
        nj = w.sum()
        denom = prior.nu - p + nj
        if not denom > 0:
            raise FloatingPointError(f"non-positive covariance denominator for component {j}")
        theta[j] = (kinv * prior.mu + w @ z) / (kinv + nj)
        dz = z - theta[j]
        dm = prior.mu - theta[j]
        s = winv + (w[:, None] * dz).T @ dz + kinv * np.outer(dm, dm)
        s = s / denom
        sigma[j] = 0.5 * (s + s.T)
    return MvnMixParams(theta, sigma, update_eta(r_tilde, prior.alpha))


def log_wishart(precision, nu: float, w) -> float:
    p = precision.shape[0]
    _, logdet_l = np.linalg.slogdet(precision)
    _, logdet_w = np.linalg.slogdet(w)
    tr = np.trace(np.linalg.solve(w, precision))
    return float(0.5 * (nu - p - 1) * logdet_l - 0.5 * tr - 0.5 * nu * p * math.log(2.0)
                 - 0.5 * nu * logdet_w - multigammaln(0.5 * nu, p))


def mvn_log_prior(params: MvnMixParams, prior: MvnPrior) -> float:
    total = 0.0
    for j in range(params.k):
        total += float(mvn_logpdf(params.theta[j], prior.mu, prior.kappa * params.sigma[j])[0])
        total += log_wishart(np.linalg.inv(params.sigma[j]), prior.nu, prior.w)
    return total + log_dirichlet(params.eta, prior.alpha)


def em_mvn_objective(z, r_tilde, params: MvnMixParams, prior: MvnPrior) -> float:
    """Expected complete-data log posterior for the Gaussian mixture, without ``-log p(z)``."""
    r_tilde = np.asarray(r_tilde)
    logf = _mvn_component_logpdf(z, params)
    expected = float((r_tilde * logf).sum() + xlogy(r_tilde, params.eta[None, :]).sum())
    return expected + mvn_log_prior(params, prior)


def mvn_log_posterior(z, params: MvnMixParams, prior: MvnPrior, anchors: AnchorSet) -> float:
    logp = _mvn_component_logpdf(z, params) + _log_eta(params.eta)
    terms = logsumexp(logp, axis=1)
    for j, s in enumerate(anchors.sets):
        terms[list(s)] = logp[list(s), j]
    return float(terms.sum()) + mvn_log_prior(params, prior)


def _init_mvn(z, k: int, gen) -> MvnMixParams:
    n, p = z.shape
    seeds = gen.choice(n, size=k, replace=False)
    cov = np.atleast_2d(np.cov(z, rowvar=False)) + 1e-9 * np.eye(p)
    return MvnMixParams(z[seeds].copy(), np.repeat(cov[None], k, axis=0), np.full(k, 1.0 / k))


# -- driver ------------------------------------------------------------------


def em_objective(data, r_tilde, params, prior, spec: str) -> float:
    """``E_q log p(params, eta, s | data)`` up to the constant ``log p(data)``.

    ``data`` is a :class:`Dataset` for ``spec="reg"``; for ``spec="mvn"`` it may
    be a Dataset (its ``z`` is used) or an n x p array.
    """
    if spec == "reg":
        return em_reg_objective(data, r_tilde, params, prior)
    if spec == "mvn":
        z = data.z if isinstance(data, Dataset) else np.asarray(data)
        return em_mvn_objective(z, r_tilde, params, prior)
    raise ValueError(f"unknown model {spec!r}; expected 'reg' or 'mvn'")


def default_prior(spec: str, data: Dataset):
    if spec == "reg":
        return RegPrior()
    if spec == "mvn":
        return MvnPrior.default_for(data.z)
    raise ValueError(f"unknown model {spec!r}; expected 'reg' or 'mvn'")


def _run_once(spec, data, prior, m, init, max_iter, tol, freeze_anchors):
    if spec == "reg":
        estep = lambda prm: em_reg_estep(data, prm)
        mstep = lambda rt: em_reg_mstep(data, rt, prior)
        objective = lambda rt, prm: em_reg_objective(data, rt, prm, prior)
        logpost = lambda prm, a: reg_log_posterior(data, prm, prior, a)
    else:
        z = data.z
        estep = lambda prm: em_mvn_estep(z, prm)
        mstep = lambda rt: em_mvn_mstep(z, rt, prior)
        objective = lambda rt, prm: em_mvn_objective(z, rt, prm, prior)
        logpost = lambda prm, a: mvn_log_posterior(z, prm, prior, a)

    params, anchors, rt = init, None, None
    trace, lp = [], []
    converged = False
    for it in range(max_iter):
        r = estep(params)
        if freeze_anchors and anchors is not None:
            rt = apply_anchors(r, anchors)
        else:
            anchors, rt = anchor_step(r, m)
        params = mstep(rt)
        trace.append(objective(rt, params))
        lp.append(logpost(params, anchors))
        if it > 0 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    return np.array(trace), np.array(lp), converged, anchors, params, rt


def run_anchored_em(spec: str, data: Dataset, prior=None, k: int = 3, m=3,
                    n_starts: int = 10, max_iter: int = 500, tol: float = 1e-8,
                    rng=None, freeze_anchors: bool = False, init=None) -> EmTrace:
    """Anchored EM from several random starts; keeps the largest final objective.

    Parameters
    ----------
    spec : {"reg", "mvn"}
        Component model used for anchoring.
    m : int or sequence of int
        Anchors per component.
    freeze_anchors : bool
        Keep the anchor sets chosen in the first iteration instead of
        re-solving them every iteration.
    init : MixRegParams or MvnMixParams, optional
        Explicit starting point; overrides the random starts.
    """
    if spec not in ("reg", "mvn"):
        raise ValueError(f"unknown model {spec!r}; expected 'reg' or 'mvn'")
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    m = np.full(k, m, dtype=int) if np.isscalar(m) else np.asarray(m, dtype=int)
    if m.sum() > data.n:
        raise ValueError(f"cannot anchor {m.sum()} points among n={data.n}")
    prior = default_prior(spec, data) if prior is None else prior
    gen = as_rng(rng).gen

    inits = [init] if init is not None else [
        _init_reg(data, k, prior, gen) if spec == "reg" else _init_mvn(data.z, k, gen)
        for _ in range(n_starts)]
    runs = [_run_once(spec, data, prior, m, i0, max_iter, tol, freeze_anchors) for i0 in inits]
    finals = tuple(float(run[0][-1]) for run in runs)
    best = int(np.argmax(finals))
    trace, lp, converged, anchors, params, rt = runs[best]
    return EmTrace(trace, len(trace), converged, anchors, params, rt, lp, finals, best)
