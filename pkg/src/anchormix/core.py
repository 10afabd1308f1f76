"""Domain types, CSV ingestion and likelihood evaluation for anchored
mixtures of linear regressions.

All logarithms are natural. The response is left on its original (log)
scale; only the predictor column is mean-adjusted.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

CSV_COLUMNS = ("species", "order", "suborder", "body_mass", "brain_mass")

_LOG_2PI = math.log(2.0 * math.pi)


class DatasetError(ValueError):
    """Raised for malformed or semantically invalid input data."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Responses, design matrix (first column ones) and optional taxonomy."""

    y: np.ndarray
    x: np.ndarray
    species: Optional[tuple] = None
    order: Optional[tuple] = None
    suborder: Optional[tuple] = None
    x_offset: float = 0.0

    def __post_init__(self):
        y = _frozen(self.y)
        x = _frozen(self.x)
        if x.ndim == 1:
            x = _frozen(np.column_stack([np.ones_like(x), x]))
        if y.ndim != 1 or y.size < 1:
            raise DatasetError("y must be a non-empty vector")
        if x.ndim != 2 or x.shape[0] != y.size:
            raise DatasetError(f"x must be {y.size} x p, got shape {x.shape}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DatasetError("y and x must be finite")
        if not np.all(x[:, 0] == 1.0):
            raise DatasetError("first column of x must be all ones")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        for name in ("species", "order", "suborder"):
            labels = getattr(self, name)
            if labels is not None:
                labels = tuple(labels)
                if len(labels) != y.size:
                    raise DatasetError(f"{name} has {len(labels)} labels, expected {y.size}")
                object.__setattr__(self, name, labels)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def z(self) -> np.ndarray:
        """Rows ``(y_i, x_i2, ..., x_ip)``: the response joined to the non-constant predictors."""
        return np.column_stack([self.y, self.x[:, 1:]])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        pick = lambda t: None if t is None else tuple(t[i] for i in idx)
        return Dataset(self.y[idx], self.x[idx], pick(self.species), pick(self.order),
                       pick(self.suborder), self.x_offset)


@dataclass(frozen=True)
class MixRegParams:
    """Component coefficients ``beta`` (k x p), shared variance and weights."""

    beta: np.ndarray
    sigma2: float
    eta: np.ndarray

    def __post_init__(self):
        beta = _frozen(self.beta)
        if beta.ndim == 1:
            beta = _frozen(beta[None, :])
        eta = _frozen(self.eta)
        if eta.shape != (beta.shape[0],):
            raise ValueError(f"eta must have length {beta.shape[0]}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if np.any(eta < 0) or abs(eta.sum() - 1.0) > 1e-12:
            raise ValueError("eta must lie on the simplex")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    def permuted(self, perm) -> "MixRegParams":
        perm = np.asarray(perm)
        return MixRegParams(self.beta[perm], self.sigma2, self.eta[perm])


@dataclass(frozen=True)
class RegPrior:
    """Exchangeable prior: ``beta_j ~ N(mu_beta, diag(v))``, ``1/sigma2 ~ Gamma(a, rate=b)``,
    ``eta ~ Dirichlet(alpha)``."""

    mu_beta: np.ndarray = field(default_factory=lambda: np.array([3.5, 0.6]))
    v: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.5]))
    a: float = 5.0
    b: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        mu = _frozen(self.mu_beta)
        v = _frozen(self.v)
        if mu.shape != v.shape or mu.ndim != 1:
            raise ValueError("mu_beta and v must be vectors of equal length")
        if np.any(v <= 0) or self.a <= 0 or self.b <= 0 or self.alpha <= 0:
            raise ValueError("v, a, b and alpha must all be positive")
        object.__setattr__(self, "mu_beta", mu)
        object.__setattr__(self, "v", v)

    @property
    def v_inv(self) -> np.ndarray:
        return np.diag(1.0 / self.v)


@dataclass(frozen=True)
class AnchorSet:
    """Disjoint index sets ``A_1..A_k``; ``sets[j]`` holds the points anchored to component j.

    Empty sets are allowed (an all-empty AnchorSet is the unanchored model);
    check :attr:`is_identifiable` when label identifiability matters.
    """

    sets: tuple

    def __post_init__(self):
        sets = tuple(tuple(sorted(int(i) for i in s)) for s in self.sets)
        flat = [i for s in sets for i in s]
        if len(flat) != len(set(flat)):
            raise ValueError("anchor sets must be pairwise disjoint")
        if any(i < 0 for i in flat):
            raise ValueError("anchor indices must be non-negative")
        object.__setattr__(self, "sets", sets)

    @classmethod
    def empty(cls, k: int) -> "AnchorSet":
        return cls(((),) * k)

    @classmethod
    def from_labels(cls, labels, k: int) -> "AnchorSet":
        """Build from an n-vector with component ids for anchored points and -1 elsewhere."""
        labels = np.asarray(labels)
        return cls(tuple(tuple(np.flatnonzero(labels == j)) for j in range(k)))

    @property
    def k(self) -> int:
        return len(self.sets)

    @property
    def m(self) -> tuple:
        return tuple(len(s) for s in self.sets)

    @property
    def indices(self) -> np.ndarray:
        return np.array(sorted(i for s in self.sets for i in s), dtype=int)

    @property
    def is_identifiable(self) -> bool:
        return sum(1 for s in self.sets if s) >= self.k - 1

    def labels(self, n: int) -> np.ndarray:
        self.check(n)
        out = np.full(n, -1, dtype=int)
        for j, s in enumerate(self.sets):
            out[list(s)] = j
        return out

    def check(self, n: int, k: Optional[int] = None) -> None:
        if k is not None and self.k != k:
            raise ValueError(f"expected {k} anchor sets, got {self.k}")
        for s in self.sets:
            if s and s[-1] >= n:
                raise IndexError(f"anchor index {s[-1]} out of range for n={n}")


def check_responsibilities(r, anchors: Optional[AnchorSet] = None, atol: float = 1e-12) -> np.ndarray:
    """Validate an n x k row-stochastic matrix, optionally with one-hot anchored rows."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 2:
        raise ValueError("responsibilities must be a 2-d array")
    if np.any(r < -atol) or np.any(r > 1 + atol):
        raise ValueError("responsibilities must lie in [0, 1]")
    if np.max(np.abs(r.sum(axis=1) - 1.0)) > atol:
        raise ValueError("responsibility rows must sum to 1")
    if anchors is not None:
        for j, s in enumerate(anchors.sets):
            for i in s:
                if not (r[i, j] == 1.0 and np.count_nonzero(r[i]) == 1):
                    raise ValueError(f"anchored row {i} is not one-hot on component {j}")
    return r


def load_dataset(path, log_transform: bool = True, center: bool = True) -> Dataset:
    """Read a species CSV into a :class:`Dataset`.

    The file needs the header ``species,order,suborder,body_mass,brain_mass``
    with masses in grams. With ``log_transform`` the response is ``ln(brain_mass)``
    and the predictor ``ln(body_mass)``; with ``center`` the predictor is
    mean-adjusted and the removed mean is kept as ``x_offset``.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    species, order, suborder, body, brain = [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(row[c] is None for c in CSV_COLUMNS):
                raise DatasetError(f"{path}:{lineno}: wrong number of fields")
            try:
                bm, br = float(row["body_mass"]), float(row["brain_mass"])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if log_transform and (bm <= 0 or br <= 0):
                raise DatasetError(f"{path}:{lineno}: masses must be positive to take logs")
            species.append(row["species"])
            order.append(row["order"])
            suborder.append(row["suborder"])
            body.append(bm)
            brain.append(br)
    if not body:
        raise DatasetError(f"{path}: no data rows")
    xcol = np.log(body) if log_transform else np.asarray(body)
    y = np.log(brain) if log_transform else np.asarray(brain)
    offset = 0.0
    if center:
        offset = float(np.mean(xcol))
        xcol = center_predictor(xcol)
    return Dataset(y, np.column_stack([np.ones_like(xcol), xcol]), species, order,
                   suborder, offset)


def center_predictor(x_col) -> np.ndarray:
    x_col = np.asarray(x_col, dtype=float)
    if x_col.size == 0:
        raise ValueError("cannot center an empty vector")
    out = x_col - x_col.mean()
    # second pass removes the rounding residue of the first
    return out - out.mean()


def log_normal_pdf(y, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def component_logpdf(data: Dataset, params: MixRegParams) -> np.ndarray:
    """n x k matrix of ``log phi(y_i; x_i beta_j, sigma2)``."""
    if params.beta.shape[1] != data.p:
        raise ValueError(f"beta has {params.beta.shape[1]} columns, data has p={data.p}")
    means = data.x @ params.beta.T
    return log_normal_pdf(data.y[:, None], means, params.sigma2)


def mixreg_loglik(data: Dataset, params: MixRegParams) -> float:
    """Log-likelihood of the (unanchored) mixture of regressions."""
    with np.errstate(divide="ignore"):
        log_eta = np.log(params.eta)
    return float(logsumexp(component_logpdf(data, params) + log_eta, axis=1).sum())


def anchored_loglik(data: Dataset, params: MixRegParams, anchors: AnchorSet) -> float:
    """Log-likelihood where anchored points contribute only their own component density."""
    anchors.check(data.n, params.k)
    logf = component_logpdf(data, params)
    with np.errstate(divide="ignore"):
        terms = logsumexp(logf + np.log(params.eta), axis=1)
    for j, s in enumerate(anchors.sets):
        idx = list(s)
        terms[idx] = logf[idx, j]
    return float(terms.sum())


def labeled_loglik(data: Dataset, params: MixRegParams, labels: Sequence[int]) -> float:
    """Log-likelihood when every observation's component is known."""
    logf = component_logpdf(data, params)
    return float(logf[np.arange(data.n), np.asarray(labels)].sum())
