"""Inception Score, Frechet distance, and 2-D mixture coverage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

PROB_FLOOR = 1e-12
PSD_TOL = 1e-6


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray
    n: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if self.sigma.shape != (self.mu.size, self.mu.size):
            raise ValueError(f"sigma shape {self.sigma.shape} does not match mu of size {self.mu.size}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-8, rtol=0):
            raise ValueError("sigma is not symmetric")


@dataclass
class ScoreReport:
    step: int
    is_mean: float
    is_std: float
    fid: float
    n_samples: int
    n_splits: int
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ScoreReport":
        return cls(**json.loads(line))


def inception_score(probs, n_splits: int = 10) -> tuple[float, float]:
    """exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, population std).

    Splits have size N // n_splits, the last one absorbs the remainder.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probs must be [N, C]")
    if not 1 <= n_splits <= len(p):
        raise ValueError(f"n_splits={n_splits} invalid for {len(p)} rows")
    if np.abs(p.sum(axis=1) - 1.0).max() > 1e-4 or (p < 0).any():
        raise ValueError("rows of probs must lie on the simplex")
    size = len(p) // n_splits
    scores = []
    for s in range(n_splits):
        part = p[s * size:(s + 1) * size if s < n_splits - 1 else len(p)]
        marginal = part.mean(axis=0)
        safe = np.maximum(part, PROB_FLOOR)
        kl = np.where(part > 0, part * (np.log(safe) - np.log(np.maximum(marginal, PROB_FLOOR))), 0.0)
        scores.append(np.exp(kl.sum(axis=1).mean()))
    return float(np.mean(scores)), float(np.std(scores))


def fit_gaussian_stats(features) -> GaussianStats:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need at least two feature rows")
    mu = x.mean(axis=0)
    d = x - mu
    s = d.T @ d / (len(x) - 1)
    return GaussianStats(mu, (s + s.T) / 2, len(x))


def merge_gaussian_stats(a: GaussianStats, b: GaussianStats) -> GaussianStats:
    """Exact mean/unbiased-covariance of the union of two shards."""
    n = a.n + b.n
    delta = b.mu - a.mu
    mu = a.mu + delta * (b.n / n)
    scatter = (a.n - 1) * a.sigma + (b.n - 1) * b.sigma + np.outer(delta, delta) * (a.n * b.n / n)
    s = scatter / (n - 1)
    return GaussianStats(mu, (s + s.T) / 2, n)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.T) / 2)
    if w.min() < -PSD_TOL:
        raise ValueError(f"matrix is not PSD (eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def fid(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between two Gaussians.

    Tr((S_a S_b)^{1/2}) is taken from the eigenvalues of the symmetric
    S_a^{1/2} S_b S_a^{1/2}, which shares the spectrum of S_a S_b.
    """
    if a.mu.shape != b.mu.shape:
        raise ValueError(f"dimension mismatch: {a.mu.size} vs {b.mu.size}")
    root_a = _psd_sqrt(a.sigma)
    inner = root_a @ b.sigma @ root_a
    w = np.linalg.eigvalsh((inner + inner.T) / 2)
    if w.min() < -PSD_TOL * max(1.0, np.abs(w).max()):
        raise ValueError(f"covariance product is not PSD (eigenvalue {w.min():.3g})")
    tr_cross = np.sqrt(np.clip(w, 0, None)).sum()
    diff = a.mu - b.mu
    value = diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2 * tr_cross
    if value < -PSD_TOL:
        raise ValueError(f"negative Frechet distance {value:.3g}")
    return float(max(value, 0.0))


def label_marginal(labels, K: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float64).mean(axis=0)
    return np.bincount(labels.astype(np.int64), minlength=K)[:K] / max(len(labels), 1)


def tv_distance(p, q) -> float:
    return float(0.5 * np.abs(np.asarray(p, np.float64) - np.asarray(q, np.float64)).sum())


def mode_coverage(samples, spec, radius_mult: float = 3.0, labels=None) -> tuple[int, float]:
    """Modes with at least N/(4K) samples within ``radius_mult * stddev`` of their mean,
    and the TV distance between the label marginal and the mixture weights.

    ``labels`` may be class ids or soft rows; without labels the TV is NaN.
    """
    x = np.asarray(samples, dtype=np.float64)
    d = np.sqrt(((x[:, None, :] - spec.means[None]) ** 2).sum(-1))
    near = (d <= radius_mult * spec.stddev).sum(axis=0)
    covered = int((near >= len(x) / (4 * spec.K)).sum())
    tv = float("nan") if labels is None else tv_distance(label_marginal(labels, spec.K), spec.weights)
    return covered, tv
