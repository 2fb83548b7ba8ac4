"""Dimensionality reduction, standardization, and cosine similarity.

PCA is computed by SVD of the mean-centered matrix (never an eigensolve of
the covariance matrix), with a fixed sign convention so components are
platform-reproducible. Variances follow the population (1/n) convention
throughout, matching the standardizer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from ._exact import exact_cosine
from .errors import DimensionMismatchError, UndefinedMetricError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # k x D, rows orthonormal
    explained_variance: np.ndarray  # length k, non-increasing
    k: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "explained_variance": self.explained_variance.tolist(),
                "k": self.k,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        d = json.loads(text)
        return cls(
            np.asarray(d["mean"]),
            np.asarray(d["components"]),
            np.asarray(d["explained_variance"]),
            int(d["k"]),
        )


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    zero_std: np.ndarray  # bool mask of flagged constant features

    def to_json(self) -> str:
        return json.dumps(
            {
                "means": self.means.tolist(),
                "stds": self.stds.tolist(),
                "zero_std": self.zero_std.astype(int).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Standardizer":
        d = json.loads(text)
        return cls(
            np.asarray(d["means"]),
            np.asarray(d["stds"]),
            np.asarray(d["zero_std"], dtype=bool),
        )


def fit_pca(X: np.ndarray, k: int, strict: bool = False) -> PcaModel:
    """Top-k principal directions of X via SVD of the centered matrix.

    Sign convention: the largest-magnitude coordinate of each component is
    positive. If X has fewer than k numerically nonzero singular values the
    model is truncated with a warning (or raises when strict=True); missing
    directions are never padded.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} out of range [1, {min(n, d)}]")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    tol = s[0] * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank < k:
        if strict:
            raise ValueError(f"only {rank} nonzero singular values, k={k} requested")
        log.warning("fit_pca: rank %d < k=%d, truncating", rank, k)
        k = max(rank, 1)
    components = vt[:k].copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    explained = (s[:k] ** 2) / n
    return PcaModel(mean=mean, components=components, explained_variance=explained, k=k)


def apply_pca(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """Project rows of X onto the fitted components after centering."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.mean.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns, model expects {model.mean.shape[0]}"
        )
    return (X - model.mean) @ model.components.T


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Per-column mean and population (1/n) standard deviation.

    Columns that are exactly constant are flagged and given std 0; applying
    the standardizer maps them to 0 rather than failing.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("standardizer needs at least 2 samples")
    constant = np.all(X == X[0], axis=0)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    means = np.where(constant, X[0], means)
    stds = np.where(constant, 0.0, stds)
    if constant.any():
        log.warning("fit_standardizer: %d constant column(s) flagged", int(constant.sum()))
    return Standardizer(means=means, stds=stds, zero_std=constant | (stds == 0.0))


def apply_standardizer(s: Standardizer, X: np.ndarray) -> np.ndarray:
    """(x - mean) / std per column; flagged zero-std columns map to 0."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != s.means.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns, standardizer expects {s.means.shape[0]}"
        )
    safe = np.where(s.zero_std, 1.0, s.stds)
    out = (X - s.means) / safe
    out[:, s.zero_std] = 0.0
    return out


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| |v|), exact-rational core (see _exact module).

    Guarantees cos(v, v) == 1.0, |result| <= 1, and bit-identical output
    under input scalings that are exact in IEEE arithmetic.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionMismatchError(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise UndefinedMetricError("cosine similarity of non-finite input")
    try:
        return exact_cosine(u, v)
    except ValueError as e:
        raise UndefinedMetricError("cosine similarity undefined for zero vector") from e
