"""Weak labels from an external class predictor, compressed by truncated SVD + softmax."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import LabeledDataset


class FeatureExtractor:
    """Wraps a predictor mapping a batch of images to class probabilities ``[N, F]``.

    ``features`` is the embedding used for FID; it defaults to the probabilities.
    """

    def __init__(self, probs_fn: Callable[[np.ndarray], np.ndarray], dim: int,
                 features_fn: Callable[[np.ndarray], np.ndarray] | None = None, name: str = ""):
        self.probs_fn = probs_fn
        self.features_fn = features_fn
        self.dim = dim
        self.name = name

    def __call__(self, images: np.ndarray) -> np.ndarray:
        return self.probs(images)

    def probs(self, images: np.ndarray) -> np.ndarray:
        p = np.asarray(self.probs_fn(images), dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != self.dim:
            raise ValueError(f"extractor {self.name!r} returned shape {p.shape}, expected [N, {self.dim}]")
        return p

    def features(self, images: np.ndarray) -> np.ndarray:
        if self.features_fn is None:
            return self.probs(images)
        return np.asarray(self.features_fn(images), dtype=np.float64)


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def random_linear_extractor(input_shape, n_classes: int, seed: int = 0, pool: int = 8) -> FeatureExtractor:
    """A fixed random linear-softmax predictor on average-pooled images (desk-scale stand-in)."""
    rng = np.random.default_rng(seed)
    if len(input_shape) == 3:
        h, w, c = input_shape
        ph, pw = max(1, h // pool), max(1, w // pool)
        in_dim = pool * pool * c if h >= pool else h * w * c
    else:
        in_dim = int(np.prod(input_shape))
    weight = rng.standard_normal((in_dim, n_classes)) * (4.0 / np.sqrt(in_dim))

    def embed(images):
        x = np.asarray(images, dtype=np.float64)
        if x.ndim == 4 and x.shape[1] >= pool:
            n, h, w, c = x.shape
            x = x[:, :ph * pool, :pw * pool].reshape(n, pool, ph, pool, pw, c).mean(axis=(2, 4))
        return x.reshape(len(x), -1)

    return FeatureExtractor(lambda x: softmax(embed(x) @ weight), n_classes,
                            features_fn=lambda x: embed(x) @ weight, name=f"random-linear-{seed}")


def mixture_posterior_extractor(spec) -> FeatureExtractor:
    """Component posterior of a 2-D Gaussian mixture; FID features are the raw points."""
    log_w = np.log(np.maximum(spec.weights, 1e-300))

    def probs(points):
        d2 = ((np.asarray(points, np.float64)[:, None, :] - spec.means[None]) ** 2).sum(-1)
        return softmax(log_w - d2 / (2 * spec.stddev ** 2))

    return FeatureExtractor(probs, spec.K, features_fn=lambda x: np.asarray(x, np.float64), name="mixture-posterior")


def fit_truncated_svd(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Top-``k`` singular triplets ``(U_k [N,k], S_k [k], V_k [F,k])``.

    Each right singular vector is flipped so its largest-magnitude entry is
    positive; the matching left vector is flipped with it.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.isfinite(M).all():
        raise ValueError("matrix has non-finite entries")
    if not 1 <= k <= min(M.shape):
        raise ValueError(f"k={k} outside [1, {min(M.shape)}]")
    U, S, Vt = np.linalg.svd(M, full_matrices=False)
    U, S, V = U[:, :k], S[:k], Vt[:k].T
    pivot = np.abs(V).argmax(axis=0)
    signs = np.where(V[pivot, np.arange(k)] < 0, -1.0, 1.0)
    return U * signs, S, V * signs


@dataclass(frozen=True)
class WeakLabelCodebook:
    projection: np.ndarray  # [F, k], orthonormal columns
    component_scales: np.ndarray  # [k]

    @property
    def F(self) -> int:
        return self.projection.shape[0]

    @property
    def k(self) -> int:
        return self.projection.shape[1]

    @classmethod
    def fit(cls, features: np.ndarray, k: int = 64) -> "WeakLabelCodebook":
        _, S, V = fit_truncated_svd(features, k)
        return cls(V, S)

    def checksum(self) -> str:
        return hashlib.sha256(self._payload()).hexdigest()

    def _payload(self) -> bytes:
        return (np.ascontiguousarray(self.projection, "<f8").tobytes()
                + np.ascontiguousarray(self.component_scales, "<f8").tobytes())

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "codebook.bin"), "wb") as f:
            f.write(self._payload())
        manifest = {"F": self.F, "k": self.k, "dtype": "<f8", "sha256": self.checksum()}
        with open(os.path.join(directory, "codebook.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, directory) -> "WeakLabelCodebook":
        with open(os.path.join(directory, "codebook.json")) as f:
            manifest = json.load(f)
        with open(os.path.join(directory, "codebook.bin"), "rb") as f:
            payload = f.read()
        if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
            raise ValueError(f"codebook checksum mismatch in {directory}")
        F, k = manifest["F"], manifest["k"]
        flat = np.frombuffer(payload, dtype="<f8")
        if flat.size != F * k + k:
            raise ValueError(f"codebook payload has {flat.size} values, expected {F * k + k}")
        return cls(flat[:F * k].reshape(F, k).copy(), flat[F * k:].copy())


def project_weak_labels(features: np.ndarray, codebook: WeakLabelCodebook) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != codebook.F:
        raise ValueError(f"features of shape {features.shape} do not match codebook F={codebook.F}")
    if not np.isfinite(features).all():
        raise ValueError("features have non-finite entries")
    return softmax(features @ codebook.projection)


def build_weak_label_dataset(dataset: LabeledDataset, extractor: FeatureExtractor, k: int = 64,
                             batch_size: int = 1000) -> tuple[LabeledDataset, WeakLabelCodebook]:
    probs = np.concatenate([extractor.probs(dataset.images[i:i + batch_size])
                            for i in range(0, len(dataset), batch_size)])
    codebook = WeakLabelCodebook.fit(probs, k)
    weak = project_weak_labels(probs, codebook).astype(np.float32)
    return LabeledDataset(dataset.images, weak, k, f"{dataset.name}-weak{k}"), codebook


def write_weak_labels(path, labels: np.ndarray, extra: dict | None = None) -> dict:
    """Raw little-endian float32 rows at ``path`` plus a ``<path>.json`` record."""
    path = str(path)
    data = np.ascontiguousarray(labels, dtype="<f4")
    data.tofile(path)
    record = {"n": int(data.shape[0]), "k": int(data.shape[1]), "dtype": "<f4",
              "sha256": hashlib.sha256(data.tobytes()).hexdigest(), **(extra or {})}
    with open(path + ".json", "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    return record


def read_weak_labels(path) -> np.ndarray:
    path = str(path)
    with open(path + ".json") as f:
        record = json.load(f)
    data = np.fromfile(path, dtype="<f4")
    return data.reshape(record["n"], record["k"])
