"""Dataset readers for CIFAR-10/100 and STL-10 binaries, plus 2-D Gaussian mixtures."""

from __future__ import annotations

import glob
import json
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

CIFAR_PIXELS = 32 * 32 * 3
STL_SIDE = 96


class DatasetFormatError(ValueError):
    pass


class CorruptLabelError(DatasetFormatError):
    pass


@dataclass
class LabeledDataset:
    """Images (or 2-D points) with optional labels.

    ``labels`` is an int array ``[N]`` for hard labels, a float array ``[N, K]``
    for soft labels, or ``None`` for an unlabeled split (``K == 0``).
    """

    images: np.ndarray
    labels: np.ndarray | None
    K: int
    name: str = ""

    def __post_init__(self):
        n = len(self.images)
        if self.labels is None:
            if self.K != 0:
                raise ValueError("unlabeled dataset must have K == 0")
            return
        if len(self.labels) != n:
            raise ValueError(f"{n} images but {len(self.labels)} labels")
        if self.images.ndim == 4 and n and (self.images.min() < -1 or self.images.max() > 1):
            raise ValueError("pixels outside [-1, 1]")
        if self.soft:
            if self.labels.shape[1] != self.K:
                raise ValueError(f"soft labels have width {self.labels.shape[1]}, K={self.K}")
        elif n and (self.labels.min() < 0 or self.labels.max() >= self.K):
            raise ValueError(f"labels outside [0, {self.K})")

    def __len__(self):
        return len(self.images)

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    @property
    def soft(self) -> bool:
        return self.labels is not None and self.labels.ndim == 2

    def label_marginal(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError(f"dataset {self.name!r} has no labels")
        if self.soft:
            return self.labels.mean(axis=0)
        return np.bincount(self.labels, minlength=self.K) / len(self.labels)

    def with_labels(self, labels: np.ndarray, K: int | None = None, name: str | None = None) -> "LabeledDataset":
        return LabeledDataset(self.images, labels, self.K if K is None else K, name or self.name)


@dataclass
class MixtureSpec:
    means: np.ndarray
    stddev: float
    weights: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.means.ndim != 2 or self.means.shape[1] != 2 or len(self.means) < 1:
            raise ValueError("means must be [K, 2] with K >= 1")
        if self.weights.shape != (len(self.means),):
            raise ValueError("weights must have one entry per component")
        if abs(self.weights.sum() - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ValueError("weights must lie on the simplex")
        if not self.stddev > 0:
            raise ValueError("stddev must be positive")

    @property
    def K(self) -> int:
        return len(self.means)


def ring_mixture(K: int = 8, radius: float = 2.0, stddev: float = 0.05, seed: int = 0) -> MixtureSpec:
    angles = 2 * np.pi * np.arange(K) / K
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return MixtureSpec(means, stddev, np.full(K, 1.0 / K), seed)


def normalize_pixels(raw: np.ndarray) -> np.ndarray:
    return (raw.astype(np.float32) / np.float32(127.5) - np.float32(1.0)).astype(np.float32)


def denormalize_pixels(images: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((np.asarray(images, np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _resolve(path, patterns: Sequence[str]) -> list[str]:
    if isinstance(path, (list, tuple)):
        files = [os.fspath(p) for p in path]
    elif os.path.isdir(path):
        files = []
        for pattern in patterns:
            files.extend(sorted(glob.glob(os.path.join(path, pattern))))
    else:
        files = [os.fspath(path)]
    if not files:
        raise FileNotFoundError(f"no dataset files under {path} matching {list(patterns)}")
    return files


def _read_cifar(files, label_bytes: int, label_index: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    record = label_bytes + CIFAR_PIXELS
    images, labels = [], []
    for fname in files:
        with open(fname, "rb") as f:
            buf = np.frombuffer(f.read(), dtype=np.uint8)
        if buf.size % record:
            offset = buf.size - buf.size % record
            raise DatasetFormatError(f"{fname}: truncated record at byte offset {offset} (record size {record})")
        recs = buf.reshape(-1, record)
        lab = recs[:, label_index].astype(np.int64)
        bad = np.flatnonzero(lab >= K)
        if bad.size:
            i = int(bad[0])
            raise CorruptLabelError(f"{fname}: label {lab[i]} >= {K} in record {i} (byte offset {i * record + label_index})")
        # channel-major planes, row-major within a plane
        images.append(recs[:, label_bytes:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1))
        labels.append(lab)
    return np.concatenate(images), np.concatenate(labels)


def load_cifar10(path, split: str = "train") -> LabeledDataset:
    patterns = ["data_batch_*.bin"] if split == "train" else ["test_batch.bin"]
    raw, labels = _read_cifar(_resolve(path, patterns), 1, 0, 10)
    return LabeledDataset(normalize_pixels(raw), labels, 10, "cifar10")


def load_cifar100(path, split: str = "train") -> LabeledDataset:
    raw, labels = _read_cifar(_resolve(path, [f"{split}.bin"]), 2, 1, 100)
    return LabeledDataset(normalize_pixels(raw), labels, 100, "cifar100")


def cifar_record_bytes(image: np.ndarray, label: int, coarse: int | None = None) -> bytes:
    """Serialize one normalized image back to a CIFAR binary record."""
    head = bytes([label]) if coarse is None else bytes([coarse, label])
    return head + denormalize_pixels(image).transpose(2, 0, 1).tobytes()


def resize_bilinear(images: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of ``[N, H, W, C]`` with half-pixel centers (no antialiasing)."""
    images = np.asarray(images, dtype=np.float64)
    h, w = images.shape[1:3]

    def coords(n_in):
        x = (np.arange(size) + 0.5) * (n_in / size) - 0.5
        x = np.clip(x, 0, n_in - 1)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    y0, y1, fy = coords(h)
    x0, x1, fx = coords(w)
    fy = fy[None, :, None, None]
    fx = fx[None, None, :, None]
    top = images[:, y0][:, :, x0] * (1 - fx) + images[:, y0][:, :, x1] * fx
    bot = images[:, y1][:, :, x0] * (1 - fx) + images[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bot * fy


def load_stl(path, target_size: int = 48, split: str = "train") -> LabeledDataset:
    if os.path.isdir(path):
        x_file = os.path.join(path, f"{split}_X.bin")
        y_file = os.path.join(path, f"{split}_y.bin")
    else:
        x_file, y_file = os.fspath(path), None
    buf = np.fromfile(x_file, dtype=np.uint8)
    per_image = STL_SIDE * STL_SIDE * 3
    if buf.size == 0 or buf.size % per_image:
        raise DatasetFormatError(f"{x_file}: size {buf.size} is not a multiple of {per_image}")
    # channel-major, column-major within each channel
    raw = buf.reshape(-1, 3, STL_SIDE, STL_SIDE).transpose(0, 3, 2, 1)
    images = resize_bilinear(raw, target_size) / 127.5 - 1.0
    images = np.clip(images, -1.0, 1.0).astype(np.float32)
    if y_file is None or not os.path.exists(y_file):
        return LabeledDataset(images, None, 0, f"stl-{split}")
    labels = np.fromfile(y_file, dtype=np.uint8).astype(np.int64) - 1  # STL labels are 1-based
    if len(labels) != len(images):
        raise DatasetFormatError(f"{y_file}: {len(labels)} labels for {len(images)} images")
    if labels.size and (labels.min() < 0 or labels.max() >= 10):
        raise CorruptLabelError(f"{y_file}: label outside 1..10")
    return LabeledDataset(images, labels, 10, f"stl-{split}")


def make_mixture(spec: MixtureSpec, n: int) -> LabeledDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(spec.seed)
    labels = rng.choice(spec.K, size=n, p=spec.weights)
    points = spec.means[labels] + spec.stddev * rng.standard_normal((n, 2))
    return LabeledDataset(points.astype(np.float32), labels.astype(np.int64), spec.K, "mixture")


def to_onehot(labels, K: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise ValueError(f"labels outside [0, {K})")
    out = np.zeros((labels.size, K), dtype=np.float32)
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass
class EpochSampler:
    """Yields minibatch index arrays; a fresh seeded permutation every epoch."""

    n: int
    batch_size: int
    seed: int = 0
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        if self.batch_size > self.n:
            raise ValueError(f"batch size {self.batch_size} exceeds dataset size {self.n}")
        self.rng = np.random.default_rng(self.seed)

    def __iter__(self) -> Iterator[np.ndarray]:
        while True:
            perm = self.rng.permutation(self.n)
            for i in range(0, self.n - self.batch_size + 1, self.batch_size):
                yield perm[i:i + self.batch_size]


def save_dataset(dataset: LabeledDataset, directory, extra: dict | None = None) -> None:
    """``images.npy`` (+ ``labels.npy``) and ``dataset.json``; no timestamps anywhere."""
    os.makedirs(directory, exist_ok=True)
    np.save(os.path.join(directory, "images.npy"), dataset.images)
    if dataset.labels is not None:
        np.save(os.path.join(directory, "labels.npy"), dataset.labels)
    meta = {"name": dataset.name, "K": dataset.K, "n": len(dataset), "labeled": dataset.labeled,
            "soft": dataset.soft, **(extra or {})}
    with open(os.path.join(directory, "dataset.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def read_dataset_meta(directory) -> dict:
    with open(os.path.join(directory, "dataset.json")) as f:
        return json.load(f)


def load_dataset(directory) -> LabeledDataset:
    meta = read_dataset_meta(directory)
    images = np.load(os.path.join(directory, "images.npy"))
    labels = np.load(os.path.join(directory, "labels.npy")) if meta["labeled"] else None
    return LabeledDataset(images, labels, meta["K"], meta["name"])
