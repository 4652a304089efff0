"""Symmetric label noise: a random nonzero class offset on a fixed-size random subset."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    ratio: float
    K: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"noise ratio {self.ratio} outside [0, 1]")
        if self.K < 2:
            raise ValueError("label noise needs K >= 2")


def n_corrupted(ratio: float, n: int) -> int:
    """round(ratio * n), half away from zero, using the decimal value of ``ratio``."""
    return int((Decimal(repr(float(ratio))) * n).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def corrupt_labels(labels, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= spec.K):
        raise ValueError(f"labels outside [0, {spec.K})")
    n = labels.size
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(n, size=n_corrupted(spec.ratio, n), replace=False)
    offsets = rng.integers(1, spec.K, size=chosen.size)
    noisy = labels.copy()
    noisy[chosen] = (labels[chosen] + offsets) % spec.K
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    return noisy, mask


def read_label_file(path) -> np.ndarray:
    return np.fromfile(path, dtype=np.uint8).astype(np.int64)


def write_corruption_sidecar(out_path, noisy: np.ndarray, mask: np.ndarray, spec: NoiseSpec, source: str = "") -> dict:
    """Write ``out_path`` (one label byte per sample), ``<out>.mask`` and ``<out>.json``."""
    if spec.K > 256:
        raise ValueError("byte label files hold at most 256 classes")
    out_path = str(out_path)
    noisy.astype(np.uint8).tofile(out_path)
    mask.astype(np.uint8).tofile(out_path + ".mask")
    record = {
        **asdict(spec),
        "n": int(noisy.size),
        "n_corrupted": int(mask.sum()),
        "source": source,
    }
    with open(out_path + ".json", "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    return record
