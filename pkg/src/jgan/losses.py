"""Adversarial objectives (standard log form and hinge) and real/fake score pairing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ConfigurationError, NonFiniteError

FAMILIES = ("standard", "hinge")
MODES = ("unsupervised", "conditional", "joint")


@dataclass(frozen=True)
class LossConfig:
    family: str = "hinge"
    mode: str = "joint"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown loss family {self.family!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")

    @property
    def d_loss(self):
        return d_loss_standard if self.family == "standard" else d_loss_hinge

    @property
    def g_loss(self):
        return g_loss_standard if self.family == "standard" else g_loss_hinge


def _check(*scores):
    for s in scores:
        if not torch.isfinite(s).all():
            raise NonFiniteError("non-finite discriminator scores")


def d_loss_standard(scores_real, scores_fake):
    # -log sigmoid(s) == softplus(-s); -log(1 - sigmoid(s)) == softplus(s)
    _check(scores_real, scores_fake)
    return F.softplus(-scores_real).mean() + F.softplus(scores_fake).mean()


def g_loss_standard(scores_fake):
    _check(scores_fake)
    return F.softplus(-scores_fake).mean()


def d_loss_hinge(scores_real, scores_fake):
    _check(scores_real, scores_fake)
    return F.relu(1.0 - scores_real).mean() + F.relu(1.0 + scores_fake).mean()


def g_loss_hinge(scores_fake):
    _check(scores_fake)
    return -scores_fake.mean()


def loss_mode(mode: str) -> str:
    """Map trainer modes (``conditional-concat`` etc.) onto the three loss modes."""
    base = "conditional" if mode.startswith("conditional") else mode
    if base not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return base


class LabelSampler:
    """Draws class ids from a fixed marginal with its own seeded torch generator."""

    def __init__(self, marginal, seed: int = 0):
        self.marginal = torch.as_tensor(np.asarray(marginal, dtype=np.float64))
        self.generator = torch.Generator().manual_seed(seed)

    @property
    def num_classes(self) -> int:
        return len(self.marginal)

    def __call__(self, n: int) -> torch.Tensor:
        return torch.multinomial(self.marginal, n, replacement=True, generator=self.generator)


def real_label_vectors(labels: torch.Tensor, num_classes: int, dtype=torch.float32) -> torch.Tensor:
    if labels.dim() == 1:
        return F.one_hot(labels.long(), num_classes).to(dtype)
    return labels.to(dtype)


def fake_batch(mode, generator, z, label_sampler: LabelSampler | None = None):
    """Generator output for one step: ``(images, label_vectors_or_None)``."""
    mode = loss_mode(mode)
    if mode == "unsupervised":
        out = generator(z)
        return (out[0] if isinstance(out, tuple) else out), None
    if mode == "conditional":
        if label_sampler is None:
            raise ConfigurationError("conditional mode needs a label sampler")
        y = label_sampler(z.shape[0])
        images, _ = generator(z, y)
        return images, F.one_hot(y, label_sampler.num_classes).to(images.dtype)
    images, labels = generator(z)
    return images, labels


def pair_scores(mode, nets, real_batch, real_labels, z, label_sampler: LabelSampler | None = None,
                detach_fake: bool = True):
    """Discriminator scores on a real batch and a freshly generated fake batch.

    Real and fake halves go through the discriminator as one batch so the
    spectral-norm state advances once per call.
    """
    mode = loss_mode(mode)
    if mode != "unsupervised" and real_labels is None:
        raise ConfigurationError(f"{mode} mode needs real labels")
    with torch.set_grad_enabled(not detach_fake and torch.is_grad_enabled()):
        fake_images, fake_labels = fake_batch(mode, nets.generator, z, label_sampler)
    n = real_batch.shape[0]
    images = torch.cat([real_batch, fake_images.to(real_batch.dtype)])
    if mode == "unsupervised":
        scores = nets.discriminator(images)
    else:
        real_vec = real_label_vectors(real_labels, fake_labels.shape[1], real_batch.dtype)
        scores = nets.discriminator(images, torch.cat([real_vec, fake_labels.to(real_batch.dtype)]))
    return scores[:n], scores[n:]
