from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ConfigurationError
from .layers import BN_EPS, DiscBlock, GenBlock, concat_condition
from .spectral import projection_term, sn_linear


@dataclass(frozen=True)
class NetSpec:
    """Architecture sizes. ``D_b`` base grid, ``D_f`` image side, ``D_r`` label-head tap side,
    ``C_l`` label-head width, ``D_o`` label dimension."""

    D_b: int = 4
    D_f: int = 32
    D_r: int = 32
    C_l: int = 128
    D_o: int = 10
    z_dim: int = 128
    g_channels: int = 256
    d_channels: int = 128
    head_channels: int = 256
    head_depth: int = 2  # hidden dense layers in the label head; 3 for weak labels

    def __post_init__(self):
        if min(asdict(self).values()) <= 0:
            raise ValueError("all NetSpec fields must be positive")
        if self.D_f != 8 * self.D_b:
            raise ValueError(f"D_f={self.D_f} must equal 8*D_b={8 * self.D_b}")
        if self.D_r != self.D_f:
            raise ValueError("D_r must equal D_f")

    @classmethod
    def for_dataset(cls, name: str, weak: bool = False, **overrides) -> "NetSpec":
        if name.startswith("stl"):
            base = dict(D_b=6, D_f=48, D_r=48, C_l=128, D_o=10)
        elif name.startswith("cifar100"):
            base = dict(C_l=256, D_o=100)
        else:
            base = {}
        if weak:
            base.update(C_l=128, D_o=64, head_depth=3)
        base.update(overrides)
        return cls(**base)


class ResNetGenerator(nn.Module):
    """Generator trunk. ``forward`` returns ``(image, tap)``; ``tap`` is the final
    BN+ReLU activation that feeds both the output conv and the label head."""

    def __init__(self, spec: NetSpec, num_classes: int = 0, conditioning: str | None = None):
        super().__init__()
        if conditioning not in (None, "concat", "cbn"):
            raise ConfigurationError(f"unknown conditioning {conditioning!r}")
        if conditioning and num_classes <= 0:
            raise ConfigurationError("conditioning needs num_classes > 0")
        self.spec = spec
        self.num_classes = num_classes
        self.conditioning = conditioning
        ch = spec.g_channels
        in_dim = spec.z_dim + (num_classes if conditioning == "concat" else 0)
        self.dense = nn.Linear(in_dim, spec.D_b * spec.D_b * ch)
        block_classes = num_classes if conditioning == "cbn" else 0
        self.blocks = nn.ModuleList([GenBlock(ch, ch, block_classes) for _ in range(3)])
        self.bn = nn.BatchNorm2d(ch, eps=BN_EPS)
        self.out = nn.Conv2d(ch, 3, 3, padding=1)
        for layer in (self.dense, self.out):
            nn.init.orthogonal_(layer.weight)
            nn.init.zeros_(layer.bias)

    def forward(self, z, y=None):
        if z.shape[1] != self.spec.z_dim:
            raise ValueError(f"latent width {z.shape[1]}, expected {self.spec.z_dim}")
        if self.conditioning and y is None:
            raise ConfigurationError("conditional generator needs class ids")
        if self.conditioning == "concat":
            z = concat_condition(z, F.one_hot(y, self.num_classes))
        h = self.dense(z).view(z.shape[0], -1, self.spec.D_b, self.spec.D_b)
        for block in self.blocks:
            h = block(h, y if self.conditioning == "cbn" else None)
        tap = F.relu(self.bn(h))
        return torch.tanh(self.out(tap)), tap


class LabelHead(nn.Module):
    """7x7 stride-4 conv on the tap, then (BN, ReLU, dropout, dense) stacks, softmax."""

    def __init__(self, spec: NetSpec, dropout: float = 0.5):
        super().__init__()
        self.spec = spec
        self.conv = nn.Conv2d(spec.g_channels, spec.head_channels, 7, stride=4, padding=3)
        side = math.ceil(spec.D_r / 4)
        widths = [spec.head_channels * side * side] + [spec.C_l] * spec.head_depth + [spec.D_o]
        layers = []
        for w_in, w_out in zip(widths[:-1], widths[1:]):
            dense = nn.Linear(w_in, w_out)
            nn.init.orthogonal_(dense.weight)
            nn.init.zeros_(dense.bias)
            layers += [nn.BatchNorm1d(w_in, eps=BN_EPS), nn.ReLU(), nn.Dropout(dropout), dense]
        self.mlp = nn.Sequential(*layers)
        nn.init.orthogonal_(self.conv.weight)
        nn.init.zeros_(self.conv.bias)

    def forward(self, tap):
        expected = (self.spec.g_channels, self.spec.D_r, self.spec.D_r)
        if tuple(tap.shape[1:]) != expected:
            raise ValueError(f"tap shape {tuple(tap.shape[1:])}, expected {expected}")
        return torch.softmax(self.mlp(self.conv(tap).flatten(1)), dim=1)


class ResNetDiscriminator(nn.Module):
    def __init__(self, spec: NetSpec, num_classes: int = 0):
        super().__init__()
        self.spec = spec
        ch = spec.d_channels
        self.blocks = nn.Sequential(
            DiscBlock(3, ch, downsample=True, first=True),
            DiscBlock(ch, ch, downsample=True),
            DiscBlock(ch, ch, downsample=False),
            DiscBlock(ch, ch, downsample=False),
        )
        self.linear = sn_linear(ch, 1)
        self.embed = sn_linear(ch, num_classes, bias=False) if num_classes else None

    def features(self, x):
        return F.relu(self.blocks(x)).sum(dim=(2, 3))

    def forward(self, x, label=None):
        if x.shape[-1] != self.spec.D_f:
            raise ValueError(f"image side {x.shape[-1]}, expected {self.spec.D_f}")
        return score_with_projection(self, self.features(x), label)


def score_with_projection(disc, phi, label):
    score = disc.linear(phi).squeeze(1)
    if label is None:
        return score
    if disc.embed is None:
        raise ConfigurationError("label passed to a discriminator without a projection embedding")
    V = disc.embed.normalized_weight(update=disc.training)
    return score + projection_term(phi, label.to(phi.dtype), V)


class JointGenerator(nn.Module):
    """Emits an image and a label distribution from noise alone."""

    def __init__(self, trunk: nn.Module, head: nn.Module):
        super().__init__()
        self.trunk = trunk
        self.head = head

    def forward(self, z):
        image, tap = self.trunk(z)
        return image, self.head(tap)
