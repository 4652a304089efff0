"""Small MLP stand-ins with the same interfaces as the ResNet models, for 2-D data."""

from __future__ import annotations

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ConfigurationError
from .layers import BN_EPS, ConditionalBatchNorm, concat_condition
from .models import score_with_projection
from .spectral import sn_linear


class MLPGenerator(nn.Module):
    def __init__(self, z_dim=16, hidden=128, out_dim=2, depth=3, num_classes=0, conditioning=None):
        super().__init__()
        if conditioning not in (None, "concat", "cbn"):
            raise ConfigurationError(f"unknown conditioning {conditioning!r}")
        if conditioning and num_classes <= 0:
            raise ConfigurationError("conditioning needs num_classes > 0")
        self.z_dim = z_dim
        self.num_classes = num_classes
        self.conditioning = conditioning
        in_dim = z_dim + (num_classes if conditioning == "concat" else 0)
        self.linears = nn.ModuleList()
        self.norms = nn.ModuleList()
        for i in range(depth):
            self.linears.append(nn.Linear(in_dim if i == 0 else hidden, hidden))
            if conditioning == "cbn":
                self.norms.append(ConditionalBatchNorm(hidden, num_classes, dims=1))
            else:
                self.norms.append(nn.BatchNorm1d(hidden, eps=BN_EPS))
        self.out = nn.Linear(hidden, out_dim)

    def forward(self, z, y=None):
        if z.shape[1] != self.z_dim:
            raise ValueError(f"latent width {z.shape[1]}, expected {self.z_dim}")
        if self.conditioning and y is None:
            raise ConfigurationError("conditional generator needs class ids")
        h = z
        if self.conditioning == "concat":
            h = concat_condition(z, F.one_hot(y, self.num_classes))
        for linear, norm in zip(self.linears, self.norms):
            h = linear(h)
            h = norm(h, y) if self.conditioning == "cbn" else norm(h)
            h = F.relu(h)
        return self.out(h), h


class MLPLabelHead(nn.Module):
    def __init__(self, tap_dim=128, width=64, D_o=8, depth=2, dropout=0.5):
        super().__init__()
        self.tap_dim = tap_dim
        self.proj = nn.Linear(tap_dim, width)
        layers = []
        for w_out in [width] * depth + [D_o]:
            layers += [nn.BatchNorm1d(width, eps=BN_EPS), nn.ReLU(), nn.Dropout(dropout), nn.Linear(width, w_out)]
        self.mlp = nn.Sequential(*layers)

    def forward(self, tap):
        if tap.dim() != 2 or tap.shape[1] != self.tap_dim:
            raise ValueError(f"tap shape {tuple(tap.shape)}, expected [N, {self.tap_dim}]")
        return torch.softmax(self.mlp(self.proj(tap)), dim=1)


class MLPDiscriminator(nn.Module):
    def __init__(self, in_dim=2, hidden=128, depth=3, num_classes=0):
        super().__init__()
        self.in_dim = in_dim
        self.layers = nn.ModuleList([sn_linear(in_dim if i == 0 else hidden, hidden) for i in range(depth)])
        self.linear = sn_linear(hidden, 1)
        self.embed = sn_linear(hidden, num_classes, bias=False) if num_classes else None

    def features(self, x):
        h = x
        for layer in self.layers:
            h = F.relu(layer(h))
        return h

    def forward(self, x, label=None):
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input width {x.shape[1]}, expected {self.in_dim}")
        return score_with_projection(self, self.features(x), label)
