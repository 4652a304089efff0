import torch
from torch import nn
import torch.nn.functional as F

from .spectral import sn_conv

BN_EPS = 1e-5


def concat_condition(z: torch.Tensor, onehot: torch.Tensor) -> torch.Tensor:
    """Latent extended with the label: ``[z, onehot]`` in that order."""
    return torch.cat([z, onehot.to(z.dtype)], dim=1)


def _bn(num_features, dims):
    return (nn.BatchNorm1d if dims == 1 else nn.BatchNorm2d)(num_features, eps=BN_EPS)


class ConditionalBatchNorm(nn.Module):
    """Batch norm without its own affine; scale and shift are looked up per class."""

    def __init__(self, num_features, num_classes, dims=2):
        super().__init__()
        self.num_classes = num_classes
        self.bn = (nn.BatchNorm1d if dims == 1 else nn.BatchNorm2d)(num_features, eps=BN_EPS, affine=False)
        self.gamma = nn.Embedding(num_classes, num_features)
        self.beta = nn.Embedding(num_classes, num_features)
        nn.init.ones_(self.gamma.weight)
        nn.init.zeros_(self.beta.weight)

    def forward(self, x, class_id):
        if class_id.numel() and (class_id.min() < 0 or class_id.max() >= self.num_classes):
            raise ValueError(f"class id outside [0, {self.num_classes})")
        h = self.bn(x)
        shape = (x.shape[0], -1) + (1,) * (x.dim() - 2)
        return self.gamma(class_id).view(shape) * h + self.beta(class_id).view(shape)


def conditional_batchnorm(x, class_id, params: ConditionalBatchNorm):
    return params(x, class_id)


class GenBlock(nn.Module):
    """BN, ReLU, 2x nearest upsample, 3x3 conv, BN, ReLU, 3x3 conv; upsampled skip."""

    def __init__(self, in_ch, out_ch, num_classes=0):
        super().__init__()
        self.conditional = num_classes > 0
        if self.conditional:
            self.b1 = ConditionalBatchNorm(in_ch, num_classes)
            self.b2 = ConditionalBatchNorm(out_ch, num_classes)
        else:
            self.b1 = _bn(in_ch, 2)
            self.b2 = _bn(out_ch, 2)
        self.c1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.c2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.c_sc = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else None
        for conv in (self.c1, self.c2, self.c_sc):
            if conv is not None:
                nn.init.orthogonal_(conv.weight)
                nn.init.zeros_(conv.bias)

    def _norm(self, bn, x, y):
        return bn(x, y) if self.conditional else bn(x)

    def forward(self, x, y=None):
        h = F.relu(self._norm(self.b1, x, y))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.c1(h)
        h = F.relu(self._norm(self.b2, h, y))
        h = self.c2(h)
        sc = F.interpolate(x, scale_factor=2, mode="nearest")
        if self.c_sc is not None:
            sc = self.c_sc(sc)
        return h + sc


class DiscBlock(nn.Module):
    """Spectrally normalized residual block; optional 2x average-pool downsampling.

    The first block of the discriminator skips the leading ReLU so raw pixels
    enter the conv directly.
    """

    def __init__(self, in_ch, out_ch, downsample, first=False):
        super().__init__()
        self.downsample = downsample
        self.first = first
        self.c1 = sn_conv(in_ch, out_ch, 3, padding=1)
        self.c2 = sn_conv(out_ch, out_ch, 3, padding=1)
        self.c_sc = sn_conv(in_ch, out_ch, 1) if (in_ch != out_ch or downsample) else None

    def forward(self, x):
        h = x if self.first else F.relu(x)
        h = self.c2(F.relu(self.c1(h)))
        if self.downsample:
            h = F.avg_pool2d(h, 2)
        sc = x
        if self.c_sc is not None:
            if self.first:
                sc = self.c_sc(F.avg_pool2d(sc, 2) if self.downsample else sc)
            else:
                sc = self.c_sc(sc)
                if self.downsample:
                    sc = F.avg_pool2d(sc, 2)
        return h + sc
