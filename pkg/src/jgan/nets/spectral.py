import warnings

import torch
from torch import nn
import torch.nn.functional as F


class DegenerateWeightWarning(RuntimeWarning):
    pass


def _l2normalize(v, eps=1e-12):
    return v / (v.norm() + eps)


def spectral_normalize(W: torch.Tensor, u: torch.Tensor, n_iter: int = 1, update: bool = True):
    """Divide ``W`` by a power-iteration estimate of its largest singular value.

    Conv kernels are flattened to ``[out, in*kh*kw]``. ``u`` is updated in place
    when ``update`` is set. Returns ``(W_bar, sigma)``; gradients flow through
    ``sigma`` with ``u`` and ``v`` held constant.
    """
    mat = W.reshape(W.shape[0], -1)
    with torch.no_grad():
        u_cur = u.clone()
        for _ in range(max(n_iter, 1) if update else 1):
            wtu = mat.t() @ u_cur
            if wtu.norm() < 1e-12:
                warnings.warn("spectral norm: W^T u vanished, re-initializing u", DegenerateWeightWarning)
                u_cur = _l2normalize(torch.randn_like(u_cur))
                wtu = mat.t() @ u_cur
            v = _l2normalize(wtu)
            if not update:
                break
            u_cur = _l2normalize(mat @ v)
        if update:
            u.copy_(u_cur)
    sigma = torch.dot(u_cur, mat @ v)
    return W / sigma, sigma


class SpectralNorm(nn.Module):
    """Reparameterizes ``module.weight`` as ``weight / sigma`` with a persistent ``u``.

    ``u`` advances one power-iteration step per forward pass in training mode and
    stays frozen in eval mode.
    """

    def __init__(self, module: nn.Module, power_iterations: int = 1):
        super().__init__()
        self.module = module
        self.power_iterations = power_iterations
        w = module.weight
        del module._parameters["weight"]
        module.register_parameter("weight_orig", nn.Parameter(w.data))
        u = torch.randn(w.shape[0], dtype=w.dtype)
        self.register_buffer("u", _l2normalize(u))

    @property
    def weight_orig(self) -> nn.Parameter:
        return self.module.weight_orig

    def normalized_weight(self, update: bool = False) -> torch.Tensor:
        w_bar, _ = spectral_normalize(self.module.weight_orig, self.u, self.power_iterations, update=update)
        return w_bar

    def forward(self, x):
        w_bar = self.normalized_weight(update=self.training)
        if isinstance(self.module, nn.Conv2d):
            return self.module._conv_forward(x, w_bar, self.module.bias)
        return F.linear(x, w_bar, self.module.bias)


def sn_linear(in_features, out_features, bias=True):
    layer = nn.Linear(in_features, out_features, bias=bias)
    nn.init.orthogonal_(layer.weight)
    if bias:
        nn.init.zeros_(layer.bias)
    return SpectralNorm(layer)


def sn_conv(in_channels, out_channels, kernel_size, padding=0):
    layer = nn.Conv2d(in_channels, out_channels, kernel_size, padding=padding)
    nn.init.orthogonal_(layer.weight)
    nn.init.zeros_(layer.bias)
    return SpectralNorm(layer)


def projection_term(features: torch.Tensor, label: torch.Tensor, V: torch.Tensor) -> torch.Tensor:
    """``sum_c label_c (V features)_c`` per row; ``V`` is ``[D_o, feature_dim]``."""
    return (label * F.linear(features, V)).sum(dim=1)
