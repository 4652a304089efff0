import torch

from ..errors import ConfigurationError, NonFiniteError
from .layers import ConditionalBatchNorm, DiscBlock, GenBlock, concat_condition, conditional_batchnorm
from .models import JointGenerator, LabelHead, NetSpec, ResNetDiscriminator, ResNetGenerator
from .spectral import DegenerateWeightWarning, SpectralNorm, projection_term, spectral_normalize
from .toy import MLPDiscriminator, MLPGenerator, MLPLabelHead


def check_finite(module: torch.nn.Module) -> None:
    for name, p in module.state_dict().items():
        if p.is_floating_point() and not torch.isfinite(p).all():
            raise NonFiniteError(f"non-finite values in {name}")


def generate(weights: ResNetGenerator, z: torch.Tensor, y=None):
    check_finite(weights)
    if not torch.isfinite(z).all():
        raise NonFiniteError("non-finite latent")
    return weights(z, y)


def generate_label(weights: LabelHead, tap: torch.Tensor) -> torch.Tensor:
    return weights(tap)


def discriminate(weights: ResNetDiscriminator, image: torch.Tensor, label=None) -> torch.Tensor:
    if label is not None and weights.embed is None:
        raise ConfigurationError("label passed to a discriminator without a projection embedding")
    return weights(image, label)


def spectral_layers(module: torch.nn.Module):
    return [m for m in module.modules() if isinstance(m, SpectralNorm)]


__all__ = [
    "ConditionalBatchNorm", "DiscBlock", "GenBlock", "JointGenerator", "LabelHead", "MLPDiscriminator",
    "MLPGenerator", "MLPLabelHead", "NetSpec", "ResNetDiscriminator", "ResNetGenerator", "SpectralNorm",
    "DegenerateWeightWarning", "check_finite", "concat_condition", "conditional_batchnorm", "discriminate",
    "generate", "generate_label", "projection_term", "spectral_layers", "spectral_normalize",
]
