"""Alternating discriminator/generator optimization with periodic evaluation and checkpoints."""

from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch
from PIL import Image, ImageDraw

from .checkpoint import read_checkpoint, save_checkpoint
from .corruption import NoiseSpec, corrupt_labels
from .datasets import EpochSampler, LabeledDataset, MixtureSpec
from .errors import ConfigurationError, DivergenceError, NonFiniteError
from .losses import LabelSampler, LossConfig, fake_batch, loss_mode, pair_scores
from .metrics import ScoreReport, fit_gaussian_stats, fid, inception_score, mode_coverage
from .nets import (JointGenerator, LabelHead, MLPDiscriminator, MLPGenerator, MLPLabelHead, NetSpec,
                   ResNetDiscriminator, ResNetGenerator)
from .weaklabel import FeatureExtractor, build_weak_label_dataset, mixture_posterior_extractor, random_linear_extractor

log = logging.getLogger(__name__)

TRAIN_MODES = ("unsupervised", "conditional-concat", "conditional-cbn", "joint")
LABEL_SOURCES = ("clean", "noisy", "weak")
LAST_N_REPORTS = 5


@dataclass
class TrainConfig:
    mode: str = "joint"
    loss_family: str = "hinge"
    label_source: str = "clean"
    noise_ratio: float = 0.0
    noise_seed: int = 0
    weak_k: int = 64
    lr_d: float = 4e-4
    lr_g: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    d_steps_per_g: int = 1
    total_g_updates: int = 100_000
    batch_size: int = 64
    eval_every: int = 5000
    seed: int = 0
    arch: str = "resnet"
    z_dim: int = 128
    g_channels: int = 256
    d_channels: int = 128
    head_width: int = 0  # 0: 128, or 256 for 100 clean classes
    head_depth: int = 0  # 0: 2 for clean/noisy labels, 3 for weak labels
    dropout: float = 0.5
    mlp_hidden: int = 128
    mlp_depth: int = 3
    n_eval_samples: int = 10_000
    n_splits: int = 10
    coverage_radius: float = 3.0
    threads: int = 1

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigurationError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.label_source not in LABEL_SOURCES:
            raise ConfigurationError(f"label_source must be one of {LABEL_SOURCES}, got {self.label_source!r}")
        if self.arch not in ("resnet", "mlp"):
            raise ConfigurationError(f"arch must be resnet or mlp, got {self.arch!r}")
        LossConfig(self.loss_family, loss_mode(self.mode))
        if self.lr_d <= 0 or self.lr_g <= 0:
            raise ConfigurationError("learning rates must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if self.d_steps_per_g < 1:
            raise ConfigurationError("d_steps_per_g must be >= 1")
        if self.total_g_updates < 0 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigurationError("total_g_updates, batch_size and eval_every must be positive")
        if self.label_source == "weak" and self.mode != "joint":
            raise ConfigurationError("weak labels are only usable in joint mode")
        if not 0.0 <= self.noise_ratio <= 1.0:
            raise ConfigurationError("noise_ratio must lie in [0, 1]")

    @classmethod
    def field_types(cls) -> dict[str, type]:
        defaults = cls()
        return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}


@dataclass
class GANNets:
    mode: str
    generator: torch.nn.Module
    discriminator: torch.nn.Module
    num_classes: int
    description: dict

    def modules(self) -> dict[str, torch.nn.Module]:
        return {"generator": self.generator, "discriminator": self.discriminator}


@dataclass
class RunArtifacts:
    run_dir: str
    metric_log: str
    checkpoints: list[str] = field(default_factory=list)
    sample_grids: list[str] = field(default_factory=list)
    reports: list[ScoreReport] = field(default_factory=list)
    final_report: ScoreReport | None = None
    g_steps: int = 0
    d_steps: int = 0
    nets: GANNets | None = None


def build_nets(config: TrainConfig, sample_shape, num_classes: int, weak: bool = False) -> GANNets:
    """Instantiate generator/discriminator for a mode; the description is enough to rebuild them."""
    mode = config.mode
    conditioning = {"conditional-concat": "concat", "conditional-cbn": "cbn"}.get(mode)
    labeled = mode != "unsupervised"
    if labeled and num_classes < 1:
        raise ConfigurationError(f"{mode} mode needs labels")
    k = num_classes if labeled else 0
    head_depth = config.head_depth or (3 if weak else 2)
    desc = {"arch": config.arch, "sample_shape": list(sample_shape), "num_classes": k, "weak": weak,
            "mode": mode}
    if config.arch == "mlp":
        if len(sample_shape) != 1:
            raise ConfigurationError("mlp nets need flat samples")
        hidden = config.mlp_hidden
        trunk = MLPGenerator(config.z_dim, hidden, sample_shape[0], config.mlp_depth,
                             num_classes=k if conditioning else 0, conditioning=conditioning)
        disc = MLPDiscriminator(sample_shape[0], hidden, config.mlp_depth, num_classes=k)
        head = (MLPLabelHead(hidden, config.head_width or 64, k, head_depth, config.dropout)
                if mode == "joint" else None)
    else:
        if len(sample_shape) != 3 or sample_shape[0] != sample_shape[1]:
            raise ConfigurationError(f"resnet nets need square images, got {sample_shape}")
        side = sample_shape[0]
        c_l = config.head_width or (256 if k == 100 and not weak else 128)
        spec = NetSpec(D_b=side // 8, D_f=side, D_r=side, C_l=c_l, D_o=max(k, 1), z_dim=config.z_dim,
                       g_channels=config.g_channels, d_channels=config.d_channels,
                       head_channels=config.g_channels, head_depth=head_depth)
        desc["netspec"] = asdict(spec)
        trunk = ResNetGenerator(spec, num_classes=k if conditioning else 0, conditioning=conditioning)
        disc = ResNetDiscriminator(spec, num_classes=k)
        head = LabelHead(spec, config.dropout) if mode == "joint" else None
    generator = JointGenerator(trunk, head) if head is not None else trunk
    return GANNets(mode, generator, disc, k, desc)


def to_model_layout(images: np.ndarray) -> torch.Tensor:
    x = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
    return x.permute(0, 3, 1, 2).contiguous() if x.dim() == 4 else x


def to_data_layout(x: torch.Tensor) -> np.ndarray:
    x = x.detach().cpu()
    return (x.permute(0, 2, 3, 1) if x.dim() == 4 else x).numpy()


def default_extractor(dataset: LabeledDataset, mixture: MixtureSpec | None = None) -> FeatureExtractor:
    if mixture is not None:
        return mixture_posterior_extractor(mixture)
    return random_linear_extractor(dataset.images.shape[1:], 10, seed=0)


def weak_label_predictor(dataset: LabeledDataset, fallback: FeatureExtractor | None = None) -> FeatureExtractor:
    """Stand-in for a pretrained 1000-way image classifier; 2-D points reuse ``fallback``."""
    if dataset.images.ndim == 4:
        return random_linear_extractor(dataset.images.shape[1:], 1000, seed=0)
    return fallback


def prepare_labels(config: TrainConfig, dataset: LabeledDataset, extractor: FeatureExtractor | None = None):
    """Apply the configured label source; returns (dataset, provenance dict).

    ``extractor`` is the predictor behind weak labels, not the evaluation network.
    """
    if config.mode == "unsupervised":
        return dataset, {"label_source": "none"}
    if config.label_source == "weak":
        if dataset.soft:
            return dataset, {"label_source": "weak", "k": dataset.K}
        if extractor is None:
            raise ConfigurationError("weak labels need a feature extractor")
        weak, _ = build_weak_label_dataset(dataset, extractor, config.weak_k)
        return weak, {"label_source": "weak", "k": config.weak_k}
    if not dataset.labeled:
        raise ConfigurationError(f"{config.mode} mode needs a labeled dataset")
    if dataset.soft:
        raise ConfigurationError("soft labels require label_source=weak")
    if config.label_source == "noisy":
        noisy, mask = corrupt_labels(dataset.labels, NoiseSpec(config.noise_ratio, dataset.K, config.noise_seed))
        return dataset.with_labels(noisy), {"label_source": "noisy", "noise_ratio": config.noise_ratio,
                                            "n_corrupted": int(mask.sum())}
    return dataset, {"label_source": "clean"}


@torch.no_grad()
def generate_samples(nets_or_generator, mode, n, seed, label_sampler=None, batch=500):
    """Eval-mode samples ``(data_layout_array, labels_or_None)`` from a seeded latent stream."""
    generator = getattr(nets_or_generator, "generator", nets_or_generator)
    was_training = generator.training
    generator.eval()
    gen = torch.Generator().manual_seed(seed)
    z_dim = _z_dim(generator)
    images, labels = [], []
    try:
        for i in range(0, n, batch):
            z = torch.randn(min(batch, n - i), z_dim, generator=gen)
            x, lab = fake_batch(mode, generator, z, label_sampler)
            images.append(to_data_layout(x))
            if lab is not None:
                labels.append(lab.numpy())
    finally:
        generator.train(was_training)
    return np.concatenate(images), (np.concatenate(labels) if labels else None)


def _z_dim(generator):
    trunk = getattr(generator, "trunk", generator)
    return trunk.spec.z_dim if hasattr(trunk, "spec") else trunk.z_dim


def score_samples(samples, extractor: FeatureExtractor, reference, n_splits=10, step=0, batch=1000) -> ScoreReport:
    """IS of ``samples`` and FID against ``reference`` (GaussianStats or raw reference samples)."""
    probs = np.concatenate([extractor.probs(samples[i:i + batch]) for i in range(0, len(samples), batch)])
    feats = np.concatenate([extractor.features(samples[i:i + batch]) for i in range(0, len(samples), batch)])
    if not hasattr(reference, "sigma"):
        reference = fit_gaussian_stats(np.concatenate(
            [extractor.features(reference[i:i + batch]) for i in range(0, len(reference), batch)]))
    is_mean, is_std = inception_score(probs, n_splits)
    return ScoreReport(step, is_mean, is_std, fid(fit_gaussian_stats(feats), reference), len(samples), n_splits)


def save_sample_grid(samples: np.ndarray, path: str) -> str:
    """8x8 tiled image grid, or a scatter plot for 2-D points."""
    if samples.ndim == 4:
        tiles = samples[:64]
        h, w = tiles.shape[1:3]
        grid = np.full((8 * h, 8 * w, 3), -1.0, dtype=np.float32)
        for i, tile in enumerate(tiles):
            r, c = divmod(i, 8)
            grid[r * h:(r + 1) * h, c * w:(c + 1) * w] = tile
        img = Image.fromarray(np.clip(np.rint((grid + 1) * 127.5), 0, 255).astype(np.uint8))
    else:
        img = Image.new("RGB", (256, 256), "white")
        draw = ImageDraw.Draw(img)
        for x, y in np.asarray(samples[:, :2], dtype=np.float64):
            px, py = (x + 3) / 6 * 255, (3 - y) / 6 * 255
            draw.point((px, py), fill="black")
    img.save(path)
    return path


class Trainer:
    def __init__(self, config: TrainConfig, dataset: LabeledDataset, run_dir: str,
                 extractor: FeatureExtractor | None = None, mixture: MixtureSpec | None = None):
        self.config = config
        self.run_dir = str(run_dir)
        self.mixture = mixture
        torch.set_num_threads(config.threads)
        torch.manual_seed(config.seed)
        self.extractor = extractor or default_extractor(dataset, mixture)
        self.dataset, self.label_info = prepare_labels(config, dataset, weak_label_predictor(dataset, self.extractor))
        self.loss = LossConfig(config.loss_family, loss_mode(config.mode))
        labeled = config.mode != "unsupervised"
        self.nets = build_nets(config, self.dataset.images.shape[1:], self.dataset.K if labeled else 0,
                               weak=self.dataset.soft)
        self.opt_d = torch.optim.Adam(self.nets.discriminator.parameters(), config.lr_d,
                                      betas=(config.beta1, config.beta2))
        self.opt_g = torch.optim.Adam(self.nets.generator.parameters(), config.lr_g,
                                      betas=(config.beta1, config.beta2))
        self.label_sampler = None
        self.label_marginal = None
        if self.loss.mode == "conditional":
            self.label_marginal = self.dataset.label_marginal()
            self.label_sampler = LabelSampler(self.label_marginal, config.seed + 1)
        self.z_gen = torch.Generator().manual_seed(config.seed + 2)
        self.batches = iter(EpochSampler(len(self.dataset), config.batch_size, config.seed + 3))
        n_ref = min(len(self.dataset), config.n_eval_samples)
        self.reference = fit_gaussian_stats(self.extractor.features(self.dataset.images[:n_ref]))
        self.g_steps = 0
        self.d_steps = 0
        self.last_checkpoint = None

    def _z(self):
        return torch.randn(self.config.batch_size, self.config.z_dim, generator=self.z_gen)

    def _batch(self):
        idx = next(self.batches)
        x = to_model_layout(self.dataset.images[idx])
        y = None
        if self.loss.mode != "unsupervised":
            y = torch.from_numpy(np.asarray(self.dataset.labels[idx]))
        return x, y

    def d_step(self) -> float:
        x, y = self._batch()
        self.opt_d.zero_grad(set_to_none=True)
        s_real, s_fake = pair_scores(self.loss.mode, self.nets, x, y, self._z(), self.label_sampler)
        loss = self.loss.d_loss(s_real, s_fake)
        loss.backward()
        self.opt_d.step()
        self.d_steps += 1
        return loss.item()

    def g_step(self) -> float:
        self.opt_g.zero_grad(set_to_none=True)
        fake, labels = fake_batch(self.loss.mode, self.nets.generator, self._z(), self.label_sampler)
        scores = self.nets.discriminator(fake) if labels is None else self.nets.discriminator(fake, labels)
        loss = self.loss.g_loss(scores)
        loss.backward()
        self.opt_g.step()
        self.g_steps += 1
        return loss.item()

    def manifest(self) -> dict:
        return {"step": self.g_steps, "d_steps": self.d_steps, "seed": self.config.seed,
                "config": asdict(self.config), "net": self.nets.description, "labels": self.label_info,
                "label_marginal": None if self.label_marginal is None else list(map(float, self.label_marginal)),
                "dataset": self.dataset.name}

    def evaluate(self, step: int) -> ScoreReport:
        samples, labels = generate_samples(self.nets, self.config.mode, self.config.n_eval_samples,
                                           self.config.seed + 4, self.label_sampler_for_eval())
        report = score_samples(samples, self.extractor, self.reference, self.config.n_splits, step)
        if self.mixture is not None:
            # label TV only compares like with like: generated labels over the mixture components
            comparable = labels is not None and self.dataset.K == self.mixture.K and not self.dataset.soft
            covered, tv = mode_coverage(samples, self.mixture, self.config.coverage_radius,
                                        labels if comparable else None)
            report.extras.update(covered_modes=covered, label_tv=None if np.isnan(tv) else tv)
        return report

    def label_sampler_for_eval(self):
        if self.label_marginal is None:
            return None
        return LabelSampler(self.label_marginal, self.config.seed + 5)

    def run(self) -> RunArtifacts:
        cfg = self.config
        os.makedirs(self.run_dir, exist_ok=True)
        for sub in ("checkpoints", "samples"):
            os.makedirs(os.path.join(self.run_dir, sub), exist_ok=True)
        art = RunArtifacts(self.run_dir, os.path.join(self.run_dir, "metrics.jsonl"), nets=self.nets)
        d_losses, g_losses = [], []
        with open(art.metric_log, "w") as metric_log:
            while self.g_steps < cfg.total_g_updates:
                try:
                    for _ in range(cfg.d_steps_per_g):
                        d_losses.append(self.d_step())
                    g_losses.append(self.g_step())
                except NonFiniteError as exc:
                    raise DivergenceError(f"step {self.g_steps + 1}: {exc}", self.last_checkpoint) from exc
                if not (np.isfinite(d_losses[-1]) and np.isfinite(g_losses[-1])):
                    raise DivergenceError(f"non-finite loss at step {self.g_steps}", self.last_checkpoint)
                if self.g_steps % cfg.eval_every == 0 or self.g_steps == cfg.total_g_updates:
                    report = self.evaluate(self.g_steps)
                    report.extras.update(loss_d=float(np.mean(d_losses)), loss_g=float(np.mean(g_losses)),
                                         d_steps=self.d_steps, g_steps=self.g_steps)
                    d_losses, g_losses = [], []
                    metric_log.write(report.to_json() + "\n")
                    metric_log.flush()
                    art.reports.append(report)
                    samples, _ = generate_samples(self.nets, cfg.mode, 64 if self.dataset.images.ndim == 4 else 1000,
                                                  cfg.seed + 6, self.label_sampler_for_eval())
                    art.sample_grids.append(save_sample_grid(
                        samples, os.path.join(self.run_dir, "samples", f"step_{self.g_steps}.png")))
                    ckpt = os.path.join(self.run_dir, "checkpoints", f"step_{self.g_steps:07d}")
                    self.last_checkpoint = save_checkpoint(ckpt, self.nets.modules(), self.manifest())
                    art.checkpoints.append(ckpt)
                    log.info("step %d: IS %.3f FID %.3f", self.g_steps, report.is_mean, report.fid)
        art.g_steps, art.d_steps = self.g_steps, self.d_steps
        if art.reports:
            art.final_report = average_reports(art.reports[-LAST_N_REPORTS:])
            with open(os.path.join(self.run_dir, "final_report.json"), "w") as f:
                f.write(art.final_report.to_json() + "\n")
        return art


def average_reports(reports: list[ScoreReport]) -> ScoreReport:
    out = ScoreReport(reports[-1].step, float(np.mean([r.is_mean for r in reports])),
                      float(np.mean([r.is_std for r in reports])), float(np.mean([r.fid for r in reports])),
                      reports[-1].n_samples, reports[-1].n_splits, {"n_reports": len(reports)})
    for key in ("covered_modes", "label_tv"):
        values = [r.extras.get(key) for r in reports]
        if values and all(v is not None for v in values):
            out.extras[key] = float(np.mean(values))
    return out


def train(config: TrainConfig, dataset: LabeledDataset, run_dir: str, extractor: FeatureExtractor | None = None,
          mixture: MixtureSpec | None = None) -> RunArtifacts:
    return Trainer(config, dataset, run_dir, extractor, mixture).run()


def load_nets(checkpoint) -> tuple[GANNets, dict]:
    manifest, states = read_checkpoint(checkpoint)
    config = TrainConfig(**manifest["config"])
    desc = manifest["net"]
    nets = build_nets(config, tuple(desc["sample_shape"]), desc["num_classes"], desc["weak"])
    nets.generator.load_state_dict(states["generator"])
    nets.discriminator.load_state_dict(states["discriminator"])
    nets.generator.eval()
    nets.discriminator.eval()
    return nets, manifest


def sample(checkpoint, n: int, seed: int = 0):
    """``(samples, labels)``; labels are generated vectors in joint mode, the drawn class ids
    in conditional modes, and ``None`` for unsupervised checkpoints."""
    nets, manifest = load_nets(checkpoint)
    sampler = None
    if manifest["label_marginal"] is not None:
        sampler = LabelSampler(manifest["label_marginal"], seed + 1)
    samples, labels = generate_samples(nets, nets.mode, n, seed, sampler)
    if sampler is not None and labels is not None:
        labels = labels.argmax(axis=1)
    return samples, labels


def evaluate(checkpoint, dataset: LabeledDataset, extractor: FeatureExtractor, n_samples: int,
             n_splits: int = 10, seed: int = 0) -> ScoreReport:
    if n_samples < 2 * n_splits:
        raise ValueError(f"n_samples={n_samples} must be at least 2*n_splits={2 * n_splits}")
    samples, _ = sample(checkpoint, n_samples, seed)
    with open(os.path.join(checkpoint, "manifest.json")) as f:
        step = json.load(f)["step"]
    return score_samples(samples, extractor, dataset.images, n_splits, step)


def snapshot(nets: GANNets) -> GANNets:
    """Deep copy for concurrent evaluation while training continues."""
    return copy.deepcopy(nets)
