"""jgan command line: ingest, corrupt, weaklabels, train, sample, eval, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import datasets as ds
from .config import DataConfig, dump_config, load_config, resolve
from .corruption import NoiseSpec, corrupt_labels, read_label_file, write_corruption_sidecar
from .errors import ConfigurationError
from .trainer import TrainConfig, average_reports, evaluate, sample, save_sample_grid, train
from .metrics import ScoreReport
from .weaklabel import (build_weak_label_dataset, mixture_posterior_extractor, random_linear_extractor,
                        read_weak_labels, write_weak_labels)

DATA_ROOT_ENV = "JGAN_DATA_ROOT"
log = logging.getLogger("jgan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _flag(name):
    return "--" + name.replace("_", "-")


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _snapshot(out_dir, args):
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "command.json"),
                {k: v for k, v in vars(args).items() if k != "func"})


def _mixture_spec(data: DataConfig) -> ds.MixtureSpec:
    return ds.ring_mixture(data.mixture_k, data.mixture_radius, data.mixture_stddev, data.mixture_seed)


def _data_path(data: DataConfig) -> str:
    if data.path:
        return data.path
    root = os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise ConfigurationError(f"no data path given and {DATA_ROOT_ENV} is unset")
    return os.path.join(root, data.source)


def load_data(data: DataConfig):
    """Returns ``(dataset, mixture_spec_or_None)``."""
    mixture = None
    if data.source == "mixture":
        mixture = _mixture_spec(data)
        dataset = ds.make_mixture(mixture, data.mixture_n)
    elif data.source == "dir":
        dataset = ds.load_dataset(data.path)
        meta = ds.read_dataset_meta(data.path).get("mixture")
        if meta:
            mixture = ds.MixtureSpec(np.array(meta["means"]), meta["stddev"], np.array(meta["weights"]), meta["seed"])
    elif data.source == "cifar10":
        dataset = ds.load_cifar10(_data_path(data), data.split)
    elif data.source == "cifar100":
        dataset = ds.load_cifar100(_data_path(data), data.split)
    else:
        dataset = ds.load_stl(_data_path(data), data.target_size, data.split)
    if data.weak_labels:
        soft = read_weak_labels(data.weak_labels)
        dataset = ds.LabeledDataset(dataset.images, soft, soft.shape[1], f"{dataset.name}-weak")
    return dataset, mixture


def _mixture_meta(spec: ds.MixtureSpec) -> dict:
    return {"means": spec.means.tolist(), "stddev": spec.stddev, "weights": spec.weights.tolist(), "seed": spec.seed}


def _add_data_flags(p):
    for f in fields(DataConfig):
        p.add_argument(_flag(f.name), dest=f"data.{f.name}", type=type(getattr(DataConfig(), f.name)), default=None)


def _section(args, prefix):
    return {k.split(".", 1)[1]: v for k, v in vars(args).items() if k.startswith(prefix + ".")}


# --- subcommands -----------------------------------------------------------------

def cmd_ingest(args):
    data = DataConfig(**{k: v for k, v in _section(args, "data").items() if v is not None})
    _snapshot(args.out, args)
    dataset, mixture = load_data(data)
    extra = {"mixture": _mixture_meta(mixture)} if mixture else {}
    ds.save_dataset(dataset, args.out, extra)
    if dataset.labeled and not dataset.soft and dataset.K <= 256:
        dataset.labels.astype(np.uint8).tofile(os.path.join(args.out, "labels.bin"))
    print(f"{dataset.name}: {len(dataset)} samples, K={dataset.K} -> {args.out}")


def cmd_corrupt(args):
    labels = read_label_file(args.labels)
    spec = NoiseSpec(args.ratio, args.k, args.seed)
    noisy, mask = corrupt_labels(labels, spec)
    record = write_corruption_sidecar(args.out, noisy, mask, spec, source=str(args.labels))
    print(f"corrupted {record['n_corrupted']} of {record['n']} labels -> {args.out}")


def cmd_weaklabels(args):
    _snapshot(args.out, args)
    dataset = ds.load_dataset(args.data)
    meta = ds.read_dataset_meta(args.data)
    if args.extractor == "mixture":
        if not meta.get("mixture"):
            raise ConfigurationError("mixture extractor needs a mixture dataset")
        m = meta["mixture"]
        extractor = mixture_posterior_extractor(ds.MixtureSpec(np.array(m["means"]), m["stddev"],
                                                               np.array(m["weights"]), m["seed"]))
    else:
        extractor = random_linear_extractor(dataset.images.shape[1:], args.extractor_classes, args.extractor_seed)
    weak, codebook = build_weak_label_dataset(dataset, extractor, args.k)
    codebook.save(os.path.join(args.out, "codebook"))
    write_weak_labels(os.path.join(args.out, "weak.bin"), weak.labels,
                      {"extractor": extractor.name, "codebook_sha256": codebook.checksum()})
    ds.save_dataset(weak, os.path.join(args.out, "dataset"), {k: v for k, v in meta.items() if k == "mixture"})
    print(f"weak labels k={args.k} for {len(weak)} samples -> {args.out}")


def cmd_train(args):
    file_values = load_config(args.config) if args.config else {}
    overrides = {"trainer": _section(args, "trainer"), "data": _section(args, "data")}
    _, data = resolve(file_values, overrides)
    dataset, mixture = load_data(data)
    arch_given = overrides["trainer"].get("arch") or file_values.get("trainer", {}).get("arch")
    if not arch_given and dataset.images.ndim == 2:
        overrides["trainer"]["arch"] = "mlp"
    if dataset.soft:
        overrides["trainer"]["weak_k"] = dataset.K
    config, data = resolve(file_values, overrides)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.ini"), "w") as f:
        f.write(dump_config(config, data))
    art = train(config, dataset, args.out, mixture=mixture)
    if art.final_report:
        print(art.final_report.to_json())


def cmd_sample(args):
    _snapshot(args.out, args)
    samples, labels = sample(args.checkpoint, args.n, args.seed)
    np.save(os.path.join(args.out, "samples.npy"), samples)
    if labels is not None:
        np.save(os.path.join(args.out, "labels.npy"), labels)
    save_sample_grid(samples, os.path.join(args.out, "grid.png"))
    print(f"{len(samples)} samples{' with labels' if labels is not None else ''} -> {args.out}")


def cmd_eval(args):
    _snapshot(args.out, args)
    dataset = ds.load_dataset(args.data)
    m = ds.read_dataset_meta(args.data).get("mixture")
    if m:
        extractor = mixture_posterior_extractor(ds.MixtureSpec(np.array(m["means"]), m["stddev"],
                                                               np.array(m["weights"]), m["seed"]))
    else:
        extractor = random_linear_extractor(dataset.images.shape[1:], 10, seed=0)
    report = evaluate(args.checkpoint, dataset, extractor, args.n_samples, args.n_splits, args.seed)
    with open(os.path.join(args.out, "eval.jsonl"), "w") as f:
        f.write(report.to_json() + "\n")
    print(report.to_json())


def _run_row(run_dir):
    log_path = os.path.join(run_dir, "metrics.jsonl")
    cfg_path = os.path.join(run_dir, "config.ini")
    if not os.path.exists(log_path):
        raise FileNotFoundError(f"no metric log in run directory {run_dir}")
    with open(log_path) as f:
        reports = [ScoreReport.from_json(line) for line in f if line.strip()]
    if not reports:
        raise ValueError(f"empty metric log in run directory {run_dir}")
    trainer = load_config(cfg_path)["trainer"] if os.path.exists(cfg_path) else {}
    mode = trainer.get("mode", TrainConfig.mode)
    source = trainer.get("label_source", "clean") if mode != "unsupervised" else "none"
    ratio = trainer.get("noise_ratio", 0.0) if source == "noisy" else 0.0
    label = {"noisy": f"noisy {ratio:.2f}", "weak": f"weak {trainer.get('weak_k', 64)}"}.get(source, source)
    return (mode, source, ratio, label), average_reports(reports[-5:])


def report_rows(run_dirs):
    grouped: dict[tuple, list[ScoreReport]] = {}
    for run in run_dirs:
        key, final = _run_row(run)
        grouped.setdefault(key, []).append(final)
    rows = []
    for key in sorted(grouped):
        finals = grouped[key]
        is_means = [r.is_mean for r in finals]
        rows.append({
            "mode": key[0], "labels": key[3], "runs": len(finals),
            "is_mean": float(np.mean(is_means)),
            # across-run spread when several seeds exist, otherwise the split spread
            "is_std": float(np.std(is_means)) if len(finals) > 1 else finals[0].is_std,
            "fid": float(np.mean([r.fid for r in finals])),
        })
    return rows


def format_table(rows) -> str:
    header = f"{'mode':<20} {'labels':<12} {'runs':>4} {'IS':>16} {'FID':>10}"
    lines = [header, "-" * len(header)]
    for r in rows:
        is_text = f"{r['is_mean']:.3f}±{r['is_std']:.3f}"
        lines.append(f"{r['mode']:<20} {r['labels']:<12} {r['runs']:>4} {is_text:>16} {r['fid']:>10.4f}")
    return "\n".join(lines)


def cmd_report(args):
    if not args.run_dirs:
        raise UsageError("report: at least one run directory is required")
    rows = report_rows(args.run_dirs)
    table = format_table(rows)
    print(table)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.txt"), "w") as f:
        f.write(table + "\n")
    _write_json(os.path.join(args.out, "report.json"), {"runs": list(args.run_dirs), "rows": rows})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jgan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="read raw dataset files into a dataset directory")
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("corrupt", help="inject symmetric label noise into a byte label file")
    p.add_argument("--labels", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("weaklabels", help="build SVD-compressed weak labels from a predictor")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--extractor", choices=["random-linear", "mixture"], default="random-linear")
    p.add_argument("--extractor-classes", type=int, default=1000)
    p.add_argument("--extractor-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weaklabels)

    p = sub.add_parser("train", help="train a GAN")
    p.add_argument("--config")
    for f in fields(TrainConfig):
        p.add_argument(_flag(f.name), dest=f"trainer.{f.name}", type=type(getattr(TrainConfig(), f.name)),
                       default=None)
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="IS/FID of a checkpoint against a dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--n-splits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="comparison table over run directories")
    p.add_argument("run_dirs", nargs="*")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_report)
    return parser


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("jgan: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(parse_and_dispatch())
