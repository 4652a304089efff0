"""Checkpoint directories: ``manifest.json`` plus one raw ``tensors.bin`` blob.

The manifest records the run config, network description, step, seed, and the
offset, shape, dtype and sha256 of every tensor; loading refuses any tensor
whose bytes do not match. No timestamps are written, so identical runs give
byte-identical checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import torch

from .errors import ChecksumError

FORMAT = "jgan-checkpoint/1"


def save_checkpoint(directory, modules: dict[str, torch.nn.Module], manifest: dict) -> str:
    os.makedirs(directory, exist_ok=True)
    index, offset = {}, 0
    with open(os.path.join(directory, "tensors.bin"), "wb") as blob:
        for prefix, module in modules.items():
            for name, tensor in module.state_dict().items():
                arr = np.ascontiguousarray(tensor.detach().cpu().numpy())
                arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
                raw = arr.tobytes()
                blob.write(raw)
                index[f"{prefix}/{name}"] = {"offset": offset, "nbytes": len(raw), "shape": list(arr.shape),
                                             "dtype": arr.dtype.str, "sha256": hashlib.sha256(raw).hexdigest()}
                offset += len(raw)
    manifest = dict(manifest, format=FORMAT, tensors=index)
    with open(os.path.join(directory, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return str(directory)


def read_checkpoint(directory) -> tuple[dict, dict[str, dict[str, torch.Tensor]]]:
    """Returns the manifest and ``{module_prefix: state_dict}`` after checksum verification."""
    try:
        with open(os.path.join(directory, "manifest.json")) as f:
            manifest = json.load(f)
        with open(os.path.join(directory, "tensors.bin"), "rb") as f:
            blob = f.read()
    except (OSError, ValueError) as exc:
        raise ChecksumError(f"unreadable checkpoint {directory}: {exc}") from exc
    if manifest.get("format") != FORMAT:
        raise ChecksumError(f"{directory}: unknown checkpoint format {manifest.get('format')!r}")
    states: dict[str, dict[str, torch.Tensor]] = {}
    for key, meta in manifest["tensors"].items():
        raw = blob[meta["offset"]:meta["offset"] + meta["nbytes"]]
        if len(raw) != meta["nbytes"] or hashlib.sha256(raw).hexdigest() != meta["sha256"]:
            raise ChecksumError(f"{directory}: checksum mismatch for {key}")
        arr = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"])
        prefix, name = key.split("/", 1)
        states.setdefault(prefix, {})[name] = torch.from_numpy(arr.copy())
    return manifest, states
