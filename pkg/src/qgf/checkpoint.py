"""Model persistence: a manifest plus one raw float32 array file per tensor.

A checkpoint is a directory holding `manifest.json` (format version, model
kind, config, seed, iteration count, tensor shapes) and one little-endian
single-precision row-major `.bin` per named tensor. Arrays come back as
float64 whose values are exactly the stored float32s, so a reloaded model's
forward pass is bitwise reproducible.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IoError, ShapeMismatchError, VersionMismatchError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelCheckpoint:
    """Everything needed to rebuild a trained model."""

    model: str
    config: dict
    seed: int
    iterations: int
    arrays: dict[str, np.ndarray]
    version: int = FORMAT_VERSION
    extras: dict = field(default_factory=dict)


def _bin_name(tensor_name: str) -> str:
    return tensor_name.replace("/", "_") + ".bin"


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path, overwrite: bool = False) -> Path:
    """Write the checkpoint directory atomically (staged then renamed)."""
    path = Path(path)
    if path.exists():
        if not overwrite:
            raise IoError(f"refusing to overwrite existing checkpoint {path}")
        shutil.rmtree(path)
    staging = path.with_name(path.name + f".staging{os.getpid()}")
    try:
        staging.mkdir(parents=True)
        tensors = {}
        for name, arr in ckpt.arrays.items():
            fname = _bin_name(name)
            data = np.ascontiguousarray(arr, dtype="<f4")
            (staging / fname).write_bytes(data.tobytes())
            tensors[name] = {"shape": list(arr.shape), "file": fname}
        manifest = {
            "format_version": ckpt.version,
            "model": ckpt.model,
            "config": ckpt.config,
            "seed": ckpt.seed,
            "iterations": ckpt.iterations,
            "tensors": tensors,
            "extras": ckpt.extras,
        }
        (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(staging, path)
    except OSError as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise IoError(f"cannot write checkpoint at {path}: {exc}") from exc
    return path


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    """Read a checkpoint directory back, validating version and shapes."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"corrupt manifest in {path}: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format {version!r}, reader supports {FORMAT_VERSION}")

    arrays = {}
    for name, meta in manifest["tensors"].items():
        shape = tuple(meta["shape"])
        bin_path = path / meta["file"]
        try:
            raw = bin_path.read_bytes()
        except OSError as exc:
            raise IoError(f"cannot read {bin_path}: {exc}") from exc
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if len(raw) != expected:
            raise ShapeMismatchError(
                f"tensor {name}: {len(raw)} bytes on disk, shape {shape} needs {expected}")
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
    return ModelCheckpoint(model=manifest["model"], config=manifest["config"],
                           seed=manifest["seed"], iterations=manifest["iterations"],
                           arrays=arrays, version=version,
                           extras=manifest.get("extras", {}))
