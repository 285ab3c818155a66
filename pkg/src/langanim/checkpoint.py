"""Versioned checkpoint container.

A checkpoint is a single ``.npz`` archive holding a JSON manifest (format
version, config, config hash, iteration) and named arrays for trainable
parameters, optimizer moments, the training RNG state and the loss history.
Synthesizer weights are never stored.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .config import TrainConfig, from_dict

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    iteration: int
    params: dict[str, np.ndarray]
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))
    history: dict[str, np.ndarray] = field(default_factory=dict)

    def manifest(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "iteration": self.iteration,
            "params": sorted(self.params),
        }

    def save(self, path: Union[str, Path]) -> Path:
        """Write atomically (temp file, then rename)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {"__manifest__": np.frombuffer(json.dumps(self.manifest()).encode(), np.uint8),
                  "__rng__": self.rng_state}
        arrays.update({f"param/{k}": v for k, v in self.params.items()})
        arrays.update({f"opt/{k}": v for k, v in self.optimizer.items()})
        arrays.update({f"history/{k}": v for k, v in self.history.items()})
        tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Checkpoint":
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"checkpoint not found: {path}")
        with np.load(path, allow_pickle=False) as data:
            if "__manifest__" not in data:
                raise CheckpointError(f"{path}: missing manifest")
            manifest = json.loads(data["__manifest__"].tobytes().decode())
            version = manifest.get("format_version")
            if version != FORMAT_VERSION:
                raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
            groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "opt": {}, "history": {}}
            for key in data.files:
                prefix, _, name = key.partition("/")
                if prefix in groups:
                    groups[prefix][name] = data[key]
            rng = data["__rng__"]
        cfg = from_dict(manifest["config"])
        if cfg.hash() != manifest["config_hash"]:
            raise CheckpointError(f"{path}: config hash mismatch")
        return cls(cfg, int(manifest["iteration"]), groups["param"], groups["opt"], rng,
                   groups["history"])
