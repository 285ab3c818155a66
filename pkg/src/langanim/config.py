"""Training configuration and its INI-style file format.

Example file::

    [train]
    batch_size = 4
    iterations = 2000

    [loss]
    cont = 0.5

    [backend]
    backend = toy
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Union

from .losses import LossWeights


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 384
    init_std: float = 0.02
    mapper_grouped: bool = False
    mapper_broadcast: bool = False
    mapper_out_scale: float = 0.1


@dataclass(frozen=True)
class BackendConfig:
    backend: str = "toy"
    finetune_text: bool = False
    share_critic: bool = False
    vocabulary_size: int = 8
    synth_seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    T: int = 16
    iterations: int = 2000
    lr_encoders: float = 1e-5
    lr_mappers: float = 1e-3
    lr_recurrent: float = 1e-3
    adam_beta1: float = 0.0
    adam_beta2: float = 0.999
    seed: int = 0
    mode: str = "sampled"
    checkpoint_every: int = 500
    grad_clip: float = 10.0
    objective: str = "contrastive"
    path_reg_order: str = "second"
    normalize_embeddings: bool = True
    symmetric_contrastive: bool = False
    loss: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)

    def __post_init__(self):
        _require(self.batch_size >= 1, "train.batch_size", "must be >= 1")
        _require(self.T >= 1, "train.T", "must be >= 1")
        _require(self.iterations >= 0, "train.iterations", "must be >= 0")
        for k in ("lr_encoders", "lr_mappers", "lr_recurrent"):
            _require(getattr(self, k) >= 0, f"train.{k}", "must be >= 0")
        _require(0.0 <= self.adam_beta1 < 1.0, "train.adam_beta1", "must be in [0, 1)")
        _require(0.0 <= self.adam_beta2 < 1.0, "train.adam_beta2", "must be in [0, 1)")
        _require(self.mode in ("sampled", "real_image"), "train.mode",
                 "must be 'sampled' or 'real_image'")
        _require(self.checkpoint_every >= 1, "train.checkpoint_every", "must be >= 1")
        _require(self.grad_clip > 0, "train.grad_clip", "must be > 0")
        _require(self.objective in ("contrastive", "pairwise"), "train.objective",
                 "must be 'contrastive' or 'pairwise'")
        _require(self.path_reg_order in ("second", "first"), "train.path_reg_order",
                 "must be 'second' or 'first'")
        _require(self.model.hidden_dim >= 1, "model.hidden_dim", "must be >= 1")
        _require(self.backend.vocabulary_size >= self.batch_size, "backend.vocabulary_size",
                 "must be >= train.batch_size (prompts in a batch are distinct)")

    @property
    def adam_betas(self) -> tuple[float, float]:
        return (self.adam_beta1, self.adam_beta2)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {"train": {}}
        for f in fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                out[f.name] = dataclasses.asdict(v)
            else:
                out["train"][f.name] = v
        return out

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _require(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{key}: {msg}")


_SECTIONS = {"loss": LossWeights, "model": ModelConfig, "backend": BackendConfig}


def _coerce(key: str, raw: Any, typ) -> Any:
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if name == "bool":
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if name == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip())
        if name == "float":
            return float(str(raw).strip())
        return str(raw).strip()
    except ValueError:
        raise ConfigError(f"{key}: expected {name}, got {raw!r}") from None


def from_dict(data: dict[str, dict[str, Any]]) -> TrainConfig:
    """Build a validated config from ``{section: {key: value}}``; unknown keys are rejected."""
    unknown = set(data) - {"train", *_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    top = {f.name: f for f in fields(TrainConfig) if f.name not in _SECTIONS}
    for k, raw in data.get("train", {}).items():
        if k not in top:
            raise ConfigError(f"train.{k}: unknown key")
        kwargs[k] = _coerce(f"train.{k}", raw, top[k].type)
    for section, cls in _SECTIONS.items():
        known = {f.name: f for f in fields(cls)}
        sub = {}
        for k, raw in data.get(section, {}).items():
            if k not in known:
                raise ConfigError(f"{section}.{k}: unknown key")
            sub[k] = _coerce(f"{section}.{k}", raw, known[k].type)
        try:
            kwargs[section] = cls(**sub)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{section}: {exc}") from None
    return TrainConfig(**kwargs)


def parse_config(path: Union[str, Path, None] = None, overrides: dict[str, dict[str, Any]] | None = None) -> TrainConfig:
    """Read an INI config file; ``overrides`` (e.g. from CLI flags) take precedence."""
    data: dict[str, dict[str, Any]] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep key case (``T``)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        data = {s: dict(parser.items(s)) for s in parser.sections()}
    for section, values in (overrides or {}).items():
        data.setdefault(section, {}).update(values)
    return from_dict(data)


def serialize_config(cfg: TrainConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, values in cfg.to_dict().items():
        parser[section] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in values.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
