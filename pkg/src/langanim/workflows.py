"""Batch workflows behind the command line: animate, chain, replay, evaluate."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch

from .backends import Backends, load_backends
from .backends.loading import resolve_backend_spec
from .checkpoint import Checkpoint
from .core import ConfigurationError, from_uint8
from .export import (SCHEMA_VERSION, list_videos, read_frame, read_manifest, write_contact_sheet,
                     write_frames, write_manifest)
from .metrics import FeatureCache, acd, embed_frames, fid_from_features
from .model import AnimationModel, generate
from .trainer import load_model

PathLike = Union[str, Path]


def file_sha256(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class AnimationRequest:
    """One animation job. ``source`` is an image path or an integer sample seed."""

    source: Union[int, PathLike]
    prompts: Sequence[str]
    checkpoint: PathLike
    out: PathLike
    frames_per_prompt: int = 16
    seed: int = 0
    contact_sheet: bool = False

    def __post_init__(self):
        self.prompts = list(self.prompts)
        if not self.prompts:
            raise ConfigurationError("at least one prompt is required")
        if self.frames_per_prompt < 1:
            raise ConfigurationError(f"frames must be >= 1, got {self.frames_per_prompt}")


@dataclass
class AnimationResult:
    frames: list[Path]
    manifest: Path
    step_norms: list[float] = field(default_factory=list)


def load_trained(checkpoint: PathLike, backends: Optional[Backends] = None):
    """Checkpoint, model and backends ready for inference."""
    ck = Checkpoint.load(checkpoint)
    if backends is None:
        b = ck.config.backend
        backends = load_backends(resolve_backend_spec(b.backend), seed=b.synth_seed,
                                 finetune_text=b.finetune_text, share_critic=b.share_critic)
    model, backends = load_model(ck, backends)
    return ck, model, backends


def load_source(source: Union[int, PathLike], model: AnimationModel):
    """Sample seed (sampled mode) or a decoded image tensor (real-image mode)."""
    if isinstance(source, (int, np.integer)):
        if model.mode != "sampled":
            raise ConfigurationError("this checkpoint animates images; pass --image")
        return int(source)
    if model.mode == "sampled":
        raise ConfigurationError("this checkpoint was trained in sampled mode; pass --sample-seed")
    return from_uint8(read_frame(source))


def _source_record(source) -> dict:
    if isinstance(source, (int, np.integer)):
        return {"sample_seed": int(source)}
    path = Path(source).resolve()
    return {"image": str(path), "image_sha256": file_sha256(path)}


def run_animation(req: AnimationRequest, backends: Optional[Backends] = None,
                  kind: Optional[str] = None) -> AnimationResult:
    ck, model, backends = load_trained(req.checkpoint, backends)
    source = load_source(req.source, model)
    segments = generate(model, backends, source, req.prompts, req.frames_per_prompt, seed=req.seed)

    frames = torch.cat([s.frames for s in segments])
    codes = torch.cat([s.codes for s in segments])
    w_s = segments[0].w_s
    steps = (codes[1:] - codes[:-1]).flatten(1).norm(dim=1).tolist()
    offsets = (codes - w_s).flatten(1).norm(dim=1).tolist()

    out = Path(req.out)
    paths = write_frames(frames, out)
    records = []
    for k, path in enumerate(paths):
        seg = k // req.frames_per_prompt
        records.append({"file": path.name, "segment": seg + 1, "prompt": req.prompts[seg],
                        "step_norm": None if k == 0 else steps[k - 1],
                        "offset_norm": offsets[k]})
    if req.contact_sheet:
        write_contact_sheet(frames, out / "contact_sheet.png")
    manifest = {
        "kind": kind or ("chain" if len(req.prompts) > 1 else "animate"),
        "prompt": req.prompts[0] if len(req.prompts) == 1 else None,
        "prompts": req.prompts,
        "frames_per_prompt": req.frames_per_prompt,
        "seed": req.seed,
        "source": _source_record(req.source),
        "checkpoint": str(Path(req.checkpoint).resolve()),
        "checkpoint_sha256": file_sha256(req.checkpoint),
        "config_hash": ck.config.hash(),
        "iteration": ck.iteration,
        "backend": resolve_backend_spec(ck.config.backend.backend),
        "displacement_norms": steps,
        "frames": records,
    }
    return AnimationResult(paths, write_manifest(out, manifest), steps)


def animate(req: AnimationRequest, backends: Optional[Backends] = None) -> AnimationResult:
    if len(req.prompts) != 1:
        raise ConfigurationError("animate takes exactly one prompt; use chain for several")
    return run_animation(req, backends, kind="animate")


def chain(req: AnimationRequest, backends: Optional[Backends] = None) -> AnimationResult:
    """Consecutive prompts; a single prompt degenerates to :func:`animate`."""
    return run_animation(req, backends, kind="chain" if len(req.prompts) > 1 else "animate")


def replay(manifest_path: PathLike, out: PathLike, backends: Optional[Backends] = None) -> AnimationResult:
    """Re-run the request recorded in a manifest; refuses a changed checkpoint."""
    m = read_manifest(manifest_path)
    if file_sha256(m["checkpoint"]) != m["checkpoint_sha256"]:
        raise ConfigurationError(f"checkpoint {m['checkpoint']} changed since the manifest was written")
    src = m["source"]
    source = src["sample_seed"] if "sample_seed" in src else src["image"]
    req = AnimationRequest(source, m["prompts"], m["checkpoint"], out,
                           frames_per_prompt=m["frames_per_prompt"], seed=m["seed"])
    return run_animation(req, backends, kind=m["kind"])


# evaluation -----------------------------------------------------------------

def _embed(paths: Sequence[Path], embedder, cache: Optional[FeatureCache]) -> np.ndarray:
    def embed(frame: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            img = from_uint8(frame)
            return embedder.encode_image(img).double().numpy()

    return embed_frames([read_frame(p) for p in paths], embed, cache)


def evaluate(gen_dir: PathLike, ref_dir: Optional[PathLike] = None, metrics: Sequence[str] = ("fid", "acd"),
             backends: Optional[Backends] = None, cache_dir: Optional[PathLike] = None) -> dict:
    """FID (generated vs reference frames) and ACD (within generated videos)."""
    metrics = list(metrics)
    unknown = set(metrics) - {"fid", "acd"}
    if unknown:
        raise ConfigurationError(f"unknown metrics {sorted(unknown)}; choose from fid, acd")
    backends = backends or load_backends()
    embedder = backends.embedder
    name = getattr(embedder, "name", type(embedder).__name__)
    cache = FeatureCache(cache_dir, name) if cache_dir is not None else None

    videos, loose = list_videos(gen_dir)
    gen_paths = [p for ps in videos.values() for p in ps] + loose
    if not gen_paths:
        raise FileNotFoundError(f"no frames under {gen_dir}")
    report = {"schema_version": SCHEMA_VERSION, "embedder": name, "n_videos": len(videos),
              "n_frames": len(gen_paths)}

    if "acd" in metrics:
        if loose or not videos:
            raise ConfigurationError(f"{gen_dir}: ACD needs frames grouped in one subdirectory per video")
        lengths = {len(ps) for ps in videos.values()}
        if len(lengths) != 1 or min(lengths) < 2:
            raise ConfigurationError(f"{gen_dir}: ACD needs equal-length videos of >= 2 frames, got {sorted(lengths)}")
        feats = np.stack([_embed(ps, embedder, cache) for ps in videos.values()])
        report["acd"] = acd(feats)
    if "fid" in metrics:
        if ref_dir is None:
            raise ConfigurationError("FID needs a reference directory")
        ref_videos, ref_loose = list_videos(ref_dir)
        ref_paths = [p for ps in ref_videos.values() for p in ps] + ref_loose
        if not ref_paths:
            raise FileNotFoundError(f"no frames under {ref_dir}")
        report["fid"] = fid_from_features(_embed(gen_paths, embedder, cache),
                                          _embed(ref_paths, embedder, cache))
        report["n_ref_frames"] = len(ref_paths)
    return report


def write_report(report: dict, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
