"""Frame files, manifests and contact sheets.

Frames are lossless 8-bit RGB PNGs named ``frame_0001.png`` upward. A video
directory holds its frames plus ``manifest.json``; evaluation trees hold one
subdirectory per video.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import torch
from PIL import Image

from .core import to_uint8

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
FRAME_PATTERN = "frame_*.png"

PathLike = Union[str, Path]


def frame_name(index: int) -> str:
    """1-based frame file name, zero-padded to four digits."""
    if index < 1:
        raise ValueError(f"frame indices start at 1, got {index}")
    return f"frame_{index:04d}.png"


def _fsync_write(path: Path, write) -> None:
    tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        write(fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def as_uint8(frame) -> np.ndarray:
    """Accept a float image in ``[-1, 1]`` (tensor or array) or a uint8 array."""
    if isinstance(frame, np.ndarray) and frame.dtype == np.uint8:
        return frame
    return to_uint8(torch.as_tensor(frame))


def write_frames(frames: Sequence, out_dir: PathLike, start: int = 1) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, frame in enumerate(frames):
        path = out / frame_name(start + k)
        img = Image.fromarray(as_uint8(frame))
        _fsync_write(path, lambda fh, img=img: img.save(fh, format="PNG"))
        paths.append(path)
    return paths


def frame_paths(video_dir: PathLike) -> list[Path]:
    return sorted(Path(video_dir).glob(FRAME_PATTERN))


def read_frame(path: PathLike) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def read_frames(video_dir: PathLike) -> np.ndarray:
    """All frames of a video directory as ``(T, H, W, 3)`` uint8."""
    paths = frame_paths(video_dir)
    if not paths:
        raise FileNotFoundError(f"no frames in {video_dir}")
    return np.stack([read_frame(p) for p in paths])


def write_manifest(out_dir: PathLike, manifest: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    body = json.dumps({"schema_version": SCHEMA_VERSION, **manifest}, indent=2, sort_keys=True)
    _fsync_write(path, lambda fh: fh.write(body.encode() + b"\n"))
    return path


def read_manifest(path: PathLike) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = json.loads(path.read_text())
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: manifest schema {version}, expected {SCHEMA_VERSION}")
    return manifest


def contact_sheet(frames: Sequence, columns: int = 8, pad: int = 2) -> np.ndarray:
    """Tile frames row-major into one uint8 image with ``pad`` pixels of white between tiles."""
    tiles = [as_uint8(f) for f in frames]
    if not tiles:
        raise ValueError("no frames to tile")
    h, w, _ = tiles[0].shape
    cols = min(columns, len(tiles))
    rows = math.ceil(len(tiles) / cols)
    sheet = np.full((rows * (h + pad) + pad, cols * (w + pad) + pad, 3), 255, np.uint8)
    for k, tile in enumerate(tiles):
        r, c = divmod(k, cols)
        y, x = pad + r * (h + pad), pad + c * (w + pad)
        sheet[y:y + h, x:x + w] = tile
    return sheet


def write_contact_sheet(frames: Sequence, path: PathLike, columns: int = 8) -> Path:
    path = Path(path)
    img = Image.fromarray(contact_sheet(frames, columns))
    _fsync_write(path, lambda fh: img.save(fh, format="PNG"))
    return path


def list_videos(root: PathLike) -> tuple[dict[str, list[Path]], list[Path]]:
    """``({video_id: frame paths}, loose top-level frames)`` under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    videos = {d.name: frame_paths(d) for d in sorted(root.iterdir()) if d.is_dir()}
    videos = {k: v for k, v in videos.items() if v}
    return videos, frame_paths(root)
