"""Shared value types and latent arithmetic.

Latent codes, embeddings and images are plain ``torch.Tensor`` objects with
shape conventions rather than wrapper classes:

* W+ code: ``(..., num_layers, 512)``
* embedding: ``(..., 512)``
* image: ``(..., H, W, 3)`` with values in ``[-1, 1]``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import torch

STYLE_DIM = 512
EMBED_DIM = 512


class ShapeError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


def check_code(w: torch.Tensor, num_layers: Optional[int] = None) -> torch.Tensor:
    if w.ndim < 2 or w.shape[-1] != STYLE_DIM:
        raise ShapeError(f"expected W+ code of shape (L, {STYLE_DIM}), got {tuple(w.shape)}")
    if num_layers is not None and w.shape[-2] != num_layers:
        raise ShapeError(f"expected {num_layers} style layers, got {w.shape[-2]}")
    if not torch.isfinite(w).all():
        raise ValueError("W+ code contains non-finite entries")
    return w


def code_add(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"cannot add codes of shapes {tuple(a.shape)} and {tuple(b.shape)}")
    return a + b


def sequence_deltas(seq: Union[torch.Tensor, Sequence[torch.Tensor]]) -> torch.Tensor:
    """Forward differences ``seq[i + 1] - seq[i]`` along the time axis.

    ``seq`` is either a list of equally shaped codes or a stacked tensor whose
    first axis is time. Returns a stacked tensor with ``T - 1`` entries.
    """
    if not torch.is_tensor(seq):
        if len(seq) < 2:
            raise ValueError("sequence_deltas needs at least two codes")
        shapes = {tuple(s.shape) for s in seq}
        if len(shapes) != 1:
            raise ShapeError(f"non-uniform code shapes in sequence: {sorted(shapes)}")
        seq = torch.stack(list(seq))
    if seq.shape[0] < 2:
        raise ValueError("sequence_deltas needs at least two codes")
    return seq[1:] - seq[:-1]


def normalized(v: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    return v / v.norm(dim=-1, keepdim=True).clamp_min(eps)


def to_uint8(img: torch.Tensor) -> np.ndarray:
    """Map a ``[-1, 1]`` image to 8-bit RGB."""
    x = img.detach().to(torch.float64).clamp(-1.0, 1.0)
    x = torch.round((x + 1.0) * 127.5)
    return x.cpu().numpy().astype(np.uint8)


def from_uint8(arr: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    x = torch.as_tensor(np.array(arr, copy=True), dtype=torch.float64)
    return (x / 127.5 - 1.0).to(dtype)


@dataclass(frozen=True)
class Sampled:
    """Placeholder for a content code drawn from the synthesizer's latent space."""

    seed: int


@dataclass(frozen=True, eq=False)
class InputPair:
    """One (source, prompt) pair. ``image`` is an image tensor or a :class:`Sampled` seed."""

    image: Union[torch.Tensor, Sampled]
    text: str
    key: Optional[object] = None  # stable image id, used to cache inversions

    @property
    def sampled(self) -> bool:
        return isinstance(self.image, Sampled)
