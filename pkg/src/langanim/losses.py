"""Training objectives."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional

import torch
import torch.nn.functional as F

from .core import ShapeError, normalized


@dataclass(frozen=True)
class LossWeights:
    w_reg: float = 1.0
    path_reg: float = 1.0
    cont: float = 0.5
    lpips: float = 1.0
    tau: float = 0.07

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {k} must be finite and >= 0, got {v}")
        if self.tau <= 0:
            raise ValueError(f"temperature tau must be > 0, got {self.tau}")


def _stack(seq) -> torch.Tensor:
    if torch.is_tensor(seq):
        return seq
    shapes = {tuple(s.shape) for s in seq}
    if len(shapes) > 1:
        raise ShapeError(f"non-uniform code shapes in sequence: {sorted(shapes)}")
    return torch.stack(list(seq))


def w_reg_loss(seq, w_s: torch.Tensor) -> torch.Tensor:
    """Sum over frames of the squared Frobenius distance to the content code.

    ``seq`` is ``(T, L, 512)`` (or a list of codes); extra leading batch axes
    on both arguments are allowed and produce one value per batch item.
    """
    seq = _stack(seq)
    if seq.shape[-2:] != w_s.shape[-2:]:
        raise ShapeError(f"codes {tuple(seq.shape)} and w_s {tuple(w_s.shape)} differ")
    diff = seq - w_s.unsqueeze(-3)
    return (diff ** 2).sum(dim=(-3, -2, -1))


def path_reg_loss(seq, first_order: bool = False) -> torch.Tensor:
    """Squared second differences of the latent trajectory ``(..., T, L, 512)``.

    With ``first_order=True`` the penalty is on the steps themselves (the
    ablation variant).
    """
    seq = _stack(seq)
    T = seq.shape[-3]
    if T < 2 or (T < 3 and not first_order):
        return seq.new_zeros(seq.shape[:-3])
    delta = seq[..., 1:, :, :] - seq[..., :-1, :, :]
    if not first_order:
        delta = delta[..., 1:, :, :] - delta[..., :-1, :, :]
    return (delta ** 2).sum(dim=(-3, -2, -1))


def contrastive_loss(v: torch.Tensor, t: torch.Tensor, tau: float = 0.07,
                     normalize: bool = True, symmetric: bool = False) -> torch.Tensor:
    """Image-to-text softmax cross-entropy summed over the batch.

    ``v`` and ``t`` are ``(n, d)`` paired embeddings; row ``i`` of ``v`` should
    pick column ``i`` of the ``v @ t.T / tau`` logits.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    if v.shape != t.shape or v.ndim != 2:
        raise ShapeError(f"expected matching (n, d) embeddings, got {tuple(v.shape)}, {tuple(t.shape)}")
    if normalize:
        v, t = normalized(v), normalized(t)
    logits = v @ t.T / tau
    target = torch.arange(v.shape[0], device=v.device)
    loss = F.cross_entropy(logits, target, reduction="sum")
    if symmetric:
        loss = loss + F.cross_entropy(logits.T, target, reduction="sum")
    return loss


def pairwise_similarity_loss(v: torch.Tensor, t: torch.Tensor, tau: float = 0.07,
                             normalize: bool = True) -> torch.Tensor:
    """Non-contrastive baseline: maximize each pair's own similarity only."""
    if normalize:
        v, t = normalized(v), normalized(t)
    return -(v * t).sum() / tau


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, backend) -> torch.Tensor:
    return backend.distance(a, b)


def total_loss(parts: Mapping[str, torch.Tensor], weights: Optional[LossWeights] = None) -> torch.Tensor:
    """Weighted sum of the ``w_reg``, ``path_reg``, ``cont`` and ``lpips`` terms."""
    weights = weights or LossWeights()
    total = 0.0
    for key in ("w_reg", "path_reg", "cont", "lpips"):
        value = parts[key]
        if not bool(torch.isfinite(torch.as_tensor(value)).all()):
            raise FloatingPointError(f"loss term {key!r} is not finite: {value}")
        total = total + getattr(weights, key) * value
    return torch.as_tensor(total)
