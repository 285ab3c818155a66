"""Embedding-to-W+ mappers and per-frame latent composition."""
from __future__ import annotations

from typing import Optional, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .core import EMBED_DIM, STYLE_DIM, ConfigurationError, ShapeError


def layer_groups(num_layers: int) -> list[tuple[int, int]]:
    """Coarse / medium / fine layer slices, 4/4/rest at full scale."""
    if num_layers >= 12:
        cuts = [0, 4, 8, num_layers]
    else:
        a = max(1, num_layers // 4)
        cuts = [0, a, min(num_layers - 1, 2 * a), num_layers]
    return [(lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]


class _MLP(nn.Module):
    def __init__(self, widths: Sequence[int], slope: float, activation: bool, out_scale: float,
                 dtype: Optional[torch.dtype], generator: Optional[torch.Generator]):
        super().__init__()
        self.slope, self.activation = slope, activation
        self.layers = nn.ModuleList(
            nn.Linear(i, o, dtype=dtype) for i, o in zip(widths[:-1], widths[1:])
        )
        with torch.no_grad():
            for lin in self.layers:
                bound = lin.in_features ** -0.5
                lin.weight.uniform_(-bound, bound, generator=generator)
                lin.bias.zero_()
            self.layers[-1].weight.mul_(out_scale)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for k, lin in enumerate(self.layers):
            x = lin(x)
            if self.activation and k < len(self.layers) - 1:
                x = F.leaky_relu(x, self.slope)
        return x


class Mapper(nn.Module):
    """Maps a 512-d embedding to an ``(num_layers, 512)`` W+ offset.

    Four affine layers with leaky-ReLU in between. ``grouped=True`` uses one
    network per coarse/medium/fine layer group instead of a shared trunk;
    ``broadcast=True`` emits a single 512 vector repeated over all layers.
    """

    def __init__(
        self,
        num_layers: int,
        in_dim: int = EMBED_DIM,
        hidden: int = 512,
        depth: int = 4,
        slope: float = 0.1,
        grouped: bool = False,
        broadcast: bool = False,
        activation: bool = True,
        out_scale: float = 0.1,
        dtype: Optional[torch.dtype] = None,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        if grouped and broadcast:
            raise ConfigurationError("grouped and broadcast mappers are mutually exclusive")
        self.num_layers, self.style_dim = num_layers, STYLE_DIM
        self.grouped, self.broadcast = grouped, broadcast
        self.groups = layer_groups(num_layers) if grouped else [(0, num_layers)]
        heads = []
        for lo, hi in self.groups:
            out = STYLE_DIM if broadcast else (hi - lo) * STYLE_DIM
            widths = [in_dim] + [hidden] * (depth - 1) + [out]
            heads.append(_MLP(widths, slope, activation, out_scale, dtype, generator))
        self.heads = nn.ModuleList(heads)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if self.broadcast:
            y = self.heads[0](z)
            return y.unsqueeze(-2).expand(*y.shape[:-1], self.num_layers, STYLE_DIM)
        parts = [
            head(z).reshape(*z.shape[:-1], hi - lo, STYLE_DIM)
            for head, (lo, hi) in zip(self.heads, self.groups)
        ]
        return parts[0] if len(parts) == 1 else torch.cat(parts, dim=-2)


def map_visual(z_v: torch.Tensor, mapper: Optional[Mapper]) -> torch.Tensor:
    if mapper is None:
        raise ConfigurationError("visual mapper is unavailable in sampled mode")
    return mapper(z_v)


def map_motion(z: torch.Tensor, mapper: Mapper) -> torch.Tensor:
    return mapper(z)


def compose_frame_code(
    delta: torch.Tensor, w_v: Optional[torch.Tensor], w_inv: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Return ``(delta + w_s, w_s)`` with ``w_s = w_v + w_inv``.

    ``w_v`` is ``None`` in sampled mode, where ``w_inv`` is the sampled content
    code. ``delta`` may carry extra leading (e.g. time) axes.
    """
    w_s = w_inv if w_v is None else w_v + w_inv
    if w_v is not None and w_v.shape != w_inv.shape:
        raise ShapeError(f"w_v {tuple(w_v.shape)} and w_inv {tuple(w_inv.shape)} differ")
    if delta.shape[-2:] != w_s.shape[-2:]:
        raise ShapeError(f"delta {tuple(delta.shape)} incompatible with w_s {tuple(w_s.shape)}")
    anchor = w_s
    while anchor.ndim < delta.ndim:
        anchor = anchor.unsqueeze(-3)
    return delta + anchor, w_s
