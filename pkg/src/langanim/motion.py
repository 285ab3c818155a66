"""Recurrent residual motion generator.

The generator turns a starting motion code into a trajectory of motion codes.
Each step builds a context from the current code and hidden state and adds a
scaled, rectified residual to both::

    c  = act(W1 z) || h
    z' = z + r1 * act(W2 c)
    h' = h + r2 * act(W3 c)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .core import EMBED_DIM

HIDDEN_DIM = 384
NEGATIVE_SLOPE = 0.1
BASE_SCALE = 0.2
H_INIT_VARIANCE = 0.01


@dataclass
class MotionState:
    z: torch.Tensor  # (..., z_dim)
    h: torch.Tensor  # (..., h_dim)

    def detach(self) -> "MotionState":
        return MotionState(self.z.detach(), self.h.detach())


@dataclass(frozen=True)
class TrajectoryConfig:
    T: int = 16
    mode: str = "train"
    total_inference_frames: Optional[int] = None
    base_scale: float = BASE_SCALE

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be positive")
        if self.mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {self.mode!r}")
        if self.mode == "infer" and self.total < self.T:
            raise ValueError("total_inference_frames must be >= T in infer mode")

    @property
    def total(self) -> int:
        return self.T if self.total_inference_frames is None else self.total_inference_frames


def residual_scale(i: int, cfg: TrajectoryConfig) -> tuple[float, float]:
    """Residual step sizes ``(r1, r2)`` for timestamp ``i`` (1-based).

    Constant in training; at inference both decay linearly,
    ``base * (T + 1 - i) / total``, so late steps of long sequences move less.
    """
    if not 1 <= i <= cfg.T:
        raise IndexError(f"timestamp {i} outside 1..{cfg.T}")
    if cfg.mode == "train":
        return cfg.base_scale, cfg.base_scale
    r = cfg.base_scale * (cfg.T + 1 - i) / cfg.total
    return r, r


def init_state(
    z_t: torch.Tensor,
    z_v: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
    h_dim: int = HIDDEN_DIM,
) -> MotionState:
    """Starting state: ``z = z_t (+ z_v)`` and ``h ~ N(0, 0.01 I)``.

    ``z_v`` is omitted in sampled mode. Pass a seeded ``generator`` for
    reproducible hidden states.
    """
    z = z_t if z_v is None else z_t + z_v
    std = H_INIT_VARIANCE ** 0.5
    h = torch.randn(*z.shape[:-1], h_dim, generator=generator, dtype=z.dtype, device=z.device) * std
    return MotionState(z, h)


class MotionGenerator(nn.Module):
    """Holds ``W1 (h x z)``, ``W2 (z x 2h)`` and ``W3 (h x 2h)``."""

    def __init__(
        self,
        z_dim: int = EMBED_DIM,
        h_dim: int = HIDDEN_DIM,
        slope: float = NEGATIVE_SLOPE,
        init_std: float = 0.02,
        dtype: Optional[torch.dtype] = None,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        self.z_dim, self.h_dim, self.slope = z_dim, h_dim, slope
        self.W1 = nn.Parameter(torch.empty(h_dim, z_dim, dtype=dtype))
        self.W2 = nn.Parameter(torch.empty(z_dim, 2 * h_dim, dtype=dtype))
        self.W3 = nn.Parameter(torch.empty(h_dim, 2 * h_dim, dtype=dtype))
        with torch.no_grad():
            for p in (self.W1, self.W2, self.W3):
                p.normal_(0.0, init_std, generator=generator)

    def context(self, state: MotionState) -> torch.Tensor:
        a = F.leaky_relu(state.z @ self.W1.T, self.slope)
        return torch.cat([a, state.h], dim=-1)

    def residuals(self, c: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        dz = F.leaky_relu(c @ self.W2.T, self.slope)
        dh = F.leaky_relu(c @ self.W3.T, self.slope)
        return dz, dh

    def step(self, state: MotionState, r1: float, r2: float) -> MotionState:
        c = self.context(state)
        dz, dh = self.residuals(c)
        z, h = state.z + r1 * dz, state.h + r2 * dh
        if not (torch.isfinite(z).all() and torch.isfinite(h).all()):
            raise FloatingPointError(
                f"non-finite motion state (|c|max={c.detach().abs().max().item():.3g}, "
                f"|dz|max={dz.detach().abs().max().item():.3g}, r1={r1}, r2={r2})"
            )
        return MotionState(z, h)

    def rollout(
        self,
        init: MotionState,
        cfg: TrajectoryConfig,
        steps: Optional[int] = None,
        start: int = 1,
    ) -> tuple[torch.Tensor, MotionState]:
        """Emit ``steps`` motion codes (default ``cfg.T``) starting from ``init``.

        The first emitted code is ``init.z`` at timestamp ``start``; the step
        into timestamp ``i`` uses ``residual_scale(i, cfg)``. Returns the codes
        stacked on axis ``-2`` and the final state.
        """
        steps = cfg.T if steps is None else steps
        codes = [init.z]
        state = init
        for i in range(start + 1, start + steps):
            r1, r2 = residual_scale(i, cfg)
            state = self.step(state, r1, r2)
            codes.append(state.z)
        return torch.stack(codes, dim=-2), state


def step(state: MotionState, weights: MotionGenerator, r1: float, r2: float) -> MotionState:
    return weights.step(state, r1, r2)


def rollout(init: MotionState, weights: MotionGenerator, cfg: TrajectoryConfig) -> torch.Tensor:
    return weights.rollout(init, cfg)[0]
