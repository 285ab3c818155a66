"""End-to-end animation model: encoders -> motion rollout -> mappers -> synthesizer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import nn

from .backends.base import Backends
from .core import ConfigurationError, InputPair, Sampled
from .mappers import Mapper, compose_frame_code, map_motion, map_visual
from .motion import MotionGenerator, MotionState, TrajectoryConfig, init_state


@dataclass
class ForwardOutput:
    frames: torch.Tensor  # (n, T, H, W, 3)
    codes: torch.Tensor  # (n, T, L, 512)
    w_s: torch.Tensor  # (n, L, 512)
    motion: torch.Tensor  # (n, T, 512)
    last_frame_embeddings: Optional[torch.Tensor]  # (n, 512)
    final_state: MotionState


class AnimationModel(nn.Module):
    """Trainable part of the pipeline (recurrent generator and mappers).

    ``mode`` is ``"sampled"`` (content codes drawn from the synthesizer, no
    visual encoder/mapper) or ``"real_image"``.
    """

    def __init__(self, num_layers: int, mode: str = "sampled", hidden_dim: int = 384,
                 init_std: float = 0.02, mapper_grouped: bool = False,
                 mapper_broadcast: bool = False, mapper_out_scale: float = 0.1,
                 seed: int = 0, dtype: Optional[torch.dtype] = None):
        super().__init__()
        if mode not in ("sampled", "real_image"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        self.mode, self.num_layers = mode, num_layers
        g = torch.Generator().manual_seed(seed)
        self.motion = MotionGenerator(h_dim=hidden_dim, init_std=init_std, dtype=dtype, generator=g)
        mk = dict(grouped=mapper_grouped, broadcast=mapper_broadcast, out_scale=mapper_out_scale,
                  dtype=dtype, generator=g)
        self.motion_mapper = Mapper(num_layers, **mk)
        self.visual_mapper = Mapper(num_layers, **mk) if mode == "real_image" else None

    @classmethod
    def from_config(cls, cfg, num_layers: int, dtype=None) -> "AnimationModel":
        m = cfg.model
        return cls(num_layers, mode=cfg.mode, hidden_dim=m.hidden_dim, init_std=m.init_std,
                   mapper_grouped=m.mapper_grouped, mapper_broadcast=m.mapper_broadcast,
                   mapper_out_scale=m.mapper_out_scale, seed=cfg.seed, dtype=dtype)

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        mappers = list(self.motion_mapper.parameters())
        if self.visual_mapper is not None:
            mappers += list(self.visual_mapper.parameters())
        return {"recurrent": list(self.motion.parameters()), "mappers": mappers}


class ContentCache:
    """Inversion results keyed by image identity; inversion is deterministic."""

    def __init__(self):
        self._store: dict = {}

    def get(self, key, compute):
        if key is None:
            return compute()
        if key not in self._store:
            self._store[key] = compute().detach()
        return self._store[key]


def encode_sources(model: AnimationModel, backends: Backends, pairs: Sequence[InputPair],
                   cache: Optional[ContentCache] = None):
    """Return ``(z_t, z_v or None, w_v or None, w_inv)`` stacked over ``pairs``."""
    enc, syn = backends.encoder, backends.synthesizer
    z_t = torch.stack([enc.encode_text(p.text) for p in pairs])
    if model.mode == "sampled":
        if not all(p.sampled for p in pairs):
            raise ConfigurationError("sampled mode expects sampled(seed) sources")
        w_inv = torch.stack([syn.sample_content_code(p.image.seed) for p in pairs])
        return z_t, None, None, w_inv
    if any(p.sampled for p in pairs):
        raise ConfigurationError("real-image mode expects image sources")
    if backends.inverter is None:
        raise ConfigurationError("real-image mode needs an inversion provider")
    cache = cache or ContentCache()
    imgs = [p.image for p in pairs]
    z_v = torch.stack([enc.encode_image(img) for img in imgs])
    w_inv = torch.stack([cache.get(getattr(p, "key", None), lambda img=img: backends.inverter.invert(img))
                         for p, img in zip(pairs, imgs)])
    w_v = map_visual(z_v, model.visual_mapper)
    return z_t, z_v, w_v, w_inv


def forward_pass(model: AnimationModel, backends: Backends, pairs: Sequence[InputPair],
                 traj: TrajectoryConfig, generator: Optional[torch.Generator] = None,
                 cache: Optional[ContentCache] = None, embed_last: bool = True) -> ForwardOutput:
    z_t, z_v, w_v, w_inv = encode_sources(model, backends, pairs, cache)
    init = init_state(z_t, z_v, generator=generator, h_dim=model.motion.h_dim)
    motion, final = model.motion.rollout(init, traj)
    delta = map_motion(motion, model.motion_mapper)
    codes, w_s = compose_frame_code(delta, w_v, w_inv)
    frames = backends.synthesizer.synthesize(codes)
    last = backends.critic.encode_image(frames[:, -1]) if embed_last else None
    return ForwardOutput(frames, codes, w_s, motion, last, final)


@dataclass
class Segment:
    prompt: str
    frames: torch.Tensor  # (T, H, W, 3)
    codes: torch.Tensor  # (T, L, 512)
    motion: torch.Tensor  # (T, 512)
    w_s: torch.Tensor  # (L, 512) content code of the source


def source_pair(source, prompt: str) -> InputPair:
    if isinstance(source, int):
        source = Sampled(source)
    return InputPair(source, prompt)


@torch.no_grad()
def generate(model: AnimationModel, backends: Backends, source, prompts: Sequence[str],
             frames_per_prompt: int, seed: int = 0) -> list[Segment]:
    """Inference rollout for one source over one or more chained prompts.

    ``source`` is an image tensor or an integer content seed (sampled mode).
    Residual scales decay over the whole chained length. Segment ``j >= 2``
    starts from the new prompt's embedding with the previous segment's hidden
    state, anchored so its first step departs from the previous last frame.
    """
    if not prompts:
        raise ValueError("at least one prompt is required")
    if frames_per_prompt < 1:
        raise ValueError("frames_per_prompt must be >= 1")
    N = len(prompts) * frames_per_prompt
    traj = TrajectoryConfig(T=N, mode="infer", total_inference_frames=N)
    g = torch.Generator().manual_seed(int(seed))
    segments: list[Segment] = []
    state = None
    last_code = w_s = None
    for j, prompt in enumerate(prompts):
        z_t, z_v, w_v, w_inv = encode_sources(model, backends, [source_pair(source, prompt)])
        fresh = init_state(z_t, z_v, generator=g, h_dim=model.motion.h_dim)
        if j == 0:
            motion, state = model.motion.rollout(fresh, traj, steps=frames_per_prompt, start=1)
            codes, w_s = compose_frame_code(map_motion(motion, model.motion_mapper), w_v, w_inv)
        else:
            start = j * frames_per_prompt
            init = MotionState(fresh.z, state.h)
            motion, state = model.motion.rollout(init, traj, steps=frames_per_prompt + 1, start=start)
            delta = map_motion(motion, model.motion_mapper)
            anchor = last_code - delta[:, 0]
            codes = delta[:, 1:] + anchor.unsqueeze(1)
            motion = motion[:, 1:]
        last_code = codes[:, -1]
        frames = backends.synthesizer.synthesize(codes)
        segments.append(Segment(prompt, frames[0], codes[0], motion[0], w_s[0]))
    return segments


def displacement_norms(codes: torch.Tensor) -> torch.Tensor:
    """Per-step latent displacement ``||w(i+1) - w(i)||`` for ``(T, L, 512)`` codes."""
    return (codes[1:] - codes[:-1]).flatten(1).norm(dim=1)
