"""Desk-scale, fully differentiable stand-ins for the pre-trained networks.

A toy face is described by four attributes in ``[0, 1]``::

    0 mouth_curvature   1 mouth_openness   2 eye_openness   3 brow_angle

and rendered as sums of Gaussian blobs on a 64x64 canvas, one face part per
colour channel (red mouth, green eyes, blue brows). Every attribute changes a
first or second intensity moment of its channel, so the extractor can invert
the renderer in closed form.

The embedding space uses the first eight coordinates of R^512: attribute ``m``
owns axis ``2m`` (increase) and ``2m + 1`` (decrease). Each vocabulary prompt
is a unit vector on one axis, so distinct prompts are orthogonal.
"""
from __future__ import annotations

from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from ..core import EMBED_DIM, STYLE_DIM, ShapeError, normalized
from .base import (Backends, EncoderBackend, InversionProvider, PerceptualBackend,
                   SynthesizerBackend)

ATTRIBUTES = ("mouth_curvature", "mouth_openness", "eye_openness", "brow_angle")
NUM_ATTRIBUTES = len(ATTRIBUTES)
SIZE = 64
NUM_LAYERS = 4

# (prompt, attribute index, direction)
VOCABULARY = (
    ("the face is smiling", 0, +1),
    ("the face is frowning", 0, -1),
    ("the face is opening mouth", 1, +1),
    ("the face is closing mouth", 1, -1),
    ("the face is opening eyes", 2, +1),
    ("the face is closing eyes", 2, -1),
    ("the face is raising eyebrows", 3, +1),
    ("the face is furrowing eyebrows", 3, -1),
)
PROMPTS = tuple(p for p, _, _ in VOCABULARY)

# geometry, in pixels
MOUTH_CENTER = (32.0, 44.0)
MOUTH_OFFSETS = (-8.0, -4.0, 0.0, 4.0, 8.0)
MOUTH_SIGMA_X = 2.0
MOUTH_AMP = 0.6
CURVATURE_GAIN = 0.16  # parabola coefficient per unit of (a - 0.5)
EYE_CENTERS = ((18.0, 26.0), (46.0, 26.0))
EYE_SIGMA_X = 3.0
EYE_AMP = 0.9
BROW_CENTERS = ((18.0, 13.0), (46.0, 13.0))
BROW_SIGMA_LONG, BROW_SIGMA_SHORT = 3.5, 0.9
BROW_AMP = 0.9
BROW_MAX_ANGLE = 1.0  # radians per unit of (a - 0.5)
SIGMA_MIN, SIGMA_RANGE = 0.8, 2.2  # vertical std of mouth and eyes

_d2 = torch.tensor(MOUTH_OFFSETS, dtype=torch.float64) ** 2
# variance of the squared corner offsets; links curvature to cov(y, (x - xbar)^2)
MOUTH_D2_VAR = float(((_d2 - _d2.mean()) ** 2).mean())

EMBED_SHARPNESS = 5.0


class VocabularyError(KeyError):
    def __str__(self):
        return f"unknown prompt {self.args[0]!r}; known prompts: {', '.join(PROMPTS)}"


def prompt_axis(prompt: str) -> tuple[int, int]:
    """(attribute index, direction) targeted by a vocabulary prompt."""
    for p, m, s in VOCABULARY:
        if p == prompt:
            return m, s
    raise VocabularyError(prompt)


def _grid(dtype, device):
    r = torch.arange(SIZE, dtype=dtype, device=device)
    return r.view(1, SIZE), r.view(SIZE, 1)  # x (columns), y (rows)


def render(a: torch.Tensor) -> torch.Tensor:
    """Render attributes ``(..., 4)`` to images ``(..., 64, 64, 3)`` in ``[-1, 1]``."""
    if a.shape[-1] != NUM_ATTRIBUTES:
        raise ShapeError(f"expected {NUM_ATTRIBUTES} attributes, got {tuple(a.shape)}")
    x, y = _grid(a.dtype, a.device)
    ones = torch.ones_like(a[..., 0])

    # axis-aligned blobs are separable: sum_k gy_k(y) gx_k(x) as a matmul
    curv = CURVATURE_GAIN * (a[..., 0] - 0.5)
    sy_mouth = SIGMA_MIN + SIGMA_RANGE * a[..., 1]
    d = torch.tensor(MOUTH_OFFSETS, dtype=a.dtype, device=a.device)
    cy = MOUTH_CENTER[1] - curv[..., None] * d ** 2  # (..., K)
    gy = torch.exp(-0.5 * ((x.view(-1, 1) - cy[..., None, :]) / sy_mouth[..., None, None]) ** 2)
    gx = torch.exp(-0.5 * ((MOUTH_CENTER[0] + d).view(-1, 1) - x) ** 2 / MOUTH_SIGMA_X ** 2)
    mouth = gy @ gx  # (..., 64, K) @ (K, 64)

    sy_eye = SIGMA_MIN + SIGMA_RANGE * a[..., 2]
    eye_y = torch.exp(-0.5 * ((y - EYE_CENTERS[0][1]) / sy_eye[..., None, None]) ** 2)
    eye_x = sum(torch.exp(-0.5 * ((x - cx) / EYE_SIGMA_X) ** 2) for cx, _ in EYE_CENTERS)
    eyes = eye_y * eye_x

    # rotated brows via the expanded quadratic form (fewer full-canvas ops)
    theta = BROW_MAX_ANGLE * (a[..., 3] - 0.5)
    il, is_ = BROW_SIGMA_LONG ** -2, BROW_SIGMA_SHORT ** -2
    brows = 0.0
    for (cx, cy), sign in zip(BROW_CENTERS, (1.0, -1.0)):
        c, s = torch.cos(sign * theta)[..., None, None], torch.sin(sign * theta)[..., None, None]
        dx, dy = x - cx, y - cy
        q = ((c * c * il + s * s * is_) * dx ** 2 + (s * s * il + c * c * is_) * dy ** 2
             + (2.0 * c * s * (il - is_) * dy) * dx)
        brows = brows + torch.exp(-0.5 * q)

    intensity = torch.stack([MOUTH_AMP * mouth, EYE_AMP * eyes, BROW_AMP * brows], dim=-1)
    return (2.0 * intensity - 1.0).clamp(-1.0, 1.0)


def _moments(I, x, y):
    m0 = I.sum(dim=(-2, -1)).clamp_min(1e-6)
    mean = lambda f: (I * f).sum(dim=(-2, -1)) / m0  # noqa: E731
    xb, yb = mean(x), mean(y)
    return m0, xb, yb, mean


def extract_attributes(img: torch.Tensor) -> torch.Tensor:
    """Closed-form inverse of :func:`render` via intensity moments.

    Works on any ``(..., 64, 64, 3)`` image; results are clamped to ``[0, 1]``.
    """
    if img.shape[-3:] != (SIZE, SIZE, 3):
        raise ShapeError(f"expected (..., {SIZE}, {SIZE}, 3) image, got {tuple(img.shape)}")
    I = ((img + 1.0) * 0.5).clamp(0.0, 1.0)
    x, y = _grid(img.dtype, img.device)

    # mouth: curvature from cov(y, (x - xbar)^2), openness from the residual y-variance
    _, xb, yb, mean = _moments(I[..., 0], x, y)
    u = (x - xb[..., None, None]) ** 2
    cov_yu = mean(y * u) - yb * mean(u)
    curv = -cov_yu / MOUTH_D2_VAR
    var_y = mean((y - yb[..., None, None]) ** 2)
    sy2 = (var_y - curv ** 2 * MOUTH_D2_VAR).clamp_min(1e-6)
    a0 = 0.5 + curv / CURVATURE_GAIN
    a1 = (sy2.sqrt() - SIGMA_MIN) / SIGMA_RANGE

    _, _, yb, mean = _moments(I[..., 1], x, y)
    var_y = mean((y - yb[..., None, None]) ** 2).clamp_min(1e-6)
    a2 = (var_y.sqrt() - SIGMA_MIN) / SIGMA_RANGE

    thetas = []
    half = SIZE // 2
    for sl, xs in ((slice(0, half), x[:, :half]), (slice(half, SIZE), x[:, half:])):
        _, xb, yb, mean = _moments(I[..., :, sl, 2], xs, y)
        dx, dy = xs - xb[..., None, None], y - yb[..., None, None]
        cxx, cyy, cxy = mean(dx * dx), mean(dy * dy), mean(dx * dy)
        thetas.append(0.5 * torch.atan2(2.0 * cxy, cxx - cyy))
    a3 = 0.5 + 0.5 * (thetas[0] - thetas[1]) / BROW_MAX_ANGLE

    return torch.stack([a0, a1, a2, a3], dim=-1).clamp(0.0, 1.0)


def attributes_to_embedding(a: torch.Tensor) -> torch.Tensor:
    """Unit embedding with ``exp(+-k (a - 0.5))`` on the paired axes of each attribute."""
    d = EMBED_SHARPNESS * (a - 0.5)
    pairs = torch.stack([torch.exp(d), torch.exp(-d)], dim=-1).flatten(-2)
    pad = torch.zeros(*a.shape[:-1], EMBED_DIM - pairs.shape[-1], dtype=a.dtype, device=a.device)
    return normalized(torch.cat([pairs, pad], dim=-1))


def toy_encode_text(prompt: str, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    m, s = prompt_axis(prompt)
    e = torch.zeros(EMBED_DIM, dtype=dtype)
    e[2 * m + (0 if s > 0 else 1)] = 1.0
    return e


def toy_encode_image(img: torch.Tensor) -> torch.Tensor:
    return attributes_to_embedding(extract_attributes(img))


class ToyEncoder(EncoderBackend):
    """Analytic toy encoder; ``finetune=True`` adds a trainable text adapter."""

    name = "toy-encoder"

    def __init__(self, finetune: bool = False, dtype: torch.dtype = torch.float32):
        self.dtype = dtype
        self.text_adapter: Optional[nn.Linear] = None
        if finetune:
            self.text_adapter = nn.Linear(EMBED_DIM, EMBED_DIM, bias=False, dtype=dtype)
            with torch.no_grad():
                self.text_adapter.weight.copy_(torch.eye(EMBED_DIM, dtype=dtype))

    def encode_text(self, prompt: str) -> torch.Tensor:
        e = toy_encode_text(prompt, self.dtype)
        return e if self.text_adapter is None else self.text_adapter(e)

    def encode_image(self, img: torch.Tensor) -> torch.Tensor:
        return toy_encode_image(img)

    def trainable_parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        if self.text_adapter is None:
            return {}
        return {"text": list(self.text_adapter.parameters())}


class ToySynthesizer(SynthesizerBackend):
    """Frozen seeded read-out ``W+ -> attributes`` followed by :func:`render`.

    ``attributes = sigmoid(gain * P vec(w))`` with ``P`` having orthonormal rows,
    so ``P[m]`` (reshaped) is the latent direction of attribute ``m``.
    """

    name = "toy-synthesizer"
    num_layers = NUM_LAYERS
    resolution = (SIZE, SIZE)

    def __init__(self, seed: int = 0, gain: float = 4.0, content_logit_std: float = 0.5,
                 dtype: torch.dtype = torch.float32):
        g = torch.Generator().manual_seed(seed)
        q, _ = torch.linalg.qr(torch.randn(NUM_LAYERS * STYLE_DIM, NUM_ATTRIBUTES,
                                           generator=g, dtype=torch.float64))
        self.readout = q.T.contiguous().to(dtype)  # (4, L*512)
        self.gain = gain
        self.content_std = content_logit_std / gain
        self.dtype = dtype

    def state_tensors(self) -> dict[str, torch.Tensor]:
        return {"readout": self.readout}

    def direction(self, attribute: int) -> torch.Tensor:
        return self.readout[attribute].reshape(NUM_LAYERS, STYLE_DIM)

    def attributes(self, w: torch.Tensor) -> torch.Tensor:
        if w.shape[-2:] != (NUM_LAYERS, STYLE_DIM):
            raise ShapeError(f"toy synthesizer expects (..., {NUM_LAYERS}, {STYLE_DIM}), "
                             f"got {tuple(w.shape)}")
        flat = w.reshape(*w.shape[:-2], NUM_LAYERS * STYLE_DIM)
        return torch.sigmoid(self.gain * flat @ self.readout.to(w.dtype).T)

    def synthesize(self, w: torch.Tensor) -> torch.Tensor:
        return render(self.attributes(w))

    def sample_content_code(self, seed: int) -> torch.Tensor:
        # a fixed isotropic "mapping network"; only the read-out subspace is visible
        g = torch.Generator().manual_seed(int(seed))
        z = torch.randn(NUM_LAYERS, STYLE_DIM, generator=g, dtype=torch.float64)
        return (self.content_std * z).to(self.dtype)

    def code_for_attributes(self, a: torch.Tensor) -> torch.Tensor:
        """Minimum-norm code whose read-out gives attributes ``a`` (inside (0, 1))."""
        logits = torch.logit(a.to(self.readout.dtype)) / self.gain
        return (logits @ self.readout).reshape(*a.shape[:-1], NUM_LAYERS, STYLE_DIM)


class ToyInverter(InversionProvider):
    name = "toy-inverter"

    def __init__(self, synthesizer: ToySynthesizer):
        self.synthesizer = synthesizer

    def invert(self, img: torch.Tensor) -> torch.Tensor:
        a = extract_attributes(img.to(self.synthesizer.dtype)).clamp(0.01, 0.99)
        return self.synthesizer.code_for_attributes(a)


class ToyPerceptual(PerceptualBackend):
    """Mean squared pixel distance averaged over 1x, 1/2x and 1/4x average-pooled scales."""

    name = "toy-multiscale-mse"

    def __init__(self, scales: int = 3):
        self.scales = scales

    def distance(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        if a.shape[-3:] != b.shape[-3:]:
            raise ShapeError(f"resolution mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
        a, b = torch.broadcast_tensors(a, b)
        lead = a.shape[:-3]
        x = a.reshape(-1, *a.shape[-3:]).permute(0, 3, 1, 2)
        y = b.reshape(-1, *b.shape[-3:]).permute(0, 3, 1, 2)
        total = 0.0
        for k in range(self.scales):
            if k:
                x, y = F.avg_pool2d(x, 2), F.avg_pool2d(y, 2)
            total = total + ((x - y) ** 2).mean(dim=(1, 2, 3))
        return (total / self.scales).reshape(lead)


def toy_backends(seed: int = 0, finetune_text: bool = False, share_critic: bool = False,
                 dtype: torch.dtype = torch.float32, **synth_kw) -> Backends:
    syn = ToySynthesizer(seed=seed, dtype=dtype, **synth_kw)
    enc = ToyEncoder(finetune=finetune_text, dtype=dtype)
    critic = enc if share_critic else ToyEncoder(dtype=dtype)
    return Backends(encoder=enc, synthesizer=syn, perceptual=ToyPerceptual(),
                    inverter=ToyInverter(syn), critic=critic, embedder=ToyEncoder(dtype=dtype),
                    vocabulary=list(PROMPTS))


def neutral_code(synthesizer: ToySynthesizer) -> torch.Tensor:
    return torch.zeros(NUM_LAYERS, STYLE_DIM, dtype=synthesizer.dtype)


def attribute_sweep(synthesizer: ToySynthesizer, attribute: int, ts, base=None) -> torch.Tensor:
    """Codes ``base + t * direction(attribute)`` for each ``t`` in ``ts``."""
    base = neutral_code(synthesizer) if base is None else base
    d = synthesizer.direction(attribute)
    return torch.stack([base + float(t) * d for t in ts])


__all__ = [
    "ATTRIBUTES", "PROMPTS", "VOCABULARY", "VocabularyError", "ToyEncoder", "ToySynthesizer",
    "ToyInverter", "ToyPerceptual", "toy_backends", "render", "extract_attributes",
    "attributes_to_embedding", "toy_encode_text", "toy_encode_image", "prompt_axis",
    "attribute_sweep",
]
