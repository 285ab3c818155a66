"""Video evaluation metrics: ACD (temporal consistency) and FID (frame quality)."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np


@dataclass
class MetricStats:
    mu: np.ndarray
    sigma: np.ndarray


def acd(f) -> float:
    """Average pairwise L2 distance between frame embeddings of each video.

    ``f`` is ``(N, T, d)``: N videos of T frames.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"expected (N, T, d) embeddings, got shape {f.shape}")
    N, T, _ = f.shape
    if N < 1 or T < 2:
        raise ValueError("ACD needs at least one video with T >= 2 frames")
    diff = f[:, :, None, :] - f[:, None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    # the full matrix counts each pair twice, which supplies the factor 2
    return float(dist.sum() / (N * T * (T - 1)))


def gaussian_stats(features) -> MetricStats:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need an (M >= 2, d) feature matrix, got shape {x.shape}")
    mu = x.mean(axis=0)
    sigma = np.cov(x, rowvar=False).reshape(x.shape[1], x.shape[1])
    return MetricStats(mu, 0.5 * (sigma + sigma.T))


def psd_sqrt(a, rtol: float = 1e-10) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below ``rtol * max_eigenvalue`` (including small negative
    round-off) are clamped to zero.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-6 * scale:
        raise ValueError("psd_sqrt requires a symmetric matrix")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    cutoff = rtol * max(vals.max(), 0.0)
    vals = np.where(vals > cutoff, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(x: MetricStats, y: MetricStats, outer_sqrt: bool = False) -> float:
    """Frechet distance between two Gaussians.

    Returns the conventional squared distance; ``outer_sqrt=True`` returns its
    square root instead.
    """
    if x.mu.shape != y.mu.shape or x.sigma.shape != y.sigma.shape:
        raise ValueError(f"dimension mismatch: {x.mu.shape} vs {y.mu.shape}")
    # identical statistics: skip the eigendecompositions, whose round-off would leave ~1e-7
    if np.array_equal(x.mu, y.mu) and np.array_equal(x.sigma, y.sigma):
        return 0.0
    sx = psd_sqrt(x.sigma)
    m = sx @ y.sigma @ sx
    cross = psd_sqrt(0.5 * (m + m.T))
    d = x.mu - y.mu
    value = float(d @ d + np.trace(x.sigma) + np.trace(y.sigma) - 2.0 * np.trace(cross))
    value = max(value, 0.0)
    return float(np.sqrt(value)) if outer_sqrt else value


def fid_from_features(a, b, outer_sqrt: bool = False) -> float:
    return fid(gaussian_stats(a), gaussian_stats(b), outer_sqrt=outer_sqrt)


class FeatureCache:
    """On-disk embedding cache keyed by content hash and embedder name."""

    VERSION = 1

    def __init__(self, root, embedder_name: str):
        self.dir = Path(root) / f"v{self.VERSION}" / embedder_name
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, content: bytes) -> Path:
        return self.dir / (hashlib.sha256(content).hexdigest() + ".npy")

    def get_or_compute(self, content: bytes, compute: Callable[[], np.ndarray]) -> np.ndarray:
        path = self._path(content)
        if path.exists():
            return np.load(path)
        value = np.asarray(compute())
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        with open(tmp, "wb") as fh:
            np.save(fh, value)
        os.replace(tmp, path)
        return value


def embed_frames(frames, embed: Callable, cache: Optional[FeatureCache] = None) -> np.ndarray:
    """Embed a list of uint8 frames, optionally through ``cache``."""
    out = []
    for fr in frames:
        fr = np.ascontiguousarray(fr)
        if cache is None:
            out.append(np.asarray(embed(fr)))
        else:
            out.append(cache.get_or_compute(fr.tobytes() + str(fr.shape).encode(),
                                            lambda fr=fr: embed(fr)))
    return np.stack(out)
