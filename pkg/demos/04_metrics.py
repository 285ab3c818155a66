"""
Evaluation metrics
==================

ACD is the mean pairwise embedding distance between frames of the same video
(lower means steadier identity). FID compares the Gaussian statistics of two
embedding sets. Both run over directories of frames with ``evaluate``.
"""
import os
import tempfile
from pathlib import Path

import numpy as np
import torch

from langanim.backends.toy import ToySynthesizer, attribute_sweep
from langanim.export import write_frames
from langanim.metrics import MetricStats, acd, fid, fid_from_features, psd_sqrt
from langanim.workflows import evaluate

rng = np.random.default_rng(0)

# closed forms
print("1-D FID", fid(MetricStats(np.array([0.0]), np.array([[1.0]])), MetricStats(np.array([1.0]), np.array([[4.0]]))),
      "(expected 1 + (1 - 2)^2 = 2)")
a = rng.normal(size=(6, 6))
A = a @ a.T
S = psd_sqrt(A)
print("psd_sqrt reconstruction error", float(np.linalg.norm(S @ S - A)))
print("two samples of one Gaussian: FID", round(fid_from_features(rng.normal(size=(4000, 8)), rng.normal(size=(4000, 8))), 4))

# ACD: a still video scores 0, a moving one does not
still = np.repeat(rng.normal(size=(1, 1, 16)), 8, axis=1)
moving = still + np.linspace(0, 1, 8)[None, :, None]
print("ACD still", acd(still), "moving", round(acd(moving), 4))

# directory evaluation with the toy embedder: videos sweep one attribute each
root = Path(os.environ.get("DEMO_OUT", tempfile.mkdtemp())) / "metrics"
syn = ToySynthesizer()
for m in range(4):
    frames = syn.synthesize(attribute_sweep(syn, m, torch.linspace(0, 0.5, 8)))
    write_frames(frames, root / "gen" / f"video_{m}")
    write_frames(syn.synthesize(attribute_sweep(syn, m, torch.linspace(0, 0.25, 8))), root / "ref" / f"video_{m}")
print(evaluate(root / "gen", root / "ref"))
