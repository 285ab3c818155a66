"""
Training, animation and chaining
================================

Train the recurrent generator and motion mapper on the toy domain for a few
hundred iterations, then animate a sampled face with one prompt and chain two
prompts into a 32-frame sequence. Frames, contact sheets and manifests land in
``demo_output/animate``. The same steps are available from the command line::

    langanim train --set train.iterations=300 --out ckpt
    langanim animate --checkpoint ckpt/final.npz --sample-seed 3 --text "the face is smiling" --out smile
    langanim chain --checkpoint ckpt/final.npz --sample-seed 3 \
        --text "the face is smiling" --text "the face is closing eyes" --out chained
"""
import os
from pathlib import Path

import torch

from langanim.config import TrainConfig
from langanim.export import read_manifest
from langanim.trainer import Trainer
from langanim.workflows import AnimationRequest, animate, chain, replay

OUT = Path(os.environ.get("DEMO_OUT", "demo_output")) / "animate"
ITERATIONS = int(os.environ.get("DEMO_ITERATIONS", "300"))
torch.set_num_threads(1)

cfg = TrainConfig(iterations=ITERATIONS, checkpoint_every=max(ITERATIONS // 2, 1))
trainer = Trainer(cfg)
trainer.fit(checkpoint_dir=OUT / "ckpt",
            callback=lambda i, v: i % 50 == 0 and print(f"iter {i:4d} total {v['total']:.3f} cont {v['cont']:.3f}"))
ckpt = trainer.last_checkpoint

res = animate(AnimationRequest(3, ["the face is smiling"], ckpt, OUT / "smile", contact_sheet=True))
m = read_manifest(res.manifest)
print("animate:", len(res.frames), "frames; step norms", [round(s, 4) for s in m["displacement_norms"][:4]], "...")

res = chain(AnimationRequest(3, ["the face is smiling", "the face is closing eyes"], ckpt, OUT / "chained",
                             contact_sheet=True))
steps = res.step_norms
print("chain:", len(res.frames), "frames; steps around the seam", [round(s, 4) for s in steps[13:18]])

# a manifest is enough to regenerate the same frames
again = replay(OUT / "smile" / "manifest.json", OUT / "smile_replayed")
same = all(a.read_bytes() == b.read_bytes() for a, b in zip(sorted((OUT / "smile").glob("frame_*.png")),
                                                             again.frames))
print("replay bit-identical:", same)
