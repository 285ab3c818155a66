"""
The toy face domain
===================

A 64x64 analytic face with four attributes (mouth curvature, mouth openness,
eye openness, brow angle), a frozen linear-sigmoid "synthesizer" from an
(4, 512) latent code to those attributes, and an analytic image/text encoder
whose similarity rises as a face moves along a prompt's attribute.
"""
import os
from pathlib import Path

import torch

from langanim.backends.toy import (ATTRIBUTES, PROMPTS, ToySynthesizer, attribute_sweep,
                                   extract_attributes, prompt_axis, render, toy_encode_image,
                                   toy_encode_text)
from langanim.export import write_contact_sheet

OUT = Path(os.environ.get("DEMO_OUT", "demo_output")) / "toy_domain"
OUT.mkdir(parents=True, exist_ok=True)

# render a neutral face and read its attributes back from the pixels
neutral = torch.full((4,), 0.5, dtype=torch.float64)
img = render(neutral)
print("image", tuple(img.shape), "range", float(img.min()), float(img.max()))
print("recovered attributes", dict(zip(ATTRIBUTES, extract_attributes(img).tolist())))

# the synthesizer: each attribute has one latent direction; moving along it
# changes that attribute and leaves the others alone
syn = ToySynthesizer(dtype=torch.float64)
for m, name in enumerate(ATTRIBUTES):
    codes = attribute_sweep(syn, m, torch.linspace(-0.6, 0.6, 8))
    frames = syn.synthesize(codes)
    write_contact_sheet(frames, OUT / f"sweep_{name}.png")
    a = syn.attributes(codes)
    print(f"{name:16s} target {a[0, m]:.2f} -> {a[-1, m]:.2f}; "
          f"largest off-target drift {float((a - a[:1]).abs().max(0).values[[k for k in range(4) if k != m]].max()):.3f}")

# prompts map to (attribute, direction); image-text similarity grows as the face
# moves the right way
for prompt in PROMPTS:
    m, sign = prompt_axis(prompt)
    a = neutral.repeat(5, 1)
    a[:, m] += sign * torch.linspace(0.0, 0.3, 5, dtype=torch.float64)
    sims = toy_encode_image(render(a)) @ toy_encode_text(prompt, torch.float64)
    print(f"{prompt:32s}", " ".join(f"{s:.3f}" for s in sims.tolist()))

print("contact sheets in", OUT)
