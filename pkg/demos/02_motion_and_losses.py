"""
Recurrent motion and the training objectives
============================================

The recurrent generator turns a text embedding into a trajectory of motion
codes. In training every step uses the same residual scale; at inference the
scale decays linearly so long sequences settle. The regularizers score a
latent trajectory: distance from the source code, and its second differences.
"""
import torch

from langanim.backends.toy import PROMPTS, toy_encode_text
from langanim.losses import LossWeights, contrastive_loss, path_reg_loss, total_loss, w_reg_loss
from langanim.motion import MotionGenerator, TrajectoryConfig, init_state, residual_scale

torch.manual_seed(0)
gen = MotionGenerator(generator=torch.Generator().manual_seed(0))
z_t = toy_encode_text(PROMPTS[0])
state = init_state(z_t, generator=torch.Generator().manual_seed(1))

train = TrajectoryConfig(T=16)
infer = TrajectoryConfig(T=16, mode="infer", total_inference_frames=16)
print("train scales", [residual_scale(i, train)[0] for i in (1, 8, 16)])
print("infer scales", [round(residual_scale(i, infer)[0], 4) for i in (1, 8, 16)])

with torch.no_grad():
    for cfg in (train, infer):
        codes, _ = gen.rollout(state, cfg)
        steps = (codes[1:] - codes[:-1]).norm(dim=-1)
        print(f"{cfg.mode:5s} step norms: first {steps[0]:.4f}, last {steps[-1]:.4f}")

# regularizers on a toy latent trajectory: a straight ramp has no curvature
T = 16
w_s = torch.zeros(4, 512)
ramp = torch.stack([w_s + 0.01 * i for i in range(T)])
jump = ramp.clone()
jump[-1] += 0.1
for name, seq in (("ramp", ramp), ("ramp + late jump", jump)):
    print(f"{name:17s} w_reg {float(w_reg_loss(seq, w_s)):8.3f}  path_reg {float(path_reg_loss(seq)):.3f}")

# contrastive objective: matched image/text embeddings are cheap, swapped ones are not
e = torch.eye(4, 512)
print("contrastive matched", float(contrastive_loss(e, e)), "swapped", float(contrastive_loss(e, e.flip(0))))
parts = {"w_reg": w_reg_loss(jump, w_s), "path_reg": path_reg_loss(jump),
         "cont": contrastive_loss(e, e), "lpips": torch.tensor(0.01)}
print("weighted total with default weights", float(total_loss(parts, LossWeights())))
