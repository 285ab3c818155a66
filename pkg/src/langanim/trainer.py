"""Training loop."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .backends import Backends, load_backends
from .backends.loading import resolve_backend_spec
from .backends.toy import render
from .checkpoint import Checkpoint
from .config import TrainConfig
from .core import InputPair, Sampled
from .losses import (contrastive_loss, pairwise_similarity_loss, path_reg_loss, total_loss,
                     w_reg_loss)
from .model import AnimationModel, ContentCache, forward_pass
from .motion import TrajectoryConfig

log = logging.getLogger(__name__)

LOSS_KEYS = ("total", "w_reg", "path_reg", "cont", "lpips")


class TrainingError(RuntimeError):
    pass


class PromptDataset:
    """Prompt vocabulary plus (in real-image mode) a pool of source images."""

    def __init__(self, prompts: Sequence[str], images: Optional[Sequence[torch.Tensor]] = None):
        self.prompts = list(prompts)
        self.images = None if images is None else list(images)


def toy_image_pool(count: int, seed: int = 0, spread: float = 0.15) -> list[torch.Tensor]:
    """Rendered toy faces with attributes drawn uniformly around the midpoint."""
    g = torch.Generator().manual_seed(seed)
    a = 0.5 + spread * (2 * torch.rand(count, 4, generator=g, dtype=torch.float64) - 1)
    return list(render(a).float())


def sample_batch(dataset: PromptDataset, n: int, rng: torch.Generator) -> list[InputPair]:
    """``n`` pairs whose prompts are pairwise distinct."""
    V = len(dataset.prompts)
    if V < n:
        raise ValueError(f"cannot draw {n} distinct prompts from a vocabulary of {V}")
    order = torch.randperm(V, generator=rng)[:n].tolist()
    if dataset.images is None:
        seeds = torch.randint(0, 2**31 - 1, (n,), generator=rng).tolist()
        return [InputPair(Sampled(s), dataset.prompts[k]) for s, k in zip(seeds, order)]
    idx = torch.randint(0, len(dataset.images), (n,), generator=rng).tolist()
    return [InputPair(dataset.images[i], dataset.prompts[k], key=i) for i, k in zip(idx, order)]


class Trainer:
    def __init__(self, cfg: TrainConfig, backends: Optional[Backends] = None,
                 images: Optional[Sequence[torch.Tensor]] = None):
        self.cfg = cfg
        if backends is None:
            b = cfg.backend
            backends = load_backends(resolve_backend_spec(b.backend), seed=b.synth_seed, finetune_text=b.finetune_text,
                                     share_critic=b.share_critic)
        self.backends = backends
        self.model = AnimationModel.from_config(cfg, backends.synthesizer.num_layers)
        prompts = (backends.vocabulary or [])[: cfg.backend.vocabulary_size]
        if cfg.mode == "real_image" and images is None:
            images = toy_image_pool(64, seed=cfg.seed)
        self.dataset = PromptDataset(prompts, images if cfg.mode == "real_image" else None)
        self.cache = ContentCache()

        groups = self.parameter_groups()
        lrs = {"encoders": cfg.lr_encoders, "mappers": cfg.lr_mappers, "recurrent": cfg.lr_recurrent}
        self.optimizer = torch.optim.Adam(
            [{"params": ps, "lr": lrs[name], "name": name} for name, ps in groups.items() if ps],
            betas=cfg.adam_betas,
        )
        self.rng = torch.Generator().manual_seed(cfg.seed + 1)
        self.iteration = 0
        self.history: dict[str, list[float]] = {k: [] for k in LOSS_KEYS}
        self.last_checkpoint: Optional[Path] = None

    # parameters -----------------------------------------------------------
    def parameter_groups(self) -> dict[str, list[torch.nn.Parameter]]:
        enc = [p for ps in self.backends.encoder.trainable_parameter_groups().values() for p in ps]
        return {"encoders": enc, **self.model.parameter_groups()}

    def named_parameters(self) -> dict[str, torch.nn.Parameter]:
        named = {f"model.{k}": p for k, p in self.model.named_parameters()}
        for g, ps in self.backends.encoder.trainable_parameter_groups().items():
            named.update({f"encoder.{g}.{i}": p for i, p in enumerate(ps)})
        return named

    # one iteration ----------------------------------------------------------
    def sample_batch(self) -> list[InputPair]:
        return sample_batch(self.dataset, self.cfg.batch_size, self.rng)

    def losses(self, batch: Sequence[InputPair]) -> dict[str, torch.Tensor]:
        cfg, b = self.cfg, self.backends
        traj = TrajectoryConfig(T=cfg.T, mode="train")
        out = forward_pass(self.model, b, batch, traj, generator=self.rng, cache=self.cache)
        anchor = b.synthesizer.synthesize(out.w_s).unsqueeze(1)
        t = b.critic.encode_texts([p.text for p in batch])
        if cfg.objective == "contrastive":
            cont = contrastive_loss(out.last_frame_embeddings, t, cfg.loss.tau,
                                    normalize=cfg.normalize_embeddings,
                                    symmetric=cfg.symmetric_contrastive)
        else:
            cont = pairwise_similarity_loss(out.last_frame_embeddings, t, cfg.loss.tau,
                                            normalize=cfg.normalize_embeddings)
        parts = {
            "w_reg": w_reg_loss(out.codes, out.w_s).mean(),
            "path_reg": path_reg_loss(out.codes, first_order=cfg.path_reg_order == "first").mean(),
            "cont": cont,
            "lpips": b.perceptual.distance(out.frames, anchor).mean(),
        }
        parts["total"] = total_loss(parts, cfg.loss)
        return parts

    def train_step(self, batch: Optional[Sequence[InputPair]] = None) -> dict[str, float]:
        batch = self.sample_batch() if batch is None else batch
        try:
            parts = self.losses(batch)
        except FloatingPointError as exc:
            raise TrainingError(f"iteration {self.iteration + 1}: {exc}; "
                                f"last good checkpoint: {self.last_checkpoint}") from exc
        self.optimizer.zero_grad(set_to_none=False)
        parts["total"].backward()
        params = [p for g in self.optimizer.param_groups for p in g["params"]]
        torch.nn.utils.clip_grad_norm_(params, self.cfg.grad_clip)
        self.optimizer.step()
        self.iteration += 1
        values = {k: float(parts[k].detach()) for k in LOSS_KEYS}
        for k in LOSS_KEYS:
            self.history[k].append(values[k])
        return values

    # driver ---------------------------------------------------------------
    def fit(self, checkpoint_dir=None, callback: Optional[Callable[[int, dict], None]] = None,
            iterations: Optional[int] = None) -> Checkpoint:
        """Train up to ``iterations`` (default ``cfg.iterations``) total iterations."""
        stop = self.cfg.iterations if iterations is None else iterations
        while self.iteration < stop:
            values = self.train_step()
            if callback is not None:
                callback(self.iteration, values)
            if self.iteration % 100 == 0:
                log.info("iter %d %s", self.iteration,
                         " ".join(f"{k}={v:.4g}" for k, v in values.items()))
            if checkpoint_dir is not None and self.iteration % self.cfg.checkpoint_every == 0:
                self.save(Path(checkpoint_dir) / f"ckpt_{self.iteration:06d}.npz")
        ck = self.checkpoint()
        if checkpoint_dir is not None:
            self.last_checkpoint = ck.save(Path(checkpoint_dir) / "final.npz")
        return ck

    # state ----------------------------------------------------------------
    def checkpoint(self) -> Checkpoint:
        params = {k: p.detach().cpu().numpy().copy() for k, p in self.named_parameters().items()}
        opt = {}
        for idx, st in self.optimizer.state_dict()["state"].items():
            for key, v in st.items():
                opt[f"{idx}/{key}"] = torch.as_tensor(v).detach().cpu().numpy().copy()
        history = {k: np.asarray(v, dtype=np.float64) for k, v in self.history.items()}
        rng = self.rng.get_state().numpy().copy()
        return Checkpoint(self.cfg, self.iteration, params, opt, rng, history)

    def save(self, path) -> Path:
        self.last_checkpoint = self.checkpoint().save(path)
        return self.last_checkpoint

    def load_state(self, ck: Checkpoint) -> "Trainer":
        named = self.named_parameters()
        missing = set(named) - set(ck.params)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)}")
        with torch.no_grad():
            for k, p in named.items():
                p.copy_(torch.as_tensor(ck.params[k], dtype=p.dtype))
        if ck.optimizer:
            sd = self.optimizer.state_dict()
            state: dict[int, dict] = {}
            for key, arr in ck.optimizer.items():
                idx, name = key.split("/")
                state.setdefault(int(idx), {})[name] = torch.as_tensor(arr)
            self.optimizer.load_state_dict({"state": state, "param_groups": sd["param_groups"]})
        if ck.rng_state.size:
            self.rng.set_state(torch.as_tensor(ck.rng_state, dtype=torch.uint8))
        self.iteration = ck.iteration
        self.history = {k: list(ck.history.get(k, [])) for k in LOSS_KEYS}
        return self

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint, backends: Optional[Backends] = None,
                        config: Optional[TrainConfig] = None) -> "Trainer":
        return cls(config or ck.config, backends).load_state(ck)


def fit(cfg: TrainConfig, backends: Optional[Backends] = None, checkpoint_dir=None,
        resume: Optional[Checkpoint] = None) -> Checkpoint:
    trainer = Trainer(cfg, backends) if resume is None else Trainer.from_checkpoint(resume, backends, cfg)
    return trainer.fit(checkpoint_dir)


def load_model(ck: Checkpoint, backends: Optional[Backends] = None) -> tuple[AnimationModel, Backends]:
    """Rebuild a trained model (and its backends) from a checkpoint."""
    trainer = Trainer.from_checkpoint(ck, backends)
    trainer.model.eval()
    return trainer.model, trainer.backends
