"""Backend interfaces and the adapter contract check."""
from __future__ import annotations

import hashlib
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import torch
from torch import nn

from ..core import EMBED_DIM, STYLE_DIM


class BackendContractError(RuntimeError):
    def __init__(self, report: "ContractReport"):
        super().__init__("backend contract violated:\n" + report.format())
        self.report = report


class EncoderBackend(ABC):
    """Cross-modal encoder pair sharing one 512-d embedding space."""

    name = "encoder"
    embed_dim = EMBED_DIM

    @abstractmethod
    def encode_image(self, img: torch.Tensor) -> torch.Tensor: ...

    @abstractmethod
    def encode_text(self, prompt: str) -> torch.Tensor: ...

    def encode_texts(self, prompts) -> torch.Tensor:
        return torch.stack([self.encode_text(p) for p in prompts])

    def trainable_parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        return {}


class SynthesizerBackend(ABC):
    """Frozen frame synthesizer ``W+ -> image``."""

    name = "synthesizer"
    num_layers: int
    resolution: tuple[int, int]

    @abstractmethod
    def synthesize(self, w: torch.Tensor) -> torch.Tensor: ...

    @abstractmethod
    def sample_content_code(self, seed: int) -> torch.Tensor: ...

    def state_tensors(self) -> dict[str, torch.Tensor]:
        return {}

    def parameters_checksum(self) -> str:
        h = hashlib.sha256()
        for key, t in sorted(self.state_tensors().items()):
            h.update(key.encode())
            h.update(t.detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()


class InversionProvider(ABC):
    name = "inverter"

    @abstractmethod
    def invert(self, img: torch.Tensor) -> torch.Tensor: ...


class PerceptualBackend(ABC):
    name = "perceptual"

    @abstractmethod
    def distance(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor: ...


@dataclass
class Backends:
    encoder: EncoderBackend
    synthesizer: SynthesizerBackend
    perceptual: PerceptualBackend
    inverter: Optional[InversionProvider] = None
    # loss-side critic; defaults to ``encoder``
    critic: Optional[EncoderBackend] = None
    # per-frame embedder used by metrics
    embedder: Optional[EncoderBackend] = None
    vocabulary: Optional[list[str]] = None

    def __post_init__(self):
        self.critic = self.critic or self.encoder
        self.embedder = self.embedder or self.critic


@dataclass
class ContractReport:
    subject: str
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    passed_checks: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        if ok:
            self.passed_checks.append(name)
        else:
            self.failures.append(f"{name}: {detail}" if detail else name)
        return ok

    def format(self) -> str:
        lines = [f"[{self.subject}] {'OK' if self.ok else 'FAILED'}"]
        lines += [f"  pass  {c}" for c in self.passed_checks]
        lines += [f"  FAIL  {f}" for f in self.failures]
        lines += [f"  warn  {w}" for w in self.warnings]
        return "\n".join(lines)


def _check_embedding(report: ContractReport, label: str, e, again) -> None:
    if not report.check(f"{label} is a tensor", torch.is_tensor(e), f"got {type(e).__name__}"):
        return
    if not report.check(f"{label} shape", tuple(e.shape[-1:]) == (EMBED_DIM,),
                        f"expected last dim {EMBED_DIM}, got {tuple(e.shape)}"):
        return
    report.check(f"{label} finite", bool(torch.isfinite(e).all()))
    report.check(f"{label} deterministic", torch.equal(e, again))
    norm = float(e.detach().double().norm())
    if abs(norm - 1.0) > 1e-6:
        report.warnings.append(f"{label} not unit-normalized (norm={norm:.6g}); "
                               "set normalize=True in the contrastive loss")


def check_encoder(enc: EncoderBackend, probe_image: Optional[torch.Tensor] = None,
                  probe_text: Optional[str] = None) -> ContractReport:
    report = ContractReport(getattr(enc, "name", type(enc).__name__))
    with torch.no_grad():
        if probe_text is not None:
            try:
                _check_embedding(report, "text embedding",
                                 enc.encode_text(probe_text), enc.encode_text(probe_text))
            except Exception as exc:  # noqa: BLE001 - report, don't raise
                report.check("encode_text runs", False, repr(exc))
        if probe_image is not None:
            try:
                _check_embedding(report, "image embedding",
                                 enc.encode_image(probe_image), enc.encode_image(probe_image))
            except Exception as exc:  # noqa: BLE001
                report.check("encode_image runs", False, repr(exc))
    return report


def check_synthesizer(syn: SynthesizerBackend, num_layers: Optional[int] = None,
                      resolution: Optional[tuple[int, int]] = None) -> ContractReport:
    report = ContractReport(getattr(syn, "name", type(syn).__name__))
    expected_layers = num_layers if num_layers is not None else syn.num_layers
    res = tuple(resolution) if resolution is not None else tuple(syn.resolution)
    before = syn.parameters_checksum()
    with torch.no_grad():
        try:
            w = syn.sample_content_code(0)
        except Exception as exc:  # noqa: BLE001
            report.check("sample_content_code runs", False, repr(exc))
            return report
        report.check("content code shape", tuple(w.shape) == (expected_layers, STYLE_DIM),
                     f"expected ({expected_layers}, {STYLE_DIM}), got {tuple(w.shape)}")
        report.check("content code deterministic", torch.equal(w, syn.sample_content_code(0)))
        if report.ok:
            img = syn.synthesize(w)
            report.check("image shape", tuple(img.shape) == (*res, 3),
                         f"expected {(*res, 3)}, got {tuple(img.shape)}")
            report.check("image range", bool(img.min() >= -1.0 and img.max() <= 1.0),
                         f"range [{float(img.min()):.3g}, {float(img.max()):.3g}]")
            report.check("synthesis deterministic", torch.equal(img, syn.synthesize(w)))
    for key, t in syn.state_tensors().items():
        if t.requires_grad:
            report.check("frozen", False, f"tensor {key!r} requires grad")
            break
    else:
        report.check("frozen", syn.parameters_checksum() == before, "checksum changed")
    return report


def adapter_contract_check(backend, **kw) -> ContractReport:
    """Verify shapes, value ranges, determinism and frozen-ness of a backend."""
    if isinstance(backend, SynthesizerBackend):
        return check_synthesizer(backend, **kw)
    if isinstance(backend, EncoderBackend):
        return check_encoder(backend, **kw)
    raise TypeError(f"no contract defined for {type(backend).__name__}")


def check_backends(b: Backends, num_layers: Optional[int] = None) -> list[ContractReport]:
    syn_report = check_synthesizer(b.synthesizer, num_layers=num_layers)
    reports = [syn_report]
    probe_text = b.vocabulary[0] if b.vocabulary else "a face"
    probe_image = None
    if syn_report.ok:
        with torch.no_grad():
            probe_image = b.synthesizer.synthesize(b.synthesizer.sample_content_code(0))
    roles: dict[int, tuple[EncoderBackend, list[str]]] = {}
    for role, enc in (("encoder", b.encoder), ("critic", b.critic), ("embedder", b.embedder)):
        roles.setdefault(id(enc), (enc, []))[1].append(role)
    for enc, names in roles.values():
        r = check_encoder(enc, probe_image, probe_text)
        r.subject = f"{r.subject} as {'/'.join(names)}"
        reports.append(r)
    if b.inverter is not None and probe_image is not None:
        r = ContractReport(getattr(b.inverter, "name", "inverter"))
        with torch.no_grad():
            w = b.inverter.invert(probe_image)
        r.check("inversion shape", tuple(w.shape) == (b.synthesizer.num_layers, STYLE_DIM),
                f"got {tuple(w.shape)}")
        reports.append(r)
    for r in reports:
        for w in r.warnings:
            warnings.warn(f"{r.subject}: {w}", stacklevel=2)
    return reports
