import numpy as np
import pytest
import torch


def central_fd(f, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Central finite-difference gradient of scalar ``f`` at ``x`` (float64)."""
    x = x.detach().clone()
    g = torch.zeros_like(x)
    with torch.no_grad():
        _fill_fd(f, x, g, eps)
    return g


def _fill_fd(f, x, g, eps):
    flat, gflat = x.view(-1), g.view(-1)
    for k in range(flat.numel()):
        old = flat[k].item()
        flat[k] = old + eps
        hi = float(f(x))
        flat[k] = old - eps
        lo = float(f(x))
        flat[k] = old
        gflat[k] = (hi - lo) / (2 * eps)


def analytic_grad(f, x: torch.Tensor) -> torch.Tensor:
    x = x.detach().clone().requires_grad_(True)
    (g,) = torch.autograd.grad(f(x), x)
    return g


def rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).norm() / max(float(b.norm()), 1e-12))


def grad_rel_err(f, x: torch.Tensor, eps: float = 1e-6) -> float:
    return rel_err(analytic_grad(f, x), central_fd(f, x, eps))


def directional_rel_err(f, x: torch.Tensor, n_dirs: int = 16, eps: float = 1e-6, seed: int = 0) -> float:
    """Worst relative error of directional derivatives along random unit directions.

    For large inputs where a full coordinate sweep is too slow.
    """
    g = analytic_grad(f, x)
    x = x.detach()
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for _ in range(n_dirs):
        u = torch.randn(x.shape, generator=gen, dtype=x.dtype)
        u = u / u.norm()
        with torch.no_grad():
            fd = (float(f(x + eps * u)) - float(f(x - eps * u))) / (2 * eps)
        an = float((g * u).sum())
        worst = max(worst, abs(an - fd) / max(abs(fd), float(g.norm()) * 1e-3, 1e-12))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gen():
    return torch.Generator().manual_seed(1234)


# acceptance reporting: criterion -> {check name: (ok, detail)}
ACCEPTANCE: dict[int, dict[str, tuple[bool, str]]] = {}
ACCEPTANCE_TITLES: dict[int, str] = {}


def record(criterion: int, title: str, check: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_TITLES[criterion] = title
    ACCEPTANCE.setdefault(criterion, {})[check] = (bool(ok), detail)
    print(f"[{criterion}] {check}: {'PASS' if ok else 'FAIL'} ({detail})")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        ok = all(v[0] for v in checks.values())
        failed = [name for name, (good, _) in checks.items() if not good]
        tail = f"; failed: {', '.join(failed)}" if failed else ""
        terminalreporter.write_line(
            f"criterion {k} {ACCEPTANCE_TITLES[k]}: {'PASS' if ok else 'FAIL'} "
            f"({len(checks) - len(failed)}/{len(checks)} checks{tail})")
        for name, (good, detail) in checks.items():
            terminalreporter.write_line(f"    {'ok  ' if good else 'FAIL'} {name}: {detail}")
