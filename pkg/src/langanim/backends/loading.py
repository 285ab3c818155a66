"""Backend selection: ``toy`` or ``external:<module.path>``.

An external module must define ``make_backends(**options) -> Backends``. The
contract check runs before the bundle is handed out.
"""
from __future__ import annotations

import importlib
import os
from typing import Optional

from .base import BackendContractError, Backends, ContractReport, check_backends
from .toy import toy_backends

BACKEND_ENV = "LANGANIM_BACKEND"


def resolve_backend_spec(configured: Optional[str] = None) -> str:
    """The environment variable, when set, overrides the configured backend."""
    return os.environ.get(BACKEND_ENV) or configured or "toy"


def load_backends(spec: Optional[str] = None, num_layers: Optional[int] = None,
                  check: bool = True, **options) -> Backends:
    spec = spec or resolve_backend_spec()
    if spec == "toy":
        bundle = toy_backends(**options)
    elif spec.startswith("external:"):
        report = ContractReport(spec)
        try:
            module = importlib.import_module(spec.split(":", 1)[1])
        except ImportError as exc:
            report.check("module importable", False, repr(exc))
            raise BackendContractError(report) from exc
        if not report.check("defines make_backends", hasattr(module, "make_backends")):
            raise BackendContractError(report)
        bundle = module.make_backends(**options)
        if not report.check("make_backends returns Backends", isinstance(bundle, Backends),
                            f"got {type(bundle).__name__}"):
            raise BackendContractError(report)
    else:
        raise ValueError(f"unknown backend {spec!r}; use 'toy' or 'external:<module>'")
    if check:
        for report in check_backends(bundle, num_layers=num_layers):
            if not report.ok:
                raise BackendContractError(report)
    return bundle
