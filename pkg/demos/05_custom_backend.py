"""
Plugging in a backend
=====================

Real encoders, synthesizers and inverters plug in through a module exposing
``make_backends(**options) -> Backends``. Select it with the ``backend`` config
key or the ``LANGANIM_BACKEND`` environment variable, as ``external:module``.
Every bundle goes through the contract check before training starts; this
demo loads a well-behaved adapter and a broken one.
"""
import sys
import tempfile
import textwrap
from pathlib import Path

from langanim.backends import BackendContractError, check_backends, load_backends

plugins = Path(tempfile.mkdtemp())
(plugins / "my_adapter.py").write_text(textwrap.dedent("""
    from langanim.backends.toy import toy_backends

    def make_backends(**options):
        # a real adapter would wrap pretrained networks here
        return toy_backends(**options)
"""))
(plugins / "broken_adapter.py").write_text(textwrap.dedent("""
    import torch
    from langanim.backends.toy import ToySynthesizer, toy_backends

    class WrongLayers(ToySynthesizer):
        def sample_content_code(self, seed):
            return torch.zeros(5, 512)

    def make_backends(**options):
        b = toy_backends(**options)
        b.synthesizer = WrongLayers()
        return b
"""))
sys.path.insert(0, str(plugins))

bundle = load_backends("external:my_adapter")
for report in check_backends(bundle):
    print(report.format())

try:
    load_backends("external:broken_adapter")
except BackendContractError as exc:
    print("rejected:", exc)
