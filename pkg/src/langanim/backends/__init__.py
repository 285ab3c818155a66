from .base import (BackendContractError, Backends, ContractReport, EncoderBackend,
                   InversionProvider, PerceptualBackend, SynthesizerBackend,
                   adapter_contract_check, check_backends, check_encoder, check_synthesizer)
from .loading import load_backends
from .toy import (PROMPTS, ToyEncoder, ToyInverter, ToyPerceptual, ToySynthesizer,
                  VocabularyError, toy_backends)
