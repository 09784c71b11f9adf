"""cogkernel: one rule engine, two cognitive-architecture configurations.

``actr`` mode runs buffers, single-rule selection by noisy utility and
activation-based retrieval.  ``soar`` mode runs a state-rooted graph,
elaboration under justification support, preference-based operator
decisions and impasse-driven substates.
"""

from .core import Chunk, Element, SymbolAtom, element, intern, sym
from .declarative import Cue, EpisodicStore, RetrievalParams, SemanticStore
from .dsl import check, format_model, parse, validate
from .env import EnvScript, load_env, parse_env
from .kernels import BACKEND
from .procedural import ProceduralMemory, Production
from .runtime import RunConfig, RunFailure, RunResult, Runtime, config_from_model, run_model
from .wm import WorkingMemory

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Chunk", "Cue", "Element", "EnvScript", "EpisodicStore", "ProceduralMemory",
    "Production", "RetrievalParams", "RunConfig", "RunFailure", "RunResult", "Runtime",
    "SemanticStore", "SymbolAtom", "WorkingMemory", "check", "config_from_model", "element",
    "format_model", "intern", "load_env", "parse", "parse_env", "run_model", "sym", "validate",
]
