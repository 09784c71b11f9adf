"""Numeric hot loops, backed by the compiled extension when it is built.

Set ``COGKERNEL_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names
the implementation in use.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("COGKERNEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

bla = _impl.bla
bla_batch = _impl.bla_batch
episode_scores = _impl.episode_scores
softmax_weights = _impl.softmax_weights


def backends() -> dict:
    """All importable backends by name, for cross-checking and benchmarks."""
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["compiled"] = compiled_backend
    else:
        try:
            from . import _ckernels

            out["compiled"] = _ckernels
        except ImportError:
            pass
    return out
