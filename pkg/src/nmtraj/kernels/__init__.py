"""Hot-loop kernels with a compiled core and a pure numpy fallback.

The compiled extension (``nmtraj._fastkern``, Cython) is preferred; set
``NMTRAJ_KERNELS=py`` to force the numpy fallback or ``NMTRAJ_KERNELS=c``
to fail loudly if the extension is missing.  Both backends implement the
same functions and agree to near machine precision (the fused sampler
to ~1e-9; see the parity tests), each deterministic per seed; see
``benchmarks/bench_kernels.py`` for a speed comparison.
"""

from __future__ import annotations

import os

_requested = os.environ.get("NMTRAJ_KERNELS", "").strip().lower()

if _requested not in ("", "c", "py"):
    raise ImportError(f"NMTRAJ_KERNELS must be 'c' or 'py', got {_requested!r}")

if _requested == "py":
    from . import _pure as _impl
else:
    try:
        from .. import _fastkern as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "c":
            raise
        from . import _pure as _impl

BACKEND: str = _impl.BACKEND
gram_matrix = _impl.gram_matrix
mixture_grid = _impl.mixture_grid
sample_mixture = _impl.sample_mixture

__all__ = ["BACKEND", "gram_matrix", "mixture_grid", "sample_mixture"]
