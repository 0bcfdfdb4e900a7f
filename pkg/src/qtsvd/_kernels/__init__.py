"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is picked at import time when it was built; set
``TSVD_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the choice.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_compiled = None
if os.environ.get("TSVD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None

# measured (benchmarks/bench_kernels.py): the compiled loop only beats numpy's
# strided matmul for uncontrolled single-qubit gates; wider or controlled
# gates are memory-bound and stay on the numpy path
_COMPILED_MAX_TARGETS = 1


def apply_gate(psi, u, targets, n_qubits, controls=(), control_values=None):
    targets = tuple(int(q) for q in targets)
    controls = tuple(int(q) for q in controls)
    if _compiled is not None and psi.ndim == 1 and not controls and len(targets) <= _COMPILED_MAX_TARGETS:
        return _compiled.apply_gate(psi, u, targets, n_qubits, controls, control_values)
    return _fallback.apply_gate(psi, u, targets, n_qubits, controls, control_values)


def jacobi_eigh(h, tol=1e-15, max_sweeps=60):
    if _compiled is not None:
        return _compiled.jacobi_eigh(h, tol, max_sweeps)
    return _fallback.jacobi_eigh(h, tol, max_sweeps)


__all__ = ["BACKEND", "apply_gate", "jacobi_eigh"]
