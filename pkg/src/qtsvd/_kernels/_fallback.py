"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable, and always for batched
amplitude arrays (operator assembly passes identity columns as a batch).
"""
from __future__ import annotations

import math

import numpy as np


def apply_gate(psi, u, targets, n_qubits, controls=(), control_values=None):
    """Apply the 2^k x 2^k matrix ``u`` to ``targets`` of an n-qubit array.

    Qubit 0 is the most significant bit of the basis index. ``psi`` has
    shape ``(2**n_qubits,)`` or ``(2**n_qubits, batch)``; a new array is
    returned. ``controls`` must be disjoint from ``targets``; the gate fires
    on the branch where every control equals its entry in ``control_values``
    (all ones by default).
    """
    k = len(targets)
    batch = psi.shape[1:]
    out = np.array(psi, dtype=np.complex128, copy=True)
    t = out.reshape((2,) * n_qubits + batch)
    if control_values is None:
        control_values = (1,) * len(controls)
    index = [slice(None)] * t.ndim
    for c, v in zip(controls, control_values):
        index[c] = int(v)
    sub = t[tuple(index)]
    # axis positions of the targets once the control axes are indexed away
    kept = [q for q in range(n_qubits) if q not in set(controls)]
    axes = [kept.index(q) for q in targets]
    moved = np.moveaxis(sub, axes, range(k))
    shape = moved.shape
    flat = moved.reshape(2**k, -1)
    new = (u @ flat).reshape(shape)
    t[tuple(index)] = np.moveaxis(new, range(k), axes)
    return out


def jacobi_eigh(h, tol=1e-15, max_sweeps=60):
    """Cyclic Jacobi eigen-decomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvalues in the
    order the rotations leave them (unsorted). Raises ``ArithmeticError``
    when the off-diagonal mass does not fall below ``tol * ||h||_F`` within
    ``max_sweeps`` sweeps.
    """
    a = np.array(h, dtype=np.complex128, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = max(np.linalg.norm(a), 1e-300)
    for sweep in range(max_sweeps + 1):
        # summed directly: ||a||^2 - sum|diag|^2 cancels to a sqrt(eps) floor
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            return np.real(np.diag(a)).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                z = a[p, q]
                g = abs(z)
                if g <= 1e-300:
                    continue
                phase = z / g
                app = a[p, p].real
                aqq = a[q, q].real
                theta = 0.5 * math.atan2(2.0 * g, app - aqq)
                c = math.cos(theta)
                s = math.sin(theta)
                pc = phase.conjugate()
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p + s * pc * col_q
                a[:, q] = -s * col_p + c * pc * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p + s * phase * row_q
                a[q, :] = -s * row_p + c * phase * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp + s * pc * vq
                v[:, q] = -s * vp + c * pc * vq
    raise ArithmeticError(
        f"Jacobi eigen-solver did not converge in {max_sweeps} sweeps "
        f"(off-diagonal norm {off:.3e}, matrix norm {scale:.3e}, n={n})"
    )
