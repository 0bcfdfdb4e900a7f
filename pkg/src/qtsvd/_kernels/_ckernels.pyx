# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector and Jacobi kernels.

Same contracts as ``_fallback``; only 1-D amplitude arrays are accepted here.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, fabs

cnp.import_array()

ctypedef double complex cplx


cdef inline long long _spread(long long x, long long* bits, Py_ssize_t nb) nogil:
    # insert a zero at each (ascending) bit position in ``bits``
    cdef Py_ssize_t t
    cdef long long low
    for t in range(nb):
        low = x & (bits[t] - 1)
        x = ((x ^ low) << 1) | low
    return x


def apply_gate(psi, u, targets, Py_ssize_t n_qubits, controls=(), control_values=None):
    cdef Py_ssize_t k = len(targets)
    cdef Py_ssize_t nc = len(controls)
    cdef Py_ssize_t dim = 1 << k
    cdef cnp.ndarray[cplx, ndim=1] out_arr = np.array(psi, dtype=np.complex128, copy=True)
    cdef cplx[::1] out = out_arr
    cdef cplx[:, ::1] mat = np.ascontiguousarray(u, dtype=np.complex128)
    cdef long long[::1] offs = np.zeros(dim, dtype=np.int64)
    cdef cplx[::1] buf = np.zeros(dim, dtype=np.complex128)
    cdef long long[::1] fixed = np.sort(np.array(
        [1 << (n_qubits - 1 - q) for q in list(targets) + list(controls)], dtype=np.int64))
    cdef long long cval = 0, bit, base, i0, i1
    cdef Py_ssize_t a, b, t, nfree
    cdef long long j, nfree_states
    cdef cplx acc, x0, x1, m00, m01, m10, m11

    if control_values is None:
        control_values = (1,) * nc
    for q, v in zip(controls, control_values):
        if v:
            cval |= 1LL << (n_qubits - 1 - q)
    for a in range(dim):
        base = 0
        for t in range(k):
            if (a >> (k - 1 - t)) & 1:
                base |= 1LL << (n_qubits - 1 - targets[t])
        offs[a] = base
    nfree = n_qubits - k - nc
    nfree_states = 1LL << nfree

    if k == 1:
        bit = offs[1]
        m00 = mat[0, 0]; m01 = mat[0, 1]; m10 = mat[1, 0]; m11 = mat[1, 1]
        with nogil:
            for j in range(nfree_states):
                i0 = _spread(j, &fixed[0], k + nc) | cval
                i1 = i0 | bit
                x0 = out[i0]
                x1 = out[i1]
                out[i0] = m00 * x0 + m01 * x1
                out[i1] = m10 * x0 + m11 * x1
        return out_arr

    with nogil:
        for j in range(nfree_states):
            base = _spread(j, &fixed[0], k + nc) | cval
            for a in range(dim):
                buf[a] = out[base + offs[a]]
            for a in range(dim):
                acc = 0
                for b in range(dim):
                    acc = acc + mat[a, b] * buf[b]
                out[base + offs[a]] = acc
    return out_arr


def jacobi_eigh(h, double tol=1e-15, int max_sweeps=60):
    cdef cnp.ndarray[cplx, ndim=2] a = np.array(h, dtype=np.complex128, copy=True, order="C")
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cplx, ndim=2] v = np.eye(n, dtype=np.complex128)
    cdef Py_ssize_t p, q, r
    cdef int sweep
    cdef double g, app, aqq, theta, c, s, off, scale, tot
    cdef cplx z, phase, pc, xp, xq

    tot = 0.0
    for p in range(n):
        for q in range(n):
            tot += a[p, q].real * a[p, q].real + a[p, q].imag * a[p, q].imag
    scale = sqrt(tot)
    if scale < 1e-300:
        scale = 1e-300

    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q].real * a[p, q].real + a[p, q].imag * a[p, q].imag
        off = sqrt(off)
        if off <= tol * scale:
            return np.real(np.diag(a)).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                z = a[p, q]
                g = sqrt(z.real * z.real + z.imag * z.imag)
                if g <= 1e-300:
                    continue
                phase = z / g
                pc = phase.conjugate()
                app = a[p, p].real
                aqq = a[q, q].real
                theta = 0.5 * atan2(2.0 * g, app - aqq)
                c = cos(theta)
                s = sin(theta)
                for r in range(n):
                    xp = a[r, p]
                    xq = a[r, q]
                    a[r, p] = c * xp + s * pc * xq
                    a[r, q] = -s * xp + c * pc * xq
                for r in range(n):
                    xp = a[p, r]
                    xq = a[q, r]
                    a[p, r] = c * xp + s * phase * xq
                    a[q, r] = -s * xp + c * phase * xq
                a[p, q] = 0
                a[q, p] = 0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for r in range(n):
                    xp = v[r, p]
                    xq = v[r, q]
                    v[r, p] = c * xp + s * pc * xq
                    v[r, q] = -s * xp + c * pc * xq
    raise ArithmeticError(
        f"Jacobi eigen-solver did not converge in {max_sweeps} sweeps "
        f"(off-diagonal norm {off:.3e}, matrix norm {scale:.3e}, n={n})"
    )
