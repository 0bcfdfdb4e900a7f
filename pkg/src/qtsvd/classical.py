"""Classical t-SVD: mode-3 unitary DFT, per-face SVD, truncation, precision ledger.

The tube transform is ``F = QFT^dagger`` (unitary, 1/sqrt(L) normalised), the
convention for which ``sum_k a_ijk |k> = sum_k a~_ijk QFT|k>`` holds. Singular
values therefore differ by sqrt(L) from the unnormalised-FFT t-SVD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateInputError
from .tensor import Tensor3, frobenius_norm

# orthonormal-completion threshold shared with state preparation
_DEPENDENT_TOL = 1e-8
# spectra gaps below this would need more abs-register qubits than we can simulate
DEGENERACY_FLOOR = 1e-6
# theta values closer than this are the same value (conjugate-symmetric faces)
THETA_MERGE_TOL = 1e-9


def qft_matrix(dim: int) -> np.ndarray:
    """Unitary QFT with entries omega^(xy)/sqrt(dim), omega = exp(2 pi i/dim)."""
    x = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(x, x) / dim) / np.sqrt(dim)


def dft_matrix(dim: int) -> np.ndarray:
    """The tube transform F = QFT^dagger."""
    return qft_matrix(dim).conj().T


def mode3_dft(t: Tensor3) -> Tensor3:
    f = dft_matrix(t.dims[2])
    return Tensor3(np.einsum("kl,ijl->ijk", f, t.data), is_real=False)


def inverse_mode3_dft(t: Tensor3) -> Tensor3:
    q = qft_matrix(t.dims[2])
    return Tensor3(np.einsum("kl,ijl->ijk", q, t.data), is_real=False)


def orthonormal_complete(columns: np.ndarray, dim: int, tol: float = _DEPENDENT_TOL) -> np.ndarray:
    """Extend orthonormal columns to a unitary with Gram-Schmidt over e_0, e_1, ...

    Candidates whose residual norm falls below ``tol`` are skipped; the scan
    runs in index order, so the result is deterministic.
    """
    cols = [np.asarray(c, dtype=np.complex128) for c in np.asarray(columns).T] if np.size(columns) else []
    basis = list(cols)
    for idx in range(dim):
        if len(basis) == dim:
            break
        cand = np.zeros(dim, dtype=np.complex128)
        cand[idx] = 1.0
        # two passes of modified Gram-Schmidt keep the result orthogonal to 1e-15
        for _ in range(2):
            for b in basis:
                cand = cand - np.vdot(b, cand) * b
        nrm = np.linalg.norm(cand)
        if nrm < tol:
            continue
        basis.append(cand / nrm)
    if len(basis) != dim:
        raise ArithmeticError("orthonormal completion failed to span the space")
    return np.column_stack(basis)


def svd_jacobi(a: np.ndarray):
    """Complex SVD via Jacobi eigen-decomposition of the Gram matrix.

    Returns ``(u, s, v)`` with ``a = u[:, :r] @ diag(s) @ v[:, :r]^dagger``,
    ``r = min(M, N)``, singular values descending; ties keep Jacobi order.
    """
    a = np.asarray(a, dtype=np.complex128)
    m, n = a.shape
    r = min(m, n)
    gram = a.conj().T @ a
    w, vecs, _ = _kernels.jacobi_eigh(gram)
    sig = np.sqrt(np.clip(w, 0.0, None))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    vecs = vecs[:, order]
    # v is a product of exact plane rotations, unitary to rounding
    v = vecs
    smax = sig[0] if sig.size else 0.0
    ucols = []
    for idx in range(r):
        if sig[idx] > 1e-10 * max(smax, 1e-300) and sig[idx] > 1e-300:
            col = a @ v[:, idx] / sig[idx]
            for b in ucols:
                col = col - np.vdot(b, col) * b
            nrm = np.linalg.norm(col)
            if nrm < 0.5:
                break
            ucols.append(col / nrm)
        else:
            break
    k = len(ucols)
    u = orthonormal_complete(np.column_stack(ucols) if ucols else np.zeros((m, 0)), m)
    s = sig[:r].copy()
    s[k:] = np.where(s[k:] > 0, s[k:], 0.0)
    return u, s, v


@dataclass(frozen=True)
class TsvdFactors:
    """Per-face SVD of the Fourier-transformed tensor.

    ``u[k]`` is M x M, ``s[k]`` holds min(M, N) descending singular values,
    ``v[k]`` is N x N; ``u[k] @ S @ v[k]^dagger`` reproduces face k of A~.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    norm: float

    @property
    def n_faces(self) -> int:
        return self.s.shape[0]

    def face_matrix(self, k: int, keep=None) -> np.ndarray:
        m, n = self.u.shape[1], self.v.shape[1]
        r = self.s.shape[1]
        sig = self.s[k] if keep is None else np.where(keep[k], self.s[k], 0.0)
        smat = np.zeros((m, n), dtype=np.complex128)
        smat[np.arange(r), np.arange(r)] = sig
        return self.u[k] @ smat @ self.v[k].conj().T

    def singular_values(self) -> np.ndarray:
        return self.s.copy()


def tsvd(t: Tensor3) -> TsvdFactors:
    at = mode3_dft(t)
    us, ss, vs = [], [], []
    for k in range(t.dims[2]):
        u, s, v = svd_jacobi(at.data[:, :, k])
        us.append(u)
        ss.append(s)
        vs.append(v)
    return TsvdFactors(np.array(us), np.array(ss), np.array(vs), frobenius_norm(t))


def classical_truncate(t: Tensor3, tau: float, factors: TsvdFactors | None = None) -> Tensor3:
    """Zero every singular value strictly below ``tau`` and transform back."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    f = tsvd(t) if factors is None else factors
    keep = f.s >= tau
    faces = np.stack([f.face_matrix(k, keep) for k in range(f.n_faces)], axis=2)
    return inverse_mode3_dft(Tensor3(faces, is_real=False))


def thetas_from_factors(f: TsvdFactors) -> np.ndarray:
    """theta_i^(k) = 2 arccos(sigma_i^(k) / ||A||_F), shape (L, min(M, N))."""
    if f.norm == 0:
        raise DegenerateInputError("zero tensor has no theta spectrum")
    return 2.0 * np.arccos(np.clip(f.s / f.norm, 0.0, 1.0))


def distinct_values(values, tol: float = THETA_MERGE_TOL) -> np.ndarray:
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    if vals.size == 0:
        return vals
    keep = [vals[0]]
    for x in vals[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.array(keep)


def theta_gap(thetas) -> float:
    """Smallest gap between distinct theta values (pi if only one value)."""
    vals = distinct_values(thetas)
    if vals.size < 2:
        return math.pi
    return float(np.min(np.diff(vals)))


def abs_width_for_gap(delta: float) -> int:
    """Smallest d >= 1 with 2^-d < delta / (2 pi)."""
    d = 1
    while 2.0 ** (-d) >= delta / (2 * math.pi):
        d += 1
    return d


def extra_phase_bits(epsilon: float) -> int:
    """ceil(log2(2 + 1/(2 eps^2))): phase-register bits beyond d."""
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    x = 2.0 + 1.0 / (2.0 * epsilon**2)
    return int(math.ceil(math.log2(x) - 1e-12))


@dataclass(frozen=True)
class SveParams:
    """Precision ledger for one QtSVE / truncation configuration.

    ``epsilon`` is ``None`` for runs configured directly by register widths
    (figure sweeps), where the QPE error guarantee is not claimed.
    """

    thetas: np.ndarray
    delta: float
    d: int
    n_p: int
    epsilon: float | None
    tau: float
    alpha: float
    norm: float

    def theta_threshold(self) -> float:
        """2 arccos(tau/||A||_F), clamped to [0, pi]."""
        a = min(max(self.tau / self.norm, 0.0), 1.0)
        return 2.0 * math.acos(a)

    def threshold_int(self) -> int:
        """Comparator threshold round-half-up(2^d theta_tau / 2 pi)."""
        return int(math.floor(2**self.d * self.theta_threshold() / (2 * math.pi) + 0.5))

    def unit(self) -> float:
        """One least-significant abs-register unit, in radians of theta."""
        return 2 * math.pi / 2**self.d


def retained_ratio(f: TsvdFactors, tau: float) -> float:
    kept = f.s[f.s >= tau]
    return float(np.sqrt(np.sum(kept**2)) / f.norm)


def sve_params(
    t: Tensor3,
    epsilon: float | None = None,
    tau: float = 0.0,
    *,
    n_p: int | None = None,
    d: int | None = None,
    factors: TsvdFactors | None = None,
) -> SveParams:
    """Derive (theta, delta, d, n_p, alpha) for a tensor.

    With only ``epsilon``: d from the theta gap, n_p = d + extra_phase_bits.
    With ``epsilon`` and ``n_p``: d = n_p - extra_phase_bits(epsilon).
    With only ``n_p``: d = n_p - 1 unless given. An explicit ``d`` always wins.
    """
    f = tsvd(t) if factors is None else factors
    thetas = thetas_from_factors(f)
    delta = theta_gap(thetas)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if epsilon is not None:
        extra = extra_phase_bits(epsilon)
        if d is None:
            if n_p is not None:
                d = n_p - extra
            else:
                if delta < DEGENERACY_FLOOR:
                    raise DegenerateInputError(
                        f"smallest theta gap {delta:.3e} is below {DEGENERACY_FLOOR:g}; the abs "
                        "register would be too wide to simulate. Re-seed or perturb the tensor."
                    )
                d = abs_width_for_gap(delta)
        if n_p is None:
            n_p = d + extra
    else:
        if n_p is None and d is None:
            raise ValueError("give epsilon, n_p, or d")
        if d is None:
            d = n_p - 1
        if n_p is None:
            n_p = d + 1
    if d < 1 or n_p < d:
        raise ValueError(f"inconsistent register widths d={d}, n_p={n_p}")
    return SveParams(
        thetas=thetas,
        delta=delta,
        d=int(d),
        n_p=int(n_p),
        epsilon=epsilon,
        tau=float(tau),
        alpha=retained_ratio(f, tau),
        norm=f.norm,
    )
