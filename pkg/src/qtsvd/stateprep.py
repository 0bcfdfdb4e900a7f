"""Dense synthesis of the data-access unitaries P'', P', Q' and R.

At desk scale each operator is built directly as a matrix by completing the
prescribed columns to a unitary, in place of a QRAM-style data structure.
Register roles follow the walk: 1 = left index i, 2 = right index j,
3 = walk face register, 4 = face register.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .classical import orthonormal_complete
from .errors import ContractError, DegenerateInputError, ShapeError
from .tensor import Tensor3, frobenius_norm, slice_norms_i, slice_norms_j

ORTHO_TOL = 1e-8
ROLES = ("r1", "r2", "r3", "r4")


def complete_to_unitary(columns, dim: int | None = None) -> np.ndarray:
    """Unitary whose leading columns are ``columns`` (orthonormal to 1e-8)."""
    cols = np.atleast_2d(np.asarray(columns, dtype=np.complex128))
    if cols.ndim != 2:
        raise ShapeError("columns must be a 2-D array (one column per vector)")
    if dim is None:
        dim = cols.shape[0]
    if cols.shape[0] != dim or cols.shape[1] > dim:
        raise ShapeError(f"{cols.shape[1]} columns of length {cols.shape[0]} do not fit dimension {dim}")
    gram = cols.conj().T @ cols
    err = np.max(np.abs(gram - np.eye(cols.shape[1]))) if cols.shape[1] else 0.0
    if err > ORTHO_TOL:
        raise ContractError(f"columns are not orthonormal (max Gram deviation {err:.2e})")
    return orthonormal_complete(cols, dim, tol=ORTHO_TOL)


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class PreparedOperators:
    tensor: Tensor3
    p_doubleprime: np.ndarray
    q_prime: np.ndarray
    r_op: np.ndarray
    norm: float
    norms_j: np.ndarray
    norms_i: np.ndarray
    zero_slices_j: tuple[int, ...] = field(default=())
    zero_slices_i: tuple[int, ...] = field(default=())

    @property
    def widths(self) -> tuple[int, int, int]:
        m, n, l = self.tensor.dims
        return m.bit_length() - 1, n.bit_length() - 1, l.bit_length() - 1


def _block_unitary(blocks: list[np.ndarray], index_sets: list[np.ndarray], dim: int) -> np.ndarray:
    u = np.zeros((dim, dim), dtype=np.complex128)
    for blk, idx in zip(blocks, index_sets):
        u[np.ix_(idx, idx)] = blk
    return u


def build_operators(t: Tensor3) -> PreparedOperators:
    """Synthesise P'', Q' (block-diagonal over j) and R (block-diagonal over i)."""
    m, n, l = t.dims
    if not (_is_pow2(m) and _is_pow2(n) and _is_pow2(l)):
        raise ShapeError(f"state preparation needs power-of-two dims, got {t.dims}; use pad_pow2")
    norm = frobenius_norm(t)
    if norm == 0:
        raise DegenerateInputError("cannot prepare operators for the zero tensor")
    a = t.data
    nj = slice_norms_j(t)
    ni = slice_norms_i(t)
    p2 = complete_to_unitary((nj / norm)[:, None])

    ii, jj, kk = np.meshgrid(np.arange(m), np.arange(n), np.arange(l), indexing="ij")
    flat_index = (ii * n + jj) * l + kk  # basis index over (r1, r2, r3)

    zero_j, q_blocks, q_sets = [], [], []
    for j in range(n):
        idx = flat_index[:, j, :].reshape(-1)
        if nj[j] > 0:
            col = a[:, j, :].reshape(-1) / nj[j]
        else:
            zero_j.append(j)
            col = np.zeros(m * l, dtype=np.complex128)
            col[0] = 1.0
        q_blocks.append(complete_to_unitary(col[:, None]))
        q_sets.append(idx)
    zero_i, r_blocks, r_sets = [], [], []
    for i in range(m):
        idx = flat_index[i, :, :].reshape(-1)
        if ni[i] > 0:
            col = a[i, :, :].reshape(-1) / ni[i]
        else:
            zero_i.append(i)
            col = np.zeros(n * l, dtype=np.complex128)
            col[0] = 1.0
        r_blocks.append(complete_to_unitary(col[:, None]))
        r_sets.append(idx)
    dim = m * n * l
    return PreparedOperators(
        tensor=t,
        p_doubleprime=p2,
        q_prime=_block_unitary(q_blocks, q_sets, dim),
        r_op=_block_unitary(r_blocks, r_sets, dim),
        norm=norm,
        norms_j=nj,
        norms_i=ni,
        zero_slices_j=tuple(zero_j),
        zero_slices_i=tuple(zero_i),
    )


def _copy_permutation(width: int) -> np.ndarray:
    """|a>|b> -> |a>|b xor a> over two registers of equal width."""
    dim = 1 << width
    a, b = np.divmod(np.arange(dim * dim), dim)
    return a * dim + (b ^ a)


def apply_p_prime(s: qsim.QState, ops: PreparedOperators, regs=ROLES, adjoint: bool = False) -> qsim.QState:
    """P' = (Fourier-basis copy of reg 3 onto reg 4) with P'' on reg 2."""
    r1, r2, r3, r4 = regs
    perm = _copy_permutation(s.layout.width(r3))
    if not adjoint:
        s = qsim.apply_matrix(s, r2, ops.p_doubleprime)
        s = qsim.iqft(s, r3)
        s = qsim.apply_permutation(s, [r3, r4], perm)
        s = qsim.qft(s, r3)
        s = qsim.qft(s, r4)
    else:
        s = qsim.iqft(s, r4)
        s = qsim.iqft(s, r3)
        s = qsim.apply_permutation(s, [r3, r4], perm)  # self-inverse
        s = qsim.qft(s, r3)
        s = qsim.apply_matrix(s, r2, ops.p_doubleprime.conj().T)
    return s


def apply_q_prime(s: qsim.QState, ops: PreparedOperators, regs=ROLES, adjoint: bool = False) -> qsim.QState:
    """Q' on registers (1, 2, 3); the face register 4 is left untouched."""
    r1, r2, r3 = regs[:3]
    u = ops.q_prime.conj().T if adjoint else ops.q_prime
    return qsim.apply_matrix(s, [r1, r2, r3], u)


def apply_r(s: qsim.QState, ops: PreparedOperators, regs=("r1", "r2", "r3"), adjoint: bool = False) -> qsim.QState:
    u = ops.r_op.conj().T if adjoint else ops.r_op
    return qsim.apply_matrix(s, list(regs), u)


def walk_layout(ops: PreparedOperators) -> qsim.RegisterLayout:
    nm, nn, nl = ops.widths
    return qsim.RegisterLayout([("r1", nm), ("r2", nn), ("r3", nl), ("r4", nl)])


def p_prime_matrix(ops: PreparedOperators) -> np.ndarray:
    return qsim.operator_matrix(walk_layout(ops), lambda s: apply_p_prime(s, ops))


def q_prime_matrix(ops: PreparedOperators) -> np.ndarray:
    return qsim.operator_matrix(walk_layout(ops), lambda s: apply_q_prime(s, ops))


def isometries(ops: PreparedOperators) -> tuple[np.ndarray, np.ndarray]:
    """(P, Q): P' on columns |i>|0>|k~>|0>, Q' on columns |0>|j>|0>|l~>.

    P's columns are ordered (i, k), Q's (j, l); both act on the full
    (r1, r2, r3, r4) space.
    """
    m, n, l = ops.tensor.dims
    f = qsim.qft_matrix(l)
    dim = m * n * l * l

    def basis(i, j, k3, k4):
        return ((i * n + j) * l + k3) * l + k4

    pin = np.zeros((dim, m * l), dtype=np.complex128)
    for i in range(m):
        for k in range(l):
            for x in range(l):  # |k~> on reg 3 = sum_x F[x, k] |x>
                pin[basis(i, 0, x, 0), i * l + k] = f[x, k]
    qin = np.zeros((dim, n * l), dtype=np.complex128)
    for j in range(n):
        for ll in range(l):
            for x in range(l):
                qin[basis(0, j, 0, x), j * l + ll] = f[x, ll]
    return p_prime_matrix(ops) @ pin, q_prime_matrix(ops) @ qin


def conjugate_reversed(t: Tensor3) -> Tensor3:
    """Tensor with entries conj(a[i, j, -k mod L]).

    Its Fourier faces are the complex conjugates of those of ``t``, so its
    right singular vectors are conj(v~) with unchanged singular values.
    """
    l = t.dims[2]
    rev = (-np.arange(l)) % l
    return Tensor3(np.conj(t.data[:, :, rev]), is_real=t.is_real)
