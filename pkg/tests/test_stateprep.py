import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtsvd import qsim
from qtsvd.classical import mode3_dft, qft_matrix, tsvd
from qtsvd.errors import ContractError, DegenerateInputError, ShapeError
from qtsvd.stateprep import (
    apply_p_prime,
    apply_q_prime,
    apply_r,
    build_operators,
    complete_to_unitary,
    conjugate_reversed,
    isometries,
    p_prime_matrix,
    q_prime_matrix,
    walk_layout,
)
from qtsvd.tensor import Tensor3, frobenius_norm, slice_norms_i, slice_norms_j

from conftest import random_tensor


def test_complete_to_unitary():
    u = complete_to_unitary(np.eye(4)[:, :1])
    assert np.allclose(u[:, 0], np.eye(4)[:, 0]) and np.allclose(u.conj().T @ u, np.eye(4))
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)))
    assert np.allclose(complete_to_unitary(q), q)
    pair, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(8, 2)) + 1j)
    u = complete_to_unitary(pair)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-10) and np.allclose(u[:, :2], pair)
    with pytest.raises(ContractError):
        complete_to_unitary(np.array([[1.0], [1.0]]))


def test_build_operators_errors():
    with pytest.raises(DegenerateInputError):
        build_operators(Tensor3(np.zeros((2, 2, 2))))
    with pytest.raises(ShapeError):
        build_operators(Tensor3(np.ones((3, 2, 2))))


def test_one_hot_and_all_ones():
    a = np.zeros((2, 2, 2))
    a[0, 0, 0] = 1
    ops = build_operators(Tensor3(a))
    assert np.allclose(ops.p_doubleprime[:, 0], [1, 0])
    assert np.allclose(ops.q_prime[:, 0], np.eye(8)[0])
    assert ops.zero_slices_j == (1,)
    ops = build_operators(Tensor3(np.ones((4, 4, 4))))
    assert np.allclose(ops.p_doubleprime[:, 0], 0.5)


@given(st.integers(0, 10_000))
def test_operator_invariants(seed):
    t = random_tensor((2, 4, 2), seed, complex_=True)
    ops = build_operators(t)
    nrm = frobenius_norm(t)
    assert np.allclose(ops.p_doubleprime[:, 0], slice_norms_j(t) / nrm, atol=1e-10)
    m, n, l = t.dims
    for j in range(n):
        col = ops.q_prime[:, (0 * n + j) * l + 0].reshape(m, n, l)
        assert np.allclose(col, np.where(np.arange(n)[None, :, None] == j, t.data, 0) / slice_norms_j(t)[j], atol=1e-10)
    for i in range(m):
        col = ops.r_op[:, (i * n + 0) * l + 0].reshape(m, n, l)
        assert np.allclose(col, np.where(np.arange(m)[:, None, None] == i, t.data, 0) / slice_norms_i(t)[i], atol=1e-10)
    for u in (ops.q_prime, ops.r_op, ops.p_doubleprime):
        assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)


def test_p_prime_fourier_copy():
    t = random_tensor((2, 2, 4), 1)
    ops = build_operators(t)
    lay = walk_layout(ops)
    s = qsim.qft(qsim.QState.basis(lay, {"r1": 1}), "r3")
    out = apply_p_prime(s, ops)
    want = qsim.QState.from_registers(
        lay, {"r1": [0, 1], "r2": ops.p_doubleprime[:, 0], "r3": np.full(4, 0.5), "r4": np.full(4, 0.5)}
    )
    assert np.allclose(out.amplitudes, want.amplitudes, atol=1e-12)


def test_p_prime_single_entry():
    a = np.zeros((2, 2, 2))
    a[1, 1, 0] = 1.0
    ops = build_operators(Tensor3(a))
    lay = walk_layout(ops)
    f = qft_matrix(2)
    for k in range(2):
        s = qsim.QState.from_registers(lay, {"r1": [1, 0], "r3": f[:, k]})
        out = apply_p_prime(s, ops)
        want = qsim.QState.from_registers(lay, {"r1": [1, 0], "r2": [0, 1], "r3": f[:, k], "r4": f[:, k]})
        assert np.allclose(out.amplitudes, want.amplitudes, atol=1e-12)


def test_walk_unitaries_and_q_factorisation():
    t = random_tensor((2, 2, 2), 3, complex_=True)
    ops = build_operators(t)
    for mat in (p_prime_matrix(ops), q_prime_matrix(ops)):
        assert np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=1e-10)
    # Q' is identity on register 4
    lay = walk_layout(ops)
    s = qsim.QState.from_registers(lay, {"r4": [0.6, 0.8j]})
    out = apply_q_prime(s, ops)
    assert np.allclose(qsim.probabilities(out, "r4"), [0.36, 0.64])
    back = apply_q_prime(out, ops, adjoint=True)
    assert np.allclose(back.amplitudes, s.amplitudes, atol=1e-12)


@given(st.integers(0, 10_000))
def test_isometries_factorise(seed):
    t = random_tensor((2, 4, 2), seed, complex_=True)
    ops = build_operators(t)
    p, q = isometries(ops)
    assert np.allclose(p.conj().T @ p, np.eye(p.shape[1]), atol=1e-10)
    assert np.allclose(q.conj().T @ q, np.eye(q.shape[1]), atol=1e-10)
    m, n, l = t.dims
    ft = mode3_dft(t).data
    want = np.zeros((m * l, n * l), dtype=complex)
    for k in range(l):
        want[np.arange(m) * l + k, :][:, np.arange(n) * l + k] = 0
        for i in range(m):
            want[i * l + k, np.arange(n) * l + k] = ft[i, :, k]
    assert np.allclose(p.conj().T @ q, want / frobenius_norm(t), atol=1e-9)


def test_apply_r_row_state():
    t = random_tensor((2, 2, 2), 4)
    ops = build_operators(t)
    lay = qsim.RegisterLayout([("r1", 1), ("r2", 1), ("r3", 1)])
    s = apply_r(qsim.QState.basis(lay, {"r1": 1}), ops)
    want = np.zeros((2, 2, 2), dtype=complex)
    want[1] = t.data[1] / np.linalg.norm(t.data[1])
    assert np.allclose(s.amplitudes, want.ravel())


def test_conjugate_reversed_faces():
    t = random_tensor((2, 3, 4), 5, complex_=True)
    c = conjugate_reversed(t)
    assert np.allclose(mode3_dft(c).data, np.conj(mode3_dft(t).data))
    assert np.allclose(tsvd(c).s, tsvd(t).s)
    assert np.allclose(slice_norms_j(c), slice_norms_j(t))
