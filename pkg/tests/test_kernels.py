import importlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import qtsvd._kernels as K
from qtsvd._kernels import _fallback

try:
    from qtsvd._kernels import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def _kron_oracle(psi, u, targets, n, controls=(), values=None):
    """Build the full 2^n operator by brute force over basis indices."""
    dim = 1 << n
    k = len(targets)
    values = values if values is not None else (1,) * len(controls)
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        if any(bits[c] != v for c, v in zip(controls, values)):
            full[col, col] = 1
            continue
        a = 0
        for q in targets:
            a = (a << 1) | bits[q]
        for b in range(1 << k):
            row_bits = list(bits)
            for t, q in enumerate(targets):
                row_bits[q] = (b >> (k - 1 - t)) & 1
            row = int("".join(map(str, row_bits)), 2)
            full[row, col] += u[b, a]
    return full @ psi


def _unitary(k, rng):
    q, _ = np.linalg.qr(rng.normal(size=(1 << k, 1 << k)) + 1j * rng.normal(size=(1 << k, 1 << k)))
    return q


@st.composite
def gate_case(draw):
    n = draw(st.integers(2, 6))
    k = draw(st.integers(1, min(3, n)))
    qubits = draw(st.permutations(range(n)))
    targets = list(qubits[:k])
    nc = draw(st.integers(0, min(2, n - k)))
    controls = list(qubits[k : k + nc])
    values = [draw(st.integers(0, 1)) for _ in controls]
    seed = draw(st.integers(0, 10_000))
    return n, targets, controls, values, seed


@given(gate_case())
def test_fallback_matches_kronecker_oracle(case):
    n, targets, controls, values, seed = case
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    u = _unitary(len(targets), rng)
    got = _fallback.apply_gate(psi, u, targets, n, controls, values)
    assert np.allclose(got, _kron_oracle(psi, u, targets, n, controls, values), atol=1e-12)


@needs_ext
@given(gate_case())
def test_backends_agree_on_gates(case):
    n, targets, controls, values, seed = case
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    u = _unitary(len(targets), rng)
    a = _fallback.apply_gate(psi, u, targets, n, controls, values)
    b = _ckernels.apply_gate(psi, u, tuple(targets), n, tuple(controls), values)
    assert np.allclose(a, b, atol=1e-13)


def test_fallback_batched_columns():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(16, 3)) + 0j
    u = _unitary(2, rng)
    out = _fallback.apply_gate(psi, u, [3, 1], 4, (0,))
    for c in range(3):
        assert np.allclose(out[:, c], _fallback.apply_gate(psi[:, c].copy(), u, [3, 1], 4, (0,)))


def test_apply_gate_returns_copy():
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    out = K.apply_gate(psi, x, [0], 2)
    assert psi[0] == 1 and out[2] == 1


@pytest.mark.parametrize("backend", ["python", "cython"])
@given(st.integers(1, 8), st.integers(0, 10_000))
def test_jacobi_eigh(backend, dim, seed):
    if backend == "cython" and _ckernels is None:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = a.conj().T @ a
    fn = _fallback.jacobi_eigh if backend == "python" else (lambda m: _ckernels.jacobi_eigh(m, 1e-15, 60))
    w, v, _ = fn(h)
    assert np.allclose(v.conj().T @ v, np.eye(dim), atol=1e-12)
    assert np.allclose(h @ v, v * w, atol=1e-10 * max(1.0, np.abs(w).max()))
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(h), atol=1e-9 * max(1.0, np.abs(w).max()))


def test_jacobi_nonconvergence_reports():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 6))
    with pytest.raises(ArithmeticError, match="sweeps"):
        _fallback.jacobi_eigh(a + a.T, max_sweeps=0)


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("TSVD_PURE_PYTHON", "1")
    mod = importlib.reload(K)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("TSVD_PURE_PYTHON")
        importlib.reload(K)
