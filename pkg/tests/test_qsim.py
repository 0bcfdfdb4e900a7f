import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtsvd import qsim
from qtsvd.classical import dft_matrix, qft_matrix
from qtsvd.errors import ContractError, PostselectionError, QubitBudgetError, ShapeError

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def _rand_state(layout, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << layout.n_qubits) + 1j * rng.normal(size=1 << layout.n_qubits)
    return qsim.QState(layout, v / np.linalg.norm(v))


def _unitary(dim, rng):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q


def test_layout():
    lay = qsim.RegisterLayout([("a", 2), ("b", 1), ("c", 3)])
    assert lay.n_qubits == 6
    assert lay.offset("c") == 3 and lay.qubits("b") == [2]
    with pytest.raises(ValueError):
        qsim.RegisterLayout([("a", 1), ("a", 2)])


def test_budget(monkeypatch):
    monkeypatch.setenv("TSVD_MAX_QUBITS", "4")
    with pytest.raises(QubitBudgetError, match="TSVD_MAX_QUBITS"):
        qsim.QState.zero(qsim.RegisterLayout([("a", 5)]))
    monkeypatch.delenv("TSVD_MAX_QUBITS")
    assert qsim.max_qubits() == 26


def test_basis_and_msb_convention():
    lay = qsim.RegisterLayout([("a", 2), ("b", 1)])
    s = qsim.QState.basis(lay, {"a": 2, "b": 1})
    assert int(np.argmax(np.abs(s.amplitudes))) == 0b101


def test_apply_unitary_examples():
    lay = qsim.RegisterLayout([("q", 1)])
    s = qsim.apply_unitary(qsim.QState.zero(lay), "q", X)
    assert np.allclose(s.amplitudes, [0, 1])
    assert np.allclose(qsim.apply_unitary(s, "q", np.eye(2)).amplitudes, s.amplitudes)
    with pytest.raises(ContractError):
        qsim.apply_unitary(s, "q", np.array([[1, 1], [0, 1]]))
    with pytest.raises(ShapeError):
        qsim.apply_unitary(s, "q", np.eye(4))


def test_two_qubit_unitary_matches_kron():
    rng = np.random.default_rng(0)
    lay = qsim.RegisterLayout([("a", 1), ("b", 2), ("c", 1)])
    s = _rand_state(lay, 1)
    u = _unitary(4, rng)
    got = qsim.apply_unitary(s, "b", u).amplitudes
    assert np.allclose(got, np.kron(np.kron(np.eye(2), u), np.eye(2)) @ s.amplitudes, atol=1e-12)


@given(st.integers(0, 10_000))
def test_composition_and_norm(seed):
    rng = np.random.default_rng(seed)
    lay = qsim.RegisterLayout([("a", 2), ("b", 2)])
    s = _rand_state(lay, seed)
    u1, u2 = _unitary(4, rng), _unitary(4, rng)
    seq = qsim.apply_unitary(qsim.apply_unitary(s, "b", u1), "b", u2)
    once = qsim.apply_unitary(s, "b", u2 @ u1)
    assert np.allclose(seq.amplitudes, once.amplitudes, atol=1e-10)
    assert seq.norm_squared == pytest.approx(1.0, abs=1e-10)


def test_qft():
    lay = qsim.RegisterLayout([("r", 3)])
    s = qsim.qft(qsim.QState.zero(lay), "r")
    assert np.allclose(s.amplitudes, np.full(8, 8**-0.5))
    t = _rand_state(lay, 3)
    assert np.allclose(qsim.iqft(qsim.qft(t, "r"), "r").amplitudes, t.amplitudes, atol=1e-12)
    lay2 = qsim.RegisterLayout([("r", 2)])
    m = qsim.operator_matrix(lay2, lambda x: qsim.qft(x, "r"))
    assert np.allclose(m, dft_matrix(4).conj().T)
    q = qft_matrix(16)
    assert np.allclose(q @ q.conj().T, np.eye(16), atol=1e-12)


def test_reflection():
    lay = qsim.RegisterLayout([("q", 1)])
    assert np.allclose(qsim.reflection_about_zero(qsim.QState.basis(lay, {"q": 0}), ["q"]).amplitudes, [1, 0])
    assert np.allclose(qsim.reflection_about_zero(qsim.QState.basis(lay, {"q": 1}), ["q"]).amplitudes, [0, -1])
    lay = qsim.RegisterLayout([("a", 1), ("b", 2), ("c", 1)])
    s = _rand_state(lay, 5)
    diag = -np.ones(8)
    diag[0] = 1
    ref = qsim.apply_unitary(s, ["a", "b"], np.diag(diag))
    assert np.allclose(qsim.reflection_about_zero(s, ["a", "b"]).amplitudes, ref.amplitudes)


def test_controlled_power():
    rng = np.random.default_rng(2)
    lay = qsim.RegisterLayout([("c", 1), ("t", 2)])
    s0 = qsim.QState.from_registers(lay, {"t": _unitary(4, rng)[:, 0]})
    w = _unitary(4, rng)
    assert np.allclose(qsim.controlled_power(s0, 0, w, 1, "t").amplitudes, s0.amplitudes)
    s = _rand_state(lay, 9)
    zz = np.kron(Z, np.eye(2))
    assert np.allclose(qsim.controlled_power(s, 0, zz, 2, "t").amplitudes, s.amplitudes)
    seq = s
    for _ in range(8):
        seq = qsim.apply_unitary(seq, "t", w, controls=(0,))
    assert np.allclose(qsim.controlled_power(s, 0, w, 8, "t").amplitudes, seq.amplitudes, atol=1e-10)


def test_postselect():
    lay = qsim.RegisterLayout([("q", 1)])
    plus = qsim.QState(lay, np.array([1, 1]) / np.sqrt(2))
    s, p = qsim.postselect(plus, "q", 0)
    assert p == pytest.approx(0.5) and np.allclose(s.amplitudes, [1, 0])
    b = qsim.QState.basis(lay, {"q": 1})
    s, p = qsim.postselect(b, "q", 1)
    assert p == pytest.approx(1.0)
    with pytest.raises(PostselectionError):
        qsim.postselect(b, "q", 0)


@given(st.integers(0, 10_000), st.integers(0, 3))
def test_postselect_probability_sum(seed, value):
    lay = qsim.RegisterLayout([("a", 1), ("b", 2)])
    s = _rand_state(lay, seed)
    p = qsim.postselect(s, "b", value)[1]
    direct = np.sum(np.abs(s.tensor_view()[:, value >> 1, value & 1]) ** 2)
    assert p == pytest.approx(direct, abs=1e-12)
    rest = qsim.project(s, "b", value).norm_squared
    assert p + (s.norm_squared - rest) == pytest.approx(1.0, abs=1e-10)


def test_probabilities_and_sampling():
    lay = qsim.RegisterLayout([("a", 2)])
    assert np.allclose(qsim.probabilities(qsim.QState.basis(lay, {"a": 3}), "a"), [0, 0, 0, 1])
    uni = qsim.hadamard_all(qsim.QState.zero(lay), "a")
    assert np.allclose(qsim.probabilities(uni, "a"), 0.25)
    s = _rand_state(lay, 4)
    p = qsim.probabilities(s, "a")
    shots = 100_000
    counts = np.bincount(qsim.sample(s, "a", seed=1, shots=shots), minlength=4)
    sigma = np.sqrt(shots * p * (1 - p))
    assert np.all(np.abs(counts - shots * p) <= 3 * sigma)
    assert qsim.sample(s, "a", seed=3) == qsim.sample(s, "a", seed=3)


def test_signed_value():
    assert qsim.signed_value(0b1011, 4) == -5
    assert qsim.signed_value(0b0101, 4) == 5


def test_register_amplitudes_reorders():
    lay = qsim.RegisterLayout([("a", 1), ("b", 2)])
    s = _rand_state(lay, 6)
    full = s.tensor_view().reshape(2, 4)
    got = s.register_amplitudes(["b", "a"], {})
    assert np.allclose(got.reshape(4, 2), full.T)
    assert np.allclose(s.register_amplitudes(["a"], {"b": 2}), full[:, 2])


def test_dump(tmp_path):
    lay = qsim.RegisterLayout([("a", 1)])
    s = qsim.QState.basis(lay, {"a": 1})
    s.dump(tmp_path / "s.json")
    import json

    obj = json.loads((tmp_path / "s.json").read_text())
    assert obj["amplitudes"] == [[1, 1.0, 0.0]]
