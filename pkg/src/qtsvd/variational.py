"""Variational t-SVD with an amplitude-encoded block encoding.

Registers: ``ind`` (l qubits, face index), ``dat`` (2n qubits, Z-order
flattened face), ``isr`` (n qubits, singular-vector index).

The circuit for one index i: prepare |A_flat> on (ind, dat) and |i> on isr,
inverse QFT on ind, ansatz W(beta) on (ind, isr), block encoding on
(dat, isr), W(alpha)^dag on (ind, isr), then read |0>_dat |i>_isr. Because the
ansatz is block-diagonal in ind, the |m> block of W(beta) is V'_m and that of
W(alpha) is U'_m, and

    objective = sum_m sum_{i<T} |<i| U'_m^dag A~^(m) V'_m |i>|^2 / (||A||^2 2^n).

The raw objective is therefore at most 2^-n; ``2^n * objective`` is the
fraction of Frobenius mass captured on the diagonal.

Two evaluation routes exist. The circuit route runs the statevector
simulator gate by gate. The block route builds every ansatz block directly
(batched over parameter vectors) and contracts with the Fourier faces; the
optimizer uses it and tests pin it to the circuit route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .classical import inverse_mode3_dft, mode3_dft
from .errors import ContractError, PostselectionError, ShapeError
from .tensor import Tensor3, flatten_tensor, frobenius_norm

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)

# four-term shift rule for generators with spectrum {0, +-1/2}
_C_PLUS = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C_MINUS = (math.sqrt(2) - 1) / (4 * math.sqrt(2))


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz_batch(theta: np.ndarray) -> np.ndarray:
    out = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = np.exp(-0.5j * theta)
    out[..., 1, 1] = np.exp(0.5j * theta)
    return out


def _ry_batch(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def params_per_layer(n: int, l: int) -> int:
    return 2 * n + 2 * l * n


def widths_of(t: Tensor3) -> tuple[int, int]:
    """(n, l) for a 2^n x 2^n x 2^l tensor."""
    m, nn, ll = t.dims
    if m != nn or m & (m - 1) or ll & (ll - 1):
        raise ShapeError(f"variational t-SVD needs 2^n x 2^n x 2^l dims, got {t.dims}; use pad_pow2(square=True)")
    return m.bit_length() - 1, ll.bit_length() - 1


@dataclass(frozen=True)
class AnsatzParams:
    """Angles for W(alpha) and W(beta), ``layers * (2n + 2ln)`` each.

    Per layer the order is: RZ on isr qubits 0..n-1, RY on isr qubits
    0..n-1, then controlled-RZ for ind qubit a ascending and isr qubit b
    ascending, then controlled-RY in the same order.
    """

    layers: int
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if self.layers < 1:
            raise ContractError("layers must be positive")
        if a.shape != b.shape or a.ndim != 1 or a.size % self.layers:
            raise ContractError(f"alpha/beta lengths {a.shape}, {b.shape} do not fit {self.layers} layers")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ContractError("ansatz parameters must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def check(self, n: int, l: int) -> None:
        want = self.layers * params_per_layer(n, l)
        if self.alpha.size != want:
            raise ContractError(f"expected {want} angles per set for n={n}, l={l}, got {self.alpha.size}")

    @classmethod
    def random(cls, n: int, l: int, layers: int, seed=None) -> "AnsatzParams":
        rng = np.random.default_rng(seed)
        size = layers * params_per_layer(n, l)
        # uniform on (-pi, pi]
        a = math.pi - 2 * math.pi * rng.random(size)
        b = math.pi - 2 * math.pi * rng.random(size)
        return cls(layers, a, b)

    @classmethod
    def zeros(cls, n: int, l: int, layers: int) -> "AnsatzParams":
        size = layers * params_per_layer(n, l)
        return cls(layers, np.zeros(size), np.zeros(size))

    def to_json(self) -> dict:
        return {"layers": self.layers, "alpha": self.alpha.tolist(), "beta": self.beta.tolist()}


def _gate_sequence(n: int, l: int, layers: int):
    """Yield (kind, param_index, target_isr, control_ind) in circuit order.

    kind is "cnot" (param_index None, target is the control's successor), "rz",
    "ry", "crz" or "cry".
    """
    per = params_per_layer(n, l)
    for layer in range(layers):
        base = layer * per
        for q in range(n - 1):
            yield "cnot", None, q + 1, q
        for q in range(n):
            yield "rz", base + q, q, None
        for q in range(n):
            yield "ry", base + n + q, q, None
        for a in range(l):
            for q in range(n):
                yield "crz", base + 2 * n + a * n + q, q, a
        for a in range(l):
            for q in range(n):
                yield "cry", base + 2 * n + l * n + a * n + q, q, a


def ansatz_apply(s: qsim.QState, theta, layers: int, ind_reg="ind", isr_reg="isr", adjoint: bool = False) -> qsim.QState:
    """Apply W(theta) (or its inverse) gate by gate; ind is only ever a control."""
    n = s.layout.width(isr_reg)
    l = s.layout.width(ind_reg)
    theta = np.asarray(theta, dtype=float)
    if theta.size != layers * params_per_layer(n, l):
        raise ContractError(f"expected {layers * params_per_layer(n, l)} angles, got {theta.size}")
    isr = s.layout.qubits(isr_reg)
    ind = s.layout.qubits(ind_reg)
    gates = list(_gate_sequence(n, l, layers))
    if adjoint:
        gates.reverse()
    for kind, p, tq, cq in gates:
        if kind == "cnot":
            s = qsim.apply_gate(s, [isr[tq]], _X, controls=(isr[cq],))
            continue
        ang = -theta[p] if adjoint else theta[p]
        u = rz(ang) if kind in ("rz", "crz") else ry(ang)
        controls = (ind[cq],) if kind in ("crz", "cry") else ()
        s = qsim.apply_gate(s, [isr[tq]], u, controls=controls)
    return s


def _left_apply(blocks: np.ndarray, gate: np.ndarray, q: int, n: int) -> np.ndarray:
    """blocks[..., N, N] <- (gate on isr qubit q) @ blocks; gate is [..., 2, 2]."""
    shp = blocks.shape
    lead = shp[:-2]
    b = blocks.reshape(lead + (1 << q, 2, 1 << (n - q - 1), shp[-1]))
    g = gate.reshape(gate.shape[:-2] + (1,) * 0 + (2, 2))
    out = np.einsum("...xy,...ayct->...axct", g, b)
    return out.reshape(shp)


def ansatz_blocks(theta: np.ndarray, n: int, l: int, layers: int) -> np.ndarray:
    """Blocks <m|W(theta)|m> for every face m, batched over leading axes of theta.

    ``theta`` has shape (..., P); the result has shape (..., 2^l, 2^n, 2^n).
    """
    theta = np.asarray(theta, dtype=float)
    batch = theta.shape[:-1]
    dim, faces = 1 << n, 1 << l
    blocks = np.broadcast_to(np.eye(dim, dtype=np.complex128), batch + (faces, dim, dim)).copy()
    # bit a of face m (ind qubit a is MSB-first)
    mbits = np.array([[(m >> (l - 1 - a)) & 1 for a in range(l)] for m in range(faces)], dtype=float)
    cnot = np.zeros((4, 4), dtype=np.complex128)
    cnot[[0, 1, 2, 3], [0, 1, 3, 2]] = 1.0
    for kind, p, tq, cq in _gate_sequence(n, l, layers):
        if kind == "cnot":
            # CNOT on adjacent isr qubits (cq, cq + 1) as a 4x4 on the pair
            shp = blocks.shape
            b = blocks.reshape(shp[:-2] + (1 << cq, 4, 1 << (n - cq - 2), shp[-1]))
            blocks = np.einsum("xy,...ayct->...axct", cnot, b).reshape(shp)
            continue
        ang = theta[..., p]
        if kind in ("rz", "ry"):
            g = _rz_batch(ang) if kind == "rz" else _ry_batch(ang)
            g = g[..., None, :, :]  # same gate on every face
        else:
            # controlled: active angle on faces whose ind bit cq is set
            eff = ang[..., None] * mbits[:, cq]
            g = _rz_batch(eff) if kind == "crz" else _ry_batch(eff)
        blocks = _left_apply(blocks, g, tq, n)
    return blocks


def fourier_faces(t: Tensor3) -> np.ndarray:
    """A~^(m) stacked as (L, N, N)."""
    return np.moveaxis(mode3_dft(t).data, 2, 0)


def diag_values_from_blocks(faces: np.ndarray, u_blocks: np.ndarray, v_blocks: np.ndarray) -> np.ndarray:
    """<i| U_m^dag A~^(m) V_m |i> for every (m, i); batched over leading axes."""
    m = np.einsum("...mai,mab,...mbi->...mi", u_blocks.conj(), faces, v_blocks)
    return m


def objective_blocks(faces: np.ndarray, norm: float, u_blocks, v_blocks, T: int) -> np.ndarray:
    n_dim = faces.shape[-1]
    d = diag_values_from_blocks(faces, u_blocks, v_blocks)[..., :T]
    return np.sum(np.abs(d) ** 2, axis=(-2, -1)) / (norm**2 * n_dim)


# ---- circuit route ------------------------------------------------------


def circuit_layout(n: int, l: int) -> qsim.RegisterLayout:
    return qsim.RegisterLayout([("ind", l), ("dat", 2 * n), ("isr", n)])


def block_encode_apply(s: qsim.QState, dat_reg: str = "dat", isr_reg: str = "isr") -> qsim.QState:
    """Amplitude-encoded block encoding of the matrix held in ``dat``.

    Pair p = (dat[2p], dat[2p+1]) carries column bit and row bit n-1-p of the
    Z-order index and acts on isr[p]. With dat postselected on |0>, isr holds
    A psi / (||A||_F sqrt(2^n)).
    """
    dat = s.layout.qubits(dat_reg)
    isr = s.layout.qubits(isr_reg)
    if len(dat) != 2 * len(isr):
        raise ShapeError(f"dat register needs {2 * len(isr)} qubits for an isr register of {len(isr)}, got {len(dat)}")
    for p, target in enumerate(isr):
        c, r = dat[2 * p], dat[2 * p + 1]
        s = qsim.apply_gate(s, [c], _X, controls=(r,))
        s = qsim.apply_gate(s, [r], _H)
        s = qsim.apply_gate(s, [target], _X, controls=(c,))
        s = qsim.apply_gate(s, [target], _Z, controls=(r,))
    for q in dat:
        s = qsim.apply_gate(s, [q], _H)
    return s


def block_encoded_branch(a: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Run the block encoding for matrix ``a`` on |psi> and return the dat=0 isr amplitudes."""
    a = np.asarray(a, dtype=np.complex128)
    dim = a.shape[0]
    n = dim.bit_length() - 1
    from .tensor import zorder_flatten

    flat = zorder_flatten(a)
    nrm = np.linalg.norm(flat)
    if nrm == 0:
        raise PostselectionError("zero matrix: the dat=0 branch is empty")
    layout = qsim.RegisterLayout([("dat", 2 * n), ("isr", n)])
    s = qsim.QState.from_registers(layout, {"dat": flat / nrm, "isr": np.asarray(psi, dtype=np.complex128)})
    s = block_encode_apply(s)
    return s.register_amplitudes(["isr"], {"dat": 0})


def step5_state(t: Tensor3, params: AnsatzParams, i: int) -> qsim.QState:
    """State after Steps 1-5 for singular index i."""
    n, l = widths_of(t)
    params.check(n, l)
    layout = circuit_layout(n, l)
    isr = np.zeros(1 << n, dtype=np.complex128)
    isr[i] = 1.0
    s = qsim.QState.from_registers(layout, {"ind+dat": flatten_tensor(t), "isr": isr})
    s = qsim.iqft(s, "ind")
    s = ansatz_apply(s, params.beta, params.layers)
    s = block_encode_apply(s)
    return ansatz_apply(s, params.alpha, params.layers, adjoint=True)


def objective_circuit(t: Tensor3, params: AnsatzParams, T: int) -> float:
    n, _ = widths_of(t)
    _check_T(T, n)
    total = 0.0
    for i in range(T):
        s = step5_state(t, params, i)
        amps = s.register_amplitudes(["ind"], {"dat": 0, "isr": i})
        total += float(np.sum(np.abs(amps) ** 2))
    return total


def objective(t: Tensor3, params: AnsatzParams, T: int, method: str = "blocks") -> float:
    """Sum over i < T of Pr(|0>_dat |i>_isr) after Step 5."""
    if method == "circuit":
        return objective_circuit(t, params, T)
    n, l = widths_of(t)
    _check_T(T, n)
    params.check(n, l)
    faces = fourier_faces(t)
    u = ansatz_blocks(params.alpha, n, l, params.layers)
    v = ansatz_blocks(params.beta, n, l, params.layers)
    return float(objective_blocks(faces, frobenius_norm(t), u, v, T))


def _check_T(T: int, n: int) -> None:
    if not 1 <= T <= 1 << n:
        raise ValueError(f"T must lie in [1, {1 << n}], got {T}")


def sigma_from_probability(state: qsim.QState, m: int, i: int, norm: float) -> float:
    """sigma'_i^(m) = sqrt(Pr(|m>|0>|i>) ||A||^2 2^n) from a Step-5 state."""
    n = state.layout.width("isr")
    amp = state.register_amplitudes([], {"ind": m, "dat": 0, "isr": i})
    p = float(np.abs(amp[0]) ** 2) / state.norm_squared
    return math.sqrt(p * norm**2 * (1 << n))


def diag_value_from_state(state: qsim.QState, m: int, i: int, norm: float) -> complex:
    n = state.layout.width("isr")
    amp = state.register_amplitudes([], {"ind": m, "dat": 0, "isr": i})[0]
    return complex(amp * norm * math.sqrt(1 << n))


# ---- reconstruction -----------------------------------------------------


def reconstruct_faces(u_blocks, v_blocks, diag: np.ndarray, T: int, magnitude_only: bool = False) -> np.ndarray:
    """A~rec^(m) = sum_{i<T} c_i U_m|i><i|V_m^dag with c = d or |d|."""
    c = np.abs(diag[:, :T]) if magnitude_only else diag[:, :T]
    return np.einsum("mai,mi,mbi->mab", u_blocks[:, :, :T], c, v_blocks[:, :, :T].conj())


def reconstruct(t: Tensor3, params: AnsatzParams, T: int, magnitude_only: bool = False) -> Tensor3:
    n, l = widths_of(t)
    params.check(n, l)
    faces = fourier_faces(t)
    u = ansatz_blocks(params.alpha, n, l, params.layers)
    v = ansatz_blocks(params.beta, n, l, params.layers)
    diag = diag_values_from_blocks(faces, u, v)
    rec = reconstruct_faces(u, v, diag, T, magnitude_only)
    return inverse_mode3_dft(Tensor3(np.moveaxis(rec, 0, 2), is_real=False))


def reconstruction_error(t: Tensor3, params: AnsatzParams, T: int, magnitude_only: bool = False) -> float:
    """||A - A^rec||_F (equal to ||A~ - A~rec||_F, the transform being unitary)."""
    rec = reconstruct(t, params, T, magnitude_only)
    return float(np.linalg.norm((rec.data - t.data).ravel()))


# ---- optimisation -------------------------------------------------------


@dataclass
class VtsvdResult:
    params: AnsatzParams
    objective_trace: list[float]
    best_trace: list[float]
    objective: float
    sigma_prime: np.ndarray  # [i][m]
    diag_values: np.ndarray  # [m][i]
    reconstructed: Tensor3
    T: int
    magnitude_only: bool = False
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        rec = self.reconstructed.data.reshape(-1)
        return {
            "T": self.T,
            "layers": self.params.layers,
            "alpha": self.params.alpha.tolist(),
            "beta": self.params.beta.tolist(),
            "objective": self.objective,
            "normalized_objective": self.meta.get("normalized_objective"),
            "objective_trace": self.objective_trace,
            "sigma_prime": self.sigma_prime.tolist(),
            "diag_values": [[[float(z.real), float(z.imag)] for z in row] for row in self.diag_values],
            "magnitude_only": self.magnitude_only,
            "reconstructed": {
                "dims": list(self.reconstructed.dims),
                "entries": [[float(z.real), float(z.imag)] for z in rec],
            },
            "reconstruction_error": self.meta.get("reconstruction_error"),
        }


def _shift_table(n: int, l: int, layers: int):
    """(param indices, shifts, weights) of the parameter-shift rule per parameter."""
    kinds = {}
    for kind, p, _, _ in _gate_sequence(n, l, layers):
        if p is not None:
            kinds[p] = kind
    rows = []
    for p in range(layers * params_per_layer(n, l)):
        if kinds[p] in ("rz", "ry"):
            rows += [(p, math.pi / 2, 0.5), (p, -math.pi / 2, -0.5)]
        else:
            rows += [
                (p, math.pi / 2, _C_PLUS),
                (p, -math.pi / 2, -_C_PLUS),
                (p, 3 * math.pi / 2, -_C_MINUS),
                (p, -3 * math.pi / 2, _C_MINUS),
            ]
    idx = np.array([r[0] for r in rows])
    shift = np.array([r[1] for r in rows])
    weight = np.array([r[2] for r in rows])
    return idx, shift, weight


def parameter_shift_gradient(t: Tensor3, params: AnsatzParams, T: int):
    """Exact (d obj / d alpha, d obj / d beta) by the two- and four-term shift rules."""
    n, l = widths_of(t)
    faces = fourier_faces(t)
    norm = frobenius_norm(t)
    return _gradient(faces, norm, params.alpha, params.beta, n, l, params.layers, T, _shift_table(n, l, params.layers))


def _gradient(faces, norm, alpha, beta, n, l, layers, T, table):
    idx, shift, weight = table
    size = alpha.size
    u0 = ansatz_blocks(alpha, n, l, layers)
    v0 = ansatz_blocks(beta, n, l, layers)
    shifted = np.repeat(beta[None, :], idx.size, axis=0)
    shifted[np.arange(idx.size), idx] += shift
    vals = objective_blocks(faces, norm, u0[None], ansatz_blocks(shifted, n, l, layers), T)
    g_beta = np.bincount(idx, weights=weight * vals, minlength=size)
    shifted = np.repeat(alpha[None, :], idx.size, axis=0)
    shifted[np.arange(idx.size), idx] += shift
    vals = objective_blocks(faces, norm, ansatz_blocks(shifted, n, l, layers), v0[None], T)
    g_alpha = np.bincount(idx, weights=weight * vals, minlength=size)
    f0 = float(objective_blocks(faces, norm, u0, v0, T))
    return g_alpha, g_beta, f0


def optimize(
    t: Tensor3,
    T: int,
    layers: int = 2,
    seed=0,
    budget: int = 500,
    lr: float = 0.05,
    magnitude_only: bool = False,
    init: AnsatzParams | None = None,
) -> VtsvdResult:
    """Adam ascent on the objective with parameter-shift gradients.

    Starts from uniform(-pi, pi] angles drawn with ``seed``. Returns the best
    parameters seen; ``objective_trace`` holds the objective at each iterate.
    """
    if budget < 1:
        raise ValueError("budget must be at least one iteration")
    n, l = widths_of(t)
    _check_T(T, n)
    params = AnsatzParams.random(n, l, layers, seed) if init is None else init
    params.check(n, l)
    faces = fourier_faces(t)
    norm = frobenius_norm(t)
    table = _shift_table(n, l, layers)
    x = np.concatenate([params.alpha, params.beta])
    size = params.alpha.size
    m1 = np.zeros_like(x)
    m2 = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    trace, best_trace = [], []
    best_x, best_f = x.copy(), -math.inf
    for it in range(1, budget + 1):
        ga, gb, f = _gradient(faces, norm, x[:size], x[size:], n, l, layers, T, table)
        if not math.isfinite(f):
            raise FloatingPointError(f"objective became {f} at iteration {it}")
        trace.append(f)
        if f > best_f:
            best_f, best_x = f, x.copy()
        best_trace.append(best_f)
        g = np.concatenate([ga, gb])
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        step = lr * (m1 / (1 - b1**it)) / (np.sqrt(m2 / (1 - b2**it)) + eps)
        x = x + step  # ascent
    # the final step's landing point is evaluated too
    f_last = float(
        objective_blocks(faces, norm, ansatz_blocks(x[:size], n, l, layers), ansatz_blocks(x[size:], n, l, layers), T)
    )
    if f_last > best_f:
        best_f, best_x = f_last, x.copy()
    best = AnsatzParams(layers, best_x[:size], best_x[size:])
    return finalize(t, best, T, trace, best_trace, magnitude_only)


def finalize(t: Tensor3, params: AnsatzParams, T: int, trace=(), best_trace=(), magnitude_only=False) -> VtsvdResult:
    n, l = widths_of(t)
    faces = fourier_faces(t)
    u = ansatz_blocks(params.alpha, n, l, params.layers)
    v = ansatz_blocks(params.beta, n, l, params.layers)
    diag = diag_values_from_blocks(faces, u, v)
    norm = frobenius_norm(t)
    obj = float(np.sum(np.abs(diag[:, :T]) ** 2) / (norm**2 * (1 << n)))
    rec = reconstruct_faces(u, v, diag, T, magnitude_only)
    rec_t = inverse_mode3_dft(Tensor3(np.moveaxis(rec, 0, 2), is_real=False))
    err = float(np.linalg.norm((rec_t.data - t.data).ravel()))
    return VtsvdResult(
        params=params,
        objective_trace=[float(x) for x in trace],
        best_trace=[float(x) for x in best_trace],
        objective=obj,
        sigma_prime=np.abs(diag[:, :T]).T.copy(),
        diag_values=diag[:, :T].copy(),
        reconstructed=rec_t,
        T=T,
        magnitude_only=magnitude_only,
        meta={"normalized_objective": obj * (1 << n), "reconstruction_error": err},
    )


def mse(tensors, results) -> float:
    """Mean over tensors of ||A^rec - A||_F^2."""
    errs = [float(np.sum(np.abs(r.reconstructed.data - t.data) ** 2)) for t, r in zip(tensors, results)]
    return float(np.mean(errs))
