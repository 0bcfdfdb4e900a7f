"""Exact dense statevector simulation over named qubit registers.

Conventions, fixed for the whole package:

* registers are laid out in declaration order, most significant first;
* within a register the first qubit is the most significant bit;
* a basis index over several registers concatenates their bits in the order
  the registers are named in the call.

A w-qubit register holding x with its top bit set reads, as a signed phase,
x - 2^w (two's complement).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .classical import qft_matrix
from .errors import ContractError, PostselectionError, QubitBudgetError, ShapeError

DEFAULT_MAX_QUBITS = 26
UNITARY_TOL = 1e-8


def max_qubits() -> int:
    env = os.environ.get("TSVD_MAX_QUBITS")
    return int(env) if env else DEFAULT_MAX_QUBITS


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __init__(self, registers):
        regs = tuple((str(name), int(width)) for name, width in registers)
        names = [r[0] for r in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"register names must be unique: {names}")
        if any(w < 1 for _, w in regs):
            raise ValueError("register widths must be positive")
        object.__setattr__(self, "registers", regs)

    @property
    def n_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    def offset(self, name: str) -> int:
        off = 0
        for reg, w in self.registers:
            if reg == name:
                return off
            off += w
        raise KeyError(f"no register named {name!r}")

    def width(self, name: str) -> int:
        for reg, w in self.registers:
            if reg == name:
                return w
        raise KeyError(f"no register named {name!r}")

    def qubits(self, name: str) -> list[int]:
        off = self.offset(name)
        return list(range(off, off + self.width(name)))

    def qubits_of(self, regs) -> list[int]:
        if isinstance(regs, str):
            regs = [regs]
        out: list[int] = []
        for r in regs:
            out.extend(self.qubits(r))
        return out

    def names(self) -> list[str]:
        return [r for r, _ in self.registers]

    def check_budget(self) -> None:
        cap = max_qubits()
        if self.n_qubits > cap:
            raise QubitBudgetError(
                f"layout needs {self.n_qubits} qubits ({self.describe()}), above the dense "
                f"simulation cap of {cap}; shrink the tensor or phase register, or raise "
                "TSVD_MAX_QUBITS if memory allows"
            )

    def describe(self) -> str:
        return ", ".join(f"{n}:{w}" for n, w in self.registers)


class QState:
    """Dense amplitudes over a RegisterLayout.

    ``amplitudes`` normally has shape ``(2**n,)``. Operator assembly passes a
    ``(2**n, batch)`` array of columns through the same gate functions.
    """

    __slots__ = ("layout", "amplitudes")

    def __init__(self, layout: RegisterLayout, amplitudes):
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape[0] != 1 << layout.n_qubits:
            raise ShapeError(f"expected {1 << layout.n_qubits} amplitudes, got {amps.shape[0]}")
        self.layout = layout
        self.amplitudes = amps

    @classmethod
    def zero(cls, layout: RegisterLayout) -> "QState":
        layout.check_budget()
        amps = np.zeros(1 << layout.n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(layout, amps)

    @classmethod
    def basis(cls, layout: RegisterLayout, values: dict[str, int]) -> "QState":
        layout.check_budget()
        idx = 0
        for name, w in layout.registers:
            v = int(values.get(name, 0))
            if not 0 <= v < 1 << w:
                raise ValueError(f"value {v} does not fit register {name!r} of width {w}")
            idx = (idx << w) | v
        amps = np.zeros(1 << layout.n_qubits, dtype=np.complex128)
        amps[idx] = 1.0
        return cls(layout, amps)

    @classmethod
    def from_registers(cls, layout: RegisterLayout, vectors: dict[str, np.ndarray]) -> "QState":
        """Product state; ``vectors`` maps a register (or a '+'-joined group of
        adjacent registers) to its amplitude vector. Missing registers are |0>."""
        layout.check_budget()
        pieces = []
        names = layout.names()
        pos = 0
        while pos < len(names):
            for key, vec in vectors.items():
                group = key.split("+")
                if names[pos : pos + len(group)] == group:
                    pieces.append(np.asarray(vec, dtype=np.complex128))
                    pos += len(group)
                    break
            else:
                zero = np.zeros(1 << layout.width(names[pos]), dtype=np.complex128)
                zero[0] = 1.0
                pieces.append(zero)
                pos += 1
        amps = pieces[0]
        for p in pieces[1:]:
            amps = np.kron(amps, p)
        return cls(layout, amps)

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "QState":
        return QState(self.layout, self.amplitudes.copy())

    def with_amplitudes(self, amps) -> "QState":
        return QState(self.layout, amps)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits + self.amplitudes.shape[1:])

    def register_amplitudes(self, keep, fixed: dict[str, int] | None = None) -> np.ndarray:
        """Amplitudes over ``keep`` registers with every other register pinned.

        Registers not in ``keep`` take the value given in ``fixed`` (default 0).
        Result is indexed by the concatenated basis index of ``keep``.
        """
        fixed = fixed or {}
        t = self.tensor_view()
        index: list = [slice(None)] * t.ndim
        for name, w in self.layout.registers:
            if name in keep:
                continue
            v = int(fixed.get(name, 0))
            off = self.layout.offset(name)
            for b in range(w):
                index[off + b] = (v >> (w - 1 - b)) & 1
        sub = t[tuple(index)]
        # remaining axes follow layout order; reorder to the requested order
        layout_keep = [n for n in self.layout.names() if n in keep]
        widths = {n: self.layout.width(n) for n in layout_keep}
        axes_for = {}
        pos = 0
        for n in layout_keep:
            axes_for[n] = list(range(pos, pos + widths[n]))
            pos += widths[n]
        perm = [a for n in keep for a in axes_for[n]] + list(range(pos, sub.ndim))
        sub = np.transpose(sub, perm)
        return sub.reshape((-1,) + self.amplitudes.shape[1:])

    def to_json(self, tol: float = 0.0) -> dict:
        amps = self.amplitudes
        idx = np.nonzero(np.abs(amps) > tol)[0]
        return {
            "layout": [[n, w] for n, w in self.layout.registers],
            "amplitudes": [[int(i), float(amps[i].real), float(amps[i].imag)] for i in idx],
        }

    def dump(self, path, tol: float = 0.0) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(tol), fh)


def _check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> None:
    dim = u.shape[0]
    if u.ndim != 2 or u.shape[1] != dim:
        raise ShapeError(f"expected a square matrix, got {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(dim)))
    if err > tol:
        raise ContractError(f"matrix is not unitary (max |U^dag U - 1| = {err:.2e})")


def _targets(s: QState, regs) -> list[int]:
    return s.layout.qubits_of(regs)


def apply_matrix(s: QState, regs, u, controls=(), control_values=None) -> QState:
    """Apply ``u`` to ``regs`` without a unitarity check (internal fast path)."""
    targets = _targets(s, regs)
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (1 << len(targets), 1 << len(targets)):
        raise ShapeError(f"matrix {u.shape} does not match {len(targets)} target qubits")
    amps = _kernels.apply_gate(s.amplitudes, u, targets, s.n_qubits, controls, control_values)
    return s.with_amplitudes(amps)


def apply_unitary(s: QState, regs, u, controls=(), control_values=None) -> QState:
    """Apply a unitary to the named registers, identity elsewhere."""
    u = np.asarray(u, dtype=np.complex128)
    _check_unitary(u)
    return apply_matrix(s, regs, u, controls, control_values)


def apply_gate(s: QState, qubits, u, controls=(), control_values=None) -> QState:
    """Apply ``u`` to explicit global qubit indices."""
    u = np.asarray(u, dtype=np.complex128)
    amps = _kernels.apply_gate(s.amplitudes, u, list(qubits), s.n_qubits, controls, control_values)
    return s.with_amplitudes(amps)


def _front(amps: np.ndarray, qubits, n: int):
    batch = amps.shape[1:]
    t = amps.reshape((2,) * n + batch)
    moved = np.moveaxis(t, list(qubits), list(range(len(qubits))))
    return moved.reshape((1 << len(qubits), -1)), moved.shape


def _back(flat: np.ndarray, shape, qubits, n: int, batch) -> np.ndarray:
    t = np.moveaxis(flat.reshape(shape), list(range(len(qubits))), list(qubits))
    return np.ascontiguousarray(t).reshape((1 << n,) + batch)


def apply_permutation(s: QState, regs, perm) -> QState:
    """Basis permutation on ``regs``: |x> -> |perm[x]>."""
    qubits = _targets(s, regs)
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (1 << len(qubits),) or not np.array_equal(np.sort(perm), np.arange(perm.size)):
        raise ContractError("perm must be a permutation of the register basis")
    flat, shape = _front(s.amplitudes, qubits, s.n_qubits)
    out = np.empty_like(flat)
    out[perm] = flat
    return s.with_amplitudes(_back(out, shape, qubits, s.n_qubits, s.amplitudes.shape[1:]))


def apply_diagonal(s: QState, regs, values) -> QState:
    """Multiply amplitudes by ``values[x]`` where x is the basis index of ``regs``."""
    qubits = _targets(s, regs)
    values = np.asarray(values, dtype=np.complex128)
    if values.shape != (1 << len(qubits),):
        raise ShapeError("diagonal length does not match registers")
    flat, shape = _front(s.amplitudes, qubits, s.n_qubits)
    return s.with_amplitudes(_back(flat * values[:, None], shape, qubits, s.n_qubits, s.amplitudes.shape[1:]))


def apply_phase_table(s: QState, row_regs, col_regs, table) -> QState:
    """Multiply by ``table[x, y]`` with x indexing ``row_regs`` and y ``col_regs``."""
    rq = _targets(s, row_regs)
    cq = _targets(s, col_regs)
    table = np.asarray(table, dtype=np.complex128)
    flat, shape = _front(s.amplitudes, rq + cq, s.n_qubits)
    flat = flat * table.reshape(-1)[:, None]
    return s.with_amplitudes(_back(flat, shape, rq + cq, s.n_qubits, s.amplitudes.shape[1:]))


def hadamard_all(s: QState, reg) -> QState:
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    for q in s.layout.qubits(reg):
        s = apply_gate(s, [q], h)
    return s


def qft(s: QState, reg) -> QState:
    return apply_matrix(s, reg, qft_matrix(1 << s.layout.width(reg)))


def iqft(s: QState, reg) -> QState:
    return apply_matrix(s, reg, qft_matrix(1 << s.layout.width(reg)).conj().T)


def reflection_about_zero(s: QState, regs) -> QState:
    """2|0><0| - 1 on the named registers (identity on the rest)."""
    qubits = _targets(s, regs)
    t = s.tensor_view()
    out = -t
    index: list = [slice(None)] * t.ndim
    for q in qubits:
        index[q] = 0
    out[tuple(index)] = t[tuple(index)]
    return s.with_amplitudes(out.reshape(s.amplitudes.shape))


def controlled_power(s: QState, control: int, w, power: int, target_regs) -> QState:
    """Apply ``w**power`` to ``target_regs`` on the |1> branch of qubit ``control``."""
    if power < 1:
        raise ValueError("power must be >= 1")
    w = np.asarray(w, dtype=np.complex128)
    _check_unitary(w)
    wp = np.linalg.matrix_power(w, power)
    return apply_matrix(s, target_regs, wp, controls=(control,))


def _index_mask(s: QState, reg, value: int):
    w = s.layout.width(reg)
    if not 0 <= value < 1 << w:
        raise ValueError(f"value {value} does not fit register {reg!r}")
    index: list = [slice(None)] * (s.n_qubits + s.amplitudes.ndim - 1)
    off = s.layout.offset(reg)
    for b in range(w):
        index[off + b] = (value >> (w - 1 - b)) & 1
    return tuple(index)


def project(s: QState, reg, value: int) -> QState:
    """Unnormalised projection onto ``reg == value``."""
    t = s.tensor_view()
    out = np.zeros_like(t)
    idx = _index_mask(s, reg, value)
    out[idx] = t[idx]
    return s.with_amplitudes(out.reshape(s.amplitudes.shape))


def postselect(s: QState, reg, value: int) -> tuple[QState, float]:
    """Project onto ``reg == value`` and renormalise; returns (state, probability)."""
    total = s.norm_squared
    proj = project(s, reg, value)
    p = proj.norm_squared / total if total > 0 else 0.0
    if p <= 0.0:
        raise PostselectionError(f"register {reg!r} has zero probability of reading {value}")
    return proj.with_amplitudes(proj.amplitudes / np.sqrt(proj.norm_squared)), p


def probabilities(s: QState, regs) -> np.ndarray:
    """Exact marginal distribution over ``regs`` (basis index in the given order)."""
    if isinstance(regs, str):
        regs = [regs]
    qubits = _targets(s, regs)
    flat, _ = _front(s.amplitudes, qubits, s.n_qubits)
    p = np.sum(np.abs(flat) ** 2, axis=1)
    return p / np.sum(p)


def sample(s: QState, regs, seed=None, shots: int | None = None):
    """Draw basis indices of ``regs`` from the exact marginal with a seeded generator."""
    p = probabilities(s, regs)
    rng = np.random.default_rng(seed)
    if shots is None:
        return int(rng.choice(p.size, p=p))
    return rng.choice(p.size, size=shots, p=p)


def signed_value(x: int, width: int) -> int:
    """Two's-complement reading of a width-bit register value."""
    return x - (1 << width) if x >> (width - 1) & 1 else x


def operator_matrix(layout: RegisterLayout, circuit) -> np.ndarray:
    """Dense matrix of ``circuit`` (a QState -> QState function) over ``layout``."""
    dim = 1 << layout.n_qubits
    s = QState(layout, np.eye(dim, dtype=np.complex128))
    return circuit(s).amplitudes
