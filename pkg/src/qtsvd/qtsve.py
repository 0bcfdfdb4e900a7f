"""Quantum t-SVE: walk operator, signed phase estimation, |x| operator K.

QtSVE is parameterised by a binding of its six roles ("1".."4", "phase",
"abs") to register names, so the truncation pipeline can run it as
QtSVE_{5243} on its own layout.

Phase estimation has two exact evaluation routes. ``method="dense"`` applies
controlled W^(2^j) with dense matrix powers, gate by gate. ``method="spectral"``
rotates the target registers into W's eigenbasis once and applies every
controlled power as a diagonal phase table; the two agree to rounding and the
spectral route is what makes 20+ qubit truncation sweeps affordable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import qsim
from .classical import SveParams
from .errors import ContractError
from .stateprep import PreparedOperators, apply_p_prime, apply_q_prime, walk_layout

DEFAULT_BINDINGS = {"1": "r1", "2": "r2", "3": "r3", "4": "r4", "phase": "phase", "abs": "abs"}


class WalkOperator:
    """W = (2PP^dag - 1)(2QQ^dag - 1) as a dense unitary over roles (1, 2, 3, 4)."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=np.complex128)
        self._powers: dict[int, np.ndarray] = {1: self.matrix}
        self._eigen: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def power(self, p: int) -> np.ndarray:
        """W^p by repeated squaring, cached."""
        if p < 1:
            raise ValueError("power must be >= 1")
        if p in self._powers:
            return self._powers[p]
        result = None
        base_exp = 1
        remaining = p
        while remaining:
            if remaining & 1:
                blk = self._square_to(base_exp)
                result = blk if result is None else blk @ result
            remaining >>= 1
            base_exp <<= 1
        self._powers[p] = result
        return result

    def _square_to(self, e: int) -> np.ndarray:
        if e not in self._powers:
            half = self._square_to(e // 2)
            self._powers[e] = half @ half
        return self._powers[e]

    @property
    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenphases in (-pi, pi], unitary eigenvector matrix) via complex Schur.

        W is normal, so its Schur form is diagonal and the Schur vectors are an
        orthonormal eigenbasis even inside degenerate eigenspaces.
        """
        if self._eigen is None:
            tri, z = scipy.linalg.schur(self.matrix, output="complex")
            off = np.max(np.abs(np.triu(tri, 1))) if tri.shape[0] > 1 else 0.0
            if off > 1e-8:
                raise ArithmeticError(f"walk operator Schur form not diagonal (off-diagonal {off:.2e})")
            self._eigen = (np.angle(np.diag(tri)), z)
        return self._eigen

    def eigenphases(self) -> np.ndarray:
        return self.eigen[0]


def build_walk(ops: PreparedOperators) -> WalkOperator:
    """Assemble W from P' and Q' and the two reflections about |0>."""

    def circuit(s):
        s = apply_q_prime(s, ops, adjoint=True)
        s = qsim.reflection_about_zero(s, ["r1", "r3"])
        s = apply_q_prime(s, ops)
        s = apply_p_prime(s, ops, adjoint=True)
        s = qsim.reflection_about_zero(s, ["r2", "r4"])
        s = apply_p_prime(s, ops)
        return s

    return WalkOperator(qsim.operator_matrix(walk_layout(ops), circuit))


def _targets(bindings) -> list[str]:
    return [bindings[r] for r in ("1", "2", "3", "4")]


def qpe(
    s: qsim.QState,
    w: WalkOperator,
    phase_reg: str = "phase",
    bindings=DEFAULT_BINDINGS,
    method: str = "dense",
    adjoint: bool = False,
) -> qsim.QState:
    """Phase estimation of W on the bound targets into ``phase_reg``.

    Forward: Hadamards, controlled W^(2^j) on the qubit of weight 2^j, inverse
    QFT. An eigenphase phi lands near the signed value 2^n_p phi / (2 pi).
    """
    targets = _targets(bindings)
    if method == "spectral":
        phases, z = w.eigen
        n_p = s.layout.width(phase_reg)
        table = _phase_table(phases, n_p)
        if not adjoint:
            s = qsim.apply_matrix(s, targets, z.conj().T)
            s = _spectral_core(s, phase_reg, targets, table)
            return qsim.apply_matrix(s, targets, z)
        s = qsim.apply_matrix(s, targets, z.conj().T)
        s = _spectral_core(s, phase_reg, targets, table, adjoint=True)
        return qsim.apply_matrix(s, targets, z)
    if method != "dense":
        raise ValueError(f"unknown QPE method {method!r}")
    qubits = s.layout.qubits(phase_reg)
    n_p = len(qubits)
    if not adjoint:
        s = qsim.hadamard_all(s, phase_reg)
        for b, q in enumerate(qubits):
            s = qsim.apply_matrix(s, targets, w.power(1 << (n_p - 1 - b)), controls=(q,))
        return qsim.iqft(s, phase_reg)
    s = qsim.qft(s, phase_reg)
    for b, q in enumerate(qubits):
        s = qsim.apply_matrix(s, targets, w.power(1 << (n_p - 1 - b)).conj().T, controls=(q,))
    return qsim.hadamard_all(s, phase_reg)


def _phase_table(phases: np.ndarray, n_p: int) -> np.ndarray:
    x = np.arange(1 << n_p)
    return np.exp(1j * np.outer(phases, x))


def _spectral_core(s, phase_reg, targets, table, adjoint=False):
    # QPE with the targets already in W's eigenbasis
    if not adjoint:
        s = qsim.hadamard_all(s, phase_reg)
        s = qsim.apply_phase_table(s, targets, phase_reg, table)
        return qsim.iqft(s, phase_reg)
    s = qsim.qft(s, phase_reg)
    s = qsim.apply_phase_table(s, targets, phase_reg, table.conj())
    return qsim.hadamard_all(s, phase_reg)


def abs_value_map(n_p: int, d: int, mode: str = "round") -> np.ndarray:
    """g(x) for each phase-register value x: |x| (two's complement) on d bits.

    ``mode="floor"`` keeps the top d bits of the n_p-bit magnitude, the literal
    bit-copy circuit; ``mode="round"`` rounds |x| / 2^(n_p - d) half-up, which
    is the nearest d-bit approximation of 2^d |phi| / (2 pi).
    """
    if not 1 <= d <= n_p:
        raise ValueError(f"need 1 <= d <= n_p, got d={d}, n_p={n_p}")
    x = np.arange(1 << n_p)
    mag = np.where(x >> (n_p - 1) & 1, (1 << n_p) - x, x)
    shift = n_p - d
    if mode == "floor":
        g = mag >> shift
    elif mode == "round":
        g = (mag + ((1 << shift) >> 1)) >> shift if shift else mag
    else:
        raise ValueError(f"unknown abs mode {mode!r}")
    return g


def abs_permutation(n_p: int, d: int, mode: str = "round") -> np.ndarray:
    """K as a basis permutation over (phase, abs): |x>|y> -> |x>|y xor g(x)>."""
    g = abs_value_map(n_p, d, mode)
    x, y = np.divmod(np.arange(1 << (n_p + d)), 1 << d)
    return x * (1 << d) + (y ^ g[x])


def abs_phase(s: qsim.QState, phase_reg: str = "phase", abs_reg: str = "abs", mode: str = "round") -> qsim.QState:
    n_p = s.layout.width(phase_reg)
    d = s.layout.width(abs_reg)
    if d > n_p:
        raise ContractError(f"abs register ({d}) wider than phase register ({n_p})")
    return qsim.apply_permutation(s, [phase_reg, abs_reg], abs_permutation(n_p, d, mode))


@dataclass
class QtsveOutcome:
    state: qsim.QState
    d: int
    n_p: int
    error_bound: float | None
    bindings: dict = field(default_factory=lambda: dict(DEFAULT_BINDINGS))


def qtsve_layout(ops: PreparedOperators, params: SveParams) -> qsim.RegisterLayout:
    nm, nn, nl = ops.widths
    return qsim.RegisterLayout(
        [("r1", nm), ("r2", nn), ("r3", nl), ("r4", nl), ("phase", params.n_p), ("abs", params.d)]
    )


def qtsve_pass(
    s: qsim.QState,
    ops: PreparedOperators,
    params: SveParams,
    walk: WalkOperator | None = None,
    bindings=DEFAULT_BINDINGS,
    method: str = "spectral",
    abs_mode: str = "round",
) -> QtsveOutcome:
    """Steps 1-4: Q', QPE(W), K then inverse QPE, Q'^dag.

    The pass is its own inverse (K is an XOR permutation), so applying it
    twice returns the input.
    """
    layout = s.layout
    if layout.width(bindings["phase"]) != params.n_p or layout.width(bindings["abs"]) != params.d:
        raise ContractError(
            f"register widths (phase={layout.width(bindings['phase'])}, abs={layout.width(bindings['abs'])}) "
            f"do not match params (n_p={params.n_p}, d={params.d})"
        )
    walk = build_walk(ops) if walk is None else walk
    roles = [bindings[r] for r in ("1", "2", "3", "4")]
    phase, absr = bindings["phase"], bindings["abs"]
    s = apply_q_prime(s, ops, roles)
    if method == "spectral":
        phases, z = walk.eigen
        table = _phase_table(phases, params.n_p)
        s = qsim.apply_matrix(s, roles, z.conj().T)
        s = _spectral_core(s, phase, roles, table)
        s = abs_phase(s, phase, absr, abs_mode)
        s = _spectral_core(s, phase, roles, table, adjoint=True)
        s = qsim.apply_matrix(s, roles, z)
    else:
        s = qpe(s, walk, phase, bindings, method="dense")
        s = abs_phase(s, phase, absr, abs_mode)
        s = qpe(s, walk, phase, bindings, method="dense", adjoint=True)
    s = apply_q_prime(s, ops, roles, adjoint=True)
    bound = math.sqrt(2) * params.epsilon if params.epsilon is not None else None
    return QtsveOutcome(state=s, d=params.d, n_p=params.n_p, error_bound=bound, bindings=dict(bindings))


def theta_encoding(theta: float, d: int) -> float:
    """Real-valued target 2^d theta / (2 pi) that the abs register approximates."""
    return 2**d * theta / (2 * math.pi)


def jordan_eigenvectors(ops: PreparedOperators, factors, k: int, i: int):
    """(Psi_plus, Psi_minus, theta) for oracle pair (i, k), over roles (1, 2, 3, 4).

    Built as (Q b -/+ i (Q b)^perp)/sqrt(2) with b = v~_i^(k) (x) |k~> and
    (Q b)^perp the unit part of P P^dag Q b orthogonal to Q b.
    """
    from .stateprep import isometries

    m, n, l = ops.tensor.dims
    p_iso, q_iso = isometries(ops)
    b = np.zeros(n * l, dtype=np.complex128)
    b[np.arange(n) * l + k] = factors.v[k][:, i]
    qb = q_iso @ b
    sigma = factors.s[k, i]
    theta = 2.0 * math.acos(min(max(sigma / factors.norm, 0.0), 1.0))
    pb = p_iso @ (p_iso.conj().T @ qb)
    perp = pb - np.vdot(qb, pb) * qb
    nrm = np.linalg.norm(perp)
    if nrm < 1e-12:
        raise ArithmeticError("degenerate Jordan block (sigma equals ||A||)")
    perp = perp / nrm
    plus = (qb - 1j * perp) / math.sqrt(2)
    minus = (qb + 1j * perp) / math.sqrt(2)
    return plus, minus, theta


def eigen_input_state(layout: qsim.RegisterLayout, factors, k: int, i: int) -> qsim.QState:
    """|0>_1 |v~_i^(k)>_2 |0>_3 |k~>_4 with phase and abs at 0."""
    l = 1 << layout.width("r4")
    face = np.zeros(l, dtype=np.complex128)
    face[k] = 1.0
    face = qsim.qft_matrix(l) @ face
    return qsim.QState.from_registers(layout, {"r2": factors.v[k][:, i], "r4": face})


@dataclass
class ReadoutRow:
    k: int
    i: int
    sigma: float
    theta: float
    target: float  # 2^d theta / (2 pi)
    most_likely: int
    p_most_likely: float
    p_correct: float  # mass on abs values within one unit of target


def sve_readout(
    ops: PreparedOperators,
    factors,
    params: SveParams,
    walk: WalkOperator | None = None,
    abs_mode: str = "round",
    pairs=None,
) -> list[ReadoutRow]:
    """Run QtSVE on every oracle eigen-input and tabulate the abs-register readout."""
    layout = qtsve_layout(ops, params)
    layout.check_budget()
    walk = build_walk(ops) if walk is None else walk
    m, n, l = ops.tensor.dims
    if pairs is None:
        pairs = [(k, i) for k in range(l) for i in range(min(m, n))]
    rows = []
    for k, i in pairs:
        s = eigen_input_state(layout, factors, k, i)
        out = qtsve_pass(s, ops, params, walk, abs_mode=abs_mode).state
        probs = qsim.probabilities(out, "abs")
        sigma = float(factors.s[k, i])
        theta = 2.0 * math.acos(min(max(sigma / factors.norm, 0.0), 1.0))
        target = theta_encoding(theta, params.d)
        ok = np.abs(np.arange(probs.size) - target) < 1.0
        best = int(np.argmax(probs))
        rows.append(ReadoutRow(k, i, sigma, theta, target, best, float(probs[best]), float(probs[ok].sum())))
    return rows
