"""Truncation pipeline and recommendation sampling.

Layout (qubit 0 first): r1 (i), r2 (j), r3 (k), r4, r5 (walk ancillas),
phase, abs, flag. QtSVE runs as QtSVE_{5243}: its roles 1..4 bind to
r5, r2, r4, r3.

The walk is built from the conjugate-reversed tensor a'_ijk = conj(a_{i,j,-k}).
After state preparation, registers (2, 3) for row i hold
sum_j A~^(l)_ij |j>|l~>, whose components along the right singular vectors
are conj(v~). Those are eigen-inputs of the conjugate-reversed walk (same
singular values, conjugated faces), not of the walk of ``t`` itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .classical import SveParams, TsvdFactors, classical_truncate, sve_params, tsvd
from .errors import ConsistencyError, DegenerateInputError, EmptyTruncationError
from .qtsve import WalkOperator, build_walk, qtsve_pass
from .stateprep import (
    PreparedOperators,
    apply_p_prime,
    apply_q_prime,
    apply_r,
    build_operators,
    conjugate_reversed,
)
from .tensor import Tensor3, frobenius_norm

TRUNC_BINDINGS = {"1": "r5", "2": "r2", "3": "r4", "4": "r3", "phase": "phase", "abs": "abs"}
AUX = ("r4", "r5", "phase", "abs")
# classical alpha below this means nothing survives the flag
ALPHA_FLOOR = 1e-12
CONSISTENCY_FACTOR = 10.0


@dataclass
class TruncationResult:
    output_tensor: Tensor3
    success_probability: float
    alpha: float
    params: SveParams
    aux_residual: float
    flagged_warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        data = self.output_tensor.data
        return {
            "dims": list(self.output_tensor.dims),
            "entries": [[float(z.real), float(z.imag)] for z in data.reshape(-1)],
            "success_probability": self.success_probability,
            "alpha": self.alpha,
            "tau": self.params.tau,
            "epsilon": self.params.epsilon,
            "d": self.params.d,
            "n_p": self.params.n_p,
            "aux_residual": self.aux_residual,
            "warnings": list(self.flagged_warnings),
        }


class Pipeline:
    """Everything about a tensor that does not depend on tau: operators, walk, layout."""

    def __init__(self, t: Tensor3, factors: TsvdFactors | None = None):
        self.tensor = t
        self.ops = build_operators(t)
        self.walk_ops = build_operators(conjugate_reversed(t))
        self.factors = tsvd(t) if factors is None else factors
        self._walk: WalkOperator | None = None

    @property
    def walk(self) -> WalkOperator:
        if self._walk is None:
            self._walk = build_walk(self.walk_ops)
        return self._walk

    def layout(self, params: SveParams) -> qsim.RegisterLayout:
        nm, nn, nl = self.ops.widths
        return qsim.RegisterLayout(
            [
                ("r1", nm),
                ("r2", nn),
                ("r3", nl),
                ("r4", nl),
                ("r5", nm),
                ("phase", params.n_p),
                ("abs", params.d),
                ("flag", 1),
            ]
        )


def prepare_tensor_state(ops: PreparedOperators, layout: qsim.RegisterLayout | None = None) -> qsim.QState:
    """H on reg 3, P', H on regs 3 and 4, Q': gives sum a_ijk |i>|j>|k>|0> / ||A||."""
    if layout is None:
        nm, nn, nl = ops.widths
        layout = qsim.RegisterLayout([("r1", nm), ("r2", nn), ("r3", nl), ("r4", nl)])
    s = qsim.QState.zero(layout)
    s = qsim.hadamard_all(s, "r3")
    s = apply_p_prime(s, ops)
    s = qsim.hadamard_all(s, "r3")
    s = qsim.hadamard_all(s, "r4")
    return apply_q_prime(s, ops)


def prepare_row_state(ops: PreparedOperators, i: int, layout: qsim.RegisterLayout) -> qsim.QState:
    """|i>_1 followed by R: sum_jk a_ijk |i>|j>|k> / ||A[i,:,:]||."""
    if i in ops.zero_slices_i:
        raise DegenerateInputError(f"row slice {i} is zero; nothing to recommend")
    s = qsim.QState.basis(layout, {"r1": i})
    return apply_r(s, ops)


def comparator_g(s: qsim.QState, params: SveParams, abs_reg: str = "abs", flag: str = "flag") -> qsim.QState:
    """flag ^= [abs > t_int]: marks encodings of theta beyond theta_tau (sigma < tau)."""
    d = s.layout.width(abs_reg)
    t_int = params.threshold_int()
    x, f = np.divmod(np.arange(1 << (d + 1)), 2)
    perm = 2 * x + (f ^ (x > t_int).astype(np.int64))
    return qsim.apply_permutation(s, [abs_reg, flag], perm)


def _clamp_tau(t: Tensor3, tau: float, warns: list[str]) -> float:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    norm = frobenius_norm(t)
    if tau > norm:
        msg = f"tau={tau:g} exceeds ||A||_F={norm:g}; clamped, every singular value is truncated"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        warns.append(msg)
        return norm
    return tau


def _readout(kept: qsim.QState, params: SveParams, t: Tensor3, warns: list[str]) -> TruncationResult:
    """Turn the (unnormalised) kept branch into a TruncationResult."""
    total = kept.norm_squared
    fixed = {r: 0 for r in AUX}
    core = kept.register_amplitudes(["r1", "r2", "r3"], fixed)
    clean = float(np.vdot(core, core).real)
    residual = (total - clean) / total if total > 0 else 0.0
    if params.epsilon is not None and residual > CONSISTENCY_FACTOR * params.epsilon**2:
        raise ConsistencyError(
            f"auxiliary registers hold {residual:.3e} of the kept weight, above "
            f"{CONSISTENCY_FACTOR:g} eps^2 = {CONSISTENCY_FACTOR * params.epsilon**2:.3e}"
        )
    m, n, l = t.dims
    out = Tensor3(core.reshape(m, n, l) * params.norm, is_real=False)
    return TruncationResult(
        output_tensor=out,
        success_probability=float(total),
        alpha=params.alpha,
        params=params,
        aux_residual=float(residual),
        flagged_warnings=list(warns),
    )


def truncate(
    t: Tensor3,
    tau: float,
    epsilon: float | None = None,
    *,
    n_p: int | None = None,
    d: int | None = None,
    pipeline: Pipeline | None = None,
    method: str = "spectral",
    abs_mode: str = "round",
) -> TruncationResult:
    """Quantum truncation: prepare |A>, QtSVE, comparator, QtSVE^dag, keep flag 0.

    Entry (i, j, k) of the output is ||A||_F times the unnormalised flag-0
    amplitude of |i>|j>|k> with every auxiliary register at 0.
    """
    warns: list[str] = []
    tau = _clamp_tau(t, tau, warns)
    pipe = Pipeline(t) if pipeline is None else pipeline
    params = sve_params(t, epsilon, tau, n_p=n_p, d=d, factors=pipe.factors)
    if params.alpha < ALPHA_FLOOR:
        raise EmptyTruncationError(f"tau={tau:g} is above every singular value; the flag-0 branch is empty")
    layout = pipe.layout(params)
    layout.check_budget()
    s = prepare_tensor_state(pipe.ops, layout)
    s = _truncation_core(s, pipe, params, method, abs_mode)
    kept = qsim.project(s, "flag", 0)
    return _readout(kept, params, t, warns)


def _truncation_core(s, pipe: Pipeline, params: SveParams, method: str, abs_mode: str) -> qsim.QState:
    s = qtsve_pass(s, pipe.walk_ops, params, pipe.walk, TRUNC_BINDINGS, method, abs_mode).state
    s = comparator_g(s, params)
    return qtsve_pass(s, pipe.walk_ops, params, pipe.walk, TRUNC_BINDINGS, method, abs_mode).state


def truncate_sweep(
    t: Tensor3,
    taus,
    *,
    n_p: int,
    d: int | None = None,
    epsilon: float | None = None,
    pipeline: Pipeline | None = None,
    abs_mode: str = "round",
    strict: bool = True,
) -> list[TruncationResult | None]:
    """``truncate`` over many tau values sharing one QtSVE pass.

    The flag-0 branch after the comparator is the projection onto abs <= t_int,
    so one forward pass is cached and each distinct t_int costs a projection and
    one more (self-inverse) pass. With ``strict`` (the default) entries are
    ``None`` where the classical alpha is zero, the case in which ``truncate``
    raises; otherwise the (near-empty) kept branch is read out anyway.
    """
    pipe = Pipeline(t) if pipeline is None else pipeline
    base = sve_params(t, epsilon, 0.0, n_p=n_p, d=d, factors=pipe.factors)
    layout = pipe.layout(base)
    layout.check_budget()
    s0 = prepare_tensor_state(pipe.ops, layout)
    fwd = qtsve_pass(s0, pipe.walk_ops, base, pipe.walk, TRUNC_BINDINGS, "spectral", abs_mode).state
    fwd_abs = fwd.tensor_view()
    abs_q = layout.qubits("abs")
    cache: dict[int, tuple] = {}
    out: list[TruncationResult | None] = []
    for tau in taus:
        warns: list[str] = []
        tau_c = _clamp_tau(t, float(tau), warns)
        params = sve_params(t, epsilon, tau_c, n_p=base.n_p, d=base.d, factors=pipe.factors)
        if strict and params.alpha < ALPHA_FLOOR:
            out.append(None)
            continue
        t_int = params.threshold_int()
        if t_int not in cache:
            kept = _project_abs_le(fwd, fwd_abs, abs_q, t_int)
            kept = qtsve_pass(kept, pipe.walk_ops, base, pipe.walk, TRUNC_BINDINGS, "spectral", abs_mode).state
            cache[t_int] = kept
        out.append(_readout(cache[t_int], params, t, warns))
    return out


def _project_abs_le(s: qsim.QState, view: np.ndarray, abs_q: list[int], t_int: int) -> qsim.QState:
    d = len(abs_q)
    keep = (np.arange(1 << d) <= t_int).astype(np.float64)
    moved = np.moveaxis(view, abs_q, list(range(d)))
    shaped = moved.reshape((1 << d,) + moved.shape[d:]) * keep.reshape((-1,) + (1,) * (moved.ndim - d))
    back = np.moveaxis(shaped.reshape(moved.shape), list(range(d)), abs_q)
    return s.with_amplitudes(np.ascontiguousarray(back).reshape(s.amplitudes.shape))


def recommendation_distribution(
    t: Tensor3,
    i: int,
    tau: float,
    epsilon: float | None = None,
    *,
    n_p: int | None = None,
    d: int | None = None,
    pipeline: Pipeline | None = None,
    abs_mode: str = "round",
) -> tuple[np.ndarray, float]:
    """Exact distribution over (j, k) of registers (2, 3) after flag postselection.

    Returns (N x L probability matrix, flag-0 probability).
    """
    warns: list[str] = []
    tau = _clamp_tau(t, tau, warns)
    pipe = Pipeline(t) if pipeline is None else pipeline
    if not 0 <= i < t.dims[0]:
        raise IndexError(f"row {i} out of range for dims {t.dims}")
    params = sve_params(t, epsilon, tau, n_p=n_p, d=d, factors=pipe.factors)
    layout = pipe.layout(params)
    layout.check_budget()
    s = prepare_row_state(pipe.ops, i, layout)
    s = _truncation_core(s, pipe, params, "spectral", abs_mode)
    kept, p0 = qsim.postselect(s, "flag", 0)
    probs = qsim.probabilities(kept, ["r2", "r3"])
    _, n, l = t.dims
    return probs.reshape(n, l), p0


def recommend(
    t: Tensor3,
    i: int,
    tau: float,
    epsilon: float | None = None,
    seed=None,
    *,
    n_p: int | None = None,
    d: int | None = None,
    pipeline: Pipeline | None = None,
) -> tuple[int, int]:
    """Sample (j, k) for row i from the truncated tensor's row distribution."""
    probs, _ = recommendation_distribution(t, i, tau, epsilon, n_p=n_p, d=d, pipeline=pipeline)
    rng = np.random.default_rng(seed)
    flat = int(rng.choice(probs.size, p=probs.reshape(-1) / probs.sum()))
    return divmod(flat, t.dims[2])


def classical_row_distribution(t: Tensor3, i: int, tau: float) -> np.ndarray:
    """Normalised |A^c_trunc[i, :, :]|^2, the target of ``recommend``."""
    ct = classical_truncate(t, tau).data[i]
    p = np.abs(ct) ** 2
    total = p.sum()
    if total == 0:
        raise EmptyTruncationError(f"row {i} of the classical truncation is zero")
    return p / total


def frobenius_distance(a: Tensor3, b: Tensor3) -> float:
    return float(np.linalg.norm((a.data - b.data).ravel()))


def success_bound(alpha: float, epsilon: float) -> float:
    """(alpha - 2 eps)^2 when alpha > 2 eps, else 0."""
    return (alpha - 2 * epsilon) ** 2 if alpha > 2 * epsilon else 0.0


__all__ = [
    "Pipeline",
    "TruncationResult",
    "prepare_tensor_state",
    "prepare_row_state",
    "comparator_g",
    "truncate",
    "truncate_sweep",
    "recommendation_distribution",
    "recommend",
    "classical_row_distribution",
    "frobenius_distance",
    "success_bound",
]
