"""Compare the compiled and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--qubits 16 18 20] [--repeat 5]

Prints the median wall time per call for each backend and the speed ratio.
Results are checked for agreement before timing.
"""
from __future__ import annotations

import argparse
import statistics
import timeit

import numpy as np

from qtsvd._kernels import _fallback

try:
    from qtsvd._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _state(n: int, rng) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def _unitary(k: int, rng) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(1 << k, 1 << k)) + 1j * rng.normal(size=(1 << k, 1 << k)))
    return q


def _time(fn, repeat: int) -> float:
    return statistics.median(timeit.repeat(fn, number=1, repeat=repeat))


def bench_gates(qubits, repeat, rng):
    cases = [("1q", [0], ()), ("1q ctrl", [3], (1,)), ("2q", [2, 5], ()), ("3q", [1, 4, 7], ())]
    for n in qubits:
        psi = _state(n, rng)
        for label, targets, controls in cases:
            u = _unitary(len(targets), rng)
            ref = _fallback.apply_gate(psi, u, targets, n, controls)
            t_py = _time(lambda: _fallback.apply_gate(psi, u, targets, n, controls), repeat)
            line = f"apply_gate n={n:<2d} {label:<8s} python {t_py * 1e3:8.2f} ms"
            if _ckernels is not None:
                out = _ckernels.apply_gate(psi, u, tuple(targets), n, tuple(controls), None)
                assert np.allclose(out, ref, atol=1e-12)
                t_c = _time(lambda: _ckernels.apply_gate(psi, u, tuple(targets), n, tuple(controls), None), repeat)
                line += f"  cython {t_c * 1e3:8.2f} ms  speedup {t_py / t_c:5.2f}x"
            print(line)


def bench_jacobi(sizes, repeat, rng):
    for dim in sizes:
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = a.conj().T @ a
        t_py = _time(lambda: _fallback.jacobi_eigh(h), repeat)
        line = f"jacobi_eigh {dim:>3d}x{dim:<3d}        python {t_py * 1e3:8.2f} ms"
        if _ckernels is not None:
            w1 = np.sort(_ckernels.jacobi_eigh(h, 1e-15, 60)[0])
            w0 = np.sort(_fallback.jacobi_eigh(h)[0])
            assert np.allclose(w0, w1, atol=1e-9 * np.abs(w0).max())
            t_c = _time(lambda: _ckernels.jacobi_eigh(h, 1e-15, 60), repeat)
            line += f"  cython {t_c * 1e3:8.2f} ms  speedup {t_py / t_c:5.2f}x"
        print(line)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--qubits", type=int, nargs="+", default=[12, 16, 20])
    p.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled extension not built; timing the numpy fallback only")
    bench_gates(args.qubits, args.repeat, rng)
    bench_jacobi(args.sizes, args.repeat, rng)


if __name__ == "__main__":
    main()
