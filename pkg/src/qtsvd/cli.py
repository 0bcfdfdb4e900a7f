"""``tsvd`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .classical import DEGENERACY_FLOOR, abs_width_for_gap, sve_params, theta_gap, thetas_from_factors, tsvd
from .errors import TsvdError
from .harness import ExperimentConfig, gen_tensor, run_experiment
from .qtsve import build_walk, sve_readout
from .stateprep import build_operators
from .tensor import Tensor3, load_tensor, pad_pow2


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("list must not be empty")
    return vals


def _dims(text: str) -> tuple[int, int, int]:
    vals = tuple(int(x) for x in re.split(r"[x,]", text))
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"dims must look like 4x4x4, got {text!r}")
    return vals  # type: ignore[return-value]


def _load(source: str, seed: int) -> Tensor3:
    """A JSON tensor file, or ``random:MxNxL`` drawn with --seed."""
    if source.startswith("random:"):
        return gen_tensor(_dims(source[len("random:") :]), seed, normalize=True)
    return load_tensor(source)


def _emit(args, name: str, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")


def cmd_classical(args) -> int:
    t = _load(args.tensor, args.seed)
    f = tsvd(t)
    th = thetas_from_factors(f)
    payload = {
        "dims": list(t.dims),
        "frobenius_norm": f.norm,
        "singular_values": f.s.tolist(),
        "theta": th.tolist(),
    }
    delta = theta_gap(th)
    payload["delta"] = delta
    # d is undefined (null) for a degenerate spectrum
    payload["d"] = abs_width_for_gap(delta) if delta >= DEGENERACY_FLOOR else None
    if args.tau is not None:
        from .classical import classical_truncate

        ct = classical_truncate(t, args.tau, f)
        payload["tau"] = args.tau
        payload["truncation_error"] = float(np.linalg.norm((ct.data - t.data).ravel()))
    _emit(args, "classical", payload)
    return 0


def cmd_sve(args) -> int:
    t = pad_pow2(_load(args.tensor, args.seed))
    f = tsvd(t)
    params = sve_params(t, args.epsilon, n_p=args.np, d=args.d, factors=f)
    ops = build_operators(t)
    rows = sve_readout(ops, f, params, build_walk(ops))
    print(f"# d={params.d} n_p={params.n_p} epsilon={params.epsilon} delta={params.delta:.6g}")
    print("k  i  sigma        theta        target   measured  p_measured  p_within_1")
    for r in rows:
        print(
            f"{r.k:<2d} {r.i:<2d} {r.sigma:<12.6g} {r.theta:<12.6g} {r.target:<8.3f} "
            f"{r.most_likely:<9d} {r.p_most_likely:<11.4f} {r.p_correct:.4f}"
        )
    if args.out:
        _write_json(args, "sve", {"d": params.d, "n_p": params.n_p, "rows": [r.__dict__ for r in rows]})
    return 0


def _write_json(args, name: str, payload: dict) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.json").write_text(json.dumps(payload, indent=2) + "\n")


def cmd_truncate(args) -> int:
    from .truncation import truncate

    t = pad_pow2(_load(args.tensor, args.seed))
    if args.np is None and args.epsilon is None:
        raise TsvdError("give --epsilon, --np, or both")
    r = truncate(t, args.tau, args.epsilon, n_p=args.np, d=args.d)
    _emit(args, "truncate", r.to_json())
    return 0


def cmd_recommend(args) -> int:
    from .truncation import recommendation_distribution

    t = pad_pow2(_load(args.tensor, args.seed))
    n_p = args.np if args.np is not None or args.epsilon is not None else 5
    probs, p0 = recommendation_distribution(t, args.row, args.tau, args.epsilon, n_p=n_p, d=args.d)
    rng = np.random.default_rng(args.seed)
    flat = int(rng.choice(probs.size, p=probs.reshape(-1) / probs.sum()))
    j, k = divmod(flat, t.dims[2])
    print(f"{j} {k}")
    if args.out:
        _write_json(args, "recommend", {"row": args.row, "j": j, "k": k, "flag0_probability": p0, "distribution": probs.tolist()})
    return 0


def cmd_variational(args) -> int:
    from .variational import optimize

    t = pad_pow2(_load(args.tensor, args.seed), square=True)
    r = optimize(t, args.T, args.layers, seed=args.seed, budget=args.iters, lr=args.lr, magnitude_only=args.magnitude_only)
    payload = r.to_json()
    if args.dump_state:
        from .variational import step5_state

        for i in range(args.T):
            step5_state(t, r.params, i).dump(Path(args.out or ".") / f"variational_state_i{i}.json", tol=1e-14)
    _emit(args, "variational", payload)
    return 0


def _fig(args, name: str, **kw) -> int:
    cfg = ExperimentConfig(name=name, seed=args.seed, out_dir=args.out or "out", threads=args.threads, **kw)
    paths = run_experiment(cfg)
    for key, p in paths.items():
        print(f"{key}: {p}")
    return 0


def cmd_fig_threshold(args) -> int:
    return _fig(args, "fig-threshold-sweep", dims=args.dims, np_list=args.np_list, d=args.d, n_tau=args.points)


def cmd_fig_cost(args) -> int:
    return _fig(args, "fig-err-vs-cost", dims=args.dims, T=args.T, layers=args.layers, draws=args.draws)


def cmd_fig_mse(args) -> int:
    return _fig(
        args,
        "fig-mse-vs-T",
        dims=args.dims,
        tensors=args.tensors,
        layers_list=args.layers_list,
        T_list=args.T_list,
        iters=args.iters,
    )


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # subcommands accept the flags too, without clobbering values given before the subcommand
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--seed", type=int, default=dflt(0), help="PRNG seed (default 0)")
        parser.add_argument("--out", default=dflt(None), help="output directory")
        parser.add_argument("--threads", type=int, default=dflt(1), help="worker processes for figure grids")
        parser.add_argument("--dump-state", action="store_true", default=dflt(False), help="write final statevectors as JSON")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="tsvd", description="Quantum and classical tensor SVD by dense simulation.")
    global_flags(p, suppress=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    tensor_help = "tensor JSON file, or random:MxNxL"

    s = sub.add_parser("classical", parents=[common], help="classical t-SVD and theta spectrum")
    s.add_argument("tensor", help=tensor_help)
    s.add_argument("--tau", type=float, default=None)
    s.set_defaults(func=cmd_classical)

    s = sub.add_parser("sve", parents=[common], help="QtSVE readout on every oracle eigen-input")
    s.add_argument("tensor", help=tensor_help)
    s.add_argument("--epsilon", type=float, default=0.25)
    s.add_argument("--np", type=int, default=None)
    s.add_argument("--d", type=int, default=None)
    s.set_defaults(func=cmd_sve)

    s = sub.add_parser("truncate", parents=[common], help="quantum singular-value truncation")
    s.add_argument("tensor", help=tensor_help)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--np", type=int, default=None)
    s.add_argument("--d", type=int, default=None)
    s.set_defaults(func=cmd_truncate)

    s = sub.add_parser("recommend", parents=[common], help="sample (j, k) for a row of the truncated tensor")
    s.add_argument("tensor", help=tensor_help)
    s.add_argument("--row", type=int, required=True)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--np", type=int, default=None)
    s.add_argument("--d", type=int, default=None)
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("variational", parents=[common], help="variational t-SVD")
    s.add_argument("tensor", help=tensor_help)
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--iters", type=int, default=500)
    s.add_argument("--lr", type=float, default=0.05)
    s.add_argument("--magnitude-only", action="store_true")
    s.set_defaults(func=cmd_variational)

    s = sub.add_parser("fig-threshold-sweep", parents=[common], help="truncation distance vs tau")
    s.add_argument("--np-list", type=_int_list, default=(2, 3, 4, 5))
    s.add_argument("--d", type=int, default=None, help="abs register width (default n_p - 1)")
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--dims", type=_dims, default=(4, 4, 4))
    s.set_defaults(func=cmd_fig_threshold)

    s = sub.add_parser("fig-err-vs-cost", parents=[common], help="reconstruction error vs cost over random parameters")
    s.add_argument("--draws", type=int, default=100)
    s.add_argument("--T", type=int, default=4)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--dims", type=_dims, default=(4, 4, 4))
    s.set_defaults(func=cmd_fig_cost)

    s = sub.add_parser("fig-mse-vs-T", parents=[common], help="optimised MSE vs retained rank T")
    s.add_argument("--tensors", type=int, default=60)
    s.add_argument("--layers-list", type=_int_list, default=(1, 2, 3))
    s.add_argument("--T-list", type=_int_list, default=(1, 2, 3, 4))
    s.add_argument("--iters", type=int, default=500)
    s.add_argument("--dims", type=_dims, default=(4, 4, 4))
    s.set_defaults(func=cmd_fig_mse)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (TsvdError, ValueError, OSError) as exc:
        print(f"tsvd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
