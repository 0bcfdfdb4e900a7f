"""Experiment orchestration: seeded tensors, figure runs, CSV/JSON/SVG output.

Every CSV is a pure function of its ExperimentConfig. Grid points may be
computed by a process pool; rows are always written in grid order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__, qsim
from ._kernels import BACKEND
from .classical import classical_truncate, tsvd
from .errors import QubitBudgetError, ShapeError
from .tensor import Tensor3
from .truncation import Pipeline, frobenius_distance, truncate_sweep
from .variational import AnsatzParams, objective, optimize, reconstruction_error, widths_of

PRNG_NAME = f"numpy.random.Philox (4x64, 10 rounds), numpy {np.__version__}"


def _is_pow2(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


def gen_tensor(dims, seed: int, normalize: bool = False) -> Tensor3:
    """Entries i.i.d. uniform on [0, 1) from a Philox generator keyed by ``seed``."""
    dims = tuple(int(x) for x in dims)
    if len(dims) != 3 or not all(_is_pow2(x) for x in dims):
        raise ShapeError(f"dims must be three powers of two, got {dims}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    t = Tensor3(rng.random(dims), is_real=True)
    return t.normalize() if normalize else t


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    dims: tuple[int, int, int] = (4, 4, 4)
    n_tau: int = 50
    np_list: tuple[int, ...] = (2, 3, 4, 5)
    d: int | None = None  # default n_p - 1
    T_list: tuple[int, ...] = (1, 2, 3, 4)
    layers_list: tuple[int, ...] = (1, 2, 3)
    layers: int = 2
    T: int = 4
    draws: int = 100
    tensors: int = 60
    iters: int = 500
    lr: float = 0.05
    epsilon: float | None = None
    out_dir: str = "out"
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not all(_is_pow2(x) for x in self.dims):
            raise ShapeError(f"dims must be powers of two, got {self.dims}")
        for label, grid in (("np_list", self.np_list), ("T_list", self.T_list), ("layers_list", self.layers_list)):
            if len(grid) == 0:
                raise ValueError(f"{label} must not be empty")
        if self.n_tau < 1 or self.draws < 1 or self.tensors < 1 or self.iters < 1:
            raise ValueError("grid sizes and iteration counts must be positive")


# ---- output writers -----------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_manifest(path: Path, cfg: ExperimentConfig, csv_files: list[str], wall: float, extra=None) -> None:
    manifest = {
        "experiment": cfg.name,
        "config": asdict(cfg),
        "library_version": __version__,
        "kernel_backend": BACKEND,
        "prng": PRNG_NAME,
        "numpy_version": np.__version__,
        "csv": csv_files,
        "wall_time_s": round(wall, 3),
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def svg_line_chart(
    series: list[tuple[str, list[float], list[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    vlines=(),
    scatter: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """Minimal SVG chart: one polyline (or point cloud) per series, optional dashed verticals."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    left, right, top, bottom = 70, 20, 40, 55
    xs = [x for _, sx, _ in series for x in sx] + list(vlines)
    ys = [y for _, _, sy in series for y in sy if math.isfinite(y)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(0.0, min(ys)), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return left + (x - x0) / (x1 - x0) * (width - left - right)

    def py(y):
        return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="18" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {height / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{height - bottom + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{py(yv) + 3:.1f}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    for v in vlines:
        out.append(
            f'<line x1="{px(v):.1f}" y1="{top}" x2="{px(v):.1f}" y2="{height - bottom}" '
            'stroke="#999" stroke-dasharray="4,3"/>'
        )
    for idx, (label, sx, sy) in enumerate(series):
        col = colors[idx % len(colors)]
        pts = [(px(x), py(y)) for x, y in zip(sx, sy) if math.isfinite(y)]
        if scatter:
            out += [f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{col}"/>' for a, b in pts]
        else:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{path}"/>')
        ly = top + 14 * idx + 8
        out.append(f'<rect x="{width - right - 150}" y="{ly - 8}" width="10" height="10" fill="{col}"/>')
        out.append(f'<text x="{width - right - 135}" y="{ly + 1}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---- figure: threshold sweep -------------------------------------------


def tau_grid(t: Tensor3, n_tau: int, margin: float = 0.1) -> np.ndarray:
    smax = float(tsvd(t).s.max())
    return np.linspace(0.0, (1.0 + margin) * smax, n_tau)


def _sweep_job(args):
    t_data, taus, n_p, d = args
    t = Tensor3(t_data)
    pipe = Pipeline(t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = truncate_sweep(t, taus, n_p=n_p, d=d, pipeline=pipe, strict=False)
    rows = []
    for tau, r in zip(taus, results):
        c = classical_truncate(t, float(tau), pipe.factors)
        q = r.output_tensor
        rows.append(
            [
                n_p,
                float(tau),
                frobenius_distance(q, t),
                frobenius_distance(c, t),
                frobenius_distance(q, c),
                r.success_probability,
            ]
        )
    return rows


def sweep_layout_qubits(dims, n_p: int, d: int) -> int:
    m, n, l = (int(x).bit_length() - 1 for x in dims)
    return 2 * m + n + 2 * l + n_p + d + 1


def _pool_map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def run_threshold_sweep(cfg: ExperimentConfig) -> dict:
    widths = [(n_p, cfg.d if cfg.d is not None else n_p - 1) for n_p in cfg.np_list]
    for n_p, d in widths:
        if d < 1 or d > n_p:
            raise ValueError(f"invalid widths n_p={n_p}, d={d}")
        need = sweep_layout_qubits(cfg.dims, n_p, d)
        if need > qsim.max_qubits():
            raise QubitBudgetError(
                f"n_p={n_p}, d={d} on dims {tuple(cfg.dims)} needs {need} qubits; the cap is "
                f"{qsim.max_qubits()} (raise TSVD_MAX_QUBITS or lower n_p)"
            )
    t = gen_tensor(cfg.dims, cfg.seed, normalize=True)
    taus = tau_grid(t, cfg.n_tau)
    jobs = [(np.asarray(t.data), taus, n_p, d) for n_p, d in widths]
    rows = [row for block in _pool_map(_sweep_job, jobs, cfg.threads) for row in block]
    header = ["n_p", "tau", "dist_q_orig", "dist_c_orig", "dist_q_c", "success_probability"]
    sigmas = sorted(set(round(float(s), 12) for s in tsvd(t).s.ravel()))
    svgs = {}
    for n_p, _ in widths:
        sub = [r for r in rows if r[0] == n_p]
        x = [r[1] for r in sub]
        svgs[f"np{n_p}"] = svg_line_chart(
            [
                ("||Aq - A||", x, [r[2] for r in sub]),
                ("||Ac - A||", x, [r[3] for r in sub]),
                ("||Aq - Ac||", x, [r[4] for r in sub]),
            ],
            f"Threshold sweep, {n_p} phase qubits",
            "tau",
            "Frobenius distance",
            vlines=[s for s in sigmas if s <= x[-1]],
        )
    return {"header": header, "rows": rows, "svgs": svgs, "extra": {"singular_values": sigmas}}


# ---- figure: error vs cost ---------------------------------------------


def _cost_job(args):
    t_data, T, layers, draw = args
    t = Tensor3(t_data)
    n, l = widths_of(t)
    p = AnsatzParams.random(n, l, layers, seed=draw)
    obj = objective(t, p, T)
    return [
        draw,
        1.0 - (1 << n) * obj,
        reconstruction_error(t, p, T),
        reconstruction_error(t, p, T, magnitude_only=True),
    ]


def run_err_vs_cost(cfg: ExperimentConfig) -> dict:
    t = gen_tensor(cfg.dims, cfg.seed, normalize=True)
    widths_of(t)
    jobs = [(np.asarray(t.data), cfg.T, cfg.layers, draw) for draw in range(cfg.draws)]
    rows = _pool_map(_cost_job, jobs, cfg.threads)
    header = ["draw", "cost", "frobenius_error", "frobenius_error_magnitude_only"]
    costs = [r[1] for r in rows]
    svg = svg_line_chart(
        [("complex", costs, [r[2] for r in rows]), ("magnitude only", costs, [r[3] for r in rows])],
        f"Error vs cost, {cfg.draws} random parameter draws, T={cfg.T}",
        "cost = 1 - 2^n objective",
        "||A - Arec||_F",
        scatter=True,
    )
    return {"header": header, "rows": rows, "svgs": {"": svg}, "extra": {}}


# ---- figure: MSE vs T ---------------------------------------------------


def _mse_job(args):
    t_data, T, layers, seed, iters, lr = args
    t = Tensor3(t_data)
    r = optimize(t, T, layers, seed=seed, budget=iters, lr=lr)
    return float(np.sum(np.abs(r.reconstructed.data - t.data) ** 2))


def run_mse_vs_T(cfg: ExperimentConfig) -> dict:
    tensors = [gen_tensor(cfg.dims, cfg.seed + idx, normalize=True) for idx in range(cfg.tensors)]
    n, _ = widths_of(tensors[0])
    for T in cfg.T_list:
        if not 1 <= T <= 1 << n:
            raise ValueError(f"T={T} outside [1, {1 << n}]")
    grid = [(layers, T) for layers in cfg.layers_list for T in cfg.T_list]
    jobs = [
        (np.asarray(t.data), T, layers, cfg.seed + idx, cfg.iters, cfg.lr)
        for layers, T in grid
        for idx, t in enumerate(tensors)
    ]
    errs = _pool_map(_mse_job, jobs, cfg.threads)
    rows = []
    for g, (layers, T) in enumerate(grid):
        chunk = errs[g * len(tensors) : (g + 1) * len(tensors)]
        rows.append([layers, T, float(np.mean(chunk)), float(np.std(chunk))])
    header = ["layers", "T", "mse", "std"]
    series = [
        (f"{layers} layers", [float(r[1]) for r in rows if r[0] == layers], [r[2] for r in rows if r[0] == layers])
        for layers in cfg.layers_list
    ]
    svg = svg_line_chart(series, f"MSE vs T over {cfg.tensors} tensors", "T", "MSE")
    return {"header": header, "rows": rows, "svgs": {"": svg}, "extra": {}}


RUNNERS = {
    "fig-threshold-sweep": run_threshold_sweep,
    "fig-err-vs-cost": run_err_vs_cost,
    "fig-mse-vs-T": run_mse_vs_T,
}


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run one figure experiment and write CSV, manifest and SVG files."""
    cfg.validate()
    if cfg.name not in RUNNERS:
        raise ValueError(f"unknown experiment {cfg.name!r}; choose from {sorted(RUNNERS)}")
    start = time.perf_counter()
    result = RUNNERS[cfg.name](cfg)
    wall = time.perf_counter() - start
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    csv_path = out / f"{cfg.name}.csv"
    csv_path.write_text(csv_text(result["header"], result["rows"]))
    paths["csv"] = csv_path
    for tag, svg in result["svgs"].items():
        svg_path = out / (f"{cfg.name}_{tag}.svg" if tag else f"{cfg.name}.svg")
        svg_path.write_text(svg)
        paths[f"svg{('_' + tag) if tag else ''}"] = svg_path
    manifest_path = out / f"{cfg.name}.manifest.json"
    write_manifest(manifest_path, cfg, [csv_path.name], wall, result.get("extra"))
    paths["manifest"] = manifest_path
    return paths


__all__ = [
    "PRNG_NAME",
    "ExperimentConfig",
    "gen_tensor",
    "run_experiment",
    "csv_text",
    "svg_line_chart",
    "tau_grid",
]
