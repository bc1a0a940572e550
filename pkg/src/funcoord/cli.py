"""Command-line experiment runner.

Usage::

    funcoord <command> [--config PATH] [--out DIR] [--seed N] [--tol NAME=VALUE ...]

Commands: ``dual-metric``, ``eigen``, ``transform-check``, ``embed``,
``geodesic`` and ``repro``. Each writes ``<out>/<command>.csv`` and
``<out>/<command>.json`` and exits with 0 iff every check met its
tolerance (2 on usage or configuration errors).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .acceptance import Criterion, criteria_csv, fmt, merged_tolerances, run_criteria
from .config import ExperimentConfig, parse_config, require
from .errors import ConfigError, FuncoordError
from .expr import parse_list
from .geometry import DeltaPath, induced_metric, path_quadratic_form
from .grid import derivative_op, grid_delta, make_grid, multiplication_op
from .kernels import assemble, gauss_rho, make_kernel
from .linop import LinOp, Transform
from .projective import (GeodesicState, geodesic_integrate, geodesic_metric_for, geodesic_residual,
                         random_hermitian, random_unit_vector, schrodinger_flow)
from .spaces import dual_of, space_from_transform
from .spectral import eigen_clusters, generalized_eigs
from .transforms import bump_bank, solve_first_order_transform, solve_separable_transform, verify_intertwining

DEFAULT_OUT = "out"

#: tolerances used only by CLI experiments, beyond the acceptance ones
EXTRA_TOLERANCES = {
    "eigen_residual": 1e-8,
    "first_order_residual": 1e-3,
    "metric_symmetry": 1e-12,
}


def all_tolerances():
    tol = dict(acceptance.TOLERANCES)
    tol.update(EXTRA_TOLERANCES)
    return tol


def _tolerances(cfg_overrides, cli_overrides):
    tol = all_tolerances()
    merged = {}
    merged.update(cfg_overrides)
    merged.update(cli_overrides)
    for k, v in merged.items():
        if k not in tol:
            raise ConfigError(f"unknown tolerance {k!r}")
        tol[k] = float(v)
    return tol, merged


def _grid_from(cfg, default, section="grid"):
    lo = cfg.get(section, "lo", default[0])
    hi = cfg.get(section, "hi", default[1])
    points = cfg.get(section, "points", default[2])
    periodic = cfg.get(section, "periodic", default[3])
    dim = cfg.get(section, "dim", 1)
    sig = cfg.get(section, "signature")
    return make_grid([(lo, hi, points, periodic)] * dim, sig)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _finite(x):
    return float(x) if math.isfinite(float(x)) else str(x)


# -- experiments ----------------------------------------------------------------


def run_dual_metric(cfg, tol, seed):
    grid = _grid_from(cfg, acceptance.RHO_GRID[0])
    space = space_from_transform(Transform(assemble(gauss_rho(), grid)))
    dual = dual_of(space)
    pairs = cfg.get("dual-metric", "pairs", (0.0, 1.0, 2.0, 4.0))
    i0 = grid.index_of(0.0)
    ref = dual.inner(grid_delta(grid, i0), grid_delta(grid, i0))
    rows, worst = [], 0.0
    for b in pairs:
        val = dual.inner(grid_delta(grid, i0), grid_delta(grid, grid.index_of(b)))
        expected = math.exp(-0.5 * b * b)
        err = abs(val / ref - expected)
        worst = max(worst, err)
        rows.append([0.0, float(b), float(val), float(val / ref), expected, err])
    crit = Criterion(1, "dual-metric")
    crit.add("delta inner products", worst, tol["delta_inner"])
    dev, scale = acceptance.dual_metric_deviation(space, cfg.get("dual-metric", "interior", acceptance.RHO_INTERIOR))
    crit.add("rho rho* vs Gaussian kernel", dev, tol["dual_metric"])
    text = _csv(["a", "b", "inner", "normalized", "expected", "abs_error"], rows)
    return text, [crit], {"scale": scale, "condition": space.condition}


def run_eigen(cfg, tol, seed):
    kind = cfg.get("eigen", "operator", "derivative")
    default = (0.0, 2 * math.pi, 64, True) if kind == "derivative" else (-1.0, 1.0, 33, False)
    grid = _grid_from(cfg, default)
    if grid.dim != 1:
        raise ConfigError("eigen runs on one-dimensional grids")
    if kind == "derivative":
        op = derivative_op(grid).scaled(-1j)
    elif kind == "position":
        op = multiplication_op(grid, grid.nodes[:, 0])
    else:
        expr = require(cfg, "eigen", "diagonal")
        op = multiplication_op(grid, expr.of("x"))
    max_abs = cfg.get("eigen", "max_abs", 10.0)
    pairs = generalized_eigs(op)
    lam = np.array([p.eigenvalue for p in pairs])
    res = np.array([p.residual for p in pairs])
    rows = []
    start = 0
    for value, mult in eigen_clusters(lam):
        block = res[start:start + mult]
        start += mult
        if abs(value) <= max_abs + 1e-9:
            rows.append([value.real + 0.0, value.imag + 0.0, mult, float(block.max())])
    crit = Criterion(3, "eigen")
    crit.add("max eigenfunctional residual", float(res.max()), tol["eigen_residual"])
    if kind == "derivative":
        worst = max(float(np.min(np.abs(lam - p))) for p in range(-10, 11))
        crit.add("integer eigenvalues |p| <= 10", worst, tol["fourier_eigenvalues"])
    text = _csv(["lambda_re", "lambda_im", "multiplicity", "residual"], rows)
    return text, [crit], {"count": len(rows)}


def run_transform_check(cfg, tol, seed):
    mode = cfg.get("transform", "mode", "separable")
    crit = Criterion(7, "transform-check")
    if mode == "separable":
        a = cfg.get("transform", "a")
        a_fn = a.of("x") if a is not None else (lambda x: x)
        C = cfg.get("transform", "C", 1.0)
        C1 = cfg.get("transform", "C1", 1.0)
        lo = cfg.get("grid", "lo", 1.0)
        hi = cfg.get("grid", "hi", 3.0)
        points = cfg.get("grid", "points", 257)
        rows = []
        for pts in ((points - 1) // 2 + 1, points):
            grid = make_grid([(lo, hi, pts)])
            kernel = solve_separable_transform(a_fn, C, C1, anchor=lo)
            omega = assemble(kernel, grid)
            ad = LinOp(np.diag(a_fn(grid.nodes[:, 0]) * np.ones(grid.size)) @ derivative_op(grid).matrix,
                       grid, grid)
            r = verify_intertwining(ad, omega, derivative_op(grid), bump_bank(grid, seed=seed))
            rows.append([pts, r])
        crit.add("(aD) Omega = Omega D on the bump bank", rows[-1][1], tol["intertwining"])
        trend = rows[-1][1] / rows[0][1] if rows[0][1] > 0 else 0.0
        crit.add("refinement trend (fine / coarse)", trend, 1.0)
        text = _csv(["points", "residual"], rows)
        return text, [crit], {"residuals": [r for _, r in rows]}
    a = require(cfg, "transform", "a").of("x")
    b = require(cfg, "transform", "b").of("y")
    g = require(cfg, "transform", "g").of("y")
    xg = _grid_from(cfg, (0.0, 2 * math.pi, 65, True))
    ax = xg.axes[0]
    if ax.periodic:
        # default y grid: the frequency lattice dual to the periodic x grid
        step = 2 * math.pi / ax.length
        y_default = (-(ax.points // 2) * step, (ax.points - ax.points // 2) * step, ax.points, True)
    else:
        y_default = (ax.lo, ax.hi, ax.points, False)
    yg = make_grid([(cfg.get("transform", "y_lo", y_default[0]), cfg.get("transform", "y_hi", y_default[1]),
                     cfg.get("transform", "y_points", y_default[2]),
                     cfg.get("transform", "y_periodic", y_default[3]))])
    res = solve_first_order_transform(a, b, g, xg, yg, require_invertible=False)
    cond = float(np.linalg.cond(res.op.matrix))
    invertible = bool(np.isfinite(cond) and cond <= 1e12)
    crit.add("a D Omega = Omega b residual", res.residual, tol["first_order_residual"])
    rows = [["residual", res.residual], ["condition", cond], ["invertible", "true" if invertible else "false"]]
    text = _csv(["quantity", "value"], rows)
    return text, [crit], {"condition": _finite(cond), "invertible": invertible}


def run_embed(cfg, tol, seed):
    family = cfg.get("kernel", "family", "gauss_metric")
    exprs = cfg.get("path", "a")
    if exprs is None:
        exprs = parse_list("cos(t), sin(t)", ("t",))
    n = len(exprs)
    if family == "minkowski_gauss":
        sig = cfg.get("grid", "signature", (1,) + (-1,) * (n - 1))
        kernel = make_kernel(family, signature=sig)
    elif family == "gauss_metric":
        kernel = make_kernel(family, scale=cfg.get("kernel", "scale", 1.0))
    else:
        kernel = make_kernel(family)
    t0 = cfg.get("path", "t0", 0.0)
    t1 = cfg.get("path", "t1", 2 * math.pi)
    steps = cfg.get("path", "steps", 65)
    vel = [e.derivative("t") for e in exprs]

    def stack(fs):
        return lambda t: np.stack([np.broadcast_to(f.of("t")(t), t.shape) for f in fs], axis=1)

    path = DeltaPath.from_function(stack(exprs), t0, t1, steps, kernel, velocity=stack(vel))
    q = path_quadratic_form(path)
    asym = max(float(np.max(np.abs(m - m.T))) for m in
               (np.atleast_2d(induced_metric(kernel, a, force_fd=True)) for a in path.points[::max(1, steps // 8)]))
    rows = [[t, *a, qq] for t, a, qq in zip(path.times, path.points, q)]
    crit = Criterion(8, "embed")
    crit.add("induced metric symmetry (FD)", asym, tol["metric_symmetry"])
    crit.add("q(t) finite", 0.0 if np.all(np.isfinite(q)) else math.inf, 0.5)
    header = ["t"] + [f"a{k + 1}" for k in range(n)] + ["q"]
    return _csv(header, rows), [crit], {"q_min": float(q.min()), "q_max": float(q.max())}


def run_geodesic(cfg, tol, seed):
    rng = np.random.default_rng(seed)
    mat = cfg.get("geodesic", "matrix")
    if mat is not None:
        A = np.array(mat, dtype=complex)
        n = A.shape[0]
    else:
        n = cfg.get("geodesic", "n", 8)
        A = random_hermitian(n, rng)
    if cfg.get("geodesic", "phi0", "random") == "e1":
        phi0 = np.zeros(n, dtype=complex)
        phi0[0] = 1.0
    else:
        phi0 = random_unit_vector(n, rng)
    tau_end = cfg.get("geodesic", "tau_end", 1.0)
    steps = cfg.get("geodesic", "steps", 256)
    samples = cfg.get("geodesic", "samples", 50)
    K = geodesic_metric_for(A)
    path = geodesic_integrate(GeodesicState(phi0, -1j * A @ phi0), K, tau_end, steps)
    taus = np.array([s.tau for s in path])
    exact = schrodinger_flow(A, phi0, taus)[0]
    resid = geodesic_residual(A, phi0, taus, return_all=True)
    rows = []
    for s, e, r in zip(path, exact, resid):
        rows.append([s.tau, float(np.linalg.norm(s.phi) - 1.0), s.tangency, float(r),
                     float(np.linalg.norm(s.phi - e))])
    sample_res = geodesic_residual(A, phi0, np.linspace(0.0, 5.0, samples))
    crit = Criterion(11, "geodesic")
    crit.add("geodesic residual", max(sample_res, float(resid.max())), tol["geodesic_residual"])
    crit.add("RK4 endpoint vs exact flow", rows[-1][4], tol["flow_gap"])
    crit.add("norm drift", max(abs(r[1]) for r in rows), tol["norm_drift"])
    text = _csv(["tau", "norm_minus_one", "tangency", "residual", "flow_gap"], rows)
    return text, [crit], {"n": n}


def run_repro(cfg, tol, seed):
    overrides = {k: v for k, v in tol.items() if k in acceptance.TOLERANCES}
    first = run_criteria(seed, overrides)
    second = run_criteria(seed, overrides)
    same = criteria_csv(first) == criteria_csv(second)
    c12 = Criterion(12, "determinism of repeated runs")
    c12.add("CSV bytes differ between two runs", 0.0 if same else 1.0, 0.5)
    crits = first + [c12]
    return criteria_csv(crits), crits, {}


RUNNERS = {
    "dual-metric": run_dual_metric,
    "eigen": run_eigen,
    "transform-check": run_transform_check,
    "embed": run_embed,
    "geodesic": run_geodesic,
    "repro": run_repro,
}


def summary(command, seed, crits, tol, overrides, extra):
    out = {
        "experiment": command,
        "seed": seed,
        "passed": all(c.passed for c in crits),
        "criteria": {},
        "max_residuals": {},
        "tolerances": tol,
        "overrides": overrides,
    }
    for c in crits:
        out["criteria"][f"{c.cid}"] = {
            "name": c.name,
            "passed": c.passed,
            "checks": [{"name": ch.name, "value": _finite(ch.value), "tolerance": ch.tolerance,
                        "comparison": ">" if ch.above else "<", "passed": ch.passed} for ch in c.checks],
        }
        for ch in c.checks:
            if not ch.above:
                out["max_residuals"][f"{c.cid}: {ch.name}"] = _finite(ch.value)
    out["details"] = extra
    return out


def _parse_tol(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"--tol value for {k.strip()!r} is not a number") from None
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="funcoord", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="experiment configuration file")
        p.add_argument("--out", type=Path, help=f"output directory (default: {DEFAULT_OUT})")
        p.add_argument("--seed", type=int, help="seed of the PCG64 generator")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    return parser


def run(command, cfg: ExperimentConfig, out=None, seed=None, tol_overrides=None, stream=None):
    """Run one experiment, write its artifacts and return the exit code."""
    stream = sys.stdout if stream is None else stream
    if cfg.command is not None and cfg.command != command:
        raise ConfigError(f"config is for {cfg.command!r}, not {command!r}", cfg.line_of("run", "command"))
    seed = cfg.seed if seed is None else seed
    tol, overrides = _tolerances(cfg.tolerances, tol_overrides or {})
    text, crits, extra = RUNNERS[command](cfg, tol, seed)
    out = Path(out or cfg.out or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    stem = command.replace("-", "_")
    (out / f"{stem}.csv").write_text(text, encoding="utf-8", newline="")
    js = json.dumps(summary(command, seed, crits, tol, overrides, extra), indent=2, sort_keys=True)
    (out / f"{stem}.json").write_text(js + "\n", encoding="utf-8")
    for c in crits:
        worst = ", ".join(f"{ch.name}={ch.value:.3g}" for ch in c.checks)
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.cid:>2} {c.name}: {worst}", file=stream)
    return 0 if all(c.passed for c in crits) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8")) if args.config else ExperimentConfig()
        return run(args.command, cfg, args.out, args.seed, _parse_tol(args.tol))
    except (FuncoordError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
