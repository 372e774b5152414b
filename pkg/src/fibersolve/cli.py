"""Command line front end.

Subcommands: info, solve, trace, scan, gallery, oracle.  Every command
takes a JSON config (--config) plus a handful of overriding flags and
writes its outputs under --out.  Manifests and CSVs are deterministic
for a fixed config; wall-clock information goes to run.log only.

Exit codes: 0 success; 1 configuration error; 2 band endpoint touches an
eigenvalue; 3 no solutions found; 4 solver failure; 5 gallery
verification failure; 6 oracle mismatch.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .decomp import EigenvalueOnBoundary
from .enumeration import (
    ap_scan,
    default_scan_halfwidth,
    load_solution_set,
    newton_multistart_oracle,
    solve_from_seeds,
    solve_on_fiber_1d,
    solve_on_fiber_2d,
    solve_unique,
    write_scan_csv,
    SolutionSet,
)
from .fiber import MaxIterExceeded, trace_fiber
from .gallery import (
    NoSolutionError,
    ResonantBError,
    build_flat_segment,
    build_halfline,
    build_separable_2d,
    build_symmetric_example,
    halfline_ray_heights,
    verify_halfline,
    verify_separable_2d,
)
from .grid import Interval1D, SpectralBasis, norm_l2, write_csv
from .nonlin import lipschitz_constant, slope_range

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BOUNDARY = 2
EXIT_NO_SOLUTIONS = 3
EXIT_SOLVER = 4
EXIT_GALLERY = 5
EXIT_ORACLE = 6


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _log(out_dir: Path | None, message: str) -> None:
    # timestamps live here and only here; manifests stay byte-stable
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with (out_dir / "run.log").open("a") as fh:
        fh.write(f"{stamp} {message}\n")


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_file(args.config)
    else:
        cfg = RunConfig.from_dict(_inline_config(args))
    cfg.apply_overrides(
        {
            "domain.n": args.n,
            "band.a": args.a,
            "band.b": args.b,
            "solver.tol": args.tol,
            "scan.t_min": args.t_min,
            "scan.t_max": args.t_max,
            "scan.n_samples": args.n_samples,
            "scan.resolution": args.resolution,
            "scan.seed": args.seed,
            "scan.n_starts": args.n_starts,
            "scan.box_scale": args.box_scale,
            "perturb.eps": args.eps,
        }
    )
    return cfg


def _inline_config(args) -> dict:
    raise ConfigError("--config is required for this command")


def _prepare(cfg: RunConfig):
    grid = cfg.build_grid()
    basis = SpectralBasis(grid)
    f = cfg.build_nonlinearity()
    d = cfg.build_decomposition(basis)
    g = cfg.build_rhs(basis)
    params = cfg.build_solver_params()
    return grid, basis, f, d, g, params


def _scan_window(cfg: RunConfig, d, g) -> tuple[float, float]:
    t_min = cfg.scan.get("t_min")
    t_max = cfg.scan.get("t_max")
    if t_min is None or t_max is None:
        half = default_scan_halfwidth(d, g)
        t_min = -half if t_min is None else float(t_min)
        t_max = half if t_max is None else float(t_max)
    return float(t_min), float(t_max)


def _finish_outputs(cfg: RunConfig, out_dir: Path) -> None:
    _write_json(out_dir / "config.resolved.json", cfg.resolved())


# -- subcommands ---------------------------------------------------------

def cmd_info(args) -> int:
    cfg = _load_config(args)
    grid, basis, f, d, g, _ = _prepare(cfg)
    summary = d.summary()
    lo, hi = slope_range(f)
    summary["slope_range"] = [lo, hi]
    summary["lipschitz_constant"] = lipschitz_constant(f)
    summary["grid"] = cfg.domain
    summary["rhs_norm"] = norm_l2(g)
    print(json.dumps(summary, indent=2, sort_keys=True))
    if d.fiber_dim == 0:
        print("empty fiber: the problem has exactly one solution "
              "for every right-hand side (no eigenvalue in the band)")
    if args.out:
        out_dir = Path(args.out)
        _write_json(out_dir / "decomposition.json", summary)
        _finish_outputs(cfg, out_dir)
        _log(out_dir, "info")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    grid, basis, f, d, g, params = _prepare(cfg)
    out_dir = Path(args.out)
    scan = cfg.scan
    accept_tol = scan.get("accept_tol")
    degenerate_tol = scan.get("degenerate_tol")

    if d.fiber_dim == 0:
        sol = solve_unique(d, f, g, params=params)
        sset = SolutionSet(
            [sol], [], {"mode": "unique", "accept_tol": accept_tol}
        )
        print("empty fiber: returning the unique solution")
    elif d.fiber_dim == 1:
        t_min, t_max = _scan_window(cfg, d, g)
        sset = solve_on_fiber_1d(
            d, f, g, t_min, t_max,
            n_samples=int(scan.get("n_samples", 64)),
            accept_tol=accept_tol,
            degenerate_tol=degenerate_tol,
            t_tol=float(scan.get("t_tol", 1e-10)),
            params=params,
        )
    elif d.fiber_dim == 2:
        t_box = scan.get("t_box")
        if t_box is None:
            half = default_scan_halfwidth(d, g)
            t_box = [[-half, half], [-half, half]]
        sset = solve_on_fiber_2d(
            d, f, g, np.asarray(t_box, dtype=float),
            resolution=int(scan.get("resolution", 41)),
            accept_tol=accept_tol,
            degenerate_tol=degenerate_tol,
            t_tol=float(scan.get("t_tol", 1e-8)),
            params=params,
        )
    else:
        seeds = scan.get("seeds")
        if not seeds:
            print(
                f"fiber dimension {d.fiber_dim} > 2: supply scan.seeds "
                "(list of coordinate vectors) to refine",
                file=sys.stderr,
            )
            return EXIT_CONFIG
        sset = solve_from_seeds(
            d, f, g, np.asarray(seeds, dtype=float),
            accept_tol=accept_tol,
            t_tol=float(scan.get("t_tol", 1e-8)),
            params=params,
        )

    sset.write(out_dir)
    _finish_outputs(cfg, out_dir)
    _log(out_dir, f"solve count={sset.count} continua={len(sset.continua)}")
    print(f"solutions: {sset.count}")
    for i, s in enumerate(sset.solutions):
        print(f"  sol_{i}: t={[round(float(x), 6) for x in s.t]} "
              f"residual={s.residual:.3e}")
    for c in sset.continua:
        print(f"  continuum: bounds={c.bounds.tolist()} "
              f"max|height|={c.max_abs_height:.3e} ({c.n_samples} samples)")
    if sset.count == 0 and not sset.continua:
        return EXIT_NO_SOLUTIONS
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    grid, basis, f, d, g, params = _prepare(cfg)
    out_dir = Path(args.out)
    scan = cfg.scan
    if d.fiber_dim == 1:
        t_min, t_max = _scan_window(cfg, d, g)
        ts = np.linspace(t_min, t_max, int(scan.get("n_samples", 64)))
        trace = trace_fiber(d, f, g, ts, params=params)
    elif d.fiber_dim == 2:
        t_box = scan.get("t_box")
        if t_box is None:
            half = default_scan_halfwidth(d, g)
            t_box = [[-half, half], [-half, half]]
        t_box = np.asarray(t_box, dtype=float)
        res = int(scan.get("resolution", 21))
        t1 = np.linspace(t_box[0, 0], t_box[0, 1], res)
        t2 = np.linspace(t_box[1, 0], t_box[1, 1], res)
        rows = []
        for i in range(res):
            js = range(res) if i % 2 == 0 else range(res - 1, -1, -1)
            rows.extend((t1[i], t2[j]) for j in js)
        trace = trace_fiber(d, f, g, np.asarray(rows), params=params)
    else:
        print(
            f"trace needs fiber dimension 1 or 2, got {d.fiber_dim}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    out_dir.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out_dir / "trace.csv")
    _finish_outputs(cfg, out_dir)
    _log(out_dir, f"trace rows={len(trace.points)}")
    print(f"trace: {len(trace.points)} rows -> {out_dir / 'trace.csv'}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load_config(args)
    grid, basis, f, d, g, params = _prepare(cfg)
    out_dir = Path(args.out)
    s_values = cfg.scan.get("s_values")
    if not s_values:
        print("scan requires scan.s_values", file=sys.stderr)
        return EXIT_CONFIG
    t_min, t_max = _scan_window(cfg, d, g)
    records = ap_scan(
        d, f, g, np.asarray(s_values, dtype=float),
        t_min=t_min, t_max=t_max,
        n_samples=int(cfg.scan.get("n_samples", 64)),
        accept_tol=cfg.scan.get("accept_tol"),
        degenerate_tol=cfg.scan.get("degenerate_tol"),
        params=params,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scan_csv(records, out_dir / "scan.csv")
    _write_json(
        out_dir / "manifest.json",
        {
            "records": [
                {"s": r.s, "count": r.count, "continuum": r.continuum}
                for r in records
            ]
        },
    )
    _finish_outputs(cfg, out_dir)
    _log(out_dir, f"scan values={len(records)}")
    for r in records:
        print(f"s={r.s:+.6g} count={r.count}" + (" continuum" if r.continuum else ""))
    return EXIT_OK


def cmd_gallery(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    preset = args.preset
    try:
        if preset == "flat":
            return _gallery_flat(args, out_dir)
        if preset == "halfline":
            return _gallery_halfline(args, out_dir)
        if preset == "separable2d":
            return _gallery_separable(args, out_dir)
        if preset == "symmetric":
            return _gallery_symmetric(args, out_dir)
    except (ResonantBError, NoSolutionError, ValueError) as e:
        print(f"gallery input error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"unknown gallery preset: {preset}", file=sys.stderr)
    return EXIT_CONFIG


def _gallery_flat(args, out_dir: Path) -> int:
    n = args.n or 199
    a = args.a if args.a is not None else 0.5
    b = args.b if args.b is not None else 2.0
    grid = Interval1D(0.0, math.pi, int(n))
    from .fiber import semilinear_apply

    inst = build_flat_segment(grid, a, b)
    t_samples = [0.0, 0.25, 0.5, 0.75, 1.0]
    residuals = {
        t: norm_l2(semilinear_apply(inst.f, inst.segment_point(t)))
        for t in t_samples
    }
    worst = max(residuals.values())
    report = {
        "preset": "flat",
        "a": a,
        "b": b,
        "n": int(n),
        "lambda_1": inst.lam1,
        "peak": inst.peak,
        "t_max": inst.t_max,
        "segment_residuals": {str(t): r for t, r in residuals.items()},
        "max_residual": worst,
        "passed": bool(worst <= 1e-10),
    }
    _write_json(out_dir / "instance.json", inst.f.to_config())
    _write_json(out_dir / "report.json", report)
    write_csv(inst.phi1, out_dir / "profile.csv")
    _log(out_dir, "gallery flat")
    print(f"flat segment: max residual {worst:.3e} over t in {t_samples}")
    return EXIT_OK if report["passed"] else EXIT_GALLERY


def _gallery_halfline(args, out_dir: Path) -> int:
    k = args.k or 2
    a = args.a if args.a is not None else 2.56
    report = verify_halfline(k, a)
    grid = Interval1D(0.0, math.pi, max(report.n_values))
    inst = build_halfline(k, a, grid)
    band_a = args.band_a if args.band_a is not None else 0.5
    band_b = args.band_b if args.band_b is not None else 7.5
    rays = halfline_ray_heights(inst, a_band=band_a, b_band=band_b)
    doc = {
        "preset": "halfline",
        "k": k,
        "a": a,
        "b": report.b,
        "orders": {str(p): o for p, o in report.orders.items()},
        "residuals": {
            str(n): {str(p): r for p, r in rs.items()}
            for n, rs in report.residuals.items()
        },
        "scaling_defect": report.scaling_defect,
        "ray_heights": [[p, h] for p, h in rays],
        "passed": report.passed,
    }
    _write_json(out_dir / "instance.json", inst.to_dict())
    _write_json(out_dir / "report.json", doc)
    write_csv(inst.psi, out_dir / "profile.csv")
    _log(out_dir, "gallery halfline")
    print(f"halfline: b={report.b:.12g}, orders="
          f"{ {p: round(o, 3) for p, o in report.orders.items()} }, "
          f"passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_GALLERY


def _gallery_separable(args, out_dir: Path) -> int:
    k = args.k or 2
    a = args.a if args.a is not None else 2.56
    report = verify_separable_2d(k, a)
    doc = {
        "preset": "separable2d",
        "k": k,
        "a": a,
        "orders": {str(p): o for p, o in report.orders.items()},
        "residuals": {
            str(n): {str(p): r for p, r in rs.items()}
            for n, rs in report.residuals.items()
        },
        "scaling_defect": report.scaling_defect,
        "passed": report.passed,
    }
    _write_json(out_dir / "report.json", doc)
    _log(out_dir, "gallery separable")
    print(f"separable 2d: orders="
          f"{ {p: round(o, 3) for p, o in report.orders.items()} }, "
          f"passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_GALLERY


def _gallery_symmetric(args, out_dir: Path) -> int:
    n = args.n or 199
    grid = Interval1D(-math.pi / 2.0, math.pi / 2.0, int(n))
    f, report = build_symmetric_example(grid, beta=args.beta or 0.5)
    doc = {
        "preset": "symmetric",
        "n": int(n),
        "lambda_2": report.lam2,
        "beta": report.beta,
        "e0": report.e0,
        "entries": [
            {"t": t, "inner": inner, "norm_F": nF, "ok": ok}
            for t, inner, nF, ok in report.entries
        ],
        "passed": report.passed,
    }
    _write_json(out_dir / "instance.json", f.to_config())
    _write_json(out_dir / "report.json", doc)
    _log(out_dir, "gallery symmetric")
    worst = max(e[1] for e in report.entries)
    print(f"symmetric: worst inner product {worst:.3e}, passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_GALLERY


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    grid, basis, f, d, g, params = _prepare(cfg)
    out_dir = Path(args.out)
    scan = cfg.scan
    oracle = newton_multistart_oracle(
        basis, f, g,
        n_starts=int(scan.get("n_starts", 200)),
        seed=int(scan.get("seed", 0)),
        box_scale=float(scan.get("box_scale", 1.0)),
        tol=float(scan.get("oracle_tol", 1e-11)),
        dedup_tol=scan.get("dedup_tol"),
        decomposition=d,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "oracle_solutions").mkdir(exist_ok=True)
    for i, s in enumerate(oracle.solutions):
        write_csv(s.u, out_dir / "oracle_solutions" / f"sol_{i}.csv")
    doc = oracle.manifest()
    doc["collinearity_defect"] = _collinearity_defect(oracle)
    _write_json(out_dir / "oracle.json", doc)
    _finish_outputs(cfg, out_dir)
    print(f"oracle: {oracle.count} distinct solutions "
          f"({oracle.metadata['failures']} failed starts)")

    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        _log(out_dir, f"oracle count={oracle.count} (no fiber manifest)")
        return EXIT_OK
    fiber_set = load_solution_set(out_dir, grid=grid)
    match_tol = scan.get("match_tol")
    if match_tol is None:
        match_tol = 1e-6 * (1.0 + norm_l2(g))
    comparison = _compare_sets(fiber_set, oracle, float(match_tol))
    _write_json(out_dir / "comparison.json", comparison)
    _log(out_dir, f"oracle count={oracle.count} fiber count={fiber_set.count} "
                  f"agree={comparison['agree']}")
    print(f"comparison: fiber={fiber_set.count} oracle={oracle.count} "
          f"agree={comparison['agree']}")
    return EXIT_OK if comparison["agree"] else EXIT_ORACLE


def _collinearity_defect(sset: SolutionSet) -> float | None:
    """Largest sine of the angle between solution differences.

    Near zero means all solutions lie on one line through the first; the
    half-line instances produce exactly that picture.
    """
    if sset.count < 3:
        return None
    base = sset.solutions[0].u.values
    dirs = [s.u.values - base for s in sset.solutions[1:]]
    ref = dirs[0] / np.linalg.norm(dirs[0])
    worst = 0.0
    for v in dirs[1:]:
        vn = v / np.linalg.norm(v)
        cos = abs(float(np.dot(ref, vn)))
        worst = max(worst, math.sqrt(max(0.0, 1.0 - cos * cos)))
    return worst


def _compare_sets(fiber_set: SolutionSet, oracle: SolutionSet, match_tol: float) -> dict:
    """Diff the two routes.

    Without continua the verdict is strict: equal counts and a one-to-one
    matching within match_tol.  When the fiber route reports a continuum,
    finite counts cannot agree by definition; the check then becomes that
    every oracle root not matched to an isolated fiber root has fiber
    coordinates inside some (slightly expanded) continuum box.
    """
    pairs = []
    used = set()
    for i, s in enumerate(fiber_set.solutions):
        best = None
        best_dist = math.inf
        for j, o in enumerate(oracle.solutions):
            if j in used:
                continue
            dist = norm_l2(s.u - o.u)
            if dist < best_dist:
                best, best_dist = j, dist
        if best is not None and best_dist <= match_tol:
            used.add(best)
            pairs.append({"fiber": i, "oracle": best, "distance": best_dist})
    counts_equal = fiber_set.count == oracle.count
    all_matched = len(pairs) == fiber_set.count and len(used) == oracle.count
    if not fiber_set.continua:
        agree = counts_equal and all_matched
    else:
        agree = len(pairs) == fiber_set.count
        for j, o in enumerate(oracle.solutions):
            if j in used:
                continue
            if o.t.size == 0 or not any(
                _inside_expanded(o.t, c.bounds) for c in fiber_set.continua
            ):
                agree = False
    return {
        "fiber_count": fiber_set.count,
        "oracle_count": oracle.count,
        "match_tol": match_tol,
        "pairs": pairs,
        "fiber_continua": len(fiber_set.continua),
        "agree": bool(agree),
    }


def _inside_expanded(t: np.ndarray, bounds: np.ndarray, slack: float = 0.3) -> bool:
    if t.size != bounds.shape[0]:
        return False
    for x, (lo, hi) in zip(t, bounds):
        pad = slack * (hi - lo) + 1e-6
        if not lo - pad <= x <= hi + pad:
            return False
    return True


# -- argument parsing ----------------------------------------------------

def _add_common(p: argparse.ArgumentParser, need_out: bool) -> None:
    p.add_argument("--config", help="path to the JSON run configuration")
    p.add_argument("--out", required=need_out, help="output directory")
    p.add_argument("--n", type=int, help="override interior node count")
    p.add_argument("--a", type=float, help="override band lower edge")
    p.add_argument("--b", type=float, help="override band upper edge")
    p.add_argument("--tol", type=float, help="override solver tolerance")
    p.add_argument("--t-min", dest="t_min", type=float, help="scan window start")
    p.add_argument("--t-max", dest="t_max", type=float, help="scan window end")
    p.add_argument("--n-samples", dest="n_samples", type=int,
                   help="scan sample count (1D)")
    p.add_argument("--resolution", type=int, help="scan grid per axis (2D)")
    p.add_argument("--seed", type=int, help="oracle / perturbation seed")
    p.add_argument("--n-starts", dest="n_starts", type=int,
                   help="oracle start count")
    p.add_argument("--box-scale", dest="box_scale", type=float,
                   help="oracle start box half width")
    p.add_argument("--eps", type=float, help="vertical perturbation size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibersolve",
        description="semilinear Dirichlet solver organized around fibers "
                    "of a band decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="band decomposition summary")
    _add_common(p, need_out=False)
    p.set_defaults(fn=cmd_info)

    p = sub.add_parser("solve", help="enumerate solutions on the fiber")
    _add_common(p, need_out=True)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("trace", help="sample the height map along the fiber")
    _add_common(p, need_out=True)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("scan", help="solution counts along a one-parameter family")
    _add_common(p, need_out=True)
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("gallery", help="build and verify a degenerate instance")
    p.add_argument("preset", choices=["flat", "halfline", "separable2d", "symmetric"])
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, help="arch count for halfline/separable")
    p.add_argument("--a", type=float, help="shallow slope / band lower edge")
    p.add_argument("--b", type=float, help="band upper edge (flat preset)")
    p.add_argument("--beta", type=float, help="even remainder width (symmetric)")
    p.add_argument("--band-a", dest="band_a", type=float,
                   help="band lower edge for ray heights (halfline)")
    p.add_argument("--band-b", dest="band_b", type=float,
                   help="band upper edge for ray heights (halfline)")
    p.set_defaults(fn=cmd_gallery)

    p = sub.add_parser("oracle", help="independent Newton multistart; "
                                      "diffs a fiber manifest when present")
    _add_common(p, need_out=True)
    p.set_defaults(fn=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    except EigenvalueOnBoundary as e:
        print(f"band endpoint error: {e}", file=sys.stderr)
        code = EXIT_BOUNDARY
    except MaxIterExceeded as e:
        print(f"solver failure: {e}", file=sys.stderr)
        code = EXIT_SOLVER
    except (FileNotFoundError, NotADirectoryError) as e:
        print(f"io error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    except ValueError as e:
        print(f"input error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
