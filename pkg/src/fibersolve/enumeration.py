"""Exhaustive solution enumeration through the reduced height map.

Every solution of ``semilinear_apply(f, u) == g`` lies on the fiber of g
and is a zero of the finite-dimensional height map, so enumerating
solutions reduces to root finding in the fiber coordinates.  The scan
machinery here samples the height map on a coordinate window, brackets
sign changes, polishes tangent candidates, and reports flat stretches of
near-zero height as solution continua rather than as root clusters.

Independently of the fiber route, a damped Newton multistart on the full
nodal system acts as an oracle; agreement between the two routes is the
package's main self-check and the two are never merged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from .decomp import BandDecomposition, _DecompositionBase
from .fiber import (
    FiberPoint,
    SolverParams,
    fiber_point,
    semilinear_apply,
    trace_fiber,
)
from .grid import GridFunction, Interval1D, SpectralBasis, norm_l2, read_csv, write_csv
from .nonlin import Nonlinearity


class FiberDimMismatch(ValueError):
    """Scan dimensionality does not match the decomposition's fiber."""


@dataclass
class Solution:
    """A verified solution: fiber coordinates, nodal values, full residual."""

    t: np.ndarray
    u: GridFunction
    residual: float
    bracket: tuple[float, float] | None = None


@dataclass
class Continuum:
    """A connected stretch of fiber coordinates with near-zero height.

    ``bounds`` has one (lo, hi) row per fiber coordinate; the stretch was
    supported by ``n_samples`` scan samples whose largest height magnitude
    was ``max_abs_height``.
    """

    bounds: np.ndarray
    n_samples: int
    max_abs_height: float


@dataclass
class SolutionSet:
    """Outcome of an enumeration run: isolated solutions plus continua."""

    solutions: list[Solution]
    continua: list[Continuum]
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.solutions)

    def manifest(self) -> dict:
        return {
            "count": self.count,
            "solutions": [
                {
                    "t": [float(x) for x in s.t],
                    "residual": s.residual,
                    "file": f"solutions/sol_{i}.csv",
                }
                for i, s in enumerate(self.solutions)
            ],
            "continua": [
                {
                    "bounds": [[float(lo), float(hi)] for lo, hi in c.bounds],
                    "n_samples": c.n_samples,
                    "max_abs_height": c.max_abs_height,
                }
                for c in self.continua
            ],
            "metadata": self.metadata,
        }

    def write(self, out_dir: str | Path) -> None:
        """Write manifest.json plus one CSV per solution under out_dir."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "solutions").mkdir(exist_ok=True)
        (out_dir / "manifest.json").write_text(
            json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"
        )
        for i, s in enumerate(self.solutions):
            write_csv(s.u, out_dir / "solutions" / f"sol_{i}.csv")


def load_solution_set(out_dir: str | Path, grid=None) -> SolutionSet:
    """Read back a SolutionSet written by :meth:`SolutionSet.write`.

    Passing the expected ``grid`` rebinds the solutions to it; the
    coordinates stored in the CSVs only round-trip to within an ulp, so
    callers that go on to compare against functions on the original grid
    should always pass it.
    """
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    solutions = []
    for entry in manifest["solutions"]:
        u = read_csv(out_dir / entry["file"], grid=grid)
        solutions.append(
            Solution(
                t=np.asarray(entry["t"], dtype=float),
                u=u,
                residual=float(entry["residual"]),
            )
        )
    continua = [
        Continuum(
            bounds=np.asarray(c["bounds"], dtype=float),
            n_samples=int(c["n_samples"]),
            max_abs_height=float(c["max_abs_height"]),
        )
        for c in manifest["continua"]
    ]
    return SolutionSet(solutions, continua, manifest.get("metadata", {}))


def default_accept_tol(g: GridFunction) -> float:
    return 1e-8 * (1.0 + norm_l2(g))

def default_degenerate_tol(g: GridFunction) -> float:
    return 1e-7 * (1.0 + norm_l2(g))

def default_scan_halfwidth(d: _DecompositionBase, g: GridFunction) -> float:
    """Heuristic coordinate window: 5 * (1 + |g| / distance to spectrum)."""
    gap = getattr(d, "outside_distance", None)
    if gap is None:
        gap = getattr(d.base, "outside_distance", 1.0)  # perturbed case
    return 5.0 * (1.0 + norm_l2(g) / gap)


class _HeightEvaluator:
    """Warm-started height evaluations against a base right-hand side.

    ``shift`` is added to every height: scans over the family
    g_base - s * (vertical direction) reuse one fiber since the
    horizontal part of the family is constant for exact decompositions.
    """

    def __init__(self, d, f, g_base, params, shift=None):
        self.d = d
        self.f = f
        self.g = g_base
        self.params = params
        self.shift = shift
        self.warm = None
        self.evals = 0

    def point(self, t) -> FiberPoint:
        p = fiber_point(self.d, self.f, self.g, t, warm_start=self.warm, params=self.params)
        self.warm = p.z
        self.evals += 1
        return p

    def height(self, t) -> np.ndarray:
        h = self.point(t).height
        return h if self.shift is None else h + self.shift

    def scalar(self, t: float) -> float:
        return float(self.height([t])[0])


def _flag_runs(flags: np.ndarray, min_len: int = 3) -> list[tuple[int, int]]:
    """Inclusive index ranges of consecutive True runs of length >= min_len."""
    runs = []
    i = 0
    m = flags.size
    while i < m:
        if flags[i]:
            j = i
            while j + 1 < m and flags[j + 1]:
                j += 1
            if j - i + 1 >= min_len:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _bisect_root(
    hf, lo: float, hi: float, flo: float, fhi: float, t_tol: float
) -> tuple[float, tuple[float, float]]:
    # plain bisection keeps a sign-changing bracket at every step, which
    # is the contract the final (lo, hi) pair must satisfy
    for _ in range(200):
        if hi - lo <= t_tol:
            break
        mid = 0.5 * (lo + hi)
        fm = hf(mid)
        if fm == 0.0:
            lo = hi = mid
            break
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi), (lo, hi)


def _merge_1d_roots(
    roots: list[tuple[float, tuple | None]], merge_tol: float
) -> list[tuple[float, tuple | None]]:
    roots = sorted(roots, key=lambda r: r[0])
    merged: list[tuple[float, tuple | None]] = []
    for t, br in roots:
        if merged and abs(t - merged[-1][0]) <= merge_tol:
            # keep the bracketed representative when there is one
            if merged[-1][1] is None and br is not None:
                merged[-1] = (t, br)
            continue
        merged.append((t, br))
    return merged


def solve_on_fiber_1d(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    t_min: float,
    t_max: float,
    n_samples: int = 64,
    accept_tol: float | None = None,
    degenerate_tol: float | None = None,
    t_tol: float = 1e-10,
    params: SolverParams | None = None,
) -> SolutionSet:
    """Enumerate solutions over a 1-dimensional fiber window.

    Samples the height on ``n_samples`` (>= 16) equispaced coordinates,
    brackets every sign change by bisection to width ``t_tol``, runs a
    second pass polishing local minima of |height| (tangent roots), and
    reports stretches of 3 or more consecutive samples with |height| <=
    ``degenerate_tol`` as continua instead of isolated roots.  Every
    returned solution is re-verified through the full forward map at
    tolerance ``accept_tol``.
    """
    if d.fiber_dim != 1:
        raise FiberDimMismatch(f"fiber dimension is {d.fiber_dim}, expected 1")
    if n_samples < 16:
        raise ValueError(f"need n_samples >= 16, got {n_samples}")
    if not t_max > t_min:
        raise ValueError(f"need t_min < t_max, got [{t_min}, {t_max}]")
    params = params or SolverParams()
    if accept_tol is None:
        accept_tol = default_accept_tol(g)
    if degenerate_tol is None:
        degenerate_tol = default_degenerate_tol(g)

    ts = np.linspace(t_min, t_max, n_samples)
    trace = trace_fiber(d, f, g, ts, params=params)
    heights = trace.heights()[:, 0]
    ev = _HeightEvaluator(d, f, g, params)

    def residual_of(u: GridFunction) -> float:
        return norm_l2(semilinear_apply(f, u) - g)

    return _enumerate_1d(
        ts, heights, ev, residual_of, accept_tol, degenerate_tol, t_tol,
        metadata={
            "t_min": t_min,
            "t_max": t_max,
            "n_samples": n_samples,
            "accept_tol": accept_tol,
            "degenerate_tol": degenerate_tol,
            "t_tol": t_tol,
        },
    )


def _enumerate_1d(
    ts: np.ndarray,
    heights: np.ndarray,
    ev: _HeightEvaluator,
    residual_of,
    accept_tol: float,
    degenerate_tol: float,
    t_tol: float,
    metadata: dict,
) -> SolutionSet:
    m = ts.size
    flags = np.abs(heights) <= degenerate_tol
    runs = _flag_runs(flags, min_len=3)
    excluded = np.zeros(m, dtype=bool)
    for i0, i1 in runs:
        excluded[i0 : i1 + 1] = True

    hf = ev.scalar

    candidates: list[tuple[float, tuple | None]] = []
    for i in range(m - 1):
        if excluded[i] or excluded[i + 1]:
            continue
        if heights[i] * heights[i + 1] < 0.0:
            t_root, bracket = _bisect_root(
                hf, ts[i], ts[i + 1], heights[i], heights[i + 1], t_tol
            )
            candidates.append((t_root, bracket))

    # isolated near-zero samples and local minima of |height|: possible
    # tangent roots that bracketing cannot see
    absh = np.abs(heights)
    tangent_idx = set(np.flatnonzero(flags & ~excluded).tolist())
    for i in range(1, m - 1):
        if excluded[i - 1] or excluded[i] or excluded[i + 1]:
            continue
        if heights[i - 1] * heights[i] < 0.0 or heights[i] * heights[i + 1] < 0.0:
            continue  # a bracket already owns this root
        if absh[i] < absh[i - 1] and absh[i] <= absh[i + 1]:
            tangent_idx.add(i)
    for i in sorted(tangent_idx):
        lo = ts[max(i - 1, 0)]
        hi = ts[min(i + 1, m - 1)]
        res = minimize_scalar(
            lambda t: abs(hf(t)), bounds=(lo, hi), method="bounded",
            options={"xatol": t_tol},
        )
        candidates.append((float(res.x), None))

    merge_tol = max(100.0 * t_tol, 1e-6 * (1.0 + max(abs(ts[0]), abs(ts[-1]))))
    solutions = []
    rejected = 0
    for t_root, bracket in _merge_1d_roots(candidates, merge_tol):
        p = ev.point([t_root])
        r = residual_of(p.u)
        if r <= accept_tol:
            solutions.append(Solution(t=p.t, u=p.u, residual=r, bracket=bracket))
        else:
            rejected += 1

    continua = [
        Continuum(
            bounds=np.array([[ts[i0], ts[i1]]]),
            n_samples=i1 - i0 + 1,
            max_abs_height=float(np.max(np.abs(heights[i0 : i1 + 1]))),
        )
        for i0, i1 in runs
    ]
    metadata = dict(metadata)
    metadata["rejected_candidates"] = rejected
    metadata["height_evaluations"] = ev.evals
    solutions.sort(key=lambda s: tuple(s.t))
    return SolutionSet(solutions, continua, metadata)


def _fd_jacobian(hfn, t: np.ndarray, h0: np.ndarray) -> np.ndarray:
    k = t.size
    J = np.empty((h0.size, k))
    for i in range(k):
        step = 1e-6 * (1.0 + abs(t[i]))
        tp = t.copy()
        tp[i] += step
        J[:, i] = (hfn(tp) - h0) / step
    return J


def _refine_nd(
    hfn, t0: np.ndarray, height_goal: float, t_tol: float, max_iter: int = 40
) -> tuple[np.ndarray, float, bool]:
    """Damped quasi-Newton on the height map with forward-difference Jacobian."""
    t = np.asarray(t0, dtype=float).copy()
    h = hfn(t)
    hn = float(np.linalg.norm(h))
    for _ in range(max_iter):
        if hn <= height_goal:
            return t, hn, True
        J = _fd_jacobian(hfn, t, h)
        try:
            step = np.linalg.solve(J, -h)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -h, rcond=None)
        lam = 1.0
        while lam >= 1.0 / 64.0:
            t_new = t + lam * step
            h_new = hfn(t_new)
            hn_new = float(np.linalg.norm(h_new))
            if hn_new <= (1.0 - 0.25 * lam) * hn:
                break
            lam *= 0.5
        else:
            return t, hn, hn <= height_goal
        t, h, hn = t_new, h_new, hn_new
        if lam * float(np.linalg.norm(step)) <= t_tol and hn > height_goal:
            return t, hn, False
    return t, hn, hn <= height_goal


def solve_on_fiber_2d(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    t_box: np.ndarray,
    resolution: int = 41,
    accept_tol: float | None = None,
    degenerate_tol: float | None = None,
    t_tol: float = 1e-8,
    params: SolverParams | None = None,
) -> SolutionSet:
    """Enumerate solutions over a 2-dimensional fiber window.

    ``t_box`` is [[t1_min, t1_max], [t2_min, t2_max]].  The height map is
    sampled on a resolution^2 grid traced row by row with chained warm
    starts; grid cells where both height components change sign seed a
    damped finite-difference Newton refinement, as do local minima of the
    sampled height norm.  Connected patches of near-zero samples are
    reported as continua, and refined roots falling inside them are
    dropped.  Solutions are re-verified through the full forward map.
    """
    if d.fiber_dim != 2:
        raise FiberDimMismatch(f"fiber dimension is {d.fiber_dim}, expected 2")
    t_box = np.asarray(t_box, dtype=float)
    if t_box.shape != (2, 2):
        raise ValueError(f"t_box must be 2x2, got {t_box.shape}")
    if resolution < 8:
        raise ValueError(f"need resolution >= 8, got {resolution}")
    params = params or SolverParams()
    if accept_tol is None:
        accept_tol = default_accept_tol(g)
    if degenerate_tol is None:
        degenerate_tol = default_degenerate_tol(g)

    t1 = np.linspace(t_box[0, 0], t_box[0, 1], resolution)
    t2 = np.linspace(t_box[1, 0], t_box[1, 1], resolution)
    rows = [(a, b) for a in t1 for b in t2]
    trace = trace_fiber(d, f, g, np.asarray(rows), params=params)
    H = trace.heights().reshape(resolution, resolution, 2)

    ev = _HeightEvaluator(d, f, g, params)

    def residual_of(u: GridFunction) -> float:
        return norm_l2(semilinear_apply(f, u) - g)

    return _enumerate_2d(
        (t1, t2), H, ev, residual_of, accept_tol, degenerate_tol, t_tol,
        metadata={
            "t_box": t_box.tolist(),
            "resolution": resolution,
            "accept_tol": accept_tol,
            "degenerate_tol": degenerate_tol,
            "t_tol": t_tol,
        },
    )


def _enumerate_2d(
    axes: tuple[np.ndarray, np.ndarray],
    H: np.ndarray,
    ev: _HeightEvaluator,
    residual_of,
    accept_tol: float,
    degenerate_tol: float,
    t_tol: float,
    metadata: dict,
) -> SolutionSet:
    t1, t2 = axes
    r1, r2 = t1.size, t2.size
    absmax = np.max(np.abs(H), axis=2)
    flagged = absmax <= degenerate_tol
    components = _connected_components(flagged, min_size=3)
    excluded = np.zeros_like(flagged)
    for comp in components:
        for i, j in comp:
            excluded[i, j] = True

    seeds = []
    for i in range(r1 - 1):
        for j in range(r2 - 1):
            corners = H[i : i + 2, j : j + 2, :].reshape(4, 2)
            if excluded[i : i + 2, j : j + 2].any():
                continue
            if (corners.min(axis=0) < 0.0).all() and (corners.max(axis=0) > 0.0).all():
                seeds.append((0.5 * (t1[i] + t1[i + 1]), 0.5 * (t2[j] + t2[j + 1])))
    # sampled near-tangent points
    cap = math.sqrt(max(accept_tol, 1e-300))
    for i in range(1, r1 - 1):
        for j in range(1, r2 - 1):
            if excluded[i - 1 : i + 2, j - 1 : j + 2].any():
                continue
            v = absmax[i, j]
            if v <= cap and v <= absmax[i - 1 : i + 2, j - 1 : j + 2].min():
                seeds.append((t1[i], t2[j]))
    if len(seeds) > 1000:
        raise ValueError(
            f"{len(seeds)} refinement seeds; raise resolution or degenerate_tol"
        )

    hfn = lambda t: ev.height(t)
    height_goal = 0.25 * accept_tol
    span = np.array([t1[-1] - t1[0], t2[-1] - t2[0]])
    dedup_tol = max(100.0 * t_tol, 1e-6 * (1.0 + float(np.linalg.norm(span))))
    roots: list[np.ndarray] = []
    failures = 0
    for seed in seeds:
        t_ref, hn, ok = _refine_nd(hfn, np.asarray(seed), height_goal, t_tol)
        if not ok:
            failures += 1
            continue
        if _nearest_sample_flagged(t_ref, t1, t2, excluded):
            continue
        if any(np.linalg.norm(t_ref - r) <= dedup_tol for r in roots):
            continue
        roots.append(t_ref)

    solutions = []
    rejected = 0
    for t_ref in roots:
        p = ev.point(t_ref)
        r = residual_of(p.u)
        if r <= accept_tol:
            solutions.append(Solution(t=p.t, u=p.u, residual=r))
        else:
            rejected += 1

    continua = []
    for comp in components:
        idx = np.array(comp)
        vals = np.array([np.max(np.abs(H[i, j])) for i, j in comp])
        continua.append(
            Continuum(
                bounds=np.array(
                    [
                        [t1[idx[:, 0].min()], t1[idx[:, 0].max()]],
                        [t2[idx[:, 1].min()], t2[idx[:, 1].max()]],
                    ]
                ),
                n_samples=len(comp),
                max_abs_height=float(vals.max()),
            )
        )
    metadata = dict(metadata)
    metadata["refinement_failures"] = failures
    metadata["rejected_candidates"] = rejected
    metadata["height_evaluations"] = ev.evals
    solutions.sort(key=lambda s: tuple(s.t))
    return SolutionSet(solutions, continua, metadata)


def _connected_components(
    mask: np.ndarray, min_size: int
) -> list[list[tuple[int, int]]]:
    seen = np.zeros_like(mask)
    comps = []
    r1, r2 = mask.shape
    for i0 in range(r1):
        for j0 in range(r2):
            if not mask[i0, j0] or seen[i0, j0]:
                continue
            stack = [(i0, j0)]
            seen[i0, j0] = True
            comp = []
            while stack:
                i, j = stack.pop()
                comp.append((i, j))
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    a, b = i + di, j + dj
                    if 0 <= a < r1 and 0 <= b < r2 and mask[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        stack.append((a, b))
            if len(comp) >= min_size:
                comps.append(comp)
    return comps


def _nearest_sample_flagged(
    t: np.ndarray, t1: np.ndarray, t2: np.ndarray, excluded: np.ndarray
) -> bool:
    i = int(np.clip(np.argmin(np.abs(t1 - t[0])), 0, t1.size - 1))
    j = int(np.clip(np.argmin(np.abs(t2 - t[1])), 0, t2.size - 1))
    return bool(excluded[i, j])


def solve_from_seeds(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    seeds: np.ndarray,
    accept_tol: float | None = None,
    t_tol: float = 1e-8,
    params: SolverParams | None = None,
) -> SolutionSet:
    """Refine user-supplied fiber coordinates to solutions (any fiber dim).

    This is the entry point for fiber dimensions above 2, where no scan
    pattern is provided; each seed runs the damped finite-difference
    Newton used by the 2D scan.
    """
    params = params or SolverParams()
    if accept_tol is None:
        accept_tol = default_accept_tol(g)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[1] != d.fiber_dim:
        raise FiberDimMismatch(
            f"seeds have {seeds.shape[1]} coordinates, fiber needs {d.fiber_dim}"
        )
    ev = _HeightEvaluator(d, f, g, params)
    height_goal = 0.25 * accept_tol
    dedup_tol = max(100.0 * t_tol, 1e-6 * (1.0 + float(np.abs(seeds).max())))
    roots: list[np.ndarray] = []
    failures = 0
    for seed in seeds:
        t_ref, hn, ok = _refine_nd(ev.height, seed, height_goal, t_tol)
        if not ok:
            failures += 1
            continue
        if any(np.linalg.norm(t_ref - r) <= dedup_tol for r in roots):
            continue
        roots.append(t_ref)
    solutions = []
    for t_ref in roots:
        p = ev.point(t_ref)
        r = norm_l2(semilinear_apply(f, p.u) - g)
        if r <= accept_tol:
            solutions.append(Solution(t=p.t, u=p.u, residual=r))
    solutions.sort(key=lambda s: tuple(s.t))
    return SolutionSet(
        solutions,
        [],
        {"seeds": seeds.tolist(), "refinement_failures": failures,
         "accept_tol": accept_tol, "t_tol": t_tol},
    )


def solve_unique(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    params: SolverParams | None = None,
) -> Solution:
    """The unique solution when the fiber is 0-dimensional.

    With no eigenvalue in the band the horizontal problem is the whole
    problem and the contraction gives existence and uniqueness at once.
    """
    if d.fiber_dim != 0:
        raise FiberDimMismatch(f"fiber dimension is {d.fiber_dim}, expected 0")
    p = fiber_point(d, f, g, np.empty(0), params=params)
    return Solution(
        t=np.empty(0), u=p.u, residual=norm_l2(semilinear_apply(f, p.u) - g)
    )


# -- independent oracle ------------------------------------------------

def newton_multistart_oracle(
    basis: SpectralBasis,
    f: Nonlinearity,
    g: GridFunction,
    n_starts: int = 200,
    seed: int = 0,
    box_scale: float = 1.0,
    tol: float = 1e-11,
    dedup_tol: float | None = None,
    max_iter: int = 80,
    decomposition: _DecompositionBase | None = None,
) -> SolutionSet:
    """Damped Newton multistart on the full nodal system (1D grids).

    Starting points are drawn uniformly from a coefficient-space box with
    half-widths box_scale / (1 + (k/4)^2) in mode k, so low modes (where
    the interesting solution structure lives) dominate while every mode
    still varies.  The Jacobian uses the right-hand slope of f at kinks
    and is solved in tridiagonal form.  Converged points (full residual
    <= tol * (1 + |g|)) are deduplicated by L2 distance.  This path
    shares no code with the fiber solver and is the cross-check oracle
    for enumeration results.

    Pass ``decomposition`` to report fiber coordinates of each root;
    otherwise ``t`` is left empty.
    """
    grid = basis.grid
    if not isinstance(grid, Interval1D):
        raise ValueError("the multistart oracle supports 1D grids only")
    n = grid.n
    h2 = grid.h * grid.h
    gv = g.values
    scale = 1.0 + norm_l2(g)
    abs_tol = tol * scale
    sqrt_w = math.sqrt(grid.weight)

    def residual_vec(uv: np.ndarray) -> np.ndarray:
        out = 2.0 * uv
        out[:-1] -= uv[1:]
        out[1:] -= uv[:-1]
        out /= h2
        out -= f(uv)
        out -= gv
        return out

    rng = np.random.default_rng(seed)
    half_width = box_scale / (1.0 + (np.arange(n) / 4.0) ** 2)
    roots: list[np.ndarray] = []
    root_res: list[float] = []
    failures = 0
    ab = np.empty((3, n))
    ab[0, :] = -1.0 / h2
    ab[2, :] = -1.0 / h2
    for _ in range(n_starts):
        coeffs = rng.uniform(-1.0, 1.0, size=n) * half_width
        uv = basis.coeffs_to_values(coeffs)
        rv = residual_vec(uv)
        rn = sqrt_w * float(np.linalg.norm(rv))
        ok = False
        for _ in range(max_iter):
            if rn <= abs_tol:
                ok = True
                break
            ab[1, :] = 2.0 / h2 - f.slope_at(uv)
            step = solve_banded((1, 1), ab, -rv)
            lam = 1.0
            while lam >= 1.0 / 64.0:
                u_new = uv + lam * step
                r_new = residual_vec(u_new)
                rn_new = sqrt_w * float(np.linalg.norm(r_new))
                if rn_new <= (1.0 - 0.25 * lam) * rn:
                    break
                lam *= 0.5
            else:
                break
            uv, rv, rn = u_new, r_new, rn_new
        else:
            ok = rn <= abs_tol
        if not ok:
            failures += 1
            continue
        roots.append(uv)
        root_res.append(rn)

    dd = dedup_tol if dedup_tol is not None else 1e-6 * scale
    unique: list[np.ndarray] = []
    unique_res: list[float] = []
    for uv, rn in zip(roots, root_res):
        matched = False
        for i, other in enumerate(unique):
            if sqrt_w * float(np.linalg.norm(uv - other)) <= dd:
                matched = True
                if rn < unique_res[i]:
                    unique[i], unique_res[i] = uv, rn
                break
        if not matched:
            unique.append(uv)
            unique_res.append(rn)

    solutions = []
    for uv, rn in zip(unique, unique_res):
        u = GridFunction(grid, uv)
        t = (
            decomposition.vertical_coords(u)
            if decomposition is not None
            else np.empty(0)
        )
        solutions.append(Solution(t=t, u=u, residual=rn))
    solutions.sort(key=lambda s: tuple(basis.to_coeffs(s.u)[:3]))
    return SolutionSet(
        solutions,
        [],
        {
            "n_starts": n_starts,
            "seed": seed,
            "box_scale": box_scale,
            "tol": tol,
            "dedup_tol": dd,
            "failures": failures,
        },
    )


# -- one-parameter counting scans ---------------------------------------

@dataclass
class ScanRecord:
    """Solution count for one member of a right-hand-side family."""

    s: float
    count: int
    continuum: bool
    solution_set: SolutionSet = field(repr=False)


def ap_scan(
    d: _DecompositionBase,
    f: Nonlinearity,
    h0: GridFunction,
    s_values: np.ndarray,
    t_min: float,
    t_max: float,
    n_samples: int = 64,
    accept_tol: float | None = None,
    degenerate_tol: float | None = None,
    t_tol: float = 1e-10,
    params: SolverParams | None = None,
) -> list[ScanRecord]:
    """Count solutions along the family g(s) = h0 - s * phi_1.

    phi_1 is the ground eigenvector.  For an exact decomposition whose
    band contains the ground eigenvalue, the family leaves the horizontal
    part of g untouched, so a single fiber trace serves every s: only the
    heights shift, by s times the phi_1 coordinate.  This is the classical
    counting experiment (0 solutions on one side, 2 on the other, 1 at the
    fold) in scan form.
    """
    if d.fiber_dim < 1:
        raise FiberDimMismatch("ap_scan needs a nontrivial fiber")
    params = params or SolverParams()
    basis = d.basis
    lam1, phi1 = basis.eigenpair(1)
    s_values = np.asarray(s_values, dtype=float)

    fast = isinstance(d, BandDecomposition) and d.a < lam1 < d.b
    records: list[ScanRecord] = []
    if fast and d.fiber_dim == 1:
        if accept_tol is None:
            accept_tol = default_accept_tol(h0)
        if degenerate_tol is None:
            degenerate_tol = default_degenerate_tol(h0)
        ts = np.linspace(t_min, t_max, n_samples)
        trace = trace_fiber(d, f, h0, ts, params=params)
        base_heights = trace.heights()[:, 0]
        e1 = d.vertical_coords(phi1)
        for s in s_values:
            g_s = h0 - float(s) * phi1
            ev = _HeightEvaluator(d, f, h0, params, shift=float(s) * e1)

            def residual_of(u: GridFunction, g_s=g_s) -> float:
                return norm_l2(semilinear_apply(f, u) - g_s)

            sset = _enumerate_1d(
                ts,
                base_heights + float(s) * float(e1[0]),
                ev,
                residual_of,
                accept_tol,
                degenerate_tol,
                t_tol,
                metadata={"s": float(s), "t_min": t_min, "t_max": t_max,
                          "n_samples": n_samples},
            )
            records.append(
                ScanRecord(float(s), sset.count, bool(sset.continua), sset)
            )
        return records

    for s in s_values:
        g_s = h0 - float(s) * phi1
        if d.fiber_dim == 1:
            sset = solve_on_fiber_1d(
                d, f, g_s, t_min, t_max, n_samples,
                accept_tol=accept_tol, degenerate_tol=degenerate_tol,
                t_tol=t_tol, params=params,
            )
        else:
            sset = solve_on_fiber_2d(
                d, f, g_s, np.array([[t_min, t_max], [t_min, t_max]]),
                resolution=max(int(math.isqrt(n_samples)), 8),
                accept_tol=accept_tol, degenerate_tol=degenerate_tol,
                params=params,
            )
        records.append(ScanRecord(float(s), sset.count, bool(sset.continua), sset))
    return records


def write_scan_csv(records: list[ScanRecord], path: str | Path) -> None:
    lines = ["s,count,continuum"]
    for r in records:
        lines.append(f"{r.s:.17g},{r.count},{int(r.continuum)}")
    Path(path).write_text("\n".join(lines) + "\n")
