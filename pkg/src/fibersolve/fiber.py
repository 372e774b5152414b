"""Horizontal inversion by certified contraction; fibers, heights, sheets.

Writing u = w + v with v in the vertical subspace of a band decomposition
and w horizontal, the horizontal part of the semilinear problem

    laplacian_apply(u) - f(u) = g

is solved for w by a fixed-point iteration in the variable z = T w.  The
iteration map has Lipschitz factor at most the decomposition's certified
``contraction``; the loop stops once the step size guarantees, through
the contraction-mapping a-posteriori bound, that the remaining error is
below tolerance.  No residual heuristics enter the stopping decision,
but an independent residual of the returned point is always reported.

On top of the horizontal solver sit the fiber-level objects: the points
of a fiber (vertical coordinate -> lifted point and its height defect),
fiber traces along coordinate grids, and sheet samples of the forward map
restricted to one fiber.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decomp import _DecompositionBase
from .grid import GridFunction, laplacian_apply, norm_l2
from .nonlin import Nonlinearity, compose


class MaxIterExceeded(RuntimeError):
    """Contraction iteration hit its iteration cap before certifying."""


@dataclass(frozen=True)
class SolverParams:
    """Tolerance and cap for the horizontal contraction iteration.

    ``tol`` is relative: the certified error bound is
    tol * (1 + l2 norm of the horizontal target).  ``max_iter`` of None
    resolves to the a-priori contraction estimate plus slack.
    """

    tol: float = 1e-10
    max_iter: int | None = None

    def resolved_max_iter(self, contraction: float) -> int:
        if self.max_iter is not None:
            return max(1, self.max_iter)
        c = min(max(contraction, 1e-6), 1.0 - 1e-12)
        return int(math.ceil(math.log(self.tol * (1.0 - c)) / math.log(c))) + 50


@dataclass
class HorizontalSolve:
    """Result of one horizontal inversion."""

    w: GridFunction
    z: np.ndarray = field(repr=False)  # fixed-point variable, coefficients
    iterations: int
    residual: float
    conv_factor: float


def semilinear_apply(f: Nonlinearity, u: GridFunction) -> GridFunction:
    """The forward map: stencil Laplacian of u minus f(u), nodewise."""
    return laplacian_apply(u) - compose(f, u)


def _certify_band(d: _DecompositionBase, f: Nonlinearity) -> None:
    slack = 1e-12 * max(1.0, abs(d.a), abs(d.b))
    if f.slope_lo < d.a - slack or f.slope_hi > d.b + slack:
        raise ValueError(
            f"nonlinearity slopes [{f.slope_lo}, {f.slope_hi}] leave the "
            f"band ({d.a}, {d.b}); the contraction certificate does not apply"
        )


def _solve_horizontal_coeffs(
    d: _DecompositionBase,
    f: Nonlinearity,
    vc: np.ndarray,
    target_c: np.ndarray,
    warm_start: np.ndarray | None,
    params: SolverParams,
) -> tuple[np.ndarray, int, float, float]:
    """Fixed-point loop in coefficient space.

    Returns (z, iterations, conv_factor, certified_bound).  One transform
    pair per iteration: coefficients -> nodes for the nonlinearity, back
    for the projection.
    """
    basis = d.basis
    c = d.contraction
    fs = f.shifted(d.gamma)
    base = target_c - d._coeff_vertical_forcing(vc)
    target_norm = float(np.linalg.norm(target_c))
    tol_eff = params.tol * (1.0 + target_norm)
    # a-posteriori bound: once a step of size delta is taken, the distance
    # to the fixed point is at most delta * c / (1 - c)
    threshold = tol_eff * (1.0 - c) / c if c > 0 else math.inf
    guard = 1e-13 * (1.0 + target_norm)

    z = warm_start.copy() if warm_start is not None else target_c.copy()
    max_iter = params.resolved_max_iter(c)
    factor = math.nan
    prev_delta = None
    for it in range(1, max_iter + 1):
        u_vals = basis.coeffs_to_values(d._coeff_t_inverse(z) + vc)
        z_next = base + d._coeff_project_horizontal(
            basis.values_to_coeffs(fs(u_vals))
        )
        delta = float(np.linalg.norm(z_next - z))
        z = z_next
        if prev_delta is not None and prev_delta > guard:
            ratio = delta / prev_delta
            factor = ratio if math.isnan(factor) else max(factor, ratio)
        if delta <= threshold:
            return z, it, factor, delta * c / (1.0 - c)
        prev_delta = delta
    raise MaxIterExceeded(
        f"horizontal solve did not certify within {max_iter} iterations "
        f"(last step {delta:.3e}, threshold {threshold:.3e})"
    )


def solve_horizontal(
    d: _DecompositionBase,
    f: Nonlinearity,
    v: GridFunction,
    target: GridFunction,
    warm_start: np.ndarray | None = None,
    params: SolverParams | None = None,
) -> HorizontalSolve:
    """Solve the horizontal problem at vertical offset v.

    Finds the unique horizontal w with
    ``project_horizontal(semilinear_apply(f, w + v)) == target`` (target is
    projected horizontally first).  Requires the slopes of f to lie inside
    the decomposition band; raises :class:`MaxIterExceeded` if the
    certified stopping rule is not reached within the iteration cap.

    The reported ``residual`` is recomputed from the returned point by an
    independent application of the forward map, not from solver internals.
    """
    params = params or SolverParams()
    _certify_band(d, f)
    basis = d.basis
    vc = d._coeff_project_vertical(basis.to_coeffs(v))
    target_c = d._coeff_project_horizontal(basis.to_coeffs(target))
    z, iters, factor, _ = _solve_horizontal_coeffs(
        d, f, vc, target_c, warm_start, params
    )
    w = basis.from_coeffs(d._coeff_t_inverse(z))
    u = basis.from_coeffs(d._coeff_t_inverse(z) + vc)
    achieved = d._coeff_project_horizontal(basis.to_coeffs(semilinear_apply(f, u)))
    residual = float(np.linalg.norm(achieved - target_c))
    return HorizontalSolve(w=w, z=z, iterations=iters, residual=residual, conv_factor=factor)


@dataclass
class FiberPoint:
    """One point of a fiber: lifted solution candidate plus its height.

    ``height`` is the vertical-coordinate defect of the forward map
    against g; its zeros are exactly the solutions with this vertical
    component.  ``z`` retains the fixed-point variable for warm starts.
    """

    t: np.ndarray
    u: GridFunction
    w: GridFunction
    height: np.ndarray
    iterations: int
    residual_horizontal: float
    z: np.ndarray = field(repr=False)


def fiber_point(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    t: np.ndarray,
    warm_start: np.ndarray | None = None,
    params: SolverParams | None = None,
) -> FiberPoint:
    """Solve the horizontal problem over vertical coordinates t.

    The fiber of g at coordinate t is the point u = w + v(t) with w the
    horizontal solution for target ``project_horizontal(g)``.  The height
    is ``vertical_coords(semilinear_apply(f, u) - g)``.
    """
    params = params or SolverParams()
    _certify_band(d, f)
    basis = d.basis
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size != d.fiber_dim:
        raise ValueError(f"expected {d.fiber_dim} vertical coordinates, got {t.size}")
    gc = basis.to_coeffs(g)
    vc = d._coeff_from_vertical(t)
    target_c = d._coeff_project_horizontal(gc)
    z, iters, _, _ = _solve_horizontal_coeffs(d, f, vc, target_c, warm_start, params)
    wc = d._coeff_t_inverse(z)
    u = basis.from_coeffs(wc + vc)
    w = basis.from_coeffs(wc)
    defect_c = basis.to_coeffs(semilinear_apply(f, u)) - gc
    height = d._coeff_vertical_coords(defect_c)
    residual = float(np.linalg.norm(d._coeff_project_horizontal(defect_c)))
    return FiberPoint(
        t=t,
        u=u,
        w=w,
        height=height,
        iterations=iters,
        residual_horizontal=residual,
        z=z,
    )


def height_map(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    t: np.ndarray,
    warm_start: np.ndarray | None = None,
    params: SolverParams | None = None,
) -> np.ndarray:
    """Height of the fiber of g at vertical coordinate t.

    Zeros of this finite-dimensional map enumerate all solutions of
    ``semilinear_apply(f, u) == g``; see the enumeration module.
    """
    return fiber_point(d, f, g, t, warm_start=warm_start, params=params).height


@dataclass
class FiberTrace:
    """Fiber points sampled on a coordinate grid, sorted lexicographically."""

    points: list[FiberPoint]
    decomposition_summary: dict
    g_hash: str
    params: SolverParams

    @property
    def fiber_dim(self) -> int:
        return self.points[0].t.size if self.points else 0

    def heights(self) -> np.ndarray:
        return np.array([p.height for p in self.points])

    def coords(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def write_csv(self, path: str | Path, sidecar: bool = True) -> None:
        """Write ``t_*,height_*,iterations,residual_horizontal`` rows.

        A JSON sidecar (same stem, .json) records the g hash, the
        decomposition summary and the solver parameters, so a trace file
        is attributable to its inputs.
        """
        path = Path(path)
        k = self.fiber_dim
        header = (
            [f"t_{i + 1}" for i in range(k)]
            + [f"height_{i + 1}" for i in range(k)]
            + ["iterations", "residual_horizontal"]
        )
        lines = [",".join(header)]
        for p in self.points:
            cells = (
                [f"{x:.17g}" for x in p.t]
                + [f"{x:.17g}" for x in p.height]
                + [str(p.iterations), f"{p.residual_horizontal:.17g}"]
            )
            lines.append(",".join(cells))
        path.write_text("\n".join(lines) + "\n")
        if sidecar:
            meta = {
                "g_hash": self.g_hash,
                "decomposition": self.decomposition_summary,
                "params": {"tol": self.params.tol, "max_iter": self.params.max_iter},
            }
            path.with_suffix(".json").write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n"
            )


def hash_grid_function(g: GridFunction) -> str:
    """Stable identity of a grid function: sha256 over grid and values."""
    h = hashlib.sha256()
    h.update(repr(g.grid).encode())
    h.update(np.ascontiguousarray(g.values).tobytes())
    return h.hexdigest()


def trace_fiber(
    d: _DecompositionBase,
    f: Nonlinearity,
    g: GridFunction,
    t_grid: np.ndarray,
    params: SolverParams | None = None,
) -> FiberTrace:
    """Sample the fiber of g at each row of t_grid, warm-starting in order.

    ``t_grid`` has shape (m, fiber_dim) (a 1D array is reshaped for
    fiber_dim 1).  Rows are visited in lexicographic order and each solve
    is warm-started from its predecessor, so neighbouring samples share
    fixed-point work; the returned points carry the same sorted order.
    """
    params = params or SolverParams()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim == 1:
        t_grid = t_grid[:, None]
    if t_grid.ndim != 2 or t_grid.shape[1] != d.fiber_dim:
        raise ValueError(
            f"t_grid must have shape (m, {d.fiber_dim}), got {t_grid.shape}"
        )
    order = np.lexsort(t_grid.T[::-1]) if t_grid.size else np.arange(0)
    points = []
    warm = None
    for i in order:
        p = fiber_point(d, f, g, t_grid[i], warm_start=warm, params=params)
        warm = p.z
        points.append(p)
    return FiberTrace(
        points=points,
        decomposition_summary=d.summary(),
        g_hash=hash_grid_function(g),
        params=params,
    )


def sheet_sample(
    d: _DecompositionBase,
    f: Nonlinearity,
    v: GridFunction,
    z_targets: list[GridFunction],
    params: SolverParams | None = None,
) -> list[tuple[GridFunction, np.ndarray]]:
    """Sample the sheet over one fiber: horizontal target -> vertical image.

    For each horizontal target z the unique preimage on the fiber through
    v is lifted and pushed forward; the returned pairs (z, sigma) give the
    graph of the sheet map, sigma in vertical coordinates.  The forward
    map restricted to the fiber is injective, so sheets never fold.
    """
    params = params or SolverParams()
    _certify_band(d, f)
    basis = d.basis
    vc = d._coeff_project_vertical(basis.to_coeffs(v))
    out = []
    warm = None
    for z in z_targets:
        target_c = d._coeff_project_horizontal(basis.to_coeffs(z))
        zsol, _, _, _ = _solve_horizontal_coeffs(d, f, vc, target_c, warm, params)
        warm = zsol
        u = basis.from_coeffs(d._coeff_t_inverse(zsol) + vc)
        sigma = d._coeff_vertical_coords(basis.to_coeffs(semilinear_apply(f, u)))
        out.append((z, sigma))
    return out


def lift_point(
    d: _DecompositionBase,
    f: Nonlinearity,
    z: GridFunction,
    t: np.ndarray,
    params: SolverParams | None = None,
) -> GridFunction:
    """Invert the fiber chart: the unique u over (z, t).

    Returns the u whose vertical coordinates are t and whose horizontal
    image is ``project_horizontal(z)``; together with the height this
    parameterizes the forward map in fiber coordinates.
    """
    params = params or SolverParams()
    _certify_band(d, f)
    basis = d.basis
    t = np.atleast_1d(np.asarray(t, dtype=float))
    vc = d._coeff_from_vertical(t)
    target_c = d._coeff_project_horizontal(basis.to_coeffs(z))
    zsol, _, _, _ = _solve_horizontal_coeffs(d, f, vc, target_c, None, params)
    return basis.from_coeffs(d._coeff_t_inverse(zsol) + vc)
