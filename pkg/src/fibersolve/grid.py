"""Uniform Dirichlet grids and the discrete sine calculus on them.

A grid covers an interval [x0, x1] (or a tensor-product rectangle) with
equally spaced interior nodes.  Boundary values are identically zero and
never stored.  The negative second-difference Laplacian is diagonalized
exactly by discrete sine vectors, which gives fast transforms and two
computable norms: a weighted l2 norm playing the role of L2, and the
energy norm ``norm_h2(u) = norm_l2(laplacian_apply(u))`` for the solution
space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dst, dstn


@dataclass(frozen=True)
class Interval1D:
    """Interval [x0, x1] with n equally spaced interior nodes.

    The mesh width is h = (x1 - x0) / (n + 1); node j (1-based) sits at
    x0 + j * h.  Dirichlet values at x0 and x1 are implicit zeros.
    """

    x0: float
    x1: float
    n: int

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0):
            raise ValueError(f"need x1 > x0, got [{self.x0}, {self.x1}]")
        if self.n < 3:
            raise ValueError(f"need at least 3 interior nodes, got n={self.n}")

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    @property
    def h(self) -> float:
        return (self.x1 - self.x0) / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n

    @property
    def weight(self) -> float:
        # quadrature weight of one node in the discrete L2 inner product
        return self.h

    def nodes(self) -> np.ndarray:
        j = np.arange(1, self.n + 1, dtype=float)
        return self.x0 + j * self.h


@dataclass(frozen=True)
class Rect2D:
    """Tensor product of two intervals; nodes ordered x-major.

    A value array has shape (x.n * y.n,) flattened from (x.n, y.n) in C
    order, so index i*y.n + j holds the node (x_i, y_j).
    """

    x: Interval1D
    y: Interval1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.n, self.y.n)

    @property
    def size(self) -> int:
        return self.x.n * self.y.n

    @property
    def weight(self) -> float:
        return self.x.h * self.y.h

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (X, Y), each of shape ``self.shape``."""
        return np.meshgrid(self.x.nodes(), self.y.nodes(), indexing="ij")


Grid = Interval1D | Rect2D


class GridFunction:
    """Real values on the interior nodes of a grid.

    Supports the vector-space operations needed by the solvers.  Values
    must be finite; the flat length must match the grid.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray) -> None:
        vals = np.asarray(values, dtype=float).reshape(-1)
        if vals.size != grid.size:
            raise ValueError(
                f"value count {vals.size} does not match grid size {grid.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function contains non-finite values")
        self.grid = grid
        self.values = vals

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(grid={self.grid!r}, n={self.grid.size})"


def _check_same_grid(u: GridFunction, v: GridFunction) -> None:
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid!r} vs {v.grid!r}")


def zeros(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.size))


def sample(grid: Grid, fn) -> GridFunction:
    """Evaluate a callable on the nodes.  1D: fn(x); 2D: fn(X, Y)."""
    if isinstance(grid, Interval1D):
        return GridFunction(grid, fn(grid.nodes()))
    X, Y = grid.nodes()
    return GridFunction(grid, np.asarray(fn(X, Y), dtype=float).reshape(-1))


def laplacian_apply(u: GridFunction) -> GridFunction:
    """Negative stencil Laplacian with zero Dirichlet boundary.

    1D: (2*u_j - u_{j-1} - u_{j+1}) / h^2.  2D adds the analogous
    second difference in y.  Off-grid neighbors contribute zero.
    """
    grid = u.grid
    if isinstance(grid, Interval1D):
        return GridFunction(grid, _neg_lap_1d(u.values, grid.h))
    a = u.values.reshape(grid.shape)
    return GridFunction(grid, _neg_lap_2d(a, grid.x.h, grid.y.h).reshape(-1))


def _neg_lap_1d(vals: np.ndarray, h: float) -> np.ndarray:
    out = 2.0 * vals
    out[:-1] -= vals[1:]
    out[1:] -= vals[:-1]
    out /= h * h
    return out


def _neg_lap_2d(a: np.ndarray, hx: float, hy: float) -> np.ndarray:
    cx = 1.0 / (hx * hx)
    cy = 1.0 / (hy * hy)
    out = (2.0 * cx + 2.0 * cy) * a
    out[:-1, :] -= cx * a[1:, :]
    out[1:, :] -= cx * a[:-1, :]
    out[:, :-1] -= cy * a[:, 1:]
    out[:, 1:] -= cy * a[:, :-1]
    return out


def inner_l2(u: GridFunction, v: GridFunction) -> float:
    """Discrete L2 inner product: weight * sum(u_j * v_j)."""
    _check_same_grid(u, v)
    return float(u.grid.weight * np.dot(u.values, v.values))


def norm_l2(u: GridFunction) -> float:
    return float(math.sqrt(u.grid.weight) * np.linalg.norm(u.values))


def norm_h2(u: GridFunction) -> float:
    """Energy norm: the L2 norm of the stencil Laplacian of u."""
    return norm_l2(laplacian_apply(u))


class SpectralBasis:
    """Discrete sine eigenbasis of the stencil Laplacian on a grid.

    Eigenvalues in "natural" transform order: for an interval, mode k has

        lambda_k = (4 / h^2) * sin(k*pi*h / (2*L))^2,   k = 1..n,

    which is increasing in k.  On a rectangle the natural order is the
    C-ordered tensor product of the two interval mode sets, and a stable
    argsort provides the globally sorted view used by :meth:`eigenpair`.

    Transforms map between node values and eigen-coefficients.  With the
    orthonormal type-1 sine transform S (an involution), coefficients are
    ``sqrt(weight) * S(values)``, so the map is an isometry from the
    discrete L2 norm to the Euclidean norm of the coefficient vector.
    """

    def __init__(self, grid: Grid) -> None:
        self.grid = grid
        if isinstance(grid, Interval1D):
            self.eigenvalues = _interval_eigenvalues(grid)
        else:
            lx = _interval_eigenvalues(grid.x)
            ly = _interval_eigenvalues(grid.y)
            self.eigenvalues = (lx[:, None] + ly[None, :]).reshape(-1)
        self._order = np.argsort(self.eigenvalues, kind="stable")
        self._sqrt_w = math.sqrt(grid.weight)

    @property
    def size(self) -> int:
        return self.grid.size

    def sorted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self._order]

    # -- raw array transforms (hot path for the iteration kernels) --

    def values_to_coeffs(self, vals: np.ndarray) -> np.ndarray:
        if isinstance(self.grid, Interval1D):
            return self._sqrt_w * dst(vals, type=1, norm="ortho")
        a = vals.reshape(self.grid.shape)
        return (self._sqrt_w * dstn(a, type=1, norm="ortho")).reshape(-1)

    def coeffs_to_values(self, coeffs: np.ndarray) -> np.ndarray:
        if isinstance(self.grid, Interval1D):
            return dst(coeffs, type=1, norm="ortho") / self._sqrt_w
        a = coeffs.reshape(self.grid.shape)
        return (dstn(a, type=1, norm="ortho") / self._sqrt_w).reshape(-1)

    # -- GridFunction wrappers --

    def to_coeffs(self, u: GridFunction) -> np.ndarray:
        if u.grid != self.grid:
            raise ValueError("grid mismatch between basis and function")
        return self.values_to_coeffs(u.values)

    def from_coeffs(self, coeffs: np.ndarray) -> GridFunction:
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.size != self.size:
            raise ValueError(
                f"coefficient count {coeffs.size} does not match basis size {self.size}"
            )
        return GridFunction(self.grid, self.coeffs_to_values(coeffs))

    def eigenpair(self, k: int) -> tuple[float, GridFunction]:
        """k-th smallest eigenvalue (k is 1-based) and its unit eigenvector.

        The eigenvector has discrete L2 norm 1 and its first component is
        positive.  Ties in 2D are broken stably by natural order.
        """
        if not 1 <= k <= self.size:
            raise ValueError(f"eigen index {k} out of range 1..{self.size}")
        idx = int(self._order[k - 1])
        e = np.zeros(self.size)
        e[idx] = 1.0
        phi = self.from_coeffs(e)
        first = phi.values[np.flatnonzero(phi.values)[0]]
        if first < 0:
            phi = -phi
        return float(self.eigenvalues[idx]), phi


def _interval_eigenvalues(grid: Interval1D) -> np.ndarray:
    k = np.arange(1, grid.n + 1, dtype=float)
    s = np.sin(k * math.pi / (2.0 * (grid.n + 1)))
    return (4.0 / grid.h**2) * s * s


# -- CSV serialization ------------------------------------------------

def write_csv(u: GridFunction, path: str | Path) -> None:
    """Write node coordinates and values with 17 significant digits.

    Columns are ``x,value`` (1D) or ``x,y,value`` (2D); one row per
    interior node, boundary omitted.  17 digits round-trip doubles
    exactly, so write/read/write is byte-stable for the value column.
    """
    path = Path(path)
    lines = []
    grid = u.grid
    if isinstance(grid, Interval1D):
        lines.append("x,value")
        for x, v in zip(grid.nodes(), u.values):
            lines.append(f"{x:.17g},{v:.17g}")
    else:
        lines.append("x,y,value")
        xs = grid.x.nodes()
        ys = grid.y.nodes()
        vals = u.values.reshape(grid.shape)
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                lines.append(f"{x:.17g},{y:.17g},{vals[i, j]:.17g}")
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path, grid: Grid | None = None) -> GridFunction:
    """Read a grid function written by :func:`write_csv`.

    If ``grid`` is omitted it is reconstructed from the coordinates,
    which must form a full uniform interior mesh.
    """
    path = Path(path)
    rows = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0].split(",")
    body = [row.split(",") for row in rows[1:]]
    if header == ["x", "value"]:
        xs = np.array([float(r[0]) for r in body])
        vals = np.array([float(r[1]) for r in body])
        inferred = _infer_interval(xs)
        if grid is None:
            grid = inferred
        elif not _interval_close(grid, inferred):
            raise ValueError(f"{path}: grid in file does not match expected {grid!r}")
        return GridFunction(grid, vals)
    if header == ["x", "y", "value"]:
        xs = np.array([float(r[0]) for r in body])
        ys = np.array([float(r[1]) for r in body])
        vals = np.array([float(r[2]) for r in body])
        gx = _infer_interval(np.unique(xs))
        gy = _infer_interval(np.unique(ys))
        inferred = Rect2D(gx, gy)
        if inferred.size != vals.size:
            raise ValueError(f"{path}: rows do not fill the product grid")
        if grid is None:
            grid = inferred
        elif not (
            isinstance(grid, Rect2D)
            and _interval_close(grid.x, inferred.x)
            and _interval_close(grid.y, inferred.y)
        ):
            raise ValueError(f"{path}: grid in file does not match expected {grid!r}")
        # rows were written x-major; trust the coordinate sort to confirm
        order = np.lexsort((ys, xs))
        return GridFunction(grid, vals[order])
    raise ValueError(f"{path}: unrecognized header {rows[0]!r}")


def _infer_interval(xs: np.ndarray) -> Interval1D:
    if xs.size < 3:
        raise ValueError("need at least 3 nodes to infer a grid")
    diffs = np.diff(xs)
    h = float(np.mean(diffs))
    if h <= 0 or np.max(np.abs(diffs - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("nodes are not uniformly spaced")
    return Interval1D(float(xs[0] - h), float(xs[-1] + h), int(xs.size))


def _interval_close(a: Interval1D, b: Interval1D, tol: float = 1e-9) -> bool:
    scale = max(1.0, abs(a.x0), abs(a.x1))
    return (
        a.n == b.n
        and abs(a.x0 - b.x0) <= tol * scale
        and abs(a.x1 - b.x1) <= tol * scale
    )
