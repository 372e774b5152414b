"""Band-induced splitting of a grid into vertical and horizontal parts.

Fix a slope band (a, b) containing no stencil eigenvalue at its endpoints.
The eigenvalues strictly inside the band span the finite-dimensional
vertical subspace; everything else is horizontal.  With gamma the band
midpoint, the shifted operator T = laplacian - gamma is invertible on the
horizontal subspace with norm 1/dist(gamma, spectrum outside the band),
and any nonlinearity whose slopes stay inside the band becomes a
contraction there with factor

    contraction = (b - gamma) / dist(gamma, spectrum outside the band) < 1.

That factor is the sole convergence certificate used by the fiber solver.
A seeded perturbation of the vertical subspace is provided to demonstrate
that solution counts are stable under small changes of the splitting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, svdvals

from .grid import Grid, GridFunction, Interval1D, Rect2D, SpectralBasis


class EigenvalueOnBoundary(ValueError):
    """A band endpoint is within gap_tol of a stencil eigenvalue."""


class ResolutionWarning(UserWarning):
    """The grid resolves the band differently from the continuum problem."""


class _DecompositionBase:
    """Shared GridFunction-level API on top of coefficient kernels.

    Subclasses implement the ``_coeff_*`` methods and provide the
    attributes ``basis``, ``a``, ``b``, ``gamma``, ``fiber_dim`` and
    ``contraction``; everything here is a thin transform wrapper.
    """

    # -- coefficient kernels (implemented by subclasses) --

    def _coeff_project_vertical(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _coeff_t_apply(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _coeff_t_inverse(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _coeff_vertical_coords(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _coeff_from_vertical(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _coeff_vertical_forcing(self, vc: np.ndarray) -> np.ndarray:
        """Horizontal component of T applied to a vertical element.

        Zero for the exact eigen-splitting; nonzero once the vertical
        subspace is perturbed, and the fiber solver must subtract it.
        """
        raise NotImplementedError

    def _coeff_project_horizontal(self, c: np.ndarray) -> np.ndarray:
        return c - self._coeff_project_vertical(c)

    # -- public API --

    def project_vertical(self, u: GridFunction) -> GridFunction:
        return self.basis.from_coeffs(
            self._coeff_project_vertical(self.basis.to_coeffs(u))
        )

    def project_horizontal(self, u: GridFunction) -> GridFunction:
        # complementary by construction: the two projections sum to u
        return u - self.project_vertical(u)

    def apply_T(self, w: GridFunction) -> GridFunction:
        """Shifted operator (laplacian - gamma) restricted horizontally."""
        return self.basis.from_coeffs(self._coeff_t_apply(self.basis.to_coeffs(w)))

    def apply_T_inverse(self, z: GridFunction) -> GridFunction:
        return self.basis.from_coeffs(self._coeff_t_inverse(self.basis.to_coeffs(z)))

    def vertical_coords(self, u: GridFunction) -> np.ndarray:
        """Coordinates of the vertical component in the fiber frame."""
        return self._coeff_vertical_coords(self.basis.to_coeffs(u))

    def vertical_from_coords(self, t: np.ndarray) -> GridFunction:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.size != self.fiber_dim:
            raise ValueError(f"expected {self.fiber_dim} coordinates, got {t.size}")
        return self.basis.from_coeffs(self._coeff_from_vertical(t))


@dataclass
class BandDecomposition(_DecompositionBase):
    """Exact eigen-splitting for a band (a, b).

    ``indices`` lists the 1-based ranks (in the sorted spectrum) of the
    eigenvalues inside the band; ``contraction`` is the certified factor
    described in the module docstring.
    """

    basis: SpectralBasis
    a: float
    b: float
    gap_tol: float
    gamma: float
    indices: np.ndarray
    in_band: np.ndarray = field(repr=False)  # natural-order mask
    band_eigenvalues: np.ndarray
    outside_distance: float
    contraction: float
    fiber_dim: int

    def _coeff_project_vertical(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros_like(c)
        out[self.in_band] = c[self.in_band]
        return out

    def _coeff_t_apply(self, c: np.ndarray) -> np.ndarray:
        out = (self.basis.eigenvalues - self.gamma) * c
        out[self.in_band] = 0.0
        return out

    def _coeff_t_inverse(self, c: np.ndarray) -> np.ndarray:
        out = c / (self.basis.eigenvalues - self.gamma)
        out[self.in_band] = 0.0
        return out

    def _coeff_vertical_coords(self, c: np.ndarray) -> np.ndarray:
        return c[self.in_band].copy()

    def _coeff_from_vertical(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros(self.basis.size)
        out[self.in_band] = t
        return out

    def _coeff_vertical_forcing(self, vc: np.ndarray) -> np.ndarray:
        return np.zeros(self.basis.size)

    def summary(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "gamma": self.gamma,
            "indices": [int(i) for i in self.indices],
            "lambda": [float(x) for x in self.band_eigenvalues],
            "c": self.contraction,
            "fiber_dim": self.fiber_dim,
        }


def build_decomposition(
    basis: SpectralBasis, a: float, b: float, gap_tol: float | None = None
) -> BandDecomposition:
    """Split the spectrum of a basis at the band (a, b).

    Raises :class:`EigenvalueOnBoundary` when an eigenvalue sits within
    ``gap_tol`` (default ``1e-6 * (b - a)``) of either endpoint, since the
    contraction certificate degrades to nothing there.  Warns when the
    number of stencil eigenvalues inside the band differs from the count
    for the continuum operator on the same domain, which signals an
    under-resolved grid.
    """
    a, b = float(a), float(b)
    if not b > a:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if gap_tol is None:
        gap_tol = 1e-6 * (b - a)
    lam = basis.eigenvalues
    for endpoint in (a, b):
        dist = np.abs(lam - endpoint)
        j = int(np.argmin(dist))
        if dist[j] <= gap_tol:
            raise EigenvalueOnBoundary(
                f"eigenvalue {lam[j]:.12g} (natural index {j + 1}) is within "
                f"gap_tol={gap_tol:.3g} of band endpoint {endpoint:.12g}"
            )
    gamma = 0.5 * (a + b)
    in_band = (lam > a) & (lam < b)
    if bool(in_band.all()):
        raise ValueError("band contains the entire discrete spectrum; widen the grid")
    fiber_dim = int(in_band.sum())
    outside = lam[~in_band]
    outside_distance = float(np.min(np.abs(outside - gamma)))
    contraction = (b - gamma) / outside_distance
    if not contraction < 1.0:
        # cannot happen when endpoints are eigenvalue-free: any eigenvalue
        # outside (a, b) is at distance > b - gamma from the midpoint
        raise AssertionError("contraction certificate >= 1")

    sorted_mask = in_band[basis._order]
    indices = np.flatnonzero(sorted_mask) + 1
    band_eigenvalues = np.sort(lam[in_band])

    expected = _continuum_count(basis.grid, a, b)
    if expected is not None and expected != fiber_dim:
        msg = (
            f"band ({a}, {b}) holds {fiber_dim} stencil eigenvalues but "
            f"{expected} continuum eigenvalues"
        )
        hint = _resolution_hint(basis.grid, a, b)
        if hint is not None:
            msg += f"; roughly n >= {hint} interior nodes would resolve it"
        warnings.warn(msg, ResolutionWarning, stacklevel=2)

    return BandDecomposition(
        basis=basis,
        a=a,
        b=b,
        gap_tol=gap_tol,
        gamma=gamma,
        indices=indices,
        in_band=in_band,
        band_eigenvalues=band_eigenvalues,
        outside_distance=outside_distance,
        contraction=contraction,
        fiber_dim=fiber_dim,
    )


def _continuum_modes(grid: Grid) -> np.ndarray | None:
    """Dirichlet eigenvalues of the continuum operator, below a cap."""
    if isinstance(grid, Interval1D):
        base = (math.pi / grid.length) ** 2
        k = np.arange(1, grid.n + 1, dtype=float)
        return base * k * k
    if isinstance(grid, Rect2D):
        bx = (math.pi / grid.x.length) ** 2
        by = (math.pi / grid.y.length) ** 2
        j = np.arange(1, grid.x.n + 1, dtype=float)
        k = np.arange(1, grid.y.n + 1, dtype=float)
        return (bx * j * j)[:, None] + (by * k * k)[None, :]
    return None


def _continuum_count(grid: Grid, a: float, b: float) -> int | None:
    modes = _continuum_modes(grid)
    if modes is None:
        return None
    return int(np.count_nonzero((modes > a) & (modes < b)))


def _resolution_hint(grid: Grid, a: float, b: float) -> int | None:
    # leading-order eigenvalue defect for mode k is k^4 w^4 h^2 / 12 with
    # w = pi / L; ask for that to clear the distance to the band edges
    if not isinstance(grid, Interval1D):
        return None
    w = math.pi / grid.length
    hint = 0
    kmax = int(math.sqrt(b) / w) + 2
    for k in range(1, kmax + 1):
        lam = (k * w) ** 2
        dist = min(abs(lam - a), abs(lam - b))
        if dist <= 0:
            continue
        h = math.sqrt(12.0 * dist) / ((k * w) ** 2)
        hint = max(hint, int(math.ceil(grid.length / h)) - 1)
    return hint if hint > 0 else None


@dataclass
class PerturbedDecomposition(_DecompositionBase):
    """Vertical subspace rotated by a seeded random perturbation.

    Built by :func:`perturb_vertical`.  The fiber frame is the column set
    of an orthonormal coefficient-space matrix B close to the exact eigen
    coordinates; the horizontal complement C carries a dense restriction
    of the shifted operator, factored once.  The certified contraction is
    (b - gamma) / sigma_min of that restriction.
    """

    base: BandDecomposition
    eps: float
    seed: int
    frame: np.ndarray = field(repr=False)  # B: size x fiber_dim, orthonormal
    complement: np.ndarray = field(repr=False)  # C: size x (size - fiber_dim)
    _lu: tuple = field(repr=False)
    sigma_min: float
    contraction: float

    def __post_init__(self) -> None:
        self.basis = self.base.basis
        self.a = self.base.a
        self.b = self.base.b
        self.gamma = self.base.gamma
        self.fiber_dim = self.base.fiber_dim

    def _coeff_project_vertical(self, c: np.ndarray) -> np.ndarray:
        return self.frame @ (self.frame.T @ c)

    def _coeff_t_apply(self, c: np.ndarray) -> np.ndarray:
        w = self._coeff_project_horizontal(c)
        return self._coeff_project_horizontal(
            (self.basis.eigenvalues - self.gamma) * w
        )

    def _coeff_t_inverse(self, c: np.ndarray) -> np.ndarray:
        y = lu_solve(self._lu, self.complement.T @ c)
        return self.complement @ y

    def _coeff_vertical_coords(self, c: np.ndarray) -> np.ndarray:
        return self.frame.T @ c

    def _coeff_from_vertical(self, t: np.ndarray) -> np.ndarray:
        return self.frame @ t

    def _coeff_vertical_forcing(self, vc: np.ndarray) -> np.ndarray:
        return self._coeff_project_horizontal(
            (self.basis.eigenvalues - self.gamma) * vc
        )

    def frame_angles(self) -> np.ndarray:
        """Principal angles (radians) between the perturbed and exact frames."""
        exact = np.zeros((self.basis.size, self.fiber_dim))
        exact[self.base.in_band, np.arange(self.fiber_dim)] = 1.0
        s = svdvals(exact.T @ self.frame)
        return np.arccos(np.clip(s, -1.0, 1.0))

    def summary(self) -> dict:
        out = self.base.summary()
        out.update(
            {
                "perturbation_eps": self.eps,
                "perturbation_seed": self.seed,
                "c": self.contraction,
                "sigma_min": self.sigma_min,
            }
        )
        return out


def perturb_vertical(
    d: BandDecomposition, eps: float, seed: int
) -> PerturbedDecomposition:
    """Rotate the vertical subspace by a seeded perturbation of size eps.

    Each exact fiber direction e_k is replaced by e_k + eps * r_k with r_k
    a unit Gaussian direction orthogonal to the whole exact vertical
    subspace; the set is then re-orthonormalized.  The draw of r_k depends
    only on ``seed`` (not eps), so displacement studies across eps values
    rotate along a fixed direction field.

    Requires 0 <= eps < 0.1 so the perturbed splitting stays within the
    contraction regime certified by sigma_min of the restricted operator.
    """
    if not 0.0 <= eps < 0.1:
        raise ValueError(f"need 0 <= eps < 0.1, got {eps}")
    if d.fiber_dim == 0:
        raise ValueError("vertical subspace is trivial; nothing to perturb")
    n = d.basis.size
    k = d.fiber_dim
    rng = np.random.default_rng(seed)
    cols = np.zeros((n, k))
    band_idx = np.flatnonzero(d.in_band)
    for i, bi in enumerate(band_idx):
        r = rng.standard_normal(n)
        r[d.in_band] = 0.0  # orthogonal to the exact vertical subspace
        r /= np.linalg.norm(r)
        cols[:, i] = eps * r
        cols[bi, i] += 1.0
    frame, rmat = np.linalg.qr(cols)
    frame = frame * np.sign(np.diag(rmat))  # eps = 0 must reproduce e_k exactly

    full, _ = np.linalg.qr(frame, mode="complete")
    complement = full[:, k:]
    diag = d.basis.eigenvalues - d.gamma
    restricted = complement.T @ (diag[:, None] * complement)
    lu = lu_factor(restricted)
    sigma_min = float(svdvals(restricted).min())
    contraction = (d.b - d.gamma) / sigma_min
    if not contraction < 1.0:
        raise ValueError(
            f"perturbation eps={eps} destroys the contraction certificate "
            f"(factor {contraction:.4f})"
        )
    return PerturbedDecomposition(
        base=d,
        eps=eps,
        seed=seed,
        frame=frame,
        complement=complement,
        _lu=lu,
        sigma_min=sigma_min,
        contraction=contraction,
    )
