"""Semilinear Dirichlet solver organized around a global fiber decomposition.

The public surface re-exported here covers the whole pipeline: grids and
their sine calculus, certified-slope nonlinearities, the band
decomposition with its contraction certificate, the horizontal solver
and fiber objects, exhaustive enumeration with an independent oracle,
and the gallery of constructively degenerate instances.
"""

from .grid import (
    GridFunction,
    Interval1D,
    Rect2D,
    SpectralBasis,
    inner_l2,
    laplacian_apply,
    norm_h2,
    norm_l2,
    read_csv,
    sample,
    write_csv,
    zeros,
)
from .nonlin import (
    PiecewiseLinear,
    SmoothSlope,
    compose,
    from_config,
    linear,
    lipschitz_constant,
    shifted,
    slope_range,
)
from .decomp import (
    BandDecomposition,
    EigenvalueOnBoundary,
    PerturbedDecomposition,
    ResolutionWarning,
    build_decomposition,
    perturb_vertical,
)
from .fiber import (
    FiberPoint,
    FiberTrace,
    HorizontalSolve,
    MaxIterExceeded,
    SolverParams,
    fiber_point,
    height_map,
    lift_point,
    semilinear_apply,
    sheet_sample,
    solve_horizontal,
    trace_fiber,
)
from .enumeration import (
    Continuum,
    FiberDimMismatch,
    ScanRecord,
    Solution,
    SolutionSet,
    ap_scan,
    default_accept_tol,
    default_degenerate_tol,
    default_scan_halfwidth,
    load_solution_set,
    newton_multistart_oracle,
    solve_from_seeds,
    solve_on_fiber_1d,
    solve_on_fiber_2d,
    solve_unique,
    write_scan_csv,
)
from .gallery import (
    FlatSegment,
    Halfline,
    HalflineReport,
    NoSolutionError,
    ResonantBError,
    Separable2D,
    SymmetricReport,
    build_flat_segment,
    build_halfline,
    build_separable_2d,
    build_symmetric_example,
    halfline_ray_heights,
    verify_halfline,
    verify_separable_2d,
)
from .config import ConfigError, RunConfig

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
