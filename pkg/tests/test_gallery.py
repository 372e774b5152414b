"""Constructive non-properness instances and their verification reports."""

import math

import numpy as np
import pytest

from fibersolve.decomp import build_decomposition
from fibersolve.fiber import semilinear_apply
from fibersolve.gallery import (
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
from fibersolve.grid import (
    GridFunction,
    Interval1D,
    Rect2D,
    SpectralBasis,
    inner_l2,
    norm_l2,
    zeros,
)
from fibersolve.nonlin import SmoothSlope, slope_range


# -- flat segment -----------------------------------------------------------


def test_flat_segment_residuals():
    grid = Interval1D(0.0, math.pi, 79)
    inst = build_flat_segment(grid, 0.5, 2.0)
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        u = inst.segment_point(t)
        assert norm_l2(semilinear_apply(inst.f, u)) <= 1e-10, f"t={t}"
    # outside the segment the middle slope no longer applies
    assert norm_l2(semilinear_apply(inst.f, inst.segment_point(1.5))) > 1e-6


def test_flat_segment_geometry():
    grid = Interval1D(0.0, math.pi, 79)
    inst = build_flat_segment(grid, 0.5, 2.0)
    assert inst.f.breakpoints == (0.0, inst.peak)
    assert inst.f.slopes == (0.5, inst.lam1, 2.0)
    assert inst.lam1 == pytest.approx(inst.basis.eigenvalues[0], rel=1e-15)
    # the segment tip has vertical coordinate t_max and grazes the kink
    d = build_decomposition(inst.basis, 0.5, 2.0)
    tip = inst.segment_point(1.0)
    assert d.vertical_coords(tip)[0] == pytest.approx(inst.t_max, rel=1e-12)
    assert np.max(tip.values) == pytest.approx(inst.peak, rel=1e-12)


def test_flat_segment_band_validation():
    grid = Interval1D(0.0, math.pi, 49)
    with pytest.raises(ValueError):
        build_flat_segment(grid, 1.5, 2.0)  # ground eigenvalue below a
    with pytest.raises(ValueError):
        build_flat_segment(grid, 0.2, 0.9)  # ground eigenvalue above b


# -- half-line ----------------------------------------------------------------


def test_halfline_k2_b_closed_form():
    inst = build_halfline(2, 2.56, Interval1D(0.0, math.pi, 199))
    assert inst.b == pytest.approx(64.0 / 9.0, abs=1e-12)
    # length equation: pi/sqrt(b) + pi/sqrt(a) = pi
    resid = math.pi / math.sqrt(inst.b) + math.pi / math.sqrt(inst.a) - math.pi
    assert abs(resid) <= 1e-12
    assert inst.lengths[0] == pytest.approx(math.pi / math.sqrt(inst.b))
    assert inst.lengths[1] == pytest.approx(math.pi / math.sqrt(2.56))
    assert inst.amplitudes[0] == 1.0
    assert slope_range(inst.f) == (2.56, inst.b)


def test_halfline_symmetric_limit():
    # a -> 4 from below forces b -> 4 from above and equal arch lengths
    inst = build_halfline(2, 3.99, Interval1D(0.0, math.pi, 199))
    assert 4.0 < inst.b < 4.2
    assert abs(inst.lengths[0] - math.pi / 2) < 0.02
    assert abs(inst.lengths[1] - math.pi / 2) < 0.02


def test_halfline_rejects_bad_inputs():
    grid = Interval1D(0.0, math.pi, 99)
    with pytest.raises(ValueError):
        build_halfline(1, 2.56, grid)
    with pytest.raises(ValueError):
        build_halfline(2, 0.5, grid)  # below the required slope window
    with pytest.raises(ValueError):
        build_halfline(2, 4.5, grid)
    with pytest.raises(ResonantBError):
        build_halfline(2, 2.25, grid)  # lands exactly on an eigenvalue


def test_halfline_three_arches():
    # k = 3: a in (4, 9), two steep arches and one shallow
    inst = build_halfline(3, 6.25, Interval1D(0.0, math.pi, 199))
    assert len(inst.lengths) == 3
    assert 2 * math.pi / math.sqrt(inst.b) + math.pi / 2.5 == pytest.approx(
        math.pi, abs=1e-12
    )
    signs = np.sign(inst.amplitudes)
    assert list(signs) == [1.0, -1.0, 1.0]


def test_halfline_junction_c1_continuity():
    inst = build_halfline(2, 2.56, Interval1D(0.0, math.pi, 199))
    vals = inst.psi.values
    h = inst.grid.h
    nodes = inst.grid.nodes()
    assert len(inst.junctions) == 1
    for xj in inst.junctions:
        i = int(np.argmin(np.abs(nodes - xj)))
        left = (vals[i] - vals[i - 1]) / h
        right = (vals[i + 1] - vals[i]) / h
        # first derivative is continuous: one-sided quotients differ by O(h)
        assert abs(left - right) <= 10.0 * h, f"junction {xj}"


def test_halfline_profile_matches_rk4_shoot():
    """Amplitude chain against an independent initial-value integration."""
    inst = build_halfline(2, 2.56, Interval1D(0.0, math.pi, 99))
    f = inst.f
    h = inst.grid.h
    m = 200  # RK4 substeps per grid interval
    dt = h / m
    u, up = 0.0, inst.amplitudes[0] * math.pi / inst.lengths[0]

    def rhs(state):
        return np.array([state[1], -f(state[0])])

    state = np.array([u, up])
    shot = []
    for _ in range(inst.grid.n):
        for _ in range(m):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        shot.append(state[0])
    gap = np.max(np.abs(np.asarray(shot) - inst.psi.values))
    assert gap <= 1e-6, f"profile mismatch {gap:.3e}"
    # one more interval reaches the far boundary, where the shot vanishes
    for _ in range(m):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(state[0]) <= 1e-6


def test_verify_halfline_report():
    rep = verify_halfline(2, 2.56)
    assert rep.passed
    assert rep.b == pytest.approx(64.0 / 9.0, abs=1e-10)
    assert set(rep.orders) == {0.5, 1.0, 2.0, 5.0}
    for p, order in rep.orders.items():
        assert order >= 1.0, f"p={p}: order {order:.3f}"
    for n1, n2 in zip(rep.n_values, rep.n_values[1:]):
        for p in rep.p_values:
            assert rep.residuals[n2][p] < rep.residuals[n1][p]
    # two-slope map is positively homogeneous: residuals scale linearly in p
    assert rep.scaling_defect <= 1e-10


def test_halfline_ray_heights_small():
    inst = build_halfline(2, 2.56, Interval1D(0.0, math.pi, 199))
    heights = halfline_ray_heights(inst, 2.0, 8.0)
    assert len(heights) == 4
    bound = 10.0 * inst.grid.h
    for p, value in heights:
        assert value <= bound, f"p={p}: |height| {value:.3e} > {bound:.3e}"


# -- separable 2D -------------------------------------------------------------


def test_separable_structure():
    iv = Interval1D(0.0, math.pi, 49)
    inst = build_separable_2d(2, 2.56, Rect2D(iv, iv))
    lo, hi = slope_range(inst.f)
    assert lo == pytest.approx(2.56 + 1.0)
    assert hi == pytest.approx(64.0 / 9.0 + 1.0)
    X, _ = inst.grid.nodes()
    vals = inst.psi.values.reshape(inst.grid.shape)
    # x-sections are multiples of the 1D profile
    ratio = vals[10, :] / inst.halfline.psi.values
    assert np.allclose(ratio, math.sin(X[10, 0]), atol=1e-12)


def test_separable_residual_identity():
    """Residual factors into the 1D defect plus the eigenvalue offset."""
    iv = Interval1D(0.0, math.pi, 99)
    inst = build_separable_2d(2, 2.56, Rect2D(iv, iv))
    r2 = semilinear_apply(inst.f, inst.psi)
    r1 = semilinear_apply(inst.halfline.f, inst.halfline.psi)
    lam1x = SpectralBasis(iv).eigenvalues[0]
    sin_x = np.sin(iv.nodes())
    predicted = np.outer(sin_x, r1.values) + (lam1x - 1.0) * inst.psi.values.reshape(
        inst.grid.shape
    )
    gap = np.max(np.abs(r2.values.reshape(inst.grid.shape) - predicted))
    assert gap <= 1e-9, f"identity defect {gap:.3e}"


def test_verify_separable_report():
    rep = verify_separable_2d(2, 2.56)
    assert rep.passed
    for p, order in rep.orders.items():
        assert order >= 1.0
    assert rep.scaling_defect <= 1e-10
    for n1, n2 in zip(rep.n_values, rep.n_values[1:]):
        for p in rep.p_values:
            assert rep.residuals[n2][p] < rep.residuals[n1][p]


# -- symmetric vertical example ----------------------------------------------


def test_symmetric_inner_products_vanish():
    grid = Interval1D(-math.pi / 2, math.pi / 2, 199)
    f, rep = build_symmetric_example(grid)
    assert rep.passed
    assert len(rep.entries) == 6
    ts = [e[0] for e in rep.entries]
    assert ts == [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    for t, value, norm_F, ok in rep.entries:
        assert ok and value <= 1e-9 * (1.0 + norm_F), f"t={t}"
    lo, hi = slope_range(f)
    assert 3.0 < lo < hi < 5.0


def test_symmetric_negative_control():
    # an uneven nonlinear part breaks the cancellation
    grid = Interval1D(-math.pi / 2, math.pi / 2, 199)
    basis = SpectralBasis(grid)
    lam2, phi2 = basis.eigenpair(2)
    f_skew = SmoothSlope(alpha=lam2, beta=0.5, x_offset=0.7, value_at_0=0.3)
    F = semilinear_apply(f_skew, 1.0 * phi2)
    value = abs(inner_l2(F, phi2))
    assert value > 1e-4 * (1.0 + norm_l2(F))


def test_symmetric_validation():
    grid = Interval1D(-math.pi / 2, math.pi / 2, 49)
    with pytest.raises(ValueError):
        build_symmetric_example(grid, beta=1.5)
    with pytest.raises(ValueError):
        build_symmetric_example(Interval1D(0.0, math.pi, 49))
