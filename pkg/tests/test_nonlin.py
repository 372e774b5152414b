"""Lipschitz nonlinearity families: evaluation, slopes, config round-trips."""

import math

import numpy as np
import pytest

from fibersolve.grid import GridFunction, Interval1D
from fibersolve.nonlin import (
    PiecewiseLinear,
    SmoothSlope,
    compose,
    from_config,
    linear,
    lipschitz_constant,
    shifted,
    slope_range,
)


def test_pwl_validation():
    with pytest.raises(ValueError):
        PiecewiseLinear((1.0, 0.0), (1.0, 2.0, 3.0))  # not increasing
    with pytest.raises(ValueError):
        PiecewiseLinear((0.0, 1.0), (1.0, 2.0))  # slope count off by one


def test_pwl_evaluation_by_hand():
    # slopes 2 on x<0, 0.5 on [0,1], 3 on x>1, passing through f(0)=1
    f = PiecewiseLinear((0.0, 1.0), (2.0, 0.5, 3.0), value_at_0=1.0)
    assert f(0.0) == pytest.approx(1.0)
    assert f(-2.0) == pytest.approx(1.0 - 4.0)
    assert f(0.5) == pytest.approx(1.25)
    assert f(1.0) == pytest.approx(1.5)
    assert f(2.0) == pytest.approx(1.5 + 3.0)
    assert f.slope_at(-1.0) == 2.0
    assert f.slope_at(0.5) == 0.5
    assert f.slope_at(5.0) == 3.0
    xs = np.array([-2.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(f(xs), [f(float(x)) for x in xs])


def test_pwl_continuity_at_knots():
    rng = np.random.default_rng(1)
    for _ in range(20):
        bps = np.sort(rng.uniform(-3, 3, size=4))
        bps += np.arange(4) * 1e-3  # enforce strict increase
        slopes = tuple(rng.uniform(-5, 5, size=5))
        f = PiecewiseLinear(tuple(bps), slopes, value_at_0=rng.uniform(-1, 1))
        for bp in bps:
            left = f(bp - 1e-9)
            right = f(bp + 1e-9)
            assert abs(left - right) <= 1e-7, f"jump at {bp}"


def test_lipschitz_bound_sampled():
    """|f(x) - f(y)| <= M |x - y| over random pairs, both families."""
    rng = np.random.default_rng(42)
    fs = [
        PiecewiseLinear((-1.0, 0.5), (3.0, -2.0, 1.5), value_at_0=0.2),
        SmoothSlope(alpha=1.25, beta=0.65),
        SmoothSlope(alpha=4.0, beta=0.5, x_offset=1.0, value_at_0=-0.3),
    ]
    for f in fs:
        M = lipschitz_constant(f)
        x = rng.uniform(-50, 50, size=500)
        y = rng.uniform(-50, 50, size=500)
        gap = np.abs(np.asarray(f(x)) - np.asarray(f(y)))
        assert np.all(gap <= M * np.abs(x - y) + 1e-12)


def test_smooth_slope_matches_finite_difference():
    f = SmoothSlope(alpha=2.0, beta=0.8, x_offset=0.3, value_at_0=1.1)
    assert f(0.0) == pytest.approx(1.1, rel=1e-12)
    assert f(0.3) == pytest.approx(
        1.1 + 2.0 * 0.3 + 0.8 * (1.0 - math.sqrt(1.0 + 0.09)), rel=1e-12
    )
    for x in (-3.0, -0.5, 0.0, 0.7, 4.0):
        fd = (f(x + 1e-6) - f(x - 1e-6)) / 2e-6
        assert fd == pytest.approx(f.slope_at(x), abs=1e-6), f"x={x}"


def test_slope_range_and_lipschitz():
    f = PiecewiseLinear((0.0,), (2.56, 64.0 / 9.0))
    assert slope_range(f) == (2.56, 64.0 / 9.0)
    assert lipschitz_constant(f) == 64.0 / 9.0
    g = SmoothSlope(alpha=1.25, beta=0.65)
    lo, hi = slope_range(g)
    assert lo == pytest.approx(0.6)
    assert hi == pytest.approx(1.9)
    # slope never leaves the open range
    xs = np.linspace(-1e6, 1e6, 101)
    ss = np.asarray([g.slope_at(float(x)) for x in xs])
    assert np.all(ss > lo) and np.all(ss < hi)
    h = SmoothSlope(alpha=-0.5, beta=0.4)
    assert lipschitz_constant(h) == pytest.approx(0.9)


def test_shifted():
    rng = np.random.default_rng(9)
    for f in (
        PiecewiseLinear((0.0, 1.0), (1.0, 2.0, 0.5), value_at_0=0.7),
        SmoothSlope(alpha=3.0, beta=0.25, x_offset=-0.4, value_at_0=0.1),
    ):
        g = shifted(f, 1.25)
        xs = rng.uniform(-10, 10, size=50)
        for x in xs:
            assert g(float(x)) == pytest.approx(f(float(x)) - 1.25 * x, rel=1e-12, abs=1e-12)
        lo, hi = slope_range(f)
        glo, ghi = slope_range(g)
        assert glo == pytest.approx(lo - 1.25)
        assert ghi == pytest.approx(hi - 1.25)


def test_linear_helper():
    f = linear(2.0, value_at_0=0.5)
    assert f(3.0) == pytest.approx(6.5)
    assert slope_range(f) == (2.0, 2.0)


def test_compose():
    iv = Interval1D(0.0, math.pi, 15)
    u = GridFunction(iv, np.linspace(-1, 1, 15))
    f = SmoothSlope(alpha=1.0, beta=0.5)
    fu = compose(f, u)
    assert fu.grid is iv
    assert np.allclose(fu.values, [f(float(x)) for x in u.values])


def test_config_roundtrip():
    fs = [
        PiecewiseLinear((0.0, 0.8), (1.0, 2.0, 0.5), value_at_0=0.7),
        SmoothSlope(alpha=3.25, beta=2.7, x_offset=0.1, value_at_0=-0.2),
        linear(4.0),
    ]
    for f in fs:
        g = from_config(f.to_config())
        assert type(g) is type(f)
        for x in (-2.0, 0.0, 0.3, 1.7):
            assert g(x) == pytest.approx(f(x), rel=1e-15, abs=1e-15)


def test_config_rejects_garbage():
    with pytest.raises(ValueError):
        from_config({"kind": "cubic"})
    with pytest.raises((ValueError, KeyError, TypeError)):
        from_config({"kind": "pwl", "breakpoints": [1.0, 0.0], "slopes": [1, 2, 3]})
