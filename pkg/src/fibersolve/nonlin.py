"""Scalar Lipschitz nonlinearities with certified slope bounds.

Two families are supported: continuous piecewise linear maps, and a smooth
convex family whose slope interpolates between alpha - beta and
alpha + beta.  Both carry exact slope ranges, which is what the band
decomposition certifies against, and both are closed under the shift
f - gamma * id used by the horizontal contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import GridFunction


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise linear function.

    ``breakpoints`` must be strictly increasing; ``slopes`` has one more
    entry than ``breakpoints`` (slope i applies left of breakpoint i, the
    last slope to the right of the last breakpoint).  The function is
    pinned by its value at 0.  At a breakpoint the advertised pointwise
    slope is the right-hand one.
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    value_at_0: float = 0.0

    def __post_init__(self) -> None:
        bp = tuple(float(x) for x in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        if len(sl) != len(bp) + 1:
            raise ValueError(
                f"need len(slopes) == len(breakpoints) + 1, got {len(sl)} and {len(bp)}"
            )
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(np.isfinite(bp)) or not all(np.isfinite(sl)):
            raise ValueError("breakpoints and slopes must be finite")

    @cached_property
    def _bp(self) -> np.ndarray:
        return np.asarray(self.breakpoints)

    @cached_property
    def _sl(self) -> np.ndarray:
        return np.asarray(self.slopes)

    @cached_property
    def _knot_values(self) -> np.ndarray:
        # integrate the slopes away from 0, where the value is pinned
        bp, sl = self._bp, self._sl
        m = bp.size
        vals = np.empty(m)
        j = int(np.searchsorted(bp, 0.0, side="right"))
        if j >= 1:
            vals[j - 1] = self.value_at_0 + sl[j] * bp[j - 1]
            for i in range(j - 2, -1, -1):
                vals[i] = vals[i + 1] + sl[i + 1] * (bp[i] - bp[i + 1])
        if j <= m - 1:
            vals[j] = self.value_at_0 + sl[j] * bp[j]
            for i in range(j + 1, m):
                vals[i] = vals[i - 1] + sl[i] * (bp[i] - bp[i - 1])
        return vals

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._bp.size == 0:
            return self.value_at_0 + self.slopes[0] * x
        k = np.searchsorted(self._bp, x, side="right")
        idx = np.clip(k - 1, 0, self._bp.size - 1)
        return self._knot_values[idx] + self._sl[k] * (x - self._bp[idx])

    def slope_at(self, x):
        x = np.asarray(x, dtype=float)
        return self._sl[np.searchsorted(self._bp, x, side="right")]

    @property
    def slope_lo(self) -> float:
        return min(self.slopes)

    @property
    def slope_hi(self) -> float:
        return max(self.slopes)

    def shifted(self, gamma: float) -> "PiecewiseLinear":
        return PiecewiseLinear(
            self.breakpoints,
            tuple(s - gamma for s in self.slopes),
            self.value_at_0,
        )

    def to_config(self) -> dict:
        return {
            "kind": "pwl",
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
            "f0": self.value_at_0,
        }


@dataclass(frozen=True)
class SmoothSlope:
    """Smooth map whose slope sweeps (alpha - beta, alpha + beta).

    f(x) = f0 + alpha*x + beta*(sqrt(1 + (x - x_offset)^2) - sqrt(1 + x_offset^2))

    For beta > 0 this is strictly convex with slope strictly inside the
    advertised open range; beta = 0 degenerates to a line.
    """

    alpha: float
    beta: float
    x_offset: float = 0.0
    value_at_0: float = 0.0

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.x_offset
        return (
            self.value_at_0
            + self.alpha * x
            + self.beta * (np.sqrt(1.0 + d * d) - np.sqrt(1.0 + self.x_offset**2))
        )

    def slope_at(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.x_offset
        return self.alpha + self.beta * d / np.sqrt(1.0 + d * d)

    @property
    def slope_lo(self) -> float:
        return self.alpha - self.beta

    @property
    def slope_hi(self) -> float:
        return self.alpha + self.beta

    def shifted(self, gamma: float) -> "SmoothSlope":
        return SmoothSlope(self.alpha - gamma, self.beta, self.x_offset, self.value_at_0)

    def to_config(self) -> dict:
        return {
            "kind": "smooth",
            "alpha": self.alpha,
            "beta": self.beta,
            "x_offset": self.x_offset,
            "f0": self.value_at_0,
        }


Nonlinearity = PiecewiseLinear | SmoothSlope


def linear(slope: float, value_at_0: float = 0.0) -> PiecewiseLinear:
    return PiecewiseLinear((), (slope,), value_at_0)


def slope_range(f: Nonlinearity) -> tuple[float, float]:
    return (f.slope_lo, f.slope_hi)


def lipschitz_constant(f: Nonlinearity) -> float:
    """Exact Lipschitz constant: max(|slope_lo|, |slope_hi|)."""
    return max(abs(f.slope_lo), abs(f.slope_hi))


def shifted(f: Nonlinearity, gamma: float) -> Nonlinearity:
    return f.shifted(gamma)


def compose(f: Nonlinearity, u: GridFunction) -> GridFunction:
    """Apply f nodewise."""
    return GridFunction(u.grid, f(u.values))


def from_config(cfg: dict) -> Nonlinearity:
    """Build a nonlinearity from its JSON-friendly dict form."""
    kind = cfg.get("kind")
    if kind == "pwl":
        return PiecewiseLinear(
            tuple(cfg["breakpoints"]),
            tuple(cfg["slopes"]),
            float(cfg.get("f0", 0.0)),
        )
    if kind == "smooth":
        return SmoothSlope(
            float(cfg["alpha"]),
            float(cfg["beta"]),
            float(cfg.get("x_offset", 0.0)),
            float(cfg.get("f0", 0.0)),
        )
    raise ValueError(f"unknown nonlinearity kind: {kind!r}")
