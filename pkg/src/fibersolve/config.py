"""Run configuration: one JSON document drives every CLI command.

The schema is deliberately flat.  Unknown keys are rejected so that a
typo cannot silently fall back to a default, and the fully resolved
configuration (defaults materialized, overrides applied) is what gets
written next to every run's outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nonlin
from .decomp import build_decomposition, perturb_vertical
from .fiber import SolverParams
from .grid import Grid, GridFunction, Interval1D, Rect2D, SpectralBasis, read_csv

_TOP_KEYS = {"domain", "nonlinearity", "band", "rhs", "solver", "scan", "perturb"}
_SCAN_KEYS = {
    "t_min", "t_max", "n_samples", "t_box", "resolution", "seeds",
    "accept_tol", "degenerate_tol", "t_tol", "s_values",
    "n_starts", "seed", "box_scale", "oracle_tol", "dedup_tol", "match_tol",
}


class ConfigError(ValueError):
    """The configuration document is malformed or inconsistent."""


@dataclass
class RunConfig:
    """Validated configuration with build helpers for the solver objects."""

    domain: dict
    nonlinearity: dict
    band: dict
    rhs: dict
    solver: dict
    scan: dict
    perturb: dict
    base_dir: Path

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}")
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        scan = dict(raw.get("scan", {}))
        unknown = set(scan) - _SCAN_KEYS
        if unknown:
            raise ConfigError(f"unknown scan keys: {sorted(unknown)}")
        cfg = cls(
            domain=dict(raw.get("domain", {"x0": 0.0, "x1": math.pi, "n": 199})),
            nonlinearity=dict(raw.get("nonlinearity", {})),
            band=dict(raw.get("band", {})),
            rhs=dict(raw.get("rhs", {"kind": "zero"})),
            solver=dict(raw.get("solver", {})),
            scan=scan,
            perturb=dict(raw.get("perturb", {})),
            base_dir=Path(base_dir),
        )
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        if not self.nonlinearity:
            raise ConfigError("config requires a 'nonlinearity' section")
        if "a" not in self.band or "b" not in self.band:
            raise ConfigError("config requires band.a and band.b")
        try:
            self.build_nonlinearity()
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad nonlinearity: {e}")
        try:
            self.build_grid()
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad domain: {e}")
        eps = float(self.perturb.get("eps", 0.0))
        if not 0.0 <= eps < 0.1:
            raise ConfigError(f"perturb.eps must be in [0, 0.1), got {eps}")

    def apply_overrides(self, overrides: dict) -> None:
        """Apply CLI flag overrides (flags win over the file)."""
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            getattr(self, section)[name] = value

    # -- builders --

    def build_grid(self) -> Grid:
        d = self.domain
        if "x" in d or "y" in d:
            return Rect2D(
                Interval1D(float(d["x"]["x0"]), float(d["x"]["x1"]), int(d["x"]["n"])),
                Interval1D(float(d["y"]["x0"]), float(d["y"]["x1"]), int(d["y"]["n"])),
            )
        return Interval1D(float(d["x0"]), float(d["x1"]), int(d["n"]))

    def build_nonlinearity(self) -> nonlin.Nonlinearity:
        return nonlin.from_config(self.nonlinearity)

    def build_decomposition(self, basis: SpectralBasis):
        d = build_decomposition(
            basis,
            float(self.band["a"]),
            float(self.band["b"]),
            self.band.get("gap_tol"),
        )
        eps = float(self.perturb.get("eps", 0.0))
        if eps > 0.0:
            return perturb_vertical(d, eps, int(self.perturb.get("seed", 0)))
        return d

    def build_rhs(self, basis: SpectralBasis) -> GridFunction:
        kind = self.rhs.get("kind", "zero")
        if kind == "zero":
            return basis.from_coeffs(np.zeros(basis.size))
        if kind == "coeffs":
            vals = np.asarray(self.rhs.get("values", []), dtype=float)
            if vals.size > basis.size:
                raise ConfigError(
                    f"rhs has {vals.size} coefficients, basis only {basis.size}"
                )
            c = np.zeros(basis.size)
            c[: vals.size] = vals
            return basis.from_coeffs(c)
        if kind == "csv":
            path = Path(self.rhs["path"])
            if not path.is_absolute():
                path = self.base_dir / path
            return read_csv(path, basis.grid)
        raise ConfigError(f"unknown rhs kind: {kind!r}")

    def build_solver_params(self) -> SolverParams:
        return SolverParams(
            tol=float(self.solver.get("tol", 1e-10)),
            max_iter=self.solver.get("max_iter"),
        )

    def resolved(self) -> dict:
        """Fully materialized configuration for config.resolved.json."""
        out = {
            "domain": self.domain,
            "nonlinearity": self.nonlinearity,
            "band": {
                "a": float(self.band["a"]),
                "b": float(self.band["b"]),
                "gap_tol": self.band.get("gap_tol"),
            },
            "rhs": {k: v for k, v in self.rhs.items()},
            "solver": {
                "tol": float(self.solver.get("tol", 1e-10)),
                "max_iter": self.solver.get("max_iter"),
            },
            "scan": self.scan,
            "perturb": {
                "eps": float(self.perturb.get("eps", 0.0)),
                "seed": int(self.perturb.get("seed", 0)),
            },
        }
        return out
