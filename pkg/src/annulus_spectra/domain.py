"""Annular domains, logarithmic radial grids and radial weight families."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_GRID_NODES = 16
DEFAULT_AUDIT_NODES = 513

WEIGHT_KINDS = ("two-sided-power", "inner-power", "outer-power", "log-corrected", "unit")


@dataclass(frozen=True)
class AnnulusDomain:
    """The annulus a < |x| < b."""

    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("radii must be finite")
        if a <= 0:
            raise ValueError(f"inner radius must be positive, got {a}")
        if a >= b:
            raise ValueError(f"need a < b, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def modulus(self) -> float:
        """Conformal modulus log(b/a)."""
        return math.log(self.b) - math.log(self.a)

    @property
    def log_a(self) -> float:
        return math.log(self.a)

    @property
    def log_b(self) -> float:
        return math.log(self.b)

    @classmethod
    def from_modulus(cls, modulus: float, b: float = 1.0) -> "AnnulusDomain":
        if modulus <= 0:
            raise ValueError("modulus must be positive")
        return cls(b * math.exp(-modulus), b)


def make_annulus(a: float, b: float) -> AnnulusDomain:
    return AnnulusDomain(a, b)


@dataclass(frozen=True)
class RadialGrid:
    domain: AnnulusDomain
    t: np.ndarray  # nodes in log r
    spacing_kind: str = "uniform-in-log-r"

    @property
    def nodes(self) -> np.ndarray:
        r = np.exp(self.t)
        r[0], r[-1] = self.domain.a, self.domain.b
        return r

    @property
    def step(self) -> float:
        return (self.t[-1] - self.t[0]) / (len(self.t) - 1)

    def __len__(self):
        return len(self.t)


def log_grid(domain: AnnulusDomain, n: int) -> RadialGrid:
    """n nodes equally spaced in log r, endpoints included."""
    if int(n) != n or n < MIN_GRID_NODES:
        raise ValueError(f"need at least {MIN_GRID_NODES} nodes, got n={n}")
    n = int(n)
    t0, t1 = domain.log_a, domain.log_b
    # index-based construction keeps doubling refinements exactly nested
    t = t0 + (t1 - t0) * (np.arange(n) / (n - 1))
    t[-1] = t1
    t.setflags(write=False)
    return RadialGrid(domain, t)


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    exponent: float
    domain: AnnulusDomain

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not math.isfinite(float(self.exponent)):
            raise ValueError("weight exponent must be finite")
        object.__setattr__(self, "exponent", float(self.exponent))

    def log_eval(self, t):
        """Weight as a function of t = log r (no range check)."""
        t = np.asarray(t, dtype=float)
        s = self.exponent
        la, lb = self.domain.log_a, self.domain.log_b
        if self.kind == "unit":
            return np.ones_like(t)
        if self.kind == "outer-power":
            return np.exp(s * (t - lb))
        if self.kind == "inner-power":
            return np.exp(s * (la - t))
        two = np.exp(s * (t - lb)) + np.exp(s * (la - t))
        if self.kind == "two-sided-power":
            return two
        return two + 1.0 / self.domain.modulus ** 2

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        a, b = self.domain.a, self.domain.b
        tol = 1e-12 * b
        if np.any(r < a - tol) or np.any(r > b + tol):
            raise ValueError("weight evaluated outside [a, b]")
        return self.log_eval(np.log(r))

    def power_terms(self):
        """Decomposition as a sum of c * r^p.

        Returned as a list of (log_c, p) so large prefactors stay representable.
        """
        s = self.exponent
        la, lb = self.domain.log_a, self.domain.log_b
        if self.kind == "unit":
            return [(0.0, 0.0)]
        if self.kind == "outer-power":
            return [(-s * lb, s)]
        if self.kind == "inner-power":
            return [(s * la, -s)]
        if self.kind == "two-sided-power":
            return [(-s * lb, s), (s * la, -s)]
        return [(-s * lb, s), (s * la, -s), (-2 * math.log(self.domain.modulus), 0.0)]


def make_weight(kind: str, exponent: float, domain: AnnulusDomain) -> WeightSpec:
    return WeightSpec(kind, exponent, domain)
