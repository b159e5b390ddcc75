"""Compactly supported radial bump profiles.

Two kinds, both vanishing to order k at the support radius r0 (hence C^{k-1}):

    polynomial:  phi(r) = (1 - (r/r0)^2)^k      for r <= r0, else 0
    cosine:      phi(r) = cos(pi r / (2 r0))^k  for r <= r0, else 0

The polynomial kind has closed-form radial L^p moments through the Beta
function; the cosine kind falls back to deterministic adaptive quadrature.
These moments are the reference values the sampled-field tests quadrature
against, so they are computed independently of any grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = ["BumpProfile"]

_KINDS = ("polynomial", "cosine")


def _sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 points for dim = 1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump with support radius r0 in (0, 1/2) and smoothness order k >= 2."""

    kind: str = "polynomial"
    k: int = 4
    r0: float = 0.25

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"profile kind must be one of {_KINDS}, got {self.kind!r}")
        if not isinstance(self.k, int) or self.k < 2:
            raise ValueError(f"smoothness order must be an integer >= 2, got {self.k}")
        if not 0.0 < self.r0 < 0.5:
            raise ValueError(f"support radius must lie in (0, 1/2), got {self.r0}")

    def __call__(self, r):
        """Evaluate phi(|r|); accepts scalars or arrays."""
        r = np.abs(np.asarray(r, dtype=np.float64))
        s = np.minimum(r / self.r0, 1.0)
        if self.kind == "polynomial":
            out = (1.0 - s * s) ** self.k
        else:
            out = np.cos(0.5 * math.pi * s) ** self.k
        return np.where(r < self.r0, out, 0.0)

    def derivative(self, r):
        """Radial derivative phi'(r) for r >= 0."""
        r = np.asarray(r, dtype=np.float64)
        s = np.minimum(r / self.r0, 1.0)
        if self.kind == "polynomial":
            out = -2.0 * self.k * (r / self.r0**2) * (1.0 - s * s) ** (self.k - 1)
        else:
            half_pi = 0.5 * math.pi
            out = (
                -self.k
                * (half_pi / self.r0)
                * np.sin(half_pi * s)
                * np.cos(half_pi * s) ** (self.k - 1)
            )
        return np.where(r < self.r0, out, 0.0)

    def radial_lp_moment(self, p: float, dim: int) -> float:
        """Integral of phi(|y|)^p over R^dim.

        Polynomial kind: substituting s = (r/r0)^2 gives
        omega_{dim-1} r0^dim B(dim/2, k p + 1) / 2 exactly.
        """
        if p < 1:
            raise ValueError(f"moment exponent must be >= 1, got {p}")
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        area = _sphere_area(dim)
        if self.kind == "polynomial":
            a, b = dim / 2.0, self.k * p + 1.0
            beta = math.gamma(a) * math.gamma(b) / math.gamma(a + b)
            return area * self.r0**dim * beta / 2.0
        val, _ = quad(
            lambda r: float(self(r)) ** p * r ** (dim - 1),
            0.0,
            self.r0,
            epsabs=1e-14,
            epsrel=1e-12,
        )
        return area * val

    def lp_norm(self, p: float, dim: int) -> float:
        """L^p norm of the bump as a function on R^dim."""
        return self.radial_lp_moment(p, dim) ** (1.0 / p)

    def integral(self, dim: int) -> float:
        """Total mass of the bump on R^dim."""
        return self.radial_lp_moment(1.0, dim)
