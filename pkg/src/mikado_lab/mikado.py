"""Concentrated building blocks: density bumps and divergence-free carriers.

A block lives on the lambda-rescaled unit cell: with y = wrap(lambda x - c)
mapped into [-1/2, 1/2)^d, the density samples are mu^alpha Phi(mu y) and the
carrier samples are mu^beta W(mu y).  Offsets c are cell coordinates, so one
disjoint placement works for every lambda (the supports sit in balls of radius
r0/mu around the cell centers and mu >= 1 keeps them inside one cell).

Two variants:

* ``tube``: fields depend only on the coordinates transverse to the carrier
  direction e_j (concentration dimension D = d - 1).  The carrier component
  is constant along its own axis, so its discrete divergence vanishes
  identically.
* ``compact``: fully localized blocks (D = d, d in {2, 3}).  The carrier is
  the perpendicular-gradient / curl of a sampled radial potential, taken
  spectrally, so the discrete divergence cancels mode by mode; the density is
  a smaller bump displaced to where the carrier points along +e_j (a centered
  density would integrate to zero against the swirl).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PlacementError, ResolutionError
from .grid import GridSpec, ScalarField, VectorField
from .profiles import BumpProfile

__all__ = [
    "MikadoSpec",
    "MikadoPair",
    "build_theta",
    "build_w",
    "build_pair",
    "interaction_mean",
    "place_disjoint",
    "required_resolution",
]

_VARIANTS = ("tube", "compact")


@dataclass(frozen=True)
class MikadoSpec:
    """Geometry and scaling of one building block."""

    variant: str
    direction: int
    profile: BumpProfile
    offset: tuple[float, ...]
    alpha: float
    beta: float
    mu: float = 1.0
    lam: int = 1

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        d = len(self.offset)
        if d < 2:
            raise ValueError("offset must have at least 2 coordinates")
        if not 0 <= self.direction < d:
            raise ValueError(f"direction {self.direction} out of range for d={d}")
        if any(not 0.0 <= c < 1.0 for c in self.offset):
            raise ValueError(f"offset must lie in [0,1)^d, got {self.offset}")
        if self.mu < 1.0:
            raise ValueError(f"concentration mu must be >= 1, got {self.mu}")
        if not isinstance(self.lam, int) or self.lam < 1:
            raise ValueError(f"oscillation lambda must be a positive integer, got {self.lam}")
        if self.variant == "compact" and d not in (2, 3):
            raise ValueError(f"compact variant is implemented for d in (2, 3), got d={d}")
        object.__setattr__(self, "offset", tuple(float(c) for c in self.offset))

    @property
    def d(self) -> int:
        return len(self.offset)

    @property
    def concentration_dim(self) -> int:
        """D: transverse dimension for tubes, full dimension for compact blocks."""
        return self.d - 1 if self.variant == "tube" else self.d


def required_resolution(spec: MikadoSpec) -> int:
    """Minimum points per axis: N >= 4 lambda mu / r0."""
    return int(math.ceil(4.0 * spec.lam * spec.mu / spec.profile.r0))


def _check_resolution(spec: MikadoSpec, grid: GridSpec):
    need = required_resolution(spec)
    if grid.n < need:
        raise ResolutionError(
            f"grid with n={grid.n} cannot resolve lambda={spec.lam}, mu={spec.mu}, "
            f"r0={spec.profile.r0}; need n >= {need}",
            required_n=need,
        )
    if grid.d != spec.d:
        raise ValueError(f"grid dimension {grid.d} != block dimension {spec.d}")


def _wrapped_axes(grid: GridSpec, lam: int, offset: tuple[float, ...]):
    """Per-axis wrapped cell coordinates, reshaped for broadcasting."""
    ax = grid.axes()
    ys = []
    for i in range(grid.d):
        y = (lam * ax - offset[i] + 0.5) % 1.0 - 0.5
        shape = [1] * grid.d
        shape[i] = grid.n
        ys.append(y.reshape(shape))
    return ys


def _radial_distance(ys, mu: float, skip_axis: int | None, shift=None):
    """|mu y - shift| over the selected axes (all axes unless skip_axis)."""
    r2 = 0.0
    for i, y in enumerate(ys):
        if i == skip_axis:
            continue
        z = mu * y - (0.0 if shift is None else shift[i])
        r2 = r2 + z * z
    return np.sqrt(r2)


def _density_geometry(spec: MikadoSpec) -> tuple[BumpProfile, np.ndarray]:
    """Density profile and its displacement inside the block, base coordinates.

    Tube blocks share the carrier's axis (no displacement).  Compact blocks use
    a half-radius bump pushed to +r0/2 along the axis where the swirl points in
    the +e_j direction, so the interaction mean is positive; displacement plus
    density radius equals r0, keeping the pair inside the placement ball.
    """
    d = spec.d
    shift = np.zeros(d)
    if spec.variant == "tube":
        return spec.profile, shift
    den = BumpProfile(kind=spec.profile.kind, k=spec.profile.k, r0=spec.profile.r0 / 2.0)
    l_axis = 1 - spec.direction if d == 2 else (spec.direction + 2) % 3
    shift[l_axis] = spec.profile.r0 / 2.0
    return den, shift


def build_theta(spec: MikadoSpec, grid: GridSpec) -> ScalarField:
    """Density block mu^alpha Phi(mu y), periodized over the lambda cells."""
    _check_resolution(spec, grid)
    ys = _wrapped_axes(grid, spec.lam, spec.offset)
    skip = spec.direction if spec.variant == "tube" else None
    r = _radial_distance(ys, spec.mu, skip)
    spatial = spec.mu**spec.alpha * spec.profile(r)
    return ScalarField.from_spatial(grid, np.broadcast_to(spatial, (grid.n,) * grid.d))


def _pair_theta(spec: MikadoSpec, grid: GridSpec) -> ScalarField:
    """Density as placed inside an interaction pair (displaced if compact)."""
    _check_resolution(spec, grid)
    ys = _wrapped_axes(grid, spec.lam, spec.offset)
    den, shift = _density_geometry(spec)
    skip = spec.direction if spec.variant == "tube" else None
    r = _radial_distance(ys, spec.mu, skip, shift=shift)
    spatial = spec.mu**spec.alpha * den(r)
    return ScalarField.from_spatial(grid, np.broadcast_to(spatial, (grid.n,) * grid.d))


def _spatial_gradient(arr: np.ndarray, n: int) -> list[np.ndarray]:
    d = arr.ndim
    k1d = np.fft.fftfreq(n, d=1.0 / n)
    a_hat = np.fft.fftn(arr)
    grads = []
    for axis in range(d):
        shape = [1] * d
        shape[axis] = n
        k = k1d.reshape(shape)
        grads.append(np.fft.ifftn((2j * math.pi) * k * a_hat).real)
    return grads


def build_w(spec: MikadoSpec, grid: GridSpec) -> VectorField:
    """Divergence-free carrier block mu^beta W(mu y).

    Tube: mu^beta Psi(mu |y_perp|) e_j, sampled directly (discretely solenoidal
    because the j component has no j dependence).  Compact: spectral
    perpendicular-gradient (d=2) or curl (d=3) of the sampled potential
    mu^(beta-1)/lambda Psi(mu |y|); the two cross-derivatives cancel exactly.
    """
    _check_resolution(spec, grid)
    ys = _wrapped_axes(grid, spec.lam, spec.offset)
    d, n, j = spec.d, grid.n, spec.direction
    if spec.variant == "tube":
        r_perp = _radial_distance(ys, spec.mu, skip_axis=j)
        comp_j = spec.mu**spec.beta * spec.profile(r_perp)
        comps = []
        for i in range(d):
            if i == j:
                comps.append(np.broadcast_to(comp_j, (n,) * d))
            else:
                comps.append(np.zeros((n,) * d))
        return VectorField.from_arrays(
            grid, [np.broadcast_to(c, grid.shape) for c in comps]
        )
    r = _radial_distance(ys, spec.mu, skip_axis=None)
    pot = (spec.mu ** (spec.beta - 1.0) / spec.lam) * spec.profile(r)
    pot = np.broadcast_to(pot, (n,) * d).copy()
    grads = _spatial_gradient(pot, n)
    l_axis = 1 - j if d == 2 else (j + 2) % 3
    comps = [np.zeros((n,) * d) for _ in range(d)]
    comps[j] = -grads[l_axis]
    comps[l_axis] = grads[j]
    return VectorField.from_arrays(grid, [np.broadcast_to(c, grid.shape) for c in comps])


@dataclass(frozen=True)
class MikadoPair:
    """A density block and its carrier with the measured interaction mean."""

    spec: MikadoSpec
    theta: ScalarField
    w: VectorField
    kappa: float = field(default=0.0)

    @property
    def direction(self) -> int:
        return self.spec.direction


def interaction_mean(theta: ScalarField, w: VectorField, direction: int) -> float:
    """Cell average of Theta (W . e_j) on the first time slice."""
    if theta.spec != w.spec:
        raise ValueError("theta and w must share the grid spec")
    prod = theta.values[0] * w.components[direction].values[0]
    return float(prod.mean())


def build_pair(spec: MikadoSpec, grid: GridSpec) -> MikadoPair:
    """Build the interacting pair and measure kappa = mean(Theta W.e_j) > 0."""
    theta = _pair_theta(spec, grid)
    w = build_w(spec, grid)
    kappa = interaction_mean(theta, w, spec.direction)
    if kappa <= 0.0:
        raise ValueError(
            f"interaction mean must be positive, measured {kappa:.3e}; "
            "the block geometry is degenerate at this resolution"
        )
    return MikadoPair(spec=spec, theta=theta, w=w, kappa=kappa)


def _torus_dist(a: float, b: float) -> float:
    v = abs(a - b) % 1.0
    return min(v, 1.0 - v)


def place_disjoint(
    directions: list[int], r0: float, d: int, variant: str = "tube"
) -> list[tuple[float, ...]]:
    """Deterministic block centers with pairwise disjoint supports.

    Centers are spread along the cell diagonal.  Tubes in distinct directions
    must differ by more than 2 r0 in a shared transverse coordinate, which is
    impossible for two directions when d = 2 (periodic lines in distinct
    directions intersect); compact blocks only need their centers separated.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    if not 0.0 < r0 < 0.5:
        raise ValueError(f"support radius must lie in (0, 1/2), got {r0}")
    if not directions:
        raise ValueError("need at least one direction")
    if len(set(directions)) != len(directions):
        raise ValueError(f"directions must be distinct, got {directions}")
    if any(not 0 <= j < d for j in directions):
        raise ValueError(f"directions {directions} out of range for d={d}")
    m = len(directions)
    if m == 1:
        return [(0.0,) * d]
    if variant == "tube":
        if d == 2:
            raise PlacementError(
                "two tube families in d=2 always intersect: periodic lines in "
                "distinct torus directions cross"
            )
        sep = 1.0 / (m + 1)
        if sep <= 2.0 * r0:
            raise PlacementError(
                f"{m} tube families need transverse separation > 2 r0 = {2 * r0}; "
                f"diagonal placement gives {sep}"
            )
        offsets = [((i + 1) / (m + 1),) * d for i in range(m)]
        for a in range(m):
            for b in range(a + 1, m):
                shared = [ax for ax in range(d) if ax not in (directions[a], directions[b])]
                if not any(
                    _torus_dist(offsets[a][ax], offsets[b][ax]) > 2.0 * r0
                    for ax in shared
                ):
                    raise PlacementError(
                        f"tube families {directions[a]} and {directions[b]} overlap"
                    )
        return offsets
    # compact: centers on the diagonal, adjacent spacing 1/m per axis
    min_dist = math.sqrt(d) / m
    if min_dist <= 2.0 * r0:
        raise PlacementError(
            f"{m} compact blocks of radius {r0} need center distance > {2 * r0}; "
            f"diagonal placement gives {min_dist:.4f}"
        )
    return [((2 * i + 1) / (2 * m),) * d for i in range(m)]
