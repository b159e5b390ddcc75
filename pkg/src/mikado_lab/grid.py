"""Sampled fields on the space-time torus.

Space is the unit torus [0, 1)^d sampled on a uniform N^d lattice; time is the
interval [0, T] sampled on Nt slices.  Fields are immutable: the sample arrays
are frozen at construction, and every operation returns a new field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GridSpec", "ScalarField", "VectorField"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time sampling of [0,1)^d x [0,T].

    Parameters
    ----------
    d : int
        Spatial dimension, >= 2.
    n : int
        Points per spatial axis (grid step h = 1/n).
    nt : int
        Number of time slices, >= 1.
    t_final : float
        Length of the time interval, > 0.
    """

    d: int
    n: int
    nt: int
    t_final: float

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"spatial dimension must be >= 2, got {self.d}")
        if self.n < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.n}")
        if self.nt < 1:
            raise ValueError(f"need at least 1 time slice, got {self.nt}")
        if not self.t_final > 0:
            raise ValueError(f"time interval must be positive, got {self.t_final}")

    @property
    def h(self) -> float:
        """Spatial grid step."""
        return 1.0 / self.n

    @property
    def dt(self) -> float:
        """Time step between slices (t_final if there is a single slice)."""
        return self.t_final / max(self.nt - 1, 1)

    @property
    def shape(self) -> tuple[int, ...]:
        """Sample array shape: (nt, n, ..., n) with d spatial axes."""
        return (self.nt,) + (self.n,) * self.d

    def axes(self) -> np.ndarray:
        """Spatial coordinates along one axis, shape (n,)."""
        return np.arange(self.n) / self.n

    def times(self) -> np.ndarray:
        """Time coordinates of the slices, shape (nt,)."""
        if self.nt == 1:
            return np.zeros(1)
        return np.linspace(0.0, self.t_final, self.nt)

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Spatial coordinate arrays, each of shape (n,)*d."""
        ax = self.axes()
        return np.meshgrid(*([ax] * self.d), indexing="ij")


def _freeze(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != spec.shape:
        raise ValueError(f"sample shape {arr.shape} does not match grid {spec.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field samples must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarField:
    """Immutable scalar samples indexed (time, x_0, ..., x_{d-1})."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values, self.spec))

    @classmethod
    def from_spatial(cls, spec: GridSpec, spatial: np.ndarray) -> "ScalarField":
        """Broadcast a single spatial sample array over all time slices."""
        spatial = np.asarray(spatial, dtype=np.float64)
        if spatial.shape != (spec.n,) * spec.d:
            raise ValueError(
                f"spatial shape {spatial.shape} does not match grid "
                f"{(spec.n,) * spec.d}"
            )
        return cls(spec, np.broadcast_to(spatial, spec.shape))

    def slice(self, t_index: int) -> np.ndarray:
        """Read-only spatial samples of one time slice."""
        return self.values[t_index]


@dataclass(frozen=True)
class VectorField:
    """d scalar components sharing one grid."""

    spec: GridSpec
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        if len(self.components) != self.spec.d:
            raise ValueError(
                f"expected {self.spec.d} components, got {len(self.components)}"
            )
        for c in self.components:
            if c.spec != self.spec:
                raise ValueError("all components must share the grid spec")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_arrays(cls, spec: GridSpec, arrays) -> "VectorField":
        return cls(spec, tuple(ScalarField(spec, a) for a in arrays))

    @classmethod
    def zero(cls, spec: GridSpec) -> "VectorField":
        z = np.zeros(spec.shape)
        return cls.from_arrays(spec, [z] * spec.d)

    def stacked(self) -> np.ndarray:
        """Samples as one array of shape (d, nt, n, ..., n)."""
        return np.stack([c.values for c in self.components])
