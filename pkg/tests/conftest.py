"""Shared helpers: seeded band-limited fields and independent stencil oracles.

Everything here is deliberately independent of the package's spectral module
so it can serve as an oracle for it: band-limited fields are synthesized from
explicit mode lists (evaluable on any grid), and fd4 is a plain finite
difference stencil built on np.roll.
"""

import math

import numpy as np

from mikado_lab import GridSpec, ScalarField


def rel_l2(got: np.ndarray, want: np.ndarray) -> float:
    """Relative L2 error against a nonzero reference array."""
    scale = math.sqrt(float((want**2).mean()))
    return math.sqrt(float(((got - want) ** 2).mean())) / scale


def band_limited(rng: np.random.Generator, n: int, d: int, kmax: int,
                 zero_mean: bool = False) -> np.ndarray:
    """Random spatial samples with spectrum confined to max_j |k_j| <= kmax."""
    white = rng.standard_normal((n,) * d)
    f_hat = np.fft.fftn(white)
    k1 = np.fft.fftfreq(n, d=1.0 / n)
    mask = np.ones((n,) * d, dtype=bool)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = n
        mask &= np.abs(k1.reshape(shape)) <= kmax
    out = np.fft.ifftn(np.where(mask, f_hat, 0.0)).real
    out = out / np.max(np.abs(out))
    if zero_mean:
        out = out - out.mean()
    return out


def mode_list(rng: np.random.Generator, d: int, kmax: int, count: int):
    """Explicit cosine modes (k, amplitude, phase), reusable across grids."""
    modes = []
    while len(modes) < count:
        k = rng.integers(-kmax, kmax + 1, size=d)
        if not np.any(k):
            continue
        modes.append((k, rng.uniform(0.2, 1.0), rng.uniform(0.0, 2.0 * math.pi)))
    return modes


def sample_modes(modes, n: int, d: int) -> np.ndarray:
    """Evaluate a mode list on the n^d collocation grid."""
    axes = np.meshgrid(*([np.arange(n) / n] * d), indexing="ij")
    out = np.zeros((n,) * d)
    for k, amp, phase in modes:
        out += amp * np.cos(2.0 * math.pi * sum(k[i] * axes[i] for i in range(d)) + phase)
    return out


def fd4(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order centered first derivative on a periodic axis."""
    def shift(s):
        return np.roll(arr, -s, axis=axis)

    return (-shift(2) + 8.0 * shift(1) - 8.0 * shift(-1) + shift(-2)) / (12.0 * h)


def seeded_density(grid: GridSpec, seed: int) -> np.ndarray:
    """Band-limited density around unit mean, the standard run input."""
    rng = np.random.default_rng(seed)
    axes = np.meshgrid(*([np.arange(grid.n) / grid.n] * grid.d), indexing="ij")
    rho = np.ones((grid.n,) * grid.d)
    for _ in range(4):
        k = rng.integers(-2, 3, size=grid.d)
        if not np.any(k):
            continue
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.05, 0.15)
        rho += amp * np.cos(
            2.0 * math.pi * sum(k[i] * axes[i] for i in range(grid.d)) + phase
        )
    return rho


def traveling_wave(n: int, nt: int, t_final: float):
    """Exact transport pair: rho = sin(2 pi (x0 - t)), u = e0, d = 2."""
    grid = GridSpec(d=2, n=n, nt=nt, t_final=t_final)
    ax = np.arange(n) / n
    slices = [
        np.sin(2.0 * math.pi * (ax.reshape(-1, 1) - t)) * np.ones((1, n))
        for t in grid.times()
    ]
    rho = ScalarField(grid, np.stack(slices))
    return grid, rho
