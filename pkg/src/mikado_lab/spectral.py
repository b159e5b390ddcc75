"""Spectral calculus on the sampled torus.

All spatial derivatives are exact on band-limited data: a mode with integer
frequency vector k picks up the factor (2*pi*i*k_j) per derivative in x_j.
Transforms use numpy's FFT with its default convention (unnormalized forward,
1/N^d inverse) and `fftfreq` mode ordering; every operation transforms per time
slice and is a pure function of its inputs, so calls are thread-safe and
deterministic.

Norms use the plain Riemann sum (h^d sum |f|^p)^(1/p), which is spectrally
accurate for smooth periodic integrands.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import GridSpec, ScalarField, VectorField

__all__ = [
    "gradient",
    "divergence",
    "laplacian",
    "antidivergence",
    "leray_project",
    "lowpass",
    "lp_norm",
    "sobolev_seminorm",
    "spatial_mean",
    "time_derivative",
]

_MEAN_TOL = 1e-10


def _spatial_axes(spec: GridSpec) -> tuple[int, ...]:
    return tuple(range(1, spec.d + 1))


def _wavenumbers(spec: GridSpec) -> list[np.ndarray]:
    """Integer frequency grid per spatial axis, broadcastable over samples."""
    k1d = np.fft.fftfreq(spec.n, d=spec.h)  # integer-valued frequencies
    ks = []
    for axis in range(spec.d):
        shape = [1] * (spec.d + 1)
        shape[axis + 1] = spec.n
        ks.append(k1d.reshape(shape))
    return ks


def _deriv_hat(f_hat: np.ndarray, k_axis: np.ndarray) -> np.ndarray:
    return (2j * math.pi) * k_axis * f_hat


def gradient(f: ScalarField) -> VectorField:
    """Spectral gradient, one derivative per spatial axis."""
    spec = f.spec
    f_hat = np.fft.fftn(f.values, axes=_spatial_axes(spec))
    ks = _wavenumbers(spec)
    comps = []
    for axis in range(spec.d):
        g = np.fft.ifftn(_deriv_hat(f_hat, ks[axis]), axes=_spatial_axes(spec))
        comps.append(g.real)
    return VectorField.from_arrays(spec, comps)


def divergence(v: VectorField) -> ScalarField:
    """Spectral divergence sum_j d_j v_j."""
    spec = v.spec
    ks = _wavenumbers(spec)
    out = np.zeros(spec.shape, dtype=np.complex128)
    for axis in range(spec.d):
        c_hat = np.fft.fftn(v.components[axis].values, axes=_spatial_axes(spec))
        out += _deriv_hat(c_hat, ks[axis])
    return ScalarField(spec, np.fft.ifftn(out, axes=_spatial_axes(spec)).real)


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian, multiplier -4 pi^2 |k|^2."""
    spec = f.spec
    f_hat = np.fft.fftn(f.values, axes=_spatial_axes(spec))
    k2 = sum(k * k for k in _wavenumbers(spec))
    out = np.fft.ifftn(-4.0 * math.pi**2 * k2 * f_hat, axes=_spatial_axes(spec))
    return ScalarField(spec, out.real)


def _k2_safe(spec: GridSpec) -> np.ndarray:
    k2 = sum(k * k for k in _wavenumbers(spec))
    k2 = np.broadcast_to(k2, (1,) + (spec.n,) * spec.d).copy()
    k2[(0,) * (spec.d + 1)] = 1.0  # avoid 0/0 at the zero mode; it is zeroed below
    return k2


def _strip_nyquist(f_hat: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Zero the unpaired +-n/2 bands (even n only); they have no odd derivative.

    On an even grid a real field's Nyquist mode is its own conjugate partner,
    so an odd spectral multiplier would make it imaginary and the real cast
    drops it: the discrete divergence of a real field has no Nyquist content.
    """
    if spec.n % 2:
        return f_hat
    for axis in range(spec.d):
        sl = [slice(None)] * (spec.d + 1)
        sl[axis + 1] = spec.n // 2
        f_hat[tuple(sl)] = 0.0
    return f_hat


def antidivergence(f: ScalarField) -> VectorField:
    """Solve div R = f for the potential-gradient field R = grad(Delta^-1 f).

    The input must have zero spatial mean on every slice (the equation is not
    solvable otherwise); the zero mode of the output is set to zero.  Content
    in the Nyquist band is projected out first: it lies outside the range of
    the discrete divergence, so div R reproduces exactly the representable
    part of f (identical to f whenever f is band-limited below n/2).

    Raises
    ------
    ValueError
        If any slice's mean exceeds 1e-10 times its L2 norm.
    """
    spec = f.spec
    means = f.values.mean(axis=_spatial_axes(spec))
    scales = np.sqrt((f.values**2).mean(axis=_spatial_axes(spec)))
    bad = np.abs(means) > _MEAN_TOL * scales
    if np.any(bad):
        t = int(np.argmax(bad))
        raise ValueError(
            f"antidivergence needs zero-mean input; slice {t} has mean "
            f"{means[t]:.3e} vs L2 scale {scales[t]:.3e}"
        )
    f_hat = np.fft.fftn(f.values, axes=_spatial_axes(spec))
    f_hat[(slice(None),) + (0,) * spec.d] = 0.0
    f_hat = _strip_nyquist(f_hat, spec)
    k2 = _k2_safe(spec)
    ks = _wavenumbers(spec)
    comps = []
    for axis in range(spec.d):
        # R_hat_j = (2 pi i k_j) f_hat / (-4 pi^2 |k|^2)
        r_hat = _deriv_hat(f_hat, ks[axis]) / (-4.0 * math.pi**2 * k2)
        comps.append(np.fft.ifftn(r_hat, axes=_spatial_axes(spec)).real)
    return VectorField.from_arrays(spec, comps)


def leray_project(v: VectorField) -> VectorField:
    """Divergence-free part v - grad(Delta^-1 div v).

    The zero mode (cell-mean flow) is divergence-free and passes through.
    """
    spec = v.spec
    ks = _wavenumbers(spec)
    k2 = _k2_safe(spec)
    hats = [
        np.fft.fftn(c.values, axes=_spatial_axes(spec)) for c in v.components
    ]
    div_hat = sum(_deriv_hat(h, k) for h, k in zip(hats, ks))
    comps = []
    for axis in range(spec.d):
        corr = _deriv_hat(div_hat, ks[axis]) / (-4.0 * math.pi**2 * k2)
        corr[(slice(None),) + (0,) * spec.d] = 0.0
        comps.append(np.fft.ifftn(hats[axis] - corr, axes=_spatial_axes(spec)).real)
    return VectorField.from_arrays(spec, comps)


def lowpass(f, cutoff: float):
    """Sharp spectral cutoff keeping modes with max_j |k_j| <= cutoff.

    Accepts a scalar or vector field and returns the same kind.
    """
    if isinstance(f, VectorField):
        return VectorField(
            f.spec, tuple(lowpass(c, cutoff) for c in f.components)
        )
    spec = f.spec
    keep = np.ones((1,) + (spec.n,) * spec.d, dtype=bool)
    for k in _wavenumbers(spec):
        keep &= np.abs(k) <= cutoff
    f_hat = np.fft.fftn(f.values, axes=_spatial_axes(spec))
    out = np.fft.ifftn(np.where(keep, f_hat, 0.0), axes=_spatial_axes(spec))
    return ScalarField(spec, out.real)


def _magnitude(f, t_index: int) -> np.ndarray:
    if isinstance(f, VectorField):
        sq = sum(c.values[t_index] ** 2 for c in f.components)
        return np.sqrt(sq)
    return np.abs(f.values[t_index])


def lp_norm(f, p: float, t_index: int = 0) -> float:
    """Riemann-sum L^p norm of one time slice.

    Vector fields are measured through their pointwise Euclidean magnitude.
    p = inf gives the max norm; p < 1 is rejected (not a norm).
    """
    if p != math.inf and p < 1:
        raise ValueError(f"L^p requires p >= 1, got {p}")
    mag = _magnitude(f, t_index)
    if p == math.inf:
        return float(mag.max())
    hd = f.spec.h ** f.spec.d
    return float((hd * (mag**p).sum()) ** (1.0 / p))


def sobolev_seminorm(v: VectorField, p_tilde: float, t_index: int = 0) -> float:
    """L^p_tilde norm of the Frobenius norm of the full Jacobian Dv."""
    if p_tilde != math.inf and p_tilde < 1:
        raise ValueError(f"L^p requires p >= 1, got {p_tilde}")
    spec = v.spec
    ks = _wavenumbers(spec)
    frob_sq = np.zeros((spec.n,) * spec.d)
    for comp in v.components:
        c_hat = np.fft.fftn(comp.values[t_index])
        for axis in range(spec.d):
            k_axis = ks[axis].reshape(ks[axis].shape[1:])
            dc = np.fft.ifftn((2j * math.pi) * k_axis * c_hat).real
            frob_sq += dc * dc
    frob = np.sqrt(frob_sq)
    if p_tilde == math.inf:
        return float(frob.max())
    hd = spec.h**spec.d
    return float((hd * (frob**p_tilde).sum()) ** (1.0 / p_tilde))


def spatial_mean(f: ScalarField, t_index: int | None = None):
    """Mean over the torus: one slice's mean, or all slices if t_index is None."""
    means = f.values.mean(axis=_spatial_axes(f.spec))
    if t_index is None:
        return means
    return float(means[t_index])


def time_derivative(f: ScalarField) -> ScalarField:
    """Second-order time derivative: centered interior, one-sided endpoints.

    Requires at least 3 time slices.
    """
    spec = f.spec
    if spec.nt < 3:
        raise ValueError(f"time derivative needs >= 3 slices, got {spec.nt}")
    dt = spec.dt
    out = np.empty(spec.shape)
    out[1:-1] = (f.values[2:] - f.values[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * f.values[0] + 4.0 * f.values[1] - f.values[2]) / (2.0 * dt)
    out[-1] = (3.0 * f.values[-1] - 4.0 * f.values[-2] + f.values[-3]) / (2.0 * dt)
    return ScalarField(spec, out)
