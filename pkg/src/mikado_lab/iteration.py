"""Convex-integration iteration: residual, defect, perturbation, probe.

The engine maintains approximate transport-solution pairs (rho_q, u_q) on a
fixed space-time grid.  Each step measures the residual
E = d_t rho + u . grad rho (minus a Laplacian in the diffusive variant),
converts it to a defect field R with div R = E - drift, and adds concentrated
block pairs whose slow amplitudes are chosen so the low-frequency part of the
new interaction term cancels R.  Residuals are always recomputed from scratch
rather than tracked term by term, so every reported number is a measurement.

Time structure: amplitudes are recomputed independently per time slice from
that slice's defect; nothing here assumes the defect is time-constant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentPlan, diffusion_admissible
from .grid import GridSpec, ScalarField, VectorField
from .mikado import MikadoSpec, build_pair, place_disjoint
from .profiles import BumpProfile
from . import spectral

__all__ = [
    "IterationState",
    "Schedule",
    "StepRecord",
    "ExperimentReport",
    "step_record",
    "ProbeReport",
    "residual",
    "mass_drift",
    "defect_from_residual",
    "perturbation_step",
    "initial_state",
    "run",
    "lagrangian_probe",
]

# Perturbations whose defect is this small relative to the density scale are
# identity steps: the amplitude rule would otherwise inject sqrt(delta)-sized
# carriers with nothing to cancel.
SUPPRESS_REL = 1e-12


def residual(rho: ScalarField, u: VectorField, diffusion: bool = False) -> ScalarField:
    """Transport residual E = d_t rho + u . grad rho (- lap rho if diffusion)."""
    if rho.spec != u.spec:
        raise ValueError("rho and u must share one GridSpec")
    if rho.spec.nt < 3:
        raise ValueError(f"residual needs nt >= 3 time slices, got {rho.spec.nt}")
    e = spectral.time_derivative(rho).values.copy()
    grad = spectral.gradient(rho)
    for i in range(rho.spec.d):
        e += u.components[i].values * grad.components[i].values
    if diffusion:
        e -= spectral.laplacian(rho).values
    return ScalarField(rho.spec, e)


def mass_drift(e: ScalarField) -> np.ndarray:
    """Spatial mean of the residual per slice: the rate of mass non-conservation."""
    return e.values.reshape(e.spec.nt, -1).mean(axis=1)


def defect_from_residual(e: ScalarField) -> VectorField:
    """Vector potential of the residual: div R = E - spatial_mean(E) per slice.

    The mean must be removed first (a constant has no antidivergence on the
    torus); it is observable separately through mass_drift.
    """
    drift = mass_drift(e)
    centered = e.values - drift.reshape((e.spec.nt,) + (1,) * e.spec.d)
    return spectral.antidivergence(ScalarField(e.spec, centered))


@dataclass(frozen=True)
class IterationState:
    """One rung of the iteration: fields, residual, defect, and measurements.

    norms holds per-step measurements, max over time slices where a norm is
    per slice: e_l1, rho_lp_max, u_lpdual, du_lptilde, drift_max, plus the
    step diagnostics b_inf, du_increment_lptilde, du_bound_lptilde for states
    produced by perturbation_step.
    """

    q: int
    rho: ScalarField
    u: VectorField
    residual: ScalarField
    defect: VectorField
    lam: int
    mu: float
    norms: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Schedule:
    """Frequency ladder lam_q = lam0 * a^q, mu_q = lam_q^gamma.

    gamma trades carrier frequency for concentration; convergence of the
    gradient cost lam_q * mu_q^{-c} requires gamma * c > 1, which is checked
    against the plan when a step runs (the schedule alone does not know c).
    delta_floor regularizes the amplitude square root near zeros of the
    defect, as a fraction of the step's largest defect value.
    """

    lam0: int
    a: int
    gamma: float
    q_max: int
    delta_floor: float = 1e-3

    def __post_init__(self):
        if not isinstance(self.lam0, int) or self.lam0 < 1:
            raise ValueError(f"lam0 must be a positive integer, got {self.lam0}")
        if not isinstance(self.a, int) or self.a < 2:
            raise ValueError(f"growth factor a must be an integer >= 2, got {self.a}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not isinstance(self.q_max, int) or self.q_max < 0:
            raise ValueError(f"q_max must be a nonnegative integer, got {self.q_max}")
        if not 0 < self.delta_floor < 1:
            raise ValueError(f"delta_floor must lie in (0, 1), got {self.delta_floor}")

    def lam(self, q: int) -> int:
        return self.lam0 * self.a**q

    def mu(self, q: int) -> float:
        return float(self.lam(q)) ** self.gamma

    def check_convergent(self, plan: ExponentPlan):
        c = float(plan.c)
        if c <= 0 or self.gamma * c <= 1:
            raise ValueError(
                f"schedule gamma={self.gamma} with plan c={plan.c} has "
                f"gamma*c = {self.gamma * c:.4g} <= 1; the gradient cost "
                "lam_q * mu_q^-c would not decay"
            )


def _norms_record(
    rho: ScalarField, u: VectorField, e: ScalarField, drift: np.ndarray, plan: ExponentPlan
) -> dict:
    nt = rho.spec.nt
    p = float(plan.p)
    p_dual = float(plan.p_dual)
    p_tilde = float(plan.p_tilde)
    return {
        "e_l1": max(spectral.lp_norm(e, 1.0, t) for t in range(nt)),
        "rho_lp_max": max(spectral.lp_norm(rho, p, t) for t in range(nt)),
        "u_lpdual": max(spectral.lp_norm(u, p_dual, t) for t in range(nt)),
        "du_lptilde": max(spectral.sobolev_seminorm(u, p_tilde, t) for t in range(nt)),
        "drift_max": float(np.max(np.abs(drift))),
    }


def _make_state(
    q: int,
    rho: ScalarField,
    u: VectorField,
    plan: ExponentPlan,
    lam: int,
    mu: float,
    diffusion: bool,
    extra_norms: dict | None = None,
) -> IterationState:
    e = residual(rho, u, diffusion)
    drift = mass_drift(e)
    r = defect_from_residual(e)
    norms = _norms_record(rho, u, e, drift, plan)
    if extra_norms:
        norms.update(extra_norms)
    return IterationState(q=q, rho=rho, u=u, residual=e, defect=r, lam=lam, mu=mu, norms=norms)


def _default_profile(variant: str) -> BumpProfile:
    # Tube families in d=3 sit 1/4 apart on the diagonal and need transverse
    # separation > 2 r0; compact blocks have more room.
    return BumpProfile(r0=0.25) if variant == "compact" else BumpProfile(r0=0.1)


def _block_set(plan: ExponentPlan, profile: BumpProfile, lam: int, mu: float, grid: GridSpec):
    variant = "compact" if plan.concentration_dim == plan.d else "tube"
    directions = list(range(plan.d))
    offsets = place_disjoint(directions, profile.r0, plan.d, variant)
    pairs = []
    for j, off in zip(directions, offsets):
        spec = MikadoSpec(
            variant=variant,
            direction=j,
            profile=profile,
            offset=off,
            alpha=plan.alpha,
            beta=plan.beta,
            mu=mu,
            lam=lam,
        )
        pairs.append(build_pair(spec, grid))
    return variant, pairs


def _reference_gradient_constant(
    plan: ExponentPlan, profile: BumpProfile, grid: GridSpec
) -> float:
    """Sum over directions of ||D W||_{L^p_tilde} for the unit (lam=mu=1) carriers.

    The carrier gradient scales as lam * mu^{-c} times exactly this constant,
    which anchors the predicted derivative-cost bound to measured geometry.
    """
    variant, pairs = _block_set(plan, profile, 1, 1.0, grid)
    p_tilde = float(plan.p_tilde)
    return sum(spectral.sobolev_seminorm(pair.w, p_tilde, 0) for pair in pairs)


def perturbation_step(
    state: IterationState,
    plan: ExponentPlan,
    schedule: Schedule,
    diffusion: bool = False,
    profile: BumpProfile | None = None,
    allow_inadmissible: bool = False,
) -> IterationState:
    """One convex-integration step: cancel the defect with concentrated pairs.

    For each axis direction j with block interaction constant kappa_j, the
    amplitudes are b_j = sqrt((|R_j| + delta)/kappa_j) and
    a_j = -R_j / (kappa_j b_j), so a_j b_j kappa_j = -R_j pointwise before
    smoothing.  Both are then low-passed at lam_q / 2 (slow relative to the
    carrier), the density perturbation is mean-corrected per slice, and the
    carrier perturbation is projected onto divergence-free fields.  The new
    state's residual and defect are recomputed from scratch.
    """
    if not plan.admissible and not allow_inadmissible:
        raise ValueError(
            f"plan is not admissible (regime {plan.regime.value}, c = {plan.c}); "
            "pass allow_inadmissible to run it as a control"
        )
    if plan.admissible:
        schedule.check_convergent(plan)
    grid = state.rho.spec
    if grid.d != plan.d:
        raise ValueError(f"grid dimension {grid.d} != plan dimension {plan.d}")
    lam, mu = state.lam, state.mu
    next_lam, next_mu = schedule.lam(state.q + 1), schedule.mu(state.q + 1)

    r_comps = [c.values for c in state.defect.components]
    max_r = max(float(np.max(np.abs(rc))) for rc in r_comps)
    rho_scale = 1.0 + float(np.max(np.abs(state.rho.values)))
    if max_r <= SUPPRESS_REL * rho_scale:
        return _make_state(
            state.q + 1, state.rho, state.u, plan, next_lam, next_mu, diffusion,
            extra_norms={"b_inf": 0.0, "du_increment_lptilde": 0.0,
                         "du_bound_lptilde": 0.0, "suppressed": 1.0},
        )

    if profile is None:
        profile = _default_profile("compact" if plan.concentration_dim == plan.d else "tube")
    variant, pairs = _block_set(plan, profile, lam, mu, grid)
    c_ref = _reference_gradient_constant(plan, profile, grid)

    delta = schedule.delta_floor * max_r
    cutoff = lam / 2.0
    rho_pert = np.zeros(grid.shape)
    u_pert = [np.zeros(grid.shape) for _ in range(grid.d)]
    b_inf = 0.0
    for j, pair in enumerate(pairs):
        r_j = r_comps[j]
        b_j = np.sqrt((np.abs(r_j) + delta) / pair.kappa)
        a_j = -r_j / (pair.kappa * b_j)
        a_s = spectral.lowpass(ScalarField(grid, a_j), cutoff).values
        b_s = spectral.lowpass(ScalarField(grid, b_j), cutoff).values
        b_inf = max(b_inf, float(np.max(np.abs(b_s))))
        rho_pert += a_s * pair.theta.values[0]
        for i in range(grid.d):
            u_pert[i] += b_s * pair.w.components[i].values[0]

    # keep each slice's mass exactly: the block densities are not mean-free
    slice_means = rho_pert.reshape(grid.nt, -1).mean(axis=1)
    rho_pert -= slice_means.reshape((grid.nt,) + (1,) * grid.d)
    u_pert_field = spectral.leray_project(VectorField.from_arrays(grid, u_pert))

    new_rho = ScalarField(grid, state.rho.values + rho_pert)
    new_u = VectorField.from_arrays(
        grid,
        [state.u.components[i].values + u_pert_field.components[i].values
         for i in range(grid.d)],
    )

    p_tilde = float(plan.p_tilde)
    du_inc = max(
        spectral.sobolev_seminorm(u_pert_field, p_tilde, t) for t in range(grid.nt)
    )
    du_bound = 2.0 * b_inf * lam * mu ** (-float(plan.c)) * c_ref
    return _make_state(
        state.q + 1, new_rho, new_u, plan, next_lam, next_mu, diffusion,
        extra_norms={"b_inf": b_inf, "du_increment_lptilde": du_inc,
                     "du_bound_lptilde": du_bound, "suppressed": 0.0},
    )


def initial_state(
    rho0,
    grid: GridSpec,
    plan: ExponentPlan,
    schedule: Schedule,
    diffusion: bool = False,
    u0: VectorField | None = None,
) -> IterationState:
    """Anchor state: density drains linearly to its mean, carrier at rest.

    rho0 is the t = 0 spatial density (array or time-constant field).  The
    anchor rho(t) = mean + (1 - t/T)(rho0 - mean) has residual
    -(rho0 - mean)/T, exact for the time stencils, so step 0 has a concrete
    defect to cancel; a constant rho0 gives a zero residual and every step is
    suppressed.  A supplied u0 must be divergence-free.
    """
    if isinstance(rho0, ScalarField):
        if rho0.spec.d != grid.d or rho0.spec.n != grid.n:
            raise ValueError("rho0 grid does not match the run grid")
        rho0 = rho0.values[0]
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (grid.n,) * grid.d:
        raise ValueError(f"rho0 shape {rho0.shape} != {(grid.n,) * grid.d}")
    mean = float(rho0.mean())
    ts = grid.times().reshape((grid.nt,) + (1,) * grid.d)
    values = mean + (1.0 - ts / grid.t_final) * (rho0 - mean)
    rho = ScalarField(grid, values)
    if u0 is None:
        u0 = VectorField.zero(grid)
    else:
        div = spectral.divergence(u0)
        scale = max(spectral.lp_norm(u0, 2.0, t) for t in range(grid.nt))
        if scale > 0 and max(
            spectral.lp_norm(div, 2.0, t) for t in range(grid.nt)
        ) > 1e-8 * scale:
            raise ValueError("supplied u0 is not divergence-free")
    return _make_state(0, rho, u0, plan, schedule.lam(0), schedule.mu(0), diffusion)


@dataclass(frozen=True)
class StepRecord:
    """Flat per-step measurement row (what the report stream serializes)."""

    q: int
    lam: int
    mu: float
    e_l1: float
    rho_lp_max: float
    u_lpdual: float
    du_lptilde: float
    drift_max: float
    b_inf: float
    du_increment_lptilde: float
    du_bound_lptilde: float
    suppressed: bool


@dataclass(frozen=True)
class ExperimentReport:
    plan: ExponentPlan
    schedule: Schedule
    diffusion: bool
    steps: tuple[StepRecord, ...]


def step_record(state: IterationState) -> StepRecord:
    n = state.norms
    return StepRecord(
        q=state.q,
        lam=state.lam,
        mu=state.mu,
        e_l1=n["e_l1"],
        rho_lp_max=n["rho_lp_max"],
        u_lpdual=n["u_lpdual"],
        du_lptilde=n["du_lptilde"],
        drift_max=n["drift_max"],
        b_inf=n.get("b_inf", 0.0),
        du_increment_lptilde=n.get("du_increment_lptilde", 0.0),
        du_bound_lptilde=n.get("du_bound_lptilde", 0.0),
        suppressed=bool(n.get("suppressed", 0.0)),
    )


def run(
    rho0,
    grid: GridSpec,
    plan: ExponentPlan,
    schedule: Schedule,
    diffusion: bool = False,
    u0: VectorField | None = None,
    profile: BumpProfile | None = None,
    allow_inadmissible: bool = False,
) -> tuple[list[IterationState], ExperimentReport]:
    """Drive the iteration q_max steps from the anchor state.

    The diffusive variant additionally requires p' < d up front; the
    admissibility override exists so inadmissible plans can be run as
    controls (their gradient cost is expected to grow, not decay).
    """
    if diffusion and not diffusion_admissible(plan.p, plan.d):
        raise ValueError(
            f"diffusive variant needs p' < d; plan has p' = {plan.p_dual}, d = {plan.d}"
        )
    states = [initial_state(rho0, grid, plan, schedule, diffusion, u0)]
    for _ in range(schedule.q_max):
        states.append(
            perturbation_step(
                states[-1], plan, schedule, diffusion, profile, allow_inadmissible
            )
        )
    report = ExperimentReport(
        plan=plan,
        schedule=schedule,
        diffusion=diffusion,
        steps=tuple(step_record(s) for s in states),
    )
    return states, report


# ---------------------------------------------------------------------------
# Lagrangian probe


@dataclass(frozen=True)
class ProbeReport:
    """Per-particle transported-density defects |rho(T, X(T,x)) - rho0(x)|.

    duhamel holds each particle's time-integrated |E| along its trajectory
    (None when no residual field was supplied); duhamel_bound is its mean.
    """

    particle_count: int
    seeds: np.ndarray
    defects: np.ndarray
    max_defect: float
    mean_defect: float
    duhamel: np.ndarray | None
    duhamel_bound: float | None

    def __post_init__(self):
        if not np.all(np.isfinite(self.defects)) or np.any(self.defects < 0):
            raise ValueError("probe defects must be nonnegative and finite")


def _interp_spatial(arr: np.ndarray, pos: np.ndarray, n: int) -> np.ndarray:
    """d-linear periodic interpolation of one spatial slice at unit-cube points."""
    d = arr.ndim
    scaled = pos * n
    base = np.floor(scaled).astype(int)
    frac = scaled - base
    out = np.zeros(pos.shape[0])
    for corner in itertools.product((0, 1), repeat=d):
        w = np.ones(pos.shape[0])
        idx = []
        for axis, c in enumerate(corner):
            w = w * (frac[:, axis] if c else 1.0 - frac[:, axis])
            idx.append((base[:, axis] + c) % n)
        out += w * arr[tuple(idx)]
    return out


def _interp_field(values: np.ndarray, pos: np.ndarray, t: float, spec: GridSpec) -> np.ndarray:
    """Linear-in-time, d-linear-in-space sample of a (nt, n, ..., n) array."""
    if spec.nt == 1:
        return _interp_spatial(values[0], pos, spec.n)
    s = min(max(t, 0.0), spec.t_final) / spec.dt
    i = min(int(math.floor(s)), spec.nt - 2)
    tau = s - i
    lo = _interp_spatial(values[i], pos, spec.n)
    hi = _interp_spatial(values[i + 1], pos, spec.n)
    return (1.0 - tau) * lo + tau * hi


def _seed_lattice(n: int, d: int, particles: int) -> np.ndarray:
    """Grid-node seed indices: the largest uniform sub-lattice within budget."""
    per_axis = max(1, int(math.floor(particles ** (1.0 / d))))
    per_axis = min(per_axis, n)
    idx1d = (np.arange(per_axis) * n) // per_axis
    grids = np.meshgrid(*([idx1d] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def lagrangian_probe(
    u: VectorField,
    rho_pair,
    particles: int = 256,
    rk_steps: int = 200,
    residual_field: ScalarField | None = None,
) -> ProbeReport:
    """Transport consistency along characteristics of the sampled carrier.

    Integrates dX/dt = u(t, X) with classical fourth-order Runge-Kutta from
    grid-node seeds, using d-linear space and linear time interpolation, and
    compares the density at the endpoint against the seed value: for an exact
    transport pair the difference vanishes.  When the residual field is
    supplied, |E| is accumulated along each trajectory (trapezoid in time),
    giving the Duhamel bound the defects are expected to respect.
    """
    spec = u.spec
    if spec.nt < 3:
        raise ValueError(f"probe needs nt >= 3 time slices, got {spec.nt}")
    if particles < 1:
        raise ValueError("need at least one particle")
    if rk_steps < 1:
        raise ValueError("need at least one integration step")
    rho_initial, rho_final = rho_pair
    if isinstance(rho_initial, ScalarField):
        rho_initial = rho_initial.values[0]
    if isinstance(rho_final, ScalarField):
        rho_final = rho_final.values[-1]
    rho_initial = np.asarray(rho_initial, dtype=float)
    rho_final = np.asarray(rho_final, dtype=float)
    if rho_initial.shape != (spec.n,) * spec.d or rho_final.shape != rho_initial.shape:
        raise ValueError("density snapshots must match the carrier's spatial grid")

    seeds = _seed_lattice(spec.n, spec.d, particles)
    pos = seeds.astype(float) / spec.n
    start_values = rho_initial[tuple(seeds.T)]

    comp_values = [c.values for c in u.components]

    def velocity(t: float, x: np.ndarray) -> np.ndarray:
        cols = [_interp_field(cv, x % 1.0, t, spec) for cv in comp_values]
        return np.stack(cols, axis=1)

    h = spec.t_final / rk_steps
    duhamel = None
    if residual_field is not None:
        duhamel = np.zeros(pos.shape[0])
        e_values = np.abs(residual_field.values)

    t = 0.0
    for step in range(rk_steps):
        if duhamel is not None:
            w = 0.5 if step == 0 else 1.0
            duhamel += w * h * _interp_field(e_values, pos % 1.0, t, spec)
        k1 = velocity(t, pos)
        k2 = velocity(t + h / 2.0, pos + (h / 2.0) * k1)
        k3 = velocity(t + h / 2.0, pos + (h / 2.0) * k2)
        k4 = velocity(t + h, pos + h * k3)
        pos = (pos + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)) % 1.0
        t += h
    if duhamel is not None:
        duhamel += 0.5 * h * _interp_field(e_values, pos % 1.0, t, spec)

    end_values = _interp_spatial(rho_final, pos, spec.n)
    defects = np.abs(end_values - start_values)
    return ProbeReport(
        particle_count=pos.shape[0],
        seeds=seeds.astype(float) / spec.n,
        defects=defects,
        max_defect=float(defects.max()),
        mean_defect=float(defects.mean()),
        duhamel=duhamel,
        duhamel_bound=None if duhamel is None else float(duhamel.mean()),
    )
