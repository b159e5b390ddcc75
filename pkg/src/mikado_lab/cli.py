"""Experiment driver: regime, sweep, iterate, and probe commands.

Each command validates its configuration, runs the corresponding experiment,
writes a schema-tagged CSV (and a PNG figure where there is something to
draw) into the output directory, and prints a short summary.  Exit codes:
0 success, 1 usage or invalid configuration, 2 numerical precondition
failure (resolution, placement, malformed state file), 3 tolerance failure
when --check is active.

Reports are byte-deterministic: rerunning a command with the same config and
seed reproduces the CSV exactly; wall-clock timing goes to stdout only.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from .config import LabConfig, load_config
from .container import read_state, write_state
from .errors import ContainerFormatError, PlacementError, ResolutionError
from .exponents import INF, diffusion_admissible, exponent_plan, predicted_slopes
from .grid import GridSpec, ScalarField
from .iteration import (
    Schedule,
    initial_state,
    lagrangian_probe,
    perturbation_step,
    residual,
    step_record,
)
from .mikado import MikadoSpec, build_theta, build_w, place_disjoint, required_resolution
from .profiles import BumpProfile
from .reporting import config_echo, fit_slope, write_csv
from . import plots, spectral

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_TOLERANCE = 3

_SWEEP_SERIES = ("theta_lp", "w_lpdual", "dw_lptilde", "theta_l1")


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _flag(parser, name, **kwargs):
    kwargs.setdefault("default", None)
    parser.add_argument(name, **kwargs)


def _true_flag(parser, name):
    parser.add_argument(name, action="store_const", const=True, default=None)


def _add_common(parser):
    _flag(parser, "--config", help="INI file with a [run] section")
    _flag(parser, "--outdir", help="directory for reports, figures, states")
    _flag(parser, "--tolerance", type=float, help="slope acceptance band")
    _true_flag(parser, "--check")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mikado-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pr = sub.add_parser("regime", help="classify an exponent triple")
    pr.add_argument("p")
    pr.add_argument("p_tilde")
    pr.add_argument("d", type=int)
    pr.add_argument("big_d", type=int, nargs="?")
    _add_common(pr)

    ps = sub.add_parser("sweep", help="block norm scaling against mu")
    _flag(ps, "--p")
    _flag(ps, "--p-tilde", dest="p_tilde")
    _flag(ps, "--d", type=int)
    _flag(ps, "--big-d", dest="big_d", type=int)
    _flag(ps, "--n", type=int)
    _flag(ps, "--mu", dest="mu_values",
          type=lambda s: tuple(float(tok) for tok in s.replace(",", " ").split()))
    _flag(ps, "--r0", type=float)
    _flag(ps, "--profile-kind", dest="profile_kind")
    _flag(ps, "--profile-k", dest="profile_k", type=int)
    _add_common(ps)

    pi = sub.add_parser("iterate", help="run the convex-integration scheme")
    for name, typ in [
        ("--p", str), ("--p-tilde", str), ("--d", int), ("--big-d", int),
        ("--n", int), ("--nt", int), ("--t-final", float), ("--lam0", int),
        ("--growth", int), ("--gamma", float), ("--q-max", int),
        ("--delta-floor", float), ("--r0", float), ("--seed", int),
        ("--profile-kind", str), ("--profile-k", int),
    ]:
        _flag(pi, name, dest=name.lstrip("-").replace("-", "_"), type=typ)
    _true_flag(pi, "--diffusion")
    _true_flag(pi, "--allow-inadmissible")
    _add_common(pi)

    pp = sub.add_parser("probe", help="Lagrangian consistency of a saved state")
    _flag(pp, "--state", dest="state_file")
    _flag(pp, "--particles", type=int)
    _flag(pp, "--rk-steps", dest="rk_steps", type=int)
    _true_flag(pp, "--diffusion")
    _add_common(pp)
    return parser


def _config_from_args(args) -> LabConfig:
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    if "p" in overrides:
        overrides["p"] = str(overrides["p"])
    if "p_tilde" in overrides:
        overrides["p_tilde"] = str(overrides["p_tilde"])
    return load_config(getattr(args, "config", None), overrides)


def _plan(cfg: LabConfig):
    return exponent_plan(cfg.p, cfg.p_tilde, cfg.d, cfg.concentration_dim)


def _profile(cfg: LabConfig) -> BumpProfile:
    return BumpProfile(kind=cfg.profile_kind, k=cfg.profile_k, r0=cfg.r0)


def _fr(x) -> float:
    return math.inf if x == INF else float(x)


# ---------------------------------------------------------------------------
# regime


def _cmd_regime(cfg: LabConfig) -> int:
    plan = _plan(cfg)
    diff = plan.p != INF and diffusion_admissible(plan.p, plan.d)
    print(f"regime: {plan.regime.value}")
    print(f"plan: {plan.describe()}")
    print(f"diffusion variant admissible (p' < d): {diff}")
    echo = config_echo(cfg.echo_params())
    write_csv(
        os.path.join(cfg.outdir, "regime.csv"),
        ["p", "p_tilde", "d", "big_d", "regime", "alpha", "beta", "c",
         "admissible", "diffusion_admissible", "config"],
        [[cfg.p, cfg.p_tilde, plan.d, plan.concentration_dim, plan.regime.value,
          str(plan.alpha), str(plan.beta), str(plan.c), plan.admissible, diff, echo]],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _cmd_sweep(cfg: LabConfig) -> int:
    t0 = time.time()
    plan = _plan(cfg)
    profile = _profile(cfg)
    grid = GridSpec(d=cfg.d, n=cfg.n, nt=1, t_final=1.0)
    offset = place_disjoint([0], profile.r0, cfg.d, cfg.variant)[0]

    violations = []
    specs = []
    for mu in cfg.mu_values:
        spec = MikadoSpec(
            variant=cfg.variant, direction=0, profile=profile, offset=offset,
            alpha=plan.alpha, beta=plan.beta, mu=float(mu), lam=1,
        )
        need = required_resolution(spec)
        if grid.n < need:
            violations.append((mu, need))
        specs.append(spec)
    if violations:
        for mu, need in violations:
            print(f"mu={mu}: unresolved, needs n >= {need} (have {grid.n})",
                  file=sys.stderr)
        return EXIT_NUMERICAL

    series = {name: [] for name in _SWEEP_SERIES}
    for spec in specs:
        theta = build_theta(spec, grid)
        w = build_w(spec, grid)
        series["theta_lp"].append(spectral.lp_norm(theta, _fr(plan.p)))
        series["w_lpdual"].append(spectral.lp_norm(w, _fr(plan.p_dual)))
        series["dw_lptilde"].append(spectral.sobolev_seminorm(w, _fr(plan.p_tilde)))
        series["theta_l1"].append(spectral.lp_norm(theta, 1.0))

    predicted = {k: float(v) for k, v in predicted_slopes(plan).items()}
    fits = {name: (fit_slope(cfg.mu_values, series[name]), predicted[name])
            for name in _SWEEP_SERIES}

    echo = config_echo(cfg.echo_params())
    rows = []
    for i, mu in enumerate(cfg.mu_values):
        rows.append([float(mu)] + [series[name][i] for name in _SWEEP_SERIES] + [echo])
    write_csv(
        os.path.join(cfg.outdir, "sweep.csv"),
        ["mu"] + list(_SWEEP_SERIES) + ["config"],
        rows,
    )
    all_pass = True
    fit_rows = []
    for name in _SWEEP_SERIES:
        fit, pred = fits[name]
        passed = abs(fit.slope - pred) <= cfg.tolerance
        all_pass = all_pass and passed
        fit_rows.append([name, fit.slope, fit.stderr, pred, passed, echo])
        print(f"{name}: fitted {fit.slope:+.4f} (stderr {fit.stderr:.2e}), "
              f"predicted {pred:+.4f} -> {'PASS' if passed else 'FAIL'}")
    write_csv(
        os.path.join(cfg.outdir, "sweep_fits.csv"),
        ["series", "slope", "stderr", "predicted", "passed", "config"],
        fit_rows,
    )
    plots.sweep_figure(os.path.join(cfg.outdir, "sweep.png"),
                       cfg.mu_values, series, fits)
    if not plan.admissible:
        print(f"note: plan is inadmissible (regime {plan.regime.value}, c = {plan.c})")
    print(f"wall {time.time() - t0:.2f}s")
    if cfg.check and not all_pass:
        return EXIT_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# iterate


def _seeded_density(grid: GridSpec, seed: int) -> np.ndarray:
    """Deterministic band-limited initial density around a unit mean."""
    rng = np.random.default_rng(seed)
    axes = np.meshgrid(*([np.arange(grid.n) / grid.n] * grid.d), indexing="ij")
    rho = np.ones((grid.n,) * grid.d)
    for _ in range(4):
        k = rng.integers(-2, 3, size=grid.d)
        if not np.any(k):
            continue
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.05, 0.15)
        rho += amp * np.cos(2.0 * math.pi * sum(k[i] * axes[i] for i in range(grid.d))
                            + phase)
    return rho


_ITERATE_HEADER = [
    "q", "lam", "mu", "e_l1", "rho_lp_max", "u_lpdual", "du_lptilde",
    "du_increment_lptilde", "du_bound_lptilde", "drift_max", "b_inf",
    "suppressed", "config",
]


def _iterate_rows(records, echo):
    rows = []
    for r in records:
        rows.append([r.q, r.lam, r.mu, r.e_l1, r.rho_lp_max, r.u_lpdual,
                     r.du_lptilde, r.du_increment_lptilde, r.du_bound_lptilde,
                     r.drift_max, r.b_inf, r.suppressed, echo])
    return rows


def _cmd_iterate(cfg: LabConfig) -> int:
    t0 = time.time()
    plan = _plan(cfg)
    if cfg.diffusion and not diffusion_admissible(plan.p, plan.d):
        raise ValueError(
            f"diffusive variant needs p' < d; plan has p' = {plan.p_dual}, "
            f"d = {plan.d}"
        )
    if not plan.admissible and not cfg.allow_inadmissible:
        raise ValueError(
            f"plan is not admissible (regime {plan.regime.value}, c = {plan.c}); "
            "pass --allow-inadmissible to run it as a control"
        )
    grid = GridSpec(d=cfg.d, n=cfg.n, nt=cfg.nt, t_final=cfg.t_final)
    schedule = Schedule(lam0=cfg.lam0, a=cfg.growth, gamma=cfg.gamma,
                        q_max=cfg.q_max, delta_floor=cfg.delta_floor)
    profile = _profile(cfg)
    echo = config_echo(cfg.echo_params())
    csv_path = os.path.join(cfg.outdir, "iterate.csv")

    state = initial_state(_seeded_density(grid, cfg.seed), grid, plan, schedule,
                          cfg.diffusion)
    records = [step_record(state)]
    os.makedirs(cfg.outdir, exist_ok=True)
    write_state(os.path.join(cfg.outdir, "state_q0.mkf"), state.rho, state.u)
    write_csv(csv_path, _ITERATE_HEADER, _iterate_rows(records, echo))

    code = EXIT_OK
    for _ in range(cfg.q_max):
        try:
            state = perturbation_step(state, plan, schedule, cfg.diffusion,
                                      profile, cfg.allow_inadmissible)
        except (ResolutionError, PlacementError) as exc:
            # partial results are already on disk; report and stop
            print(f"aborted at q={state.q + 1}: {exc}", file=sys.stderr)
            code = EXIT_NUMERICAL
            break
        records.append(step_record(state))
        write_state(os.path.join(cfg.outdir, f"state_q{state.q}.mkf"),
                    state.rho, state.u)
        write_csv(csv_path, _ITERATE_HEADER, _iterate_rows(records, echo))

    plots.iterate_figure(os.path.join(cfg.outdir, "iterate.png"), records)
    for r in records:
        print(f"q={r.q} lam={r.lam} mu={r.mu:.4g} E_l1={r.e_l1:.6g} "
              f"rho_lp={r.rho_lp_max:.6g} du_inc={r.du_increment_lptilde:.6g} "
              f"bound={r.du_bound_lptilde:.6g}"
              + (" (suppressed)" if r.suppressed else ""))
    print(f"wall {time.time() - t0:.2f}s")
    if code == EXIT_OK and cfg.check:
        e_values = [r.e_l1 for r in records]
        if any(b >= a for a, b in zip(e_values, e_values[1:])):
            print("check failed: residual L^1 is not strictly decreasing",
                  file=sys.stderr)
            return EXIT_TOLERANCE
    return code


# ---------------------------------------------------------------------------
# probe


def _cmd_probe(cfg: LabConfig) -> int:
    t0 = time.time()
    if not cfg.state_file:
        raise ValueError("probe needs a state file (--state or state_file=)")
    try:
        rho, u = read_state(cfg.state_file)
    except OSError as exc:
        raise ValueError(f"cannot read state file {cfg.state_file}: {exc}") from exc
    e = residual(rho, u, cfg.diffusion)
    report = lagrangian_probe(u, (rho, rho), particles=cfg.particles,
                              rk_steps=cfg.rk_steps, residual_field=e)
    echo = config_echo(cfg.echo_params())
    rows = []
    for i in range(report.particle_count):
        seed_cols = [report.seeds[i, j] for j in range(report.seeds.shape[1])]
        rows.append([i] + seed_cols + [report.defects[i], report.duhamel[i], echo])
    seed_names = [f"x{j}" for j in range(report.seeds.shape[1])]
    write_csv(
        os.path.join(cfg.outdir, "probe.csv"),
        ["particle"] + seed_names + ["defect", "duhamel", "config"],
        rows,
    )
    plots.probe_figure(os.path.join(cfg.outdir, "probe.png"), report.defects)
    within = report.mean_defect <= 2.0 * report.duhamel_bound + 1e-12
    print(f"particles={report.particle_count} mean_defect={report.mean_defect:.6g} "
          f"max_defect={report.max_defect:.6g} duhamel={report.duhamel_bound:.6g}")
    print(f"mean defect within 2x Duhamel bound: {'PASS' if within else 'FAIL'}")
    print(f"wall {time.time() - t0:.2f}s")
    if cfg.check and not within:
        return EXIT_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------------


_COMMANDS = {
    "regime": _cmd_regime,
    "sweep": _cmd_sweep,
    "iterate": _cmd_iterate,
    "probe": _cmd_probe,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](cfg)
    except (ResolutionError, PlacementError, ContainerFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
