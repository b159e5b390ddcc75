"""Run configuration: one INI document per experiment, flags win over file.

The [run] section holds flat key = value pairs mirroring LabConfig's fields.
Values stay exactly reproducible: exponents are kept as strings ("3/2",
"1.1", "inf") and only turned into exact rationals by the exponent layer.

Defaults describe the standard desk run: d = 2 compact blocks on a 512
point grid, nine time slices over T = 0.1, and the largest-margin admissible
plan p = p_tilde = 1 (c = 1), whose schedule fits the grid for three steps.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

__all__ = ["LabConfig", "load_config"]


@dataclass(frozen=True)
class LabConfig:
    outdir: str = "out"
    seed: int = 0
    # grid
    d: int = 2
    n: int = 512
    nt: int = 9
    t_final: float = 0.1
    # plan
    p: str = "1"
    p_tilde: str = "1"
    big_d: int = 0  # 0 means "same as d" (compact blocks)
    # blocks
    r0: float = 0.25
    profile_kind: str = "polynomial"
    profile_k: int = 4
    mu_values: tuple = (1.0, 2.0, 4.0, 8.0)
    # schedule
    lam0: int = 1
    growth: int = 2
    gamma: float = 1.25
    q_max: int = 3
    delta_floor: float = 1e-3
    # probe
    particles: int = 256
    rk_steps: int = 200
    state_file: str = ""
    # reporting
    tolerance: float = 0.05
    check: bool = False
    allow_inadmissible: bool = False
    diffusion: bool = False

    @property
    def concentration_dim(self) -> int:
        return self.d if self.big_d == 0 else self.big_d

    @property
    def variant(self) -> str:
        return "compact" if self.concentration_dim == self.d else "tube"

    def validate(self) -> None:
        """Reject invalid settings with the offending field named."""
        checks = [
            ("d", isinstance(self.d, int) and self.d >= 2, "must be an integer >= 2"),
            ("n", isinstance(self.n, int) and self.n >= 2, "must be an integer >= 2"),
            ("nt", isinstance(self.nt, int) and self.nt >= 1, "must be an integer >= 1"),
            ("t_final", self.t_final > 0, "must be positive"),
            ("big_d", self.big_d in (0, self.d - 1, self.d),
             f"must be 0 (meaning d), {self.d - 1}, or {self.d}"),
            ("r0", 0.0 < self.r0 < 0.5, "must lie in (0, 1/2)"),
            ("profile_kind", self.profile_kind in ("polynomial", "cosine"),
             "must be 'polynomial' or 'cosine'"),
            ("profile_k", isinstance(self.profile_k, int) and self.profile_k >= 2,
             "must be an integer >= 2"),
            ("mu_values", len(self.mu_values) >= 1 and all(m >= 1 for m in self.mu_values),
             "must be a nonempty list of values >= 1"),
            ("lam0", isinstance(self.lam0, int) and self.lam0 >= 1,
             "must be a positive integer"),
            ("growth", isinstance(self.growth, int) and self.growth >= 2,
             "must be an integer >= 2"),
            ("gamma", self.gamma > 0, "must be positive"),
            ("q_max", isinstance(self.q_max, int) and self.q_max >= 0,
             "must be a nonnegative integer"),
            ("delta_floor", 0 < self.delta_floor < 1, "must lie in (0, 1)"),
            ("particles", isinstance(self.particles, int) and self.particles >= 1,
             "must be a positive integer"),
            ("rk_steps", isinstance(self.rk_steps, int) and self.rk_steps >= 1,
             "must be a positive integer"),
            ("tolerance", self.tolerance > 0, "must be positive"),
            ("seed", isinstance(self.seed, int) and self.seed >= 0,
             "must be a nonnegative integer"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ValueError(f"config field {name}: {message}")

    def echo_params(self) -> dict:
        """The reproducibility echo: every field that shapes the data."""
        out = dataclasses.asdict(self)
        out["mu_values"] = ",".join(repr(float(m)) for m in self.mu_values)
        out.pop("outdir")
        out.pop("check")
        return out


_PARSERS = {
    "outdir": str,
    "seed": int,
    "d": int,
    "n": int,
    "nt": int,
    "t_final": float,
    "p": str,
    "p_tilde": str,
    "big_d": int,
    "r0": float,
    "profile_kind": str,
    "profile_k": int,
    "mu_values": lambda s: tuple(float(tok) for tok in s.replace(",", " ").split()),
    "lam0": int,
    "growth": int,
    "gamma": float,
    "q_max": int,
    "delta_floor": float,
    "particles": int,
    "rk_steps": int,
    "state_file": str,
    "tolerance": float,
    "check": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "allow_inadmissible": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "diffusion": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def load_config(path: str | None = None, overrides: dict | None = None) -> LabConfig:
    """Build a validated config from an optional INI file plus flag overrides.

    The file needs a [run] section; unknown keys are rejected by name so a
    typo cannot silently fall back to a default.  Overrides with value None
    are ignored (flag not given).
    """
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ValueError(f"config file not found or unreadable: {path}")
        if not parser.has_section("run"):
            raise ValueError(f"config file {path} has no [run] section")
        for key, raw in parser.items("run"):
            if key not in _PARSERS:
                raise ValueError(f"config field {key}: unknown key")
            try:
                values[key] = _PARSERS[key](raw)
            except (ValueError, TypeError) as exc:
                raise ValueError(f"config field {key}: cannot parse {raw!r}") from exc
    if overrides:
        for key, val in overrides.items():
            if val is None:
                continue
            if key not in _PARSERS:
                raise ValueError(f"config field {key}: unknown key")
            values[key] = val
    cfg = LabConfig(**values)
    cfg.validate()
    return cfg
