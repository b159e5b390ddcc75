"""Integrability exponents, regime classification, and scaling predictions.

Everything here is exact rational arithmetic (`fractions.Fraction`), with
infinity as a sentinel, so comparisons on the critical surface
1/p + 1/p_tilde = 1 + 1/D are decided exactly rather than in floating point.
Floats are normalized through their decimal representation (1.1 becomes 11/10).

The admissible window couples three exponents on the d-torus: densities are
measured in L^p, carriers in the Hoelder-dual L^p', and carrier gradients in
L^p_tilde.  Gradients of W^{1,p_tilde} carriers with p_tilde >= p' transport
L^p densities uniquely; strictly inside 1/p + 1/p_tilde > 1 + 1/D the
concentration mechanism applies (D is the number of dimensions the blocks
concentrate in: d - 1 for tubes, d for compact blocks); between the two lies
open ground.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "INF",
    "RegimeLabel",
    "ExponentPlan",
    "as_exponent",
    "dual_exponent",
    "classify_regime",
    "exponent_plan",
    "diffusion_admissible",
    "predicted_slopes",
]

INF = math.inf

Exponent = Fraction | float  # a Fraction >= 1, or INF


def as_exponent(value) -> Exponent:
    """Normalize an exponent to an exact Fraction >= 1 or INF.

    Accepts Fractions, ints, strings ("3/2", "1.1", "inf"), and floats
    (converted through their decimal repr, so 1.1 means 11/10).
    """
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo"):
            return INF
        value = Fraction(text)
    if isinstance(value, float):
        if math.isinf(value):
            return INF
        if math.isnan(value):
            raise ValueError("exponent cannot be NaN")
        value = Fraction(str(value))
    if isinstance(value, int):
        value = Fraction(value)
    if not isinstance(value, Fraction):
        raise ValueError(f"cannot interpret {value!r} as an exponent")
    if value < 1:
        raise ValueError(f"integrability exponent must be >= 1, got {value}")
    return value


def _inv(p: Exponent) -> Fraction:
    """1/p, with 1/inf = 0."""
    if p == INF:
        return Fraction(0)
    return 1 / p


def dual_exponent(p) -> Exponent:
    """Hoelder dual: 1/p + 1/p' = 1, with 1 and infinity swapping."""
    p = as_exponent(p)
    if p == INF:
        return Fraction(1)
    if p == 1:
        return INF
    return p / (p - 1)


class RegimeLabel(enum.Enum):
    UNIQUE_DIPERNA_LIONS = "UNIQUE_DIPERNA_LIONS"
    NONUNIQUE_THEOREM = "NONUNIQUE_THEOREM"
    OPEN_GAP = "OPEN_GAP"
    EXCLUDED_ENDPOINT = "EXCLUDED_ENDPOINT"


def _check_dims(d: int, concentration_dim: int | None) -> int:
    if not isinstance(d, int) or d < 2:
        raise ValueError(f"spatial dimension must be an integer >= 2, got {d}")
    if concentration_dim is None:
        concentration_dim = d
    if concentration_dim not in (d - 1, d):
        raise ValueError(
            f"concentration dimension must be d-1 or d, got {concentration_dim} for d={d}"
        )
    return concentration_dim


def classify_regime(p, p_tilde, d: int, concentration_dim: int | None = None) -> RegimeLabel:
    """Place (p, p_tilde) relative to the uniqueness and construction windows.

    Order of precedence: infinite exponents are excluded endpoints; then
    p_tilde >= p' is the unique (gradient-dual) window; then the strict
    inequality 1/p + 1/p_tilde > 1 + 1/D admits the construction; equality and
    everything else in between is open.  Equality on the critical surface is
    decided exactly, which is why this never takes floating-point input at
    face value.
    """
    p = as_exponent(p)
    p_tilde = as_exponent(p_tilde)
    big_d = _check_dims(d, concentration_dim)
    if p == INF or p_tilde == INF:
        return RegimeLabel.EXCLUDED_ENDPOINT
    p_dual = dual_exponent(p)
    if p_dual != INF and p_tilde >= p_dual:
        return RegimeLabel.UNIQUE_DIPERNA_LIONS
    if _inv(p) + _inv(p_tilde) > 1 + Fraction(1, big_d):
        return RegimeLabel.NONUNIQUE_THEOREM
    return RegimeLabel.OPEN_GAP


@dataclass(frozen=True)
class ExponentPlan:
    """Exponent triple with the concentration scaling it induces.

    alpha and beta are the density / carrier concentration rates; the default
    choice alpha = D/p, beta = D/p' keeps both block norms mu-independent and
    alpha + beta = D keeps the interaction mean mu-invariant.  c is the
    gradient-cost margin: carrier gradients scale like mu^{-c} in L^p_tilde,
    so c > 0 exactly on the construction side of the critical surface.
    """

    p: Exponent
    p_dual: Exponent
    p_tilde: Exponent
    d: int
    concentration_dim: int
    alpha: Fraction
    beta: Fraction
    c: Fraction
    regime: RegimeLabel
    admissible: bool

    def describe(self) -> str:
        def fmt(x):
            return "inf" if x == INF else str(x)

        return (
            f"p={fmt(self.p)} p'={fmt(self.p_dual)} p_tilde={fmt(self.p_tilde)} "
            f"d={self.d} D={self.concentration_dim} alpha={self.alpha} "
            f"beta={self.beta} c={self.c} regime={self.regime.value} "
            f"admissible={self.admissible}"
        )


def exponent_plan(
    p,
    p_tilde,
    d: int,
    concentration_dim: int | None = None,
    alpha=None,
    beta=None,
) -> ExponentPlan:
    """Assemble the scaling plan for an exponent triple.

    Inadmissible triples are returned flagged, never raised: negative c is a
    measurable prediction (gradient growth), not an input error.  alpha/beta
    overrides exist for controls (e.g. alpha = beta = 0 turns concentration
    off); overrides give up the alpha + beta = D normalization knowingly.
    """
    p = as_exponent(p)
    p_tilde = as_exponent(p_tilde)
    big_d = _check_dims(d, concentration_dim)
    p_dual = dual_exponent(p)
    alpha = big_d * _inv(p) if alpha is None else Fraction(str(alpha))
    beta = big_d * _inv(p_dual) if beta is None else Fraction(str(beta))
    c = big_d * _inv(p_tilde) - beta - 1
    regime = classify_regime(p, p_tilde, d, big_d)
    return ExponentPlan(
        p=p,
        p_dual=p_dual,
        p_tilde=p_tilde,
        d=d,
        concentration_dim=big_d,
        alpha=alpha,
        beta=beta,
        c=c,
        regime=regime,
        admissible=regime is RegimeLabel.NONUNIQUE_THEOREM,
    )


def predicted_slopes(plan: ExponentPlan) -> dict[str, Fraction]:
    """Exact log-log slopes in mu for the block norms under a plan.

    A block of concentration rate gamma in D dimensions has L^q norm scaling
    like mu^{gamma - D/q}, and differentiation contributes one extra power of
    mu.  Keys name the measured quantity: density in L^p, carrier in L^p',
    carrier gradient in L^p_tilde, density in L^1.  For the standard plan
    these reduce to (0, 0, -c, -D/p'); slopes are computed from the plan's
    actual alpha/beta so overridden controls predict correctly too.
    """
    big_d = plan.concentration_dim
    return {
        "theta_lp": plan.alpha - big_d * _inv(plan.p),
        "w_lpdual": plan.beta - big_d * _inv(plan.p_dual),
        "dw_lptilde": plan.beta + 1 - big_d * _inv(plan.p_tilde),
        "theta_l1": plan.alpha - big_d,
    }


def diffusion_admissible(p, d: int) -> bool:
    """Whether the diffusive variant applies: requires p' < d (and finite p)."""
    p = as_exponent(p)
    if p == INF:
        raise ValueError("p = inf is outside the diffusive variant's range")
    if not isinstance(d, int) or d < 2:
        raise ValueError(f"spatial dimension must be an integer >= 2, got {d}")
    p_dual = dual_exponent(p)
    return p_dual != INF and p_dual < d
