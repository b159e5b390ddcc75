"""Figure rendering for the experiment commands.

Every report command drops a PNG next to its CSV so a run is inspectable
without further tooling.  Rendering is headless (Agg) and deterministic.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["sweep_figure", "iterate_figure", "probe_figure"]

_SERIES_STYLE = {
    "theta_lp": ("o", "density L^p"),
    "w_lpdual": ("s", "carrier L^p'"),
    "dw_lptilde": ("^", "carrier gradient L^p~"),
    "theta_l1": ("d", "density L^1"),
}


def sweep_figure(path: str, mus, series: dict, fits: dict) -> None:
    """Log-log norms against mu with fitted and predicted power laws."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    mus = np.asarray(mus, dtype=float)
    grid = np.linspace(mus.min(), mus.max(), 64)
    for name, values in series.items():
        marker, label = _SERIES_STYLE.get(name, ("x", name))
        fit, predicted = fits[name]
        ax.loglog(mus, values, marker, label=f"{label}: fit {fit.slope:+.3f}, "
                                             f"predicted {predicted:+.3f}")
        ax.loglog(grid, np.exp(fit.intercept) * grid**fit.slope, "-", alpha=0.5)
    ax.set_xlabel("concentration mu")
    ax.set_ylabel("norm")
    ax.set_title("block norm scaling")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def iterate_figure(path: str, records) -> None:
    """Residual and derivative-cost trajectories across iteration steps."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.2))
    qs = [r.q for r in records]
    ax1.semilogy(qs, [r.e_l1 for r in records], "o-", label="residual L^1")
    ax1.set_xlabel("step q")
    ax1.set_ylabel("norm")
    ax1.set_title("residual")
    ax1.legend(fontsize=8)
    stepped = [r for r in records if r.q > 0]
    if stepped:
        qs2 = [r.q for r in stepped]
        ax2.semilogy(qs2, [max(r.du_increment_lptilde, 1e-300) for r in stepped],
                     "o-", label="measured Du increment")
        ax2.semilogy(qs2, [max(r.du_bound_lptilde, 1e-300) for r in stepped],
                     "s--", label="predicted bound")
    ax2.set_xlabel("step q")
    ax2.set_title("derivative cost")
    if stepped:
        ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def probe_figure(path: str, defects) -> None:
    """Histogram of per-particle transported-density defects."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    defects = np.asarray(defects, dtype=float)
    ax.hist(defects, bins=min(40, max(5, defects.size // 8)), color="tab:blue")
    ax.set_xlabel("|rho(T, X(T, x)) - rho0(x)|")
    ax.set_ylabel("particles")
    ax.set_title("Lagrangian transport defect")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
