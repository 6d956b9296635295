"""Canned figure scenarios and matplotlib rendering.

Each figure id resolves to a family of trajectories over the standard
pulse sequence (T_W = 1.6 us, tau_d = 1.4 us, T_R = 1 us):

    fig2a : Stokes flux dn1_out/dt for several write intensities alpha,
            showing the spontaneous-to-stimulated transition.
    fig2b : anti-Stokes flux dn2_out/dt for several read intensities
            beta, with alpha solved so that n1_out(T_W) = 3.
    fig3a : spin-wave occupation N_sp(t) for the same read intensities
            (strong read empties the memory, weak read leaves a
            residual), gamma_c = 0.03 /us.
    fig3b : same as fig3a with ten times faster spin decoherence,
            gamma_c = 0.3 /us.

The report path writes one trajectory CSV per curve (full column
contract, see reporting.py) and renders a PNG of the family alongside.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from scipy.optimize import brentq

from .dynamics import IntegratorConfig, Trajectory, closed_forms_rectangular, evolve_meanfield
from .params import ParameterError, RateSchedule, Timeline

US = 1e-6

FIGURE_IDS = ("fig2a", "fig2b", "fig3a", "fig3b")

STANDARD_TIMELINE = Timeline(T_W=1.6 * US, tau_d=1.4 * US, T_R=1.0 * US)
STANDARD_K = 3.0e9          # cavity decay [1/s], free-space propagation limit

# figure integrator: fine enough that trapezoid areas of the emitted flux
# reproduce the cumulative photon counts to ~1e-7
FIGURE_INTEGRATOR = IntegratorConfig(rate_step_product=1e-3, stride=1)


def solve_alpha_for_n1(
    n1_target: float,
    tl: Timeline,
    gamma_c: float = 0.0,
    Gamma1: float = 0.0,
) -> float:
    """Peak Stokes gain giving n1_out(T_W) = n1_target for a rectangular write."""
    if n1_target <= 0:
        raise ParameterError("target Stokes count must be positive")

    def n1_of(alpha):
        sched = RateSchedule.rectangular(
            tl, alpha=alpha, beta=0.0, gamma_c=gamma_c, Gamma1=Gamma1, k=STANDARD_K
        )
        sol = closed_forms_rectangular(sched, tl, [tl.T_W])
        return float(sol.n1_out[0]) - n1_target

    lo, hi = 1e-12 / tl.T_W, 30.0 / tl.T_W
    return brentq(n1_of, lo, hi, xtol=1e-18, rtol=8.9e-16)


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    tl: Timeline
    gamma_c: float                     # [1/s]
    alphas: tuple[float, ...]          # [1/s], one per curve
    betas: tuple[float, ...]           # [1/s], one per curve
    series: str                        # trajectory column to plot
    ylabel: str
    labels: tuple[str, ...]


def resolve_figure(figure_id: str) -> FigureSpec:
    tl = STANDARD_TIMELINE
    if figure_id == "fig2a":
        alphas = tuple(a * 1e6 for a in (0.2, 0.5, 1.0))
        return FigureSpec(
            figure_id, tl, gamma_c=0.03e6,
            alphas=alphas, betas=tuple(10.0e6 for _ in alphas),
            series="flux1", ylabel="Stokes flux dn1/dt [1/us]",
            labels=tuple(f"alpha={a / 1e6:g}/us" for a in alphas),
        )
    if figure_id in ("fig2b", "fig3a", "fig3b"):
        gamma_c = 0.3e6 if figure_id == "fig3b" else 0.03e6
        alpha = solve_alpha_for_n1(3.0, tl, gamma_c=gamma_c)
        betas = tuple(alpha * m for m in (1.0, 10.0, 100.0))
        series = "flux2" if figure_id == "fig2b" else "nsp"
        ylabel = (
            "anti-Stokes flux dn2/dt [1/us]" if figure_id == "fig2b"
            else "spin-wave excitations N_sp"
        )
        return FigureSpec(
            figure_id, tl, gamma_c=gamma_c,
            alphas=tuple(alpha for _ in betas), betas=betas,
            series=series, ylabel=ylabel,
            labels=tuple(f"beta={b / 1e6:.4g}/us" for b in betas),
        )
    raise ParameterError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")


def figure_trajectories(spec: FigureSpec, cfg: IntegratorConfig | None = None):
    cfg = cfg or FIGURE_INTEGRATOR
    out = []
    for alpha, beta in zip(spec.alphas, spec.betas):
        sched = RateSchedule.rectangular(
            spec.tl, alpha=alpha, beta=beta, gamma_c=spec.gamma_c, k=STANDARD_K
        )
        out.append(evolve_meanfield(sched, spec.tl, cfg))
    return out


def render_curves(
    path,
    curves: list[tuple[str, Trajectory]],
    series: str,
    ylabel: str,
    title: str,
) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.8), dpi=150)
    for label, traj in curves:
        y = getattr(traj, series)
        if series.startswith("flux"):
            y = y * US          # per microsecond on the plot
        ax.plot(traj.t / US, y, label=label, linewidth=1.2)
    ax.set_xlabel("t [us]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
