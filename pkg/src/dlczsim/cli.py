"""Batch front-end.

Subcommands:
    simulate      run one scenario; writes trajectory.csv, correlations.csv,
                  summary.txt, and trajectory.png
    sweep         run the [sweep] axis of the config; writes sweep.csv and
                  sweep.png (per-point failures land in the error column)
    oracle-check  compare the analytic pipeline against the truncated-Fock
                  oracle; writes oracle_diff.csv and oracle_values.csv,
                  exit code 3 on mismatch
    figure <id>   reproduce a canned figure family (fig2a fig2b fig3a
                  fig3b); one CSV per curve plus a rendered PNG

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import correlations, dynamics, figures, fockoracle, reporting
from .config import ConfigError, RunConfig, load_config
from .params import ParameterError, RateSchedule, Timeline, signal_to_noise

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_MISMATCH = 3

US = 1e-6
PER_US = 1e6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse defaults to exit code 2, which we reserve for numerics
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    # common flags are accepted both before and after the subcommand; the
    # after-subcommand copies default to SUPPRESS so they only override
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: ./out)")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="sweep worker processes")
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                        help="relative tolerance for oracle-check (overrides config)")

    p = _Parser(prog="dlczsim", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=None)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "oracle-check"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--config", required=True)
    fp = sub.add_parser("figure", parents=[common])
    fp.add_argument("figure_id", choices=figures.FIGURE_IDS)
    return p


def _run_pipeline(cfg: RunConfig):
    traj = dynamics.evolve_meanfield(cfg.sched, cfg.tl, cfg.integrator)
    phi = correlations.propagate_phi(cfg.sched, cfg.tl, cfg.integrator)
    reports = [
        correlations.closed_report(traj, cfg.sched, cfg.tl),
        correlations.phi_report(phi, traj, cfg.sched, cfg.tl),
    ]
    return traj, phi, reports


def cmd_simulate(cfg: RunConfig, outdir: Path) -> int:
    traj, _phi, reports = _run_pipeline(cfg)
    reporting.write_trajectory_csv(traj, outdir / "trajectory.csv")
    reporting.write_correlation_csv(reports, outdir / "correlations.csv")
    snr = signal_to_noise(cfg.sched) if cfg.raw is not None else None
    (outdir / "summary.txt").write_text(
        reporting.summary_text(traj, reports, snr), encoding="utf-8"
    )
    figures.render_curves(
        outdir / "trajectory.png",
        [("N_sp", traj)],
        "nsp",
        "spin-wave excitations N_sp",
        "scenario trajectory",
    )
    print(reporting.summary_text(traj, reports, snr))
    return EXIT_OK


def _sweep_scenario(cfg: RunConfig, param: str, value: float) -> tuple[RateSchedule, Timeline]:
    tl, sched = cfg.tl, cfg.sched
    if param in ("alpha", "beta", "gamma_c"):
        return replace(sched, **{param: value * PER_US}), tl
    if param == "tau_d":
        new_tl = Timeline(tl.T_W, value * US, tl.T_R)
        shift = new_tl.T2 - tl.T2
        return replace(sched, f_R=sched.f_R.shifted(shift)), new_tl
    if param == "p":
        if sched.f_W.shape != "rectangular":
            raise ParameterError("p-sweeps require a rectangular write envelope")
        alpha = figures.solve_alpha_for_n1(
            value, tl, gamma_c=sched.gamma_c, Gamma1=sched.Gamma1
        )
        return replace(sched, alpha=alpha), tl
    raise ParameterError(f"unknown sweep axis {param!r}")


def sweep_point(args: tuple) -> tuple[int, dict | None, str]:
    """One sweep evaluation; module-level so worker processes can pickle it."""
    cfg, param, index, value = args
    try:
        sched, tl = _sweep_scenario(cfg, param, value)
        traj = dynamics.evolve_meanfield(sched, tl, cfg.integrator)
        rep = correlations.closed_report(traj, sched, tl)
        scalars = {
            "n1_out_TW": traj.n1_out_write_end,
            "nsp_TW": traj.nsp_write_end,
            "n2_out_end": float(traj.n2_out[-1]),
            "g11": rep.g11 if rep.g11 is not None else math.nan,
            "g22_end": rep.g22_end,
            "g12": rep.g12,
            "R": rep.R,
            "g3": rep.g3,
        }
        return index, scalars, ""
    except Exception as exc:  # recorded per point; the sweep continues
        return index, None, f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: RunConfig, workers: int = 1):
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section")
    jobs = [
        (cfg, cfg.sweep.param, i, v) for i, v in enumerate(cfg.sweep.values)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_point, jobs))
    else:
        results = [sweep_point(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    return [
        (cfg.sweep.values[i], scalars, err) for i, scalars, err in results
    ]


def cmd_sweep(cfg: RunConfig, outdir: Path, workers: int) -> int:
    rows = run_sweep(cfg, workers)
    reporting.write_sweep_csv(cfg.sweep.param, rows, outdir / "sweep.csv")
    ok = [(v, s) for v, s, _ in rows if s is not None]
    if ok:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=150)
        xs = [v for v, _ in ok]
        rs = [s["R"] for _, s in ok]
        if cfg.sweep.param == "p" and all(r > 0 and math.isfinite(r) for r in rs):
            ax.loglog(xs, rs, "o-")
        else:
            ax.semilogy(xs, rs, "o-")
        ax.set_xlabel(cfg.sweep.param)
        ax.set_ylabel("Cauchy-Schwarz ratio R")
        ax.grid(alpha=0.3, which="both")
        fig.tight_layout()
        fig.savefig(outdir / "sweep.png")
        plt.close(fig)
    n_err = sum(1 for _, s, _ in rows if s is None)
    print(f"sweep over {cfg.sweep.param}: {len(rows)} points, {n_err} failed")
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, outdir: Path, tolerance: float | None) -> int:
    tol = tolerance if tolerance is not None else cfg.oracle_tolerance
    nsp_max = dynamics.nsp_quadrature(cfg.sched, cfg.tl, cfg.tl.T_W)
    need = fockoracle.required_dim(
        nsp_max, rel_tol=tol, leak_threshold=cfg.oracle.leak_threshold
    )
    if cfg.oracle.dim < need:
        raise fockoracle.TruncationError(
            f"configured truncation dim = {cfg.oracle.dim} cannot hold "
            f"N_sp(T_W) = {nsp_max:.3g} at tolerance {tol:g}; "
            f"set [oracle] dim >= {need}"
        )
    traj, phi, _ = _run_pipeline(cfg)
    analytic = correlations.phi_report(phi, traj, cfg.sched, cfg.tl)
    oracle = fockoracle.oracle_report(cfg.sched, cfg.tl, cfg.oracle)
    table = fockoracle.compare_report(analytic, traj, oracle, tolerance=tol)
    reporting.write_diff_csv(table, outdir / "oracle_diff.csv")
    reporting.write_oracle_rows_csv(oracle, outdir / "oracle_values.csv")
    for r in table.rows:
        print(
            f"{r.quantity:>12}: analytic {r.analytic:.10g}  oracle {r.oracle:.10g}  "
            f"rel {r.rel_diff:.3g}  [{'pass' if r.passed else 'FAIL'}]"
        )
    if not table.passed:
        print(f"oracle mismatch: max relative difference {table.max_rel_diff:.3g} > {tol:g}")
        return EXIT_MISMATCH
    print(f"oracle check passed: max relative difference {table.max_rel_diff:.3g} <= {tol:g}")
    return EXIT_OK


def cmd_figure(figure_id: str, outdir: Path) -> int:
    spec = figures.resolve_figure(figure_id)
    trajs = figures.figure_trajectories(spec)
    curves = []
    for label, traj in zip(spec.labels, trajs):
        stem = label.split("/")[0].replace("=", "_")
        reporting.write_trajectory_csv(traj, outdir / f"{figure_id}_{stem}.csv")
        curves.append((label, traj))
    figures.render_curves(
        outdir / f"{figure_id}.png", curves, spec.series, spec.ylabel, figure_id
    )
    print(f"{figure_id}: wrote {len(curves)} curve CSVs and {figure_id}.png to {outdir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "figure":
            return cmd_figure(args.figure_id, outdir)
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, outdir)
        if args.command == "sweep":
            return cmd_sweep(cfg, outdir, args.workers)
        return cmd_oracle_check(cfg, outdir, args.tolerance)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        dynamics.IntegrationError,
        fockoracle.TruncationError,
        FloatingPointError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
