"""Delimited output and human-readable summaries.

Column contracts are fixed so downstream tooling can rely on them:

trajectory CSV:
    t_us, f_W, f_R, nsp, s2, n1_in, n2_in, n1_out, n2_out,
    flux1_per_us, flux2_per_us

correlation CSV:
    quantity, t1_us, t2_us, value, provenance
    (provenance in {closed_form, phi_propagation, oracle})

oracle diff CSV:
    quantity, analytic, oracle, rel_diff, tolerance, status

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so re-reading a CSV reproduces the samples bit for bit.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .correlations import CorrelationReport
from .dynamics import Trajectory
from .fockoracle import DiffTable, OracleReport
from .params import SignalToNoise

US = 1e-6

TRAJECTORY_COLUMNS = (
    "t_us", "f_W", "f_R", "nsp", "s2", "n1_in", "n2_in",
    "n1_out", "n2_out", "flux1_per_us", "flux2_per_us",
)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    cols = [
        traj.t / US, traj.f_W, traj.f_R, traj.nsp, traj.s2,
        traj.n1_in, traj.n2_in, traj.n1_out, traj.n2_out,
        traj.flux1 * US, traj.flux2 * US,
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory CSV header in {path}")
        rows = [[float(v) for v in row] for row in r]
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_COLUMNS)}


def _corr_rows(report: CorrelationReport) -> list[tuple]:
    tl = report.tl
    t1 = tl.T_W / US
    t2 = tl.T2 / US
    tend = tl.t_end / US
    rows = []

    def add(name, a, b, value):
        if value is None:
            return
        rows.append((name, a, b, value, report.provenance))

    add("p", t1, "", report.p)
    add("nsp", t1, "", report.nsp_write_end)
    add("g11", t1, "", report.g11)
    add("g22", t2, "", report.g22_T2)
    add("g22", tend, "", report.g22_end)
    add("g12", t1, t2, report.g12)
    add("R", t1, t2, report.R)
    add("g3", t1, t2, report.g3)
    for name in ("phi1_TW", "phi2_TW", "phi12_TW", "phi122_TW"):
        add(name.replace("_TW", ""), t1, "", getattr(report, name))
    return rows


def write_correlation_csv(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("quantity", "t1_us", "t2_us", "value", "provenance"))
        for report in reports:
            for name, a, b, value, prov in _corr_rows(report):
                w.writerow(
                    (name, fmt(a), fmt(b) if b != "" else "", fmt(value), prov)
                )


def write_oracle_rows_csv(oracle: OracleReport, path) -> None:
    """Oracle quantities in the correlation CSV layout."""
    tl = oracle.tl
    t1, t2 = tl.T_W / US, tl.T2 / US
    rows = [
        ("nsp", t1, "", oracle.nsp_TW),
        ("g11", t1, "", oracle.g11),
        ("g22", t2, "", oracle.g22_T2),
        ("g12", t1, t2, oracle.g12),
        ("R", t1, t2, oracle.R),
        ("g3", t1, t2, oracle.g3),
        ("phi1", t1, "", oracle.phi1_TW),
        ("phi2", t1, "", oracle.phi2_TW),
        ("phi12", t1, "", oracle.phi12_TW),
        ("phi122", t1, "", oracle.phi122_TW),
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("quantity", "t1_us", "t2_us", "value", "provenance"))
        for name, a, b, value in rows:
            w.writerow((name, fmt(a), fmt(b) if b != "" else "", fmt(value), "oracle"))


def write_diff_csv(table: DiffTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("quantity", "analytic", "oracle", "rel_diff", "tolerance", "status"))
        for r in table.rows:
            w.writerow(
                (
                    r.quantity, fmt(r.analytic), fmt(r.oracle),
                    fmt(r.rel_diff), fmt(r.tolerance),
                    "pass" if r.passed else "FAIL",
                )
            )


SWEEP_COLUMNS = (
    "sweep_param", "sweep_value", "n1_out_TW", "nsp_TW", "n2_out_end",
    "g11", "g22_end", "g12", "R", "g3", "error",
)


def write_sweep_csv(param: str, rows, path) -> None:
    """rows: iterable of (value, scalars-dict-or-None, error-string)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for value, scalars, error in rows:
            if scalars is None:
                w.writerow([param, fmt(value)] + [""] * 8 + [error])
            else:
                w.writerow(
                    [param, fmt(value)]
                    + [fmt(scalars[c]) for c in SWEEP_COLUMNS[2:-1]]
                    + [error]
                )


def _show(value) -> str:
    if value is None:
        return "undefined (no photons in this mode)"
    if isinstance(value, float) and math.isinf(value):
        return "infinite (vacuum-limit divergence)"
    if isinstance(value, float) and math.isnan(value):
        return "undefined"
    return fmt(value)


def summary_text(
    traj: Trajectory,
    reports: list[CorrelationReport],
    snr: SignalToNoise | None = None,
) -> str:
    tl = traj.tl
    lines = [
        "run summary",
        "-----------",
        f"T_W = {tl.T_W / US:g} us, tau_d = {tl.tau_d / US:g} us, T_R = {tl.T_R / US:g} us",
        f"alpha = {traj.sched.alpha * US:g} /us, beta = {traj.sched.beta * US:g} /us, "
        f"gamma_c = {traj.sched.gamma_c * US:g} /us",
        "",
        f"n1_out(T_W)   = {fmt(traj.n1_out_write_end)}",
        f"n2_out(end)   = {fmt(float(traj.n2_out[-1]))}",
        f"N_sp(T_W)     = {fmt(traj.nsp_write_end)}",
        f"N_sp(end)     = {fmt(float(traj.nsp[-1]))}",
    ]
    if snr is not None:
        w = "infinite" if snr.write_diverges else fmt(snr.snr_write)
        r = "infinite" if snr.read_diverges else fmt(snr.snr_read)
        lines.append(f"alpha/Gamma1  = {w}")
        lines.append(f"beta/Gamma2   = {r}")
    for rep in reports:
        lines += [
            "",
            f"[{rep.provenance}]",
            f"g11           = {_show(rep.g11)}",
            f"g22(T2)       = {_show(rep.g22_T2)}",
            f"g22(end)      = {_show(rep.g22_end)}",
            f"g12(T_W, T2)  = {_show(rep.g12)}",
            f"R             = {_show(rep.R)}"
            + ("   (R > 1: nonclassical)" if rep.R_finite and rep.R > 1 else ""),
            f"g3            = {_show(rep.g3)}",
        ]
    return "\n".join(lines) + "\n"
