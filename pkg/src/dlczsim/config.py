"""Run-configuration files: nested key-value sections, microsecond units.

A run file is UTF-8 INI text with dotted section names for nesting.
Unknown sections or keys are hard errors so that a typo in a physics
parameter can never silently fall back to a default.  Times are in
microseconds and rates in inverse microseconds except inside [raw],
which carries laboratory SI values (rad/s, 1/s, m, m^3).  Exactly one of
[rates] or [raw] must be present.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .dynamics import IntegratorConfig
from .fockoracle import OracleConfig
from .params import (
    ParameterError,
    PulseEnvelope,
    RateSchedule,
    RawPhysicalParams,
    Timeline,
    derive_rates,
)

US = 1e-6          # seconds per microsecond
PER_US = 1e6       # (1/us) -> (1/s)

SWEEP_AXES = ("alpha", "beta", "gamma_c", "tau_d", "p")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    tl: Timeline
    sched: RateSchedule
    integrator: IntegratorConfig
    oracle: OracleConfig
    oracle_tolerance: float = 1e-4
    sweep: SweepSpec | None = None
    raw: RawPhysicalParams | None = None


_SCHEMA: dict[str, set[str]] = {
    "timeline": {"T_W", "tau_d", "T_R"},
    "rates": {"alpha", "beta", "gamma_c", "Gamma1", "Gamma2", "k", "n_atoms"},
    "raw": {
        "Omega_W", "Omega_R", "Delta_W", "Delta_R", "gamma_32", "gamma_41",
        "gamma_c", "N", "k", "omega_W", "omega_R", "g_S", "g_AS",
        "mu_32", "mu_41", "L", "V",
    },
    "envelope.write": {"shape", "rise_time", "times", "values"},
    "envelope.read": {"shape", "rise_time", "times", "values"},
    "integrator": {"step", "rate_step_product", "stride", "incoherent_source"},
    "oracle": {"dim", "leak_threshold", "rate_step_product", "stride", "tolerance"},
    "sweep": {"param", "grid", "start", "stop", "num", "values"},
}


def _float(section, key, parser, default=None):
    if key not in parser[section]:
        if default is None:
            raise ConfigError(f"[{section}] is missing required key '{key}'")
        return default
    raw = parser[section][key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _int(section, key, parser, default):
    v = _float(section, key, parser, default=float(default))
    if v != int(v):
        raise ConfigError(f"[{section}] {key} must be an integer")
    return int(v)


def _bool(section, key, parser, default):
    if key not in parser[section]:
        return default
    raw = parser[section][key].strip().lower()
    if raw in ("true", "yes", "1", "on"):
        return True
    if raw in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")


def _float_list(section, key, parser):
    raw = parser[section][key]
    try:
        return tuple(float(x) for x in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[{section}] {key} is not a list of numbers") from None


def _envelope(parser, section: str, t_start: float, t_stop: float) -> PulseEnvelope:
    if section not in parser:
        return PulseEnvelope.rectangular(t_start, t_stop)
    shape = parser[section].get("shape", "rectangular").strip()
    if shape == "rectangular":
        return PulseEnvelope.rectangular(t_start, t_stop)
    if shape == "trapezoid":
        rise = _float(section, "rise_time", parser) * US
        return PulseEnvelope.trapezoid(t_start, t_stop, rise)
    if shape == "tabulated":
        if "times" not in parser[section] or "values" not in parser[section]:
            raise ConfigError(f"[{section}] tabulated envelope needs 'times' and 'values'")
        times = tuple(t * US for t in _float_list(section, "times", parser))
        values = _float_list(section, "values", parser)
        return PulseEnvelope.tabulated(times, values)
    raise ConfigError(f"[{section}] unknown envelope shape {shape!r}")


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # physics keys are case-sensitive (Gamma1 vs gamma_c)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SCHEMA[section]
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")

    if "timeline" not in parser:
        raise ConfigError("missing required section [timeline]")
    has_rates = "rates" in parser
    has_raw = "raw" in parser
    if has_rates == has_raw:
        raise ConfigError("exactly one of [rates] or [raw] must be present")

    try:
        tl = Timeline(
            T_W=_float("timeline", "T_W", parser) * US,
            tau_d=_float("timeline", "tau_d", parser) * US,
            T_R=_float("timeline", "T_R", parser) * US,
        )
        f_W = _envelope(parser, "envelope.write", 0.0, tl.T_W)
        f_R = _envelope(parser, "envelope.read", tl.T2, tl.t_end)

        raw_params = None
        if has_rates:
            sched = RateSchedule(
                alpha=_float("rates", "alpha", parser) * PER_US,
                beta=_float("rates", "beta", parser) * PER_US,
                f_W=f_W,
                f_R=f_R,
                Gamma1=_float("rates", "Gamma1", parser, 0.0) * PER_US,
                Gamma2=_float("rates", "Gamma2", parser, 0.0) * PER_US,
                gamma_c=_float("rates", "gamma_c", parser, 0.0) * PER_US,
                k=_float("rates", "k", parser, 3000.0) * PER_US,
                n_atoms=_float("rates", "n_atoms", parser, 0.0),
            )
        else:
            opt = lambda key: (
                _float("raw", key, parser) if key in parser["raw"] else None
            )
            raw_params = RawPhysicalParams(
                Omega_W=_float("raw", "Omega_W", parser),
                Omega_R=_float("raw", "Omega_R", parser),
                Delta_W=_float("raw", "Delta_W", parser),
                Delta_R=_float("raw", "Delta_R", parser),
                gamma_32=_float("raw", "gamma_32", parser),
                gamma_41=_float("raw", "gamma_41", parser),
                gamma_c=_float("raw", "gamma_c", parser),
                N=_float("raw", "N", parser),
                k=_float("raw", "k", parser),
                omega_W=_float("raw", "omega_W", parser, 0.0),
                omega_R=_float("raw", "omega_R", parser, 0.0),
                g_S=opt("g_S"),
                g_AS=opt("g_AS"),
                mu_32=opt("mu_32"),
                mu_41=opt("mu_41"),
                L=_float("raw", "L", parser, 0.0),
                V=opt("V"),
            )
            sched = derive_rates(raw_params, f_W, f_R, tl)

        step = None
        if "integrator" in parser and "step" in parser["integrator"]:
            step = _float("integrator", "step", parser) * US
        integ = IntegratorConfig(
            step=step,
            rate_step_product=(
                _float("integrator", "rate_step_product", parser, 1e-2)
                if "integrator" in parser else 1e-2
            ),
            stride=_int("integrator", "stride", parser, 1) if "integrator" in parser else 1,
            include_incoherent_source=(
                _bool("integrator", "incoherent_source", parser, False)
                if "integrator" in parser else False
            ),
        )
        oracle = OracleConfig(
            dim=_int("oracle", "dim", parser, 40) if "oracle" in parser else 40,
            leak_threshold=(
                _float("oracle", "leak_threshold", parser, 1e-8)
                if "oracle" in parser else 1e-8
            ),
            rate_step_product=(
                _float("oracle", "rate_step_product", parser, 1e-2)
                if "oracle" in parser else 1e-2
            ),
            stride=_int("oracle", "stride", parser, 4) if "oracle" in parser else 4,
        )
        oracle_tol = (
            _float("oracle", "tolerance", parser, 1e-4) if "oracle" in parser else 1e-4
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    sweep = None
    if "sweep" in parser:
        param = parser["sweep"].get("param", "").strip()
        if param not in SWEEP_AXES:
            raise ConfigError(f"[sweep] param must be one of {SWEEP_AXES}, got {param!r}")
        grid = parser["sweep"].get("grid", "list").strip()
        if grid == "list":
            if "values" not in parser["sweep"]:
                raise ConfigError("[sweep] grid = list needs a 'values' key")
            values = _float_list("sweep", "values", parser)
        elif grid in ("linspace", "logspace"):
            start = _float("sweep", "start", parser)
            stop = _float("sweep", "stop", parser)
            num = _int("sweep", "num", parser, 0)
            if num < 1:
                raise ConfigError("[sweep] num must be >= 1")
            if grid == "linspace":
                values = tuple(float(v) for v in np.linspace(start, stop, num))
            else:
                if start <= 0 or stop <= 0:
                    raise ConfigError("[sweep] logspace needs positive start/stop")
                values = tuple(
                    float(v) for v in np.logspace(np.log10(start), np.log10(stop), num)
                )
        else:
            raise ConfigError(f"[sweep] unknown grid kind {grid!r}")
        if len(values) == 0 or not all(np.isfinite(values)):
            raise ConfigError("[sweep] grid must be non-empty and finite")
        sweep = SweepSpec(param=param, values=values)

    return RunConfig(
        tl=tl,
        sched=sched,
        integrator=integ,
        oracle=oracle,
        oracle_tolerance=oracle_tol,
        sweep=sweep,
        raw=raw_params,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text)
