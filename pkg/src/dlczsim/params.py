"""Laboratory parameters, pulse envelopes, and the model rate schedule.

The simulation is driven by four time-dependent coefficients: the Stokes
gain alpha(t) and anti-Stokes absorption beta(t) of the collective spin
wave, and the optical-pumping rates Gamma1(t), Gamma2(t) that act as the
incoherent noise floor.  For a write laser of Rabi frequency Omega_W
detuned by Delta_W from its one-photon transition, an ensemble of N atoms
coupled to a ring cavity of field decay rate k,

    alpha = (2 N / k) * (g_S * Omega_W / Delta_W)**2
    beta  = (2 N / k) * (g_AS * Omega_R / Delta_R)**2
    Gamma1 = (Omega_W / Delta_W)**2 * gamma_32
    Gamma2 = (Omega_R / Delta_R)**2 * gamma_41

with g_S, g_AS the atom/quantized-field couplings.  All rates are kept in
SI units (1/s) internally; the CLI layer converts from per-microsecond
inputs.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants


class ParameterError(ValueError):
    """Invalid physical parameters, pulse definitions, or timelines."""


_ENVELOPE_SHAPES = ("rectangular", "trapezoid", "tabulated")


@dataclass(frozen=True)
class PulseEnvelope:
    """Dimensionless temporal profile f(t) of a laser pulse.

    f(t) is confined to [0, 1], vanishes outside the pulse window
    [t_start, t_stop], and for rectangular/trapezoid shapes the plateau
    value is exactly 1.  Tabulated envelopes are linearly interpolated
    between strictly increasing sample times; sample values are clamped
    into [0, 1] on construction.
    """

    shape: str
    t_start: float
    t_stop: float
    rise_time: float = 0.0
    table_t: tuple[float, ...] | None = None
    table_f: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.shape not in _ENVELOPE_SHAPES:
            raise ParameterError(f"unknown envelope shape {self.shape!r}")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_stop)):
            raise ParameterError("envelope window must be finite")
        if self.t_stop <= self.t_start:
            raise ParameterError("envelope window must have positive duration")
        if self.shape == "trapezoid":
            if not 0.0 < self.rise_time <= 0.5 * self.duration:
                raise ParameterError(
                    "trapezoid rise_time must satisfy 0 < rise_time <= duration/2 "
                    "so the plateau reaches exactly 1"
                )
        if self.shape == "tabulated":
            if self.table_t is None or self.table_f is None:
                raise ParameterError("tabulated envelope needs times and values")
            tt = np.asarray(self.table_t, dtype=float)
            if tt.size < 2:
                raise ParameterError("tabulated envelope needs at least 2 samples")
            if np.any(np.diff(tt) <= 0):
                raise ParameterError("tabulated envelope times must be strictly increasing")
            if tt[0] != self.t_start or tt[-1] != self.t_stop:
                raise ParameterError("tabulated samples must span the envelope window")

    @classmethod
    def rectangular(cls, t_start: float, t_stop: float) -> "PulseEnvelope":
        return cls("rectangular", t_start, t_stop)

    @classmethod
    def trapezoid(cls, t_start: float, t_stop: float, rise_time: float) -> "PulseEnvelope":
        return cls("trapezoid", t_start, t_stop, rise_time=rise_time)

    @classmethod
    def tabulated(cls, times, values) -> "PulseEnvelope":
        """Piecewise-linear envelope; values are clamped into [0, 1]."""
        tt = tuple(float(t) for t in times)
        vv = tuple(min(1.0, max(0.0, float(v))) for v in values)
        if len(tt) != len(vv):
            raise ParameterError("tabulated times and values must have equal length")
        if len(tt) < 2:
            raise ParameterError("tabulated envelope needs at least 2 samples")
        return cls("tabulated", tt[0], tt[-1], table_t=tt, table_f=vv)

    @property
    def duration(self) -> float:
        return self.t_stop - self.t_start

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Times where f(t) is not smooth; integrators must not step across them."""
        if self.shape == "rectangular":
            return (self.t_start, self.t_stop)
        if self.shape == "trapezoid":
            r = self.rise_time
            return (self.t_start, self.t_start + r, self.t_stop - r, self.t_stop)
        return self.table_t

    def value(self, t: float) -> float:
        """Scalar fast path used inside integration loops."""
        if t < self.t_start or t > self.t_stop:
            return 0.0
        if self.shape == "rectangular":
            return 1.0
        if self.shape == "trapezoid":
            r = self.rise_time
            if t < self.t_start + r:
                return (t - self.t_start) / r
            if t > self.t_stop - r:
                return (self.t_stop - t) / r
            return 1.0
        i = bisect.bisect_right(self.table_t, t)
        if i <= 0:
            return self.table_f[0]
        if i >= len(self.table_t):
            return self.table_f[-1]
        t0, t1 = self.table_t[i - 1], self.table_t[i]
        f0, f1 = self.table_f[i - 1], self.table_f[i]
        return f0 + (f1 - f0) * (t - t0) / (t1 - t0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "rectangular":
            out = np.where((t >= self.t_start) & (t <= self.t_stop), 1.0, 0.0)
        elif self.shape == "trapezoid":
            r = self.rise_time
            knots = [self.t_start, self.t_start + r, self.t_stop - r, self.t_stop]
            out = np.interp(t, knots, [0.0, 1.0, 1.0, 0.0], left=0.0, right=0.0)
        else:
            out = np.interp(t, self.table_t, self.table_f, left=0.0, right=0.0)
            out = np.where((t < self.t_start) | (t > self.t_stop), 0.0, out)
        return float(out) if out.ndim == 0 else out

    def shifted(self, dt: float) -> "PulseEnvelope":
        """Same profile translated in time by dt."""
        if self.shape == "tabulated":
            return PulseEnvelope.tabulated(
                tuple(t + dt for t in self.table_t), self.table_f
            )
        return PulseEnvelope(
            self.shape, self.t_start + dt, self.t_stop + dt, rise_time=self.rise_time
        )


@dataclass(frozen=True)
class Timeline:
    """Pulse sequence: write on [0, T_W], read on [T2, T2 + T_R], T2 = T_W + tau_d."""

    T_W: float
    tau_d: float
    T_R: float

    def __post_init__(self):
        for name in ("T_W", "tau_d", "T_R"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"timeline {name} must be finite")
        if self.T_W <= 0 or self.T_R <= 0:
            raise ParameterError("pulse durations T_W, T_R must be positive")
        if self.tau_d < 0:
            raise ParameterError("delay tau_d must be nonnegative")

    @property
    def T2(self) -> float:
        return self.T_W + self.tau_d

    @property
    def t_end(self) -> float:
        return self.T2 + self.T_R

    def segments(self) -> tuple[tuple[float, float, str], ...]:
        """(t0, t1, phase) windows; the delay segment is dropped when tau_d = 0."""
        segs = [(0.0, self.T_W, "write")]
        if self.tau_d > 0:
            segs.append((self.T_W, self.T2, "delay"))
        segs.append((self.T2, self.t_end, "read"))
        return tuple(segs)


@dataclass(frozen=True)
class RawPhysicalParams:
    """Laboratory-level inputs from which the model rates are derived.

    Rabi frequencies, detunings, and couplings are angular frequencies in
    rad/s; decay rates in 1/s; L in m; V in m^3.  Couplings may be given
    directly (g_S, g_AS) or computed from dipole matrix elements
    (mu_32, mu_41 in C*m) together with the carrier frequencies and the
    quantization volume V; exactly one of the two supply paths must be
    used.
    """

    Omega_W: float
    Omega_R: float
    Delta_W: float
    Delta_R: float
    gamma_32: float
    gamma_41: float
    gamma_c: float
    N: float
    k: float
    omega_W: float = 0.0
    omega_R: float = 0.0
    g_S: float | None = None
    g_AS: float | None = None
    mu_32: float | None = None
    mu_41: float | None = None
    L: float = 0.0
    V: float | None = None

    def __post_init__(self):
        if self.Delta_W == 0.0 or self.Delta_R == 0.0:
            raise ParameterError("one-photon detunings must be nonzero")
        for name in ("Omega_W", "Omega_R", "gamma_32", "gamma_41", "gamma_c", "k"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and nonnegative")
        if self.N < 1:
            raise ParameterError("atom number N must be >= 1")
        direct = self.g_S is not None and self.g_AS is not None
        dipole = self.mu_32 is not None and self.mu_41 is not None
        if direct and dipole:
            raise ParameterError(
                "supply either (g_S, g_AS) or (mu_32, mu_41, V); not both"
            )
        if not direct and not dipole:
            raise ParameterError("couplings missing: give (g_S, g_AS) or (mu_32, mu_41, V)")
        if dipole:
            if self.V is None or self.V <= 0:
                raise ParameterError("dipole coupling path needs a positive volume V")
            if self.omega_W <= 0 or self.omega_R <= 0:
                raise ParameterError("dipole coupling path needs carrier frequencies")

    def couplings(self) -> tuple[float, float]:
        """(g_S, g_AS) in rad/s, resolved through whichever supply path was used."""
        if self.g_S is not None:
            return float(self.g_S), float(self.g_AS)
        # Scattered-field frequencies differ from the carriers only by the
        # ground-state splitting, negligible at optical frequencies.
        return (
            coupling_from_dipole(self.omega_W, self.mu_32, self.V),
            coupling_from_dipole(self.omega_R, self.mu_41, self.V),
        )


def coupling_from_dipole(omega: float, mu: float, volume: float) -> float:
    """Single-photon coupling g = mu * sqrt(omega / (2 hbar eps0 V)) in rad/s."""
    return mu * math.sqrt(omega / (2.0 * constants.hbar * constants.epsilon_0 * volume))


@dataclass(frozen=True)
class RateSchedule:
    """Time-dependent model coefficients, all in 1/s.

    alpha and beta are the peak values; the instantaneous rates are
    alpha * f_W(t) and beta * f_R(t).  n_atoms is only needed for the
    state-|2> population equation (optical pumping from the ground state
    scales with the total atom number); leaving it at 0 disables that
    source term.
    """

    alpha: float
    beta: float
    f_W: PulseEnvelope
    f_R: PulseEnvelope
    Gamma1: float = 0.0
    Gamma2: float = 0.0
    gamma_c: float = 0.0
    k: float = 3.0e9
    n_atoms: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "Gamma1", "Gamma2", "gamma_c", "n_atoms"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"rate {name} must be finite and nonnegative")
        if not math.isfinite(self.k) or self.k <= 0:
            raise ParameterError("cavity decay rate k must be positive")
        if self.f_W.t_stop > self.f_R.t_start + 1e-12 * max(1.0, abs(self.f_R.t_start)):
            raise ParameterError(
                "write and read envelopes overlap: write window ends at "
                f"{self.f_W.t_stop:g} s but read window starts at {self.f_R.t_start:g} s"
            )
        if max(self.alpha, self.beta) > 0.1 * self.k:
            warnings.warn(
                "bad-cavity assumption strained: max(alpha, beta) = "
                f"{max(self.alpha, self.beta):.3g} 1/s is not << k = {self.k:.3g} 1/s; "
                "adiabatic elimination of the cavity mode may be inaccurate",
                stacklevel=2,
            )

    @classmethod
    def rectangular(cls, tl: Timeline, alpha: float, beta: float, **rates) -> "RateSchedule":
        """Schedule with rectangular pulses matching the timeline windows."""
        return cls(
            alpha=alpha,
            beta=beta,
            f_W=PulseEnvelope.rectangular(0.0, tl.T_W),
            f_R=PulseEnvelope.rectangular(tl.T2, tl.t_end),
            **rates,
        )

    # Scalar fast paths for the integrators.
    def alpha_t(self, t: float) -> float:
        return self.alpha * self.f_W.value(t)

    def beta_t(self, t: float) -> float:
        return self.beta * self.f_R.value(t)

    def Gamma1_t(self, t: float) -> float:
        return self.Gamma1 * self.f_W.value(t)

    def Gamma2_t(self, t: float) -> float:
        return self.Gamma2 * self.f_R.value(t)

    def Gamma_tot_t(self, t: float) -> float:
        return self.gamma_c + self.Gamma1_t(t) + self.Gamma2_t(t)

    def is_rectangular(self) -> bool:
        return self.f_W.shape == "rectangular" and self.f_R.shape == "rectangular"

    def windows_match(self, tl: Timeline, rel: float = 1e-9) -> bool:
        scale = max(tl.t_end, 1e-300)
        return (
            abs(self.f_W.t_start - 0.0) <= rel * scale
            and abs(self.f_W.t_stop - tl.T_W) <= rel * scale
            and abs(self.f_R.t_start - tl.T2) <= rel * scale
            and abs(self.f_R.t_stop - tl.t_end) <= rel * scale
        )


def derive_rates(
    raw: RawPhysicalParams,
    f_W: PulseEnvelope,
    f_R: PulseEnvelope,
    tl: Timeline,
) -> RateSchedule:
    """Convert laboratory parameters into the model rate schedule.

    The envelope windows must coincide with the timeline windows; a
    mismatch (in particular overlapping pulses) is rejected with a
    diagnostic, because all closed-form results assume the write and
    read drives never act simultaneously.
    """
    g_S, g_AS = raw.couplings()
    sched = RateSchedule(
        alpha=(2.0 * raw.N / raw.k) * (g_S * raw.Omega_W / raw.Delta_W) ** 2,
        beta=(2.0 * raw.N / raw.k) * (g_AS * raw.Omega_R / raw.Delta_R) ** 2,
        f_W=f_W,
        f_R=f_R,
        Gamma1=(raw.Omega_W / raw.Delta_W) ** 2 * raw.gamma_32,
        Gamma2=(raw.Omega_R / raw.Delta_R) ** 2 * raw.gamma_41,
        gamma_c=raw.gamma_c,
        k=raw.k,
        n_atoms=raw.N,
    )
    if not sched.windows_match(tl):
        raise ParameterError(
            "envelope windows do not match the timeline: expected write "
            f"[0, {tl.T_W:g}] and read [{tl.T2:g}, {tl.t_end:g}], got write "
            f"[{f_W.t_start:g}, {f_W.t_stop:g}] and read [{f_R.t_start:g}, {f_R.t_stop:g}]"
        )
    return sched


@dataclass(frozen=True)
class SignalToNoise:
    """Peak coherent-gain to optical-pumping ratios for the two channels."""

    snr_write: float
    snr_read: float
    write_diverges: bool = False
    read_diverges: bool = False


def signal_to_noise(sched: RateSchedule) -> SignalToNoise:
    """alpha/Gamma1 and beta/Gamma2 at peak drive.

    A vanishing pumping rate is reported as an infinite ratio with an
    explicit flag rather than raising.
    """
    wdiv = sched.Gamma1 == 0.0
    rdiv = sched.Gamma2 == 0.0
    return SignalToNoise(
        snr_write=math.inf if wdiv else sched.alpha / sched.Gamma1,
        snr_read=math.inf if rdiv else sched.beta / sched.Gamma2,
        write_diverges=wdiv,
        read_diverges=rdiv,
    )
