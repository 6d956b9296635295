"""Mean-field dynamics of the spin wave and the emitted photon modes.

The collective spin-wave occupation N_sp obeys

    dN_sp/dt = alpha(t) (N_sp + 1) - beta(t) N_sp - Gamma_tot(t) N_sp

with Gamma_tot = gamma_c + Gamma1(t) + Gamma2(t).  (An optional incoherent
source +Gamma1(t), off by default, adds the spontaneous spin-flip feed.)
The state-|2> population picks up the optical-pumping reservoir term
Gamma1(t) * n_atoms.  In the bad-cavity limit the intracavity photon
numbers follow the atoms adiabatically,

    n1_in = alpha(t) (N_sp + 1) / (2k),     n2_in = beta(t) N_sp / (2k),

and the output fluxes are dn1_out/dt = 2k n1_in, dn2_out/dt = 2k n2_in.

Everything here integrates piecewise: segments never straddle a pulse
boundary or an envelope kink, so fixed-step RK4 retains its full order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .params import ParameterError, RateSchedule, Timeline


class IntegrationError(RuntimeError):
    """Numerical integration produced an invalid state (NaN/negative)."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    When ``step`` is None the step in each segment is chosen so that
    step * (fastest active rate) <= rate_step_product.  ``stride``
    controls how many integrator steps separate stored samples; segment
    boundaries are always stored.
    """

    step: float | None = None
    rate_step_product: float = 1e-2
    stride: int = 1
    min_segment_steps: int = 16
    include_incoherent_source: bool = False

    def __post_init__(self):
        if self.step is not None and self.step <= 0:
            raise ParameterError("integrator step must be positive")
        if not 0 < self.rate_step_product <= 0.1:
            raise ParameterError("rate_step_product must be in (0, 0.1]")
        if self.stride < 1 or self.min_segment_steps < 2:
            raise ParameterError("stride >= 1 and min_segment_steps >= 2 required")


@dataclass
class Trajectory:
    """Sampled time series of the mean-field run (SI units)."""

    t: np.ndarray
    f_W: np.ndarray
    f_R: np.ndarray
    nsp: np.ndarray
    s2: np.ndarray
    n1_in: np.ndarray
    n2_in: np.ndarray
    n1_out: np.ndarray
    n2_out: np.ndarray
    flux1: np.ndarray
    flux2: np.ndarray
    sched: RateSchedule
    tl: Timeline

    def at(self, name: str, t: float) -> float:
        """Linear interpolation of one series; exact at stored grid points."""
        return float(np.interp(t, self.t, getattr(self, name)))

    @property
    def n1_out_write_end(self) -> float:
        return self.at("n1_out", self.tl.T_W)

    @property
    def nsp_write_end(self) -> float:
        return self.at("nsp", self.tl.T_W)

    def validate(self) -> None:
        series = {
            "nsp": self.nsp, "s2": self.s2,
            "n1_in": self.n1_in, "n2_in": self.n2_in,
            "n1_out": self.n1_out, "n2_out": self.n2_out,
            "flux1": self.flux1, "flux2": self.flux2,
        }
        for name, arr in series.items():
            if not np.all(np.isfinite(arr)):
                raise IntegrationError(f"non-finite values in {name}; aborting")
            floor = -1e-9 * (1.0 + float(np.max(arr, initial=0.0)))
            if np.min(arr, initial=0.0) < floor:
                raise IntegrationError(
                    f"{name} went negative beyond integration tolerance "
                    f"(min {np.min(arr):.3g}); aborting"
                )
        for name in ("n1_out", "n2_out"):
            arr = series[name]
            scale = 1.0 + float(arr[-1])
            if np.min(np.diff(arr), initial=0.0) < -1e-12 * scale:
                raise IntegrationError(f"{name} is not nondecreasing; aborting")


def _segment_list(sched: RateSchedule, tl: Timeline) -> list[tuple[float, float, str]]:
    """Timeline windows split further at envelope kinks."""
    out: list[tuple[float, float, str]] = []
    for t0, t1, phase in tl.segments():
        cuts = sorted(
            {t0, t1}
            | {b for b in sched.f_W.breakpoints if t0 < b < t1}
            | {b for b in sched.f_R.breakpoints if t0 < b < t1}
        )
        for a, b in zip(cuts[:-1], cuts[1:]):
            out.append((a, b, phase))
    return out


def _active_rate(sched: RateSchedule, phase: str) -> float:
    if phase == "write":
        return sched.alpha + sched.Gamma1 + sched.gamma_c
    if phase == "read":
        return sched.beta + sched.Gamma2 + sched.gamma_c
    return sched.gamma_c


def _segment_steps(dt: float, rate: float, cfg: IntegratorConfig) -> int:
    n = cfg.min_segment_steps
    if rate > 0:
        n = max(n, math.ceil(dt * rate / cfg.rate_step_product))
    if cfg.step is not None:
        n = max(n, math.ceil(dt / cfg.step))
    return n


def _rk4(rhs, t: float, y: tuple, h: float) -> tuple:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k1)))
    k3 = rhs(t + 0.5 * h, tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k2)))
    k4 = rhs(t + h, tuple(yi + h * ki for yi, ki in zip(y, k3)))
    return tuple(
        yi + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    )


def integrate_segments(rhs_factory, sched: RateSchedule, tl: Timeline, cfg: IntegratorConfig, y0):
    """Piecewise RK4 over the pulse sequence; returns (t_grid, samples).

    ``rhs_factory(phase)`` must return the derivative function for one
    segment.  Building the right-hand side per segment lets each window
    gate out the other window's drive, so that RK4 stage evaluations at
    a shared boundary (where both closed-interval envelopes are 1)
    cannot leak gain or absorption across windows.  Samples are stored
    every ``cfg.stride`` steps plus at every segment boundary, so window
    edges always land exactly on the grid.
    """
    ts = [0.0]
    ys = [tuple(y0)]
    y = tuple(y0)
    for t0, t1, phase in _segment_list(sched, tl):
        seg_rhs = rhs_factory(phase)

        def rhs(t, yv, _lo=t0, _hi=t1, _f=seg_rhs):
            # clamp stage times into the segment: t0 + n*h can overshoot
            # t1 by one ulp, which would zero the envelope for that stage
            return _f(min(max(t, _lo), _hi), yv)

        n = _segment_steps(t1 - t0, _active_rate(sched, phase), cfg)
        h = (t1 - t0) / n
        for i in range(n):
            y = _rk4(rhs, t0 + i * h, y, h)
            if (i + 1) % cfg.stride == 0 or i == n - 1:
                ts.append(t0 + (i + 1) * h)
                ys.append(y)
        # pin the endpoint exactly (avoids t0 + n*h rounding drift)
        ts[-1] = t1
    return np.asarray(ts), np.asarray(ys)


def evolve_meanfield(
    sched: RateSchedule, tl: Timeline, cfg: IntegratorConfig = IntegratorConfig()
) -> Trajectory:
    """Integrate the mean-field equations over write, delay, and read."""
    if not sched.windows_match(tl):
        raise ParameterError("schedule envelope windows do not match the timeline")
    alpha, beta = sched.alpha, sched.beta
    G1, G2 = sched.Gamma1, sched.Gamma2
    gc, natoms = sched.gamma_c, sched.n_atoms
    fw, fr = sched.f_W.value, sched.f_R.value
    source = cfg.include_incoherent_source

    def rhs_factory(phase):
        wgate = phase == "write"
        rgate = phase == "read"

        def rhs(t, y):
            nsp, s2, _, _ = y
            w = fw(t) if wgate else 0.0
            r = fr(t) if rgate else 0.0
            a = alpha * w
            b = beta * r
            g1 = G1 * w
            g2 = G2 * r
            growth = a * (nsp + 1.0) - b * nsp
            dnsp = growth - (gc + g1 + g2) * nsp
            if source:
                dnsp += g1
            ds2 = growth + g1 * natoms - (gc + g2) * s2
            return (dnsp, ds2, a * (nsp + 1.0), b * nsp)

        return rhs

    t, ys = integrate_segments(rhs_factory, sched, tl, cfg, (0.0, 0.0, 0.0, 0.0))
    nsp, s2, n1_out, n2_out = ys.T
    fW = sched.f_W(t)
    fR = sched.f_R(t)
    flux1 = sched.alpha * fW * (nsp + 1.0)
    flux2 = sched.beta * fR * nsp
    traj = Trajectory(
        t=t, f_W=fW, f_R=fR, nsp=nsp, s2=s2,
        n1_in=flux1 / (2.0 * sched.k), n2_in=flux2 / (2.0 * sched.k),
        n1_out=n1_out, n2_out=n2_out, flux1=flux1, flux2=flux2,
        sched=sched, tl=tl,
    )
    traj.validate()
    return traj


def evolve_with_cavity(
    sched: RateSchedule, tl: Timeline, cfg: IntegratorConfig = IntegratorConfig()
) -> Trajectory:
    """Integrate with the cavity mode kept explicitly (no adiabatic elimination).

    Verification path for the k*t >> 1 limit: the intracavity equations
    dn_i_in/dt = (source) - 2k n_i_in are integrated alongside the spin
    wave, and the output photons accumulate as dn_i_out/dt = 2k n_i_in.
    The step resolves 2k, so this is only practical for modest k.
    """
    if not sched.windows_match(tl):
        raise ParameterError("schedule envelope windows do not match the timeline")
    alpha, beta = sched.alpha, sched.beta
    G1, G2 = sched.Gamma1, sched.Gamma2
    gc, natoms, k = sched.gamma_c, sched.n_atoms, sched.k
    fw, fr = sched.f_W.value, sched.f_R.value

    def rhs_factory(phase):
        wgate = phase == "write"
        rgate = phase == "read"

        def rhs(t, y):
            nsp, s2, c1, c2, _, _ = y
            w = fw(t) if wgate else 0.0
            r = fr(t) if rgate else 0.0
            a = alpha * w
            b = beta * r
            g1 = G1 * w
            g2 = G2 * r
            growth = a * (nsp + 1.0) - b * nsp
            return (
                growth - (gc + g1 + g2) * nsp,
                growth + g1 * natoms - (gc + g2) * s2,
                a * (nsp + 1.0) - 2.0 * k * c1,
                b * nsp - 2.0 * k * c2,
                2.0 * k * c1,
                2.0 * k * c2,
            )

        return rhs

    cavity_cfg = IntegratorConfig(
        step=min(cfg.step, cfg.rate_step_product / (2.0 * k)) if cfg.step
        else cfg.rate_step_product / (2.0 * k),
        rate_step_product=cfg.rate_step_product,
        stride=cfg.stride,
        min_segment_steps=cfg.min_segment_steps,
    )
    t, ys = integrate_segments(rhs_factory, sched, tl, cavity_cfg, (0.0,) * 6)
    nsp, s2, n1_in, n2_in, n1_out, n2_out = ys.T
    fW = sched.f_W(t)
    fR = sched.f_R(t)
    traj = Trajectory(
        t=t, f_W=fW, f_R=fR, nsp=nsp, s2=s2,
        n1_in=n1_in, n2_in=n2_in, n1_out=n1_out, n2_out=n2_out,
        flux1=2.0 * k * n1_in, flux2=2.0 * k * n2_in,
        sched=sched, tl=tl,
    )
    traj.validate()
    return traj


def nsp_quadrature(
    sched: RateSchedule, tl: Timeline, t: float, points_per_segment: int = 4001
) -> float:
    """Spin-wave occupation at time t by direct quadrature.

    Evaluates N_sp(t) = int_0^t dt' alpha(t') exp{ int_{t'}^t
    [alpha - beta - Gamma_tot] dtau } with composite Simpson rules on a
    fine grid, split at envelope kinks.  Independent of the RK4 path and
    used to cross-check it.
    """
    if t < 0:
        raise ParameterError("quadrature time must be nonnegative")
    if t == 0.0:
        return 0.0
    lam_off = 0.0   # running integral of (alpha - beta - Gamma_tot)
    acc = 0.0       # running integral of alpha(s) exp(-Lambda(s))
    for t0, t1, phase in _segment_list(sched, tl):
        if t0 >= t:
            break
        hi = min(t1, t)
        m = points_per_segment if points_per_segment % 2 == 1 else points_per_segment + 1
        s = np.linspace(t0, hi, m)
        fw = sched.f_W(s) if phase == "write" else np.zeros_like(s)
        fr = sched.f_R(s) if phase == "read" else np.zeros_like(s)
        a = sched.alpha * fw
        b = sched.beta * fr
        gtot = sched.gamma_c + sched.Gamma1 * fw + sched.Gamma2 * fr
        lam = lam_off + cumulative_simpson(a - b - gtot, x=s, initial=0.0)
        with np.errstate(over="ignore"):
            integrand = np.where(a == 0.0, 0.0, a * np.exp(-lam))
        acc += float(cumulative_simpson(integrand, x=s, initial=0.0)[-1])
        lam_off = float(lam[-1])
        if hi == t:
            break
    return math.exp(lam_off) * acc


# expm1(x)/x and (expm1(x)-x)/x^2 with series fallbacks near 0
def _phifn(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(xs) / xs)


def _psifn(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 0.5 + x / 6.0 + x * x / 24.0, (np.expm1(xs) - xs) / (xs * xs))


@dataclass(frozen=True)
class ClosedFormSolution:
    """Pointwise closed-form photon numbers for rectangular pulses."""

    t: np.ndarray
    nsp: np.ndarray
    n1_in: np.ndarray
    n1_out: np.ndarray
    n2_in: np.ndarray
    n2_out: np.ndarray


def closed_forms_rectangular(
    sched: RateSchedule,
    tl: Timeline,
    t,
    global_decay_approximation: bool = False,
) -> ClosedFormSolution:
    """Closed-form solution of the mean-field equations for rectangular pulses.

    The default solves each constant-rate window exactly, so the result
    matches ``evolve_meanfield`` to integration accuracy for any gamma_c,
    Gamma1, Gamma2.  With ``global_decay_approximation=True`` the
    weak-decoherence shortcut is returned instead: coherent growth
    without damping in the write window, and spin decoherence folded
    into a single e^{-gamma_c t} prefactor (decay clock at t = 0) on the
    retrieved photon numbers.  The two variants coincide when all
    relaxations vanish; the shortcut is only meaningful for
    gamma_c << beta and gamma_c * T_W << 1.
    """
    if not sched.is_rectangular():
        raise ParameterError("closed forms require rectangular write and read envelopes")
    if not sched.windows_match(tl):
        raise ParameterError("schedule envelope windows do not match the timeline")

    t = np.atleast_1d(np.asarray(t, dtype=float))
    alpha, beta, gc = sched.alpha, sched.beta, sched.gamma_c
    twok = 2.0 * sched.k
    T_W, T2 = tl.T_W, tl.T2

    nsp = np.zeros_like(t)
    n1_in = np.zeros_like(t)
    n1_out = np.zeros_like(t)
    n2_in = np.zeros_like(t)
    n2_out = np.zeros_like(t)

    write = t <= T_W
    delay = (t > T_W) & (t < T2)
    read = t >= T2

    if global_decay_approximation:
        tw = np.clip(t, 0.0, T_W)
        n1w_end = math.expm1(alpha * T_W)
        nsp_w = np.expm1(alpha * tw)
        nsp[write] = nsp_w[write]
        n1_out[write] = nsp_w[write]
        n1_out[~write] = n1w_end
        n1_in[write] = (alpha / twok) * np.exp(alpha * tw[write])
        nsp[delay] = n1w_end * np.exp(-gc * (t[delay] - T_W))
        tr = t[read] - T2
        n2_in[read] = (beta / twok) * n1w_end * np.exp(-beta * tr - gc * t[read])
        n2_out[read] = n1w_end * np.exp(-gc * t[read]) * (1.0 - np.exp(-beta * tr))
        nsp[read] = n1w_end * np.exp(-gc * (t[read] - T_W)) * np.exp(-beta * tr)
        return ClosedFormSolution(t, nsp, n1_in, n1_out, n2_in, n2_out)

    # exact window solutions
    a = alpha - gc - sched.Gamma1            # net growth rate during the write
    bb = beta + gc + sched.Gamma2            # net decay rate during the read
    tw = np.clip(t, 0.0, T_W)
    nsp_w = alpha * tw * _phifn(a * tw)
    n1o_w = alpha * tw + (alpha * tw) ** 2 * _psifn(a * tw)
    nsp[write] = nsp_w[write]
    n1_out[write] = n1o_w[write]
    n1_in[write] = (alpha / twok) * (nsp_w[write] + 1.0)
    n1w_end = alpha * T_W + (alpha * T_W) ** 2 * float(_psifn(np.asarray(a * T_W)))
    nsp_w_end = alpha * T_W * float(_phifn(np.asarray(a * T_W)))
    n1_out[~write] = n1w_end

    nsp[delay] = nsp_w_end * np.exp(-gc * (t[delay] - T_W))
    nsp_d_end = nsp_w_end * math.exp(-gc * tl.tau_d)

    tr = t[read] - T2
    decay = np.exp(-bb * tr)
    nsp[read] = nsp_d_end * decay
    n2_in[read] = (beta / twok) * nsp[read]
    n2_out[read] = nsp_d_end * (beta / bb) * (1.0 - decay) if bb > 0 else 0.0 * tr
    return ClosedFormSolution(t, nsp, n1_in, n1_out, n2_in, n2_out)


def stokes_spin_correspondence(traj: Trajectory) -> float:
    """Residual of the Stokes-count / spin-excitation identity on the write window.

    With all relaxations off, n1_out(t) and N_sp(t) obey the same
    equation during the write pulse, so the residual is bounded by the
    integration tolerance.  Returns max |n1_out - N_sp| over the write
    window, normalized by the peak N_sp when that is nonzero (relative
    residual); useful as a negative control with relaxations on, where it
    grows like the integrated Gamma_tot * N_sp.
    """
    mask = traj.t <= traj.tl.T_W
    res = float(np.max(np.abs(traj.n1_out[mask] - traj.nsp[mask]), initial=0.0))
    norm = float(np.max(traj.nsp[mask], initial=0.0))
    return res / norm if norm > 0 else res
