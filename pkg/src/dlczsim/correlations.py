"""Photon statistics: auto/cross correlations, Cauchy-Schwarz ratio, g3.

In the bosonic (weak-excitation) limit the collective spin operators
reduce to a single harmonic mode, and the drive/absorption/decoherence
generator closes on the number moments.  Writing N = <S+ S>, M2 = <n^2>,
M3 = <n^3> for the mode number operator n, the exact hierarchy is

    dN/dt  = a (N + 1) - b N - gc N
    dM2/dt = a (2 M2 + 3 N + 1) - b (2 M2 - N) - gc M2
    dM3/dt = a (3 M3 + 6 M2 + 4 N + 1) - b (3 M3 - 3 M2 + N) - gc M3

with a = alpha(t), b = beta(t) and gc the ground-state decoherence rate
implemented as a reset channel toward the initial vacuum.  Every
correlation function used here is an algebraic combination of these
moments and of two-time regression factors:

    Phi1  = <S^2 S+^2>        = M2 + 3N + 2        (anti-normal 4th moment)
    Phi2  = <S+^2 S^2>        = M2 - N             (normal 4th moment)
    Phi12(t,t)   = <(S S+)^2> = M2 + 2N + 1
    Phi122(t,t,t)= <S S+^2 S^2 S+> = M3 + 2 M2 + N

Two-time values attach the regression decay exp[-int beta - gc (t2-t1)]
(for Phi12) or exp[-int 2 beta - gc (t2-t1)] (for Phi122).  For a
relaxation-free write the state is exactly thermal, which collapses the
anchors to the familiar chaotic-light forms (Phi2 = 2 N^2, g11 = 2,
g12 = 2 + 1/N) and yields the headline closed results

    R  = ((1 + 2 n1) / (2 n1))^2 * exp(-gamma_c tau_d)
    g3 = 4 n1 (1 + 3 n1 / 2) * exp(+gamma_c tau_d)

with n1 the number of Stokes photons counted by the end of the write.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .dynamics import IntegratorConfig, Trajectory, integrate_segments
from .params import ParameterError, RateSchedule, Timeline


class UndefinedCorrelation(ValueError):
    """A normalized correlation was requested where no photons exist."""


@dataclass(frozen=True)
class PhiFunctions:
    """Propagated spin-moment functions on a shared time grid.

    The normally ordered fourth moment phi2 is integrated directly (its
    own equation is dPhi2/dt = 2a(Phi2 + 2N) - (2b + gc) Phi2), because
    forming it as <n^2> - <n> loses all precision late in the read
    window where both operands decay like e^{-beta t} but their
    difference like e^{-2 beta t}.  Every other correlator is a purely
    additive combination of N, Phi2, and M3, so no such cancellation
    occurs.
    """

    t: np.ndarray
    nsp: np.ndarray
    phi2: np.ndarray
    m3: np.ndarray
    beta_int: np.ndarray     # cumulative integral of beta(t)
    gamma_c: float
    sched: RateSchedule
    tl: Timeline

    @property
    def m2(self) -> np.ndarray:
        """Second number moment <n^2> = Phi2 + N."""
        return self.phi2 + self.nsp

    def _at(self, arr: np.ndarray, t: float) -> float:
        return float(np.interp(t, self.t, arr))

    def nsp_at(self, t: float) -> float:
        return self._at(self.nsp, t)

    def phi1_at(self, t: float) -> float:
        """<S^2 S+^2>; equals 2 at t = 0 (vacuum plus commutators)."""
        return self._at(self.phi2 + 4.0 * self.nsp + 2.0, t)

    def phi2_at(self, t: float) -> float:
        """<S+^2 S^2>."""
        return self._at(self.phi2, t)

    def phi12_anchor(self, t: float) -> float:
        """Equal-time anchor <(S S+)^2> = (N+1)(2N+1) for a thermal state."""
        return self._at(self.phi2 + 3.0 * self.nsp + 1.0, t)

    def phi122_anchor(self, t: float) -> float:
        """Equal-time anchor <S S+^2 S^2 S+>."""
        return self._at(self.m3 + 2.0 * self.phi2 + 3.0 * self.nsp, t)

    def read_decay(self, t1: float, t2: float) -> float:
        """Regression factor exp[-int_{t1}^{t2} beta - gamma_c (t2 - t1)]."""
        db = self._at(self.beta_int, t2) - self._at(self.beta_int, t1)
        return math.exp(-db - self.gamma_c * (t2 - t1))

    def phi12(self, t1: float, t2: float) -> float:
        if t2 < t1:
            raise ParameterError("phi12 requires t2 >= t1")
        return self.phi12_anchor(t1) * self.read_decay(t1, t2)

    def phi122(self, t1: float, t2: float) -> float:
        if t2 < t1:
            raise ParameterError("phi122 requires t2 >= t1")
        db = self._at(self.beta_int, t2) - self._at(self.beta_int, t1)
        return self.phi122_anchor(t1) * math.exp(-2.0 * db - self.gamma_c * (t2 - t1))


def propagate_phi(
    sched: RateSchedule, tl: Timeline, cfg: IntegratorConfig = IntegratorConfig()
) -> PhiFunctions:
    """Integrate the closed moment hierarchy for arbitrary envelopes.

    Optical-pumping rates are not representable in the single-mode
    moment algebra and are dropped here (a warning reports the ratio
    when they are not negligible against the coherent rates); gamma_c is
    kept exactly.
    """
    if not sched.windows_match(tl):
        raise ParameterError("schedule envelope windows do not match the timeline")
    if sched.alpha > 0 and sched.Gamma1 > 1e-2 * sched.alpha:
        warnings.warn(
            f"moment propagation neglects optical pumping; Gamma1/alpha = "
            f"{sched.Gamma1 / sched.alpha:.3g} is not small",
            stacklevel=2,
        )
    if sched.beta > 0 and sched.Gamma2 > 1e-2 * sched.beta:
        warnings.warn(
            f"moment propagation neglects optical pumping; Gamma2/beta = "
            f"{sched.Gamma2 / sched.beta:.3g} is not small",
            stacklevel=2,
        )
    alpha, beta, gc = sched.alpha, sched.beta, sched.gamma_c
    fw, fr = sched.f_W.value, sched.f_R.value

    def rhs_factory(phase):
        wgate = phase == "write"
        rgate = phase == "read"

        def rhs(t, y):
            n, p2, m3, _ = y
            a = alpha * fw(t) if wgate else 0.0
            b = beta * fr(t) if rgate else 0.0
            return (
                a * (n + 1.0) - b * n - gc * n,
                2.0 * a * (p2 + 2.0 * n) - (2.0 * b + gc) * p2,
                a * (3.0 * m3 + 6.0 * p2 + 10.0 * n + 1.0)
                - b * (3.0 * m3 - 3.0 * p2 - 2.0 * n) - gc * m3,
                b,
            )

        return rhs

    t, ys = integrate_segments(rhs_factory, sched, tl, cfg, (0.0, 0.0, 0.0, 0.0))
    nsp, phi2, m3, bint = ys.T
    return PhiFunctions(
        t=t, nsp=nsp, phi2=phi2, m3=m3, beta_int=bint, gamma_c=gc, sched=sched, tl=tl
    )


def g_auto(phi: PhiFunctions, traj: Trajectory, t: float, mode: int) -> float:
    """Normalized second-order auto-correlation of mode 1 (Stokes) or 2.

    Computed as G(ii) / n_i^2 with G(11) = (alpha/2k)^2 Phi1 and
    G(22) = (beta/2k)^2 Phi2; the intracavity photon number comes from
    the trajectory.  Raises UndefinedCorrelation where the mode holds no
    photons.
    """
    twok = 2.0 * phi.sched.k
    if mode == 1:
        n = traj.at("n1_in", t)
        if n <= 0.0:
            raise UndefinedCorrelation(f"g11 undefined at t = {t:g}: n1_in = 0")
        rate = phi.sched.alpha * phi.sched.f_W.value(t)
        return (rate / twok) ** 2 * phi.phi1_at(t) / n**2
    if mode == 2:
        n = traj.at("n2_in", t)
        if n <= 0.0:
            raise UndefinedCorrelation(f"g22 undefined at t = {t:g}: n2_in = 0")
        rate = phi.sched.beta * phi.sched.f_R.value(t)
        return (rate / twok) ** 2 * phi.phi2_at(t) / n**2
    raise ParameterError("mode must be 1 or 2")


def g22_closed(gamma_c: float, t: float, T_W: float) -> float:
    """Chaotic-light auto-correlation of the retrieved mode, 2 e^{gamma_c (t - T_W)}."""
    return 2.0 * math.exp(gamma_c * (t - T_W))


def g_cross(phi: PhiFunctions, traj: Trajectory, t1: float, t2: float) -> float:
    """Normalized cross-correlation g12(t1, t2) = G(12) / (n1 n2).

    Returns math.inf when the write created no excitation (the
    conditioned statistics diverge as 1/N_sp).
    """
    if not (t1 <= phi.tl.T_W <= phi.tl.T2 <= t2):
        raise ParameterError("g12 requires t1 in the write window and t2 >= T2")
    n1 = traj.at("n1_in", t1)
    n2 = traj.at("n2_in", t2)
    if n1 <= 0.0:
        raise UndefinedCorrelation(f"g12 undefined: n1_in(t1={t1:g}) = 0")
    if n2 <= 0.0:
        return math.inf
    twok = 2.0 * phi.sched.k
    a = phi.sched.alpha * phi.sched.f_W.value(t1)
    b = phi.sched.beta * phi.sched.f_R.value(t2)
    return (a / twok) * (b / twok) * phi.phi12(t1, t2) / (n1 * n2)


def g12_closed(nsp_t1: float) -> float:
    """Thermal-anchor cross-correlation 2 + 1/N_sp; infinite at N_sp = 0."""
    if nsp_t1 < 0:
        raise ParameterError("N_sp must be nonnegative")
    return math.inf if nsp_t1 == 0.0 else 2.0 + 1.0 / nsp_t1


def cauchy_schwarz_ratio(n1_out: float, gamma_c: float = 0.0, tau_d: float = 0.0) -> float:
    """R = ((1 + 2 n1)/(2 n1))^2 e^{-gamma_c tau_d}; R > 1 flags nonclassicality.

    n1_out is the Stokes photon count at the end of the write pulse.
    Infinite (with the divergence understood as the vacuum limit) when
    n1_out = 0.
    """
    if n1_out < 0:
        raise ParameterError("n1_out must be nonnegative")
    if n1_out == 0.0:
        return math.inf
    return ((1.0 + 2.0 * n1_out) / (2.0 * n1_out)) ** 2 * math.exp(-gamma_c * tau_d)


def cauchy_schwarz_from_gs(g11: float, g22: float, g12: float) -> float:
    """Definition R = |g12|^2 / (g11 g22)."""
    return abs(g12) ** 2 / (g11 * g22)


def g3_conditional(
    traj: Trajectory, tl: Timeline, sched: RateSchedule, warn_threshold: float = 0.1
) -> float:
    """Conditional third-order correlation of the retrieved pulse.

    Closed form 4 n1 (1 + 3 n1 / 2) e^{gamma_c tau_d} with n1 the Stokes
    count at the end of the write; valid for weak excitation (a warning
    is emitted above ``warn_threshold``).  Small values certify heralded
    single-photon character; the weak-drive limit is g3 -> 4 n1.
    """
    n1 = traj.n1_out_write_end
    if n1 > warn_threshold:
        warnings.warn(
            f"g3 closed form assumes weak excitation; n1_out(T_W) = {n1:.3g}",
            stacklevel=2,
        )
    return 4.0 * n1 * (1.0 + 1.5 * n1) * math.exp(sched.gamma_c * tl.tau_d)


def g3_from_phi(phi: PhiFunctions, t1: float | None = None, t2: float | None = None) -> float:
    """General-envelope g3 assembled from propagated moments.

    Uses the heralded-pair probability with the weak-excitation
    cross-correlator (anchor <S S+> only), i.e.

        g3 = P(1_1) P(1_1,1_2,1_2) / P(1_1,1_2)^2
           = Phi122(t1,t2) / [ <S S+>(t1) * D(t1,t2)^2 ]

    where D is the regression decay factor.  All drive prefactors
    cancel.  Defaults: t1 at the end of the write, t2 at the start of
    the read.
    """
    t1 = phi.tl.T_W if t1 is None else t1
    t2 = phi.tl.T2 if t2 is None else t2
    d = phi.read_decay(t1, t2)
    return phi.phi122(t1, t2) / ((phi.nsp_at(t1) + 1.0) * d * d)


def drive_for_target_g3(
    g3_target: float, gamma_c: float = 0.0, tau_d: float = 0.0
) -> float:
    """Invert the closed g3 law for the excitation level n1.

    Root-finds 4 p (1 + 3 p / 2) e^{gamma_c tau_d} = g3_target for p.
    """
    if g3_target <= 0:
        raise ParameterError("g3 target must be positive")
    damp = math.exp(gamma_c * tau_d)

    def f(p):
        return 4.0 * p * (1.0 + 1.5 * p) * damp - g3_target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ParameterError("g3 target out of reach")
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=8.9e-16)


@dataclass(frozen=True)
class CorrelationReport:
    """Scalar correlation summary for one scenario.

    ``provenance`` records which computation path filled the values:
    'closed_form' (thermal-anchor formulas driven by trajectory photon
    counts) or 'phi_propagation' (moment hierarchy).  Two-time
    quantities are evaluated at t1 = T_W and t2 = T2, where the
    decoherence factor is exactly e^{-gamma_c tau_d}; g22_end is the
    auto-correlation at the end of the read window.  Infinities carry
    explicit flags.
    """

    provenance: str
    p: float
    nsp_write_end: float
    g11: float | None
    g22_T2: float
    g22_end: float
    g12: float
    R: float
    g3: float
    g12_finite: bool
    R_finite: bool
    phi1_TW: float | None = None
    phi2_TW: float | None = None
    phi12_TW: float | None = None
    phi122_TW: float | None = None
    sched: RateSchedule | None = None
    tl: Timeline | None = None


def closed_report(traj: Trajectory, sched: RateSchedule, tl: Timeline) -> CorrelationReport:
    """Headline closed-form statistics from trajectory photon counts."""
    p = traj.n1_out_write_end
    nsp = traj.nsp_write_end
    g12 = g12_closed(nsp)
    R = cauchy_schwarz_ratio(p, sched.gamma_c, tl.tau_d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g3 = g3_conditional(traj, tl, sched)
    return CorrelationReport(
        provenance="closed_form",
        p=p,
        nsp_write_end=nsp,
        g11=2.0 if p > 0 else None,
        g22_T2=g22_closed(sched.gamma_c, tl.T2, tl.T_W),
        g22_end=g22_closed(sched.gamma_c, tl.t_end, tl.T_W),
        g12=g12,
        R=R,
        g3=g3,
        g12_finite=math.isfinite(g12),
        R_finite=math.isfinite(R),
        sched=sched,
        tl=tl,
    )


def phi_report(
    phi: PhiFunctions, traj: Trajectory, sched: RateSchedule, tl: Timeline
) -> CorrelationReport:
    """Moment-hierarchy statistics (exact within the bosonic model)."""
    t1, t2 = tl.T_W, tl.T2
    n = phi.nsp_at(t1)
    phi1 = phi.phi1_at(t1)
    phi2 = phi.phi2_at(t1)
    p12 = phi.phi12_anchor(t1)
    p122 = phi.phi122_anchor(t1)
    g11 = phi1 / (n + 1.0) ** 2 if n + 1.0 > 0 else None
    n_t2 = phi.nsp_at(t2)
    if n > 0 and n_t2 > 0:
        g22_T2 = phi.phi2_at(t2) / n_t2**2
        g22_end_n = phi.nsp_at(tl.t_end)
        g22_end = (
            phi.phi2_at(tl.t_end) / g22_end_n**2 if g22_end_n > 1e-12 else math.nan
        )
        g12 = p12 / ((n + 1.0) * n)
        R = cauchy_schwarz_from_gs(g11, g22_T2, g12)
        g3 = p122 * math.exp(sched.gamma_c * (t2 - t1)) / (n + 1.0)
    else:
        g22_T2 = g22_end = math.nan
        g12 = math.inf
        R = math.inf
        g3 = 0.0
    return CorrelationReport(
        provenance="phi_propagation",
        p=traj.n1_out_write_end,
        nsp_write_end=n,
        g11=g11,
        g22_T2=g22_T2,
        g22_end=g22_end,
        g12=g12,
        R=R,
        g3=g3,
        g12_finite=math.isfinite(g12),
        R_finite=math.isfinite(R),
        phi1_TW=phi1,
        phi2_TW=phi2,
        phi12_TW=p12,
        phi122_TW=p122,
        sched=sched,
        tl=tl,
    )


def with_fault(report: CorrelationReport, **overrides) -> CorrelationReport:
    """Copy of a report with fields replaced (fault injection in tests)."""
    return replace(report, **overrides)
