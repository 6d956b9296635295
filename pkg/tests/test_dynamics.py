import math

import numpy as np
import pytest

from dlczsim import (
    IntegrationError,
    IntegratorConfig,
    ParameterError,
    PulseEnvelope,
    RateSchedule,
    Timeline,
    closed_forms_rectangular,
    evolve_meanfield,
    evolve_with_cavity,
    nsp_quadrature,
    stokes_spin_correspondence,
)

from conftest import ALPHA_N3, PER_US, STD_TL, US, rect_sched


def max_rel(a, b):
    mask = np.abs(b) > 0
    if not np.any(mask):
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a[mask] - b[mask]) / np.abs(b[mask])))


class TestEvolveMeanfield:
    def test_zero_drive_stays_zero(self, std_tl, tight_cfg):
        traj = evolve_meanfield(rect_sched(alpha=0.0, beta=0.0), std_tl, tight_cfg)
        for name in ("nsp", "s2", "n1_in", "n2_in", "n1_out", "n2_out"):
            assert np.all(getattr(traj, name) == 0.0)

    def test_write_drive_ln4_emits_three_stokes_photons(self, std_tl, tight_cfg):
        # alpha T_W = ln 4 -> n1_out(T_W) = e^{alpha T_W} - 1 = 3
        traj = evolve_meanfield(rect_sched(), std_tl, tight_cfg)
        assert traj.n1_out_write_end == pytest.approx(3.0, rel=1e-9)

    def test_half_inverse_microsecond_drive(self, tight_cfg):
        # alpha = 0.5/us over 1.6 us: n1_out = e^{0.8} - 1, checked against
        # an independent evaluation of the exponential growth law
        tl = STD_TL
        traj = evolve_meanfield(rect_sched(alpha=0.5 * PER_US), tl, tight_cfg)
        assert traj.n1_out_write_end == pytest.approx(math.expm1(0.8), rel=1e-9)

    def test_outputs_nondecreasing_and_flux_identity(self, std_tl, tight_cfg):
        sched = rect_sched(gamma_c=0.03 * PER_US)
        traj = evolve_meanfield(sched, std_tl, tight_cfg)
        assert np.all(np.diff(traj.n1_out) >= -1e-12)
        assert np.all(np.diff(traj.n2_out) >= -1e-12)
        # dn_out/dt = 2 k n_in holds exactly by the adiabatic construction
        np.testing.assert_allclose(traj.flux1, 2.0 * sched.k * traj.n1_in, rtol=1e-12)
        np.testing.assert_allclose(traj.flux2, 2.0 * sched.k * traj.n2_in, rtol=1e-12)

    def test_finite_difference_of_counts_matches_flux(self, std_tl):
        cfg = IntegratorConfig(rate_step_product=1e-3, stride=1)
        traj = evolve_meanfield(rect_sched(), std_tl, cfg)
        # central differences inside the write window, away from the edges
        mask = (traj.t > 0.05 * std_tl.T_W) & (traj.t < 0.95 * std_tl.T_W)
        d = np.gradient(traj.n1_out, traj.t)
        assert max_rel(d[mask], traj.flux1[mask]) < 1e-5

    def test_flux_area_equals_count_increment(self, std_tl):
        cfg = IntegratorConfig(rate_step_product=5e-4, stride=1)
        traj = evolve_meanfield(rect_sched(gamma_c=0.03 * PER_US), std_tl, cfg)
        w = traj.t <= std_tl.T_W
        area1 = np.trapezoid(traj.flux1[w], traj.t[w])
        assert area1 == pytest.approx(traj.n1_out_write_end, rel=1e-6)
        r = traj.t >= std_tl.T2
        area2 = np.trapezoid(traj.flux2[r], traj.t[r])
        assert area2 == pytest.approx(float(traj.n2_out[-1]), rel=1e-6)

    def test_memory_decay_between_pulses(self, std_tl, tight_cfg):
        gc = 0.3 * PER_US
        traj = evolve_meanfield(rect_sched(gamma_c=gc), std_tl, tight_cfg)
        ratio = traj.at("nsp", std_tl.T2) / traj.nsp_write_end
        assert ratio == pytest.approx(math.exp(-gc * std_tl.tau_d), rel=1e-9)

    def test_intracavity_much_smaller_than_output(self, std_tl, tight_cfg):
        sched = rect_sched()
        traj = evolve_meanfield(sched, std_tl, tight_cfg)
        i = np.searchsorted(traj.t, std_tl.T_W)
        assert traj.n1_in[i] / traj.n1_out[i] < 2.0 * sched.alpha / sched.k

    def test_incoherent_source_flag_adds_gamma1_feed(self, std_tl, tight_cfg):
        sched = rect_sched(alpha=0.0, beta=0.0, Gamma1=0.01 * PER_US)
        off = evolve_meanfield(sched, std_tl, tight_cfg)
        on = evolve_meanfield(
            sched, std_tl,
            IntegratorConfig(rate_step_product=1e-3, include_incoherent_source=True),
        )
        assert np.all(off.nsp == 0.0)
        assert on.nsp_write_end > 0.0

    def test_s2_population_includes_pumping_reservoir(self, std_tl, tight_cfg):
        # with only Gamma1 acting, d<S2>/dt = Gamma1 * N during the write
        G1 = 1.0e-8 * PER_US
        natoms = 1.0e10
        sched = rect_sched(alpha=0.0, beta=0.0, Gamma1=G1, n_atoms=natoms)
        traj = evolve_meanfield(sched, std_tl, tight_cfg)
        expected = G1 * natoms * std_tl.T_W
        assert traj.at("s2", std_tl.T_W) == pytest.approx(expected, rel=1e-9)

    def test_window_mismatch_rejected(self, std_tl):
        other = Timeline(0.8 * US, 1.4 * US, 1.0 * US)
        with pytest.raises(ParameterError):
            evolve_meanfield(rect_sched(), other)

    def test_abutting_pulses_without_delay(self, tight_cfg):
        # tau_d = 0 is allowed: the windows share one instant but the
        # segment-gated integration never mixes the two drives
        tl = Timeline(1.6 * US, 0.0, 1.0 * US)
        sched = rect_sched(tl=tl, beta=20.0 * PER_US, gamma_c=0.0)
        traj = evolve_meanfield(sched, tl, tight_cfg)
        assert traj.n1_out_write_end == pytest.approx(3.0, rel=1e-9)
        assert float(traj.n2_out[-1]) == pytest.approx(
            3.0 * (1.0 - math.exp(-20.0)), rel=1e-9
        )

    def test_validation_aborts_on_poisoned_series(self, std_tl, tight_cfg):
        traj = evolve_meanfield(rect_sched(), std_tl, tight_cfg)
        traj.nsp[3] = math.nan
        with pytest.raises(IntegrationError, match="non-finite"):
            traj.validate()
        traj.nsp[3] = -1.0
        with pytest.raises(IntegrationError, match="negative"):
            traj.validate()


class TestClosedForms:
    def test_matches_ode_with_decoherence_on(self, std_tl):
        cfg = IntegratorConfig(rate_step_product=1e-3, stride=4)
        sched = rect_sched(alpha=0.86643 * PER_US, beta=8.6643 * PER_US,
                           gamma_c=0.03 * PER_US)
        traj = evolve_meanfield(sched, std_tl, cfg)
        cf = closed_forms_rectangular(sched, std_tl, traj.t)
        for name in ("nsp", "n1_in", "n1_out", "n2_in", "n2_out"):
            assert max_rel(getattr(traj, name), getattr(cf, name)) < 1e-9

    def test_matches_ode_with_pumping_rates_on(self, std_tl):
        cfg = IntegratorConfig(rate_step_product=1e-3)
        sched = rect_sched(gamma_c=0.03 * PER_US, Gamma1=0.01 * PER_US,
                           Gamma2=0.05 * PER_US)
        traj = evolve_meanfield(sched, std_tl, cfg)
        cf = closed_forms_rectangular(sched, std_tl, traj.t)
        assert max_rel(traj.nsp, cf.nsp) < 1e-9

    def test_retrieval_not_started_at_read_onset(self, std_tl):
        cf = closed_forms_rectangular(rect_sched(), std_tl, [std_tl.T2])
        assert cf.n2_out[0] == 0.0

    def test_complete_retrieval_for_strong_read(self, std_tl):
        # beta T_R = 20, no decoherence: everything stored is retrieved
        sched = rect_sched(beta=20.0 * PER_US, gamma_c=0.0)
        cf = closed_forms_rectangular(sched, std_tl, [std_tl.T_W, std_tl.t_end])
        ratio = cf.n2_out[1] / cf.n1_out[0]
        assert ratio == pytest.approx(1.0 - math.exp(-20.0), rel=1e-12)

    def test_memory_factor_between_pulses(self, std_tl, tight_cfg):
        # gamma_c = 0.3/us, tau_d = 1.4 us -> e^{-0.42} ~ 0.6570
        gc = 0.3 * PER_US
        sched = rect_sched(gamma_c=gc)
        cf = closed_forms_rectangular(sched, std_tl, [std_tl.T_W, std_tl.T2])
        factor = cf.nsp[1] / cf.nsp[0]
        assert factor == pytest.approx(math.exp(-0.42), rel=1e-12)
        traj = evolve_meanfield(sched, std_tl, tight_cfg)
        assert traj.at("nsp", std_tl.T2) / traj.nsp_write_end == pytest.approx(
            factor, rel=1e-9
        )

    def test_global_decay_variant_reduces_to_exact_without_relaxations(self, std_tl):
        t = np.linspace(0.0, std_tl.t_end, 301)
        sched = rect_sched(gamma_c=0.0)
        exact = closed_forms_rectangular(sched, std_tl, t)
        approx = closed_forms_rectangular(sched, std_tl, t, global_decay_approximation=True)
        for name in ("nsp", "n1_in", "n1_out", "n2_in", "n2_out"):
            np.testing.assert_allclose(
                getattr(approx, name), getattr(exact, name), rtol=1e-12, atol=1e-300
            )

    def test_global_decay_variant_shifts_clock_to_zero(self, std_tl):
        # the shortcut multiplies retrieved numbers by e^{-gamma_c t} with the
        # clock at t = 0; relative to the exact solution that is an extra
        # e^{-gamma_c T_W} plus O(gamma_c/beta) retrieval corrections
        gc = 0.03 * PER_US
        sched = rect_sched(gamma_c=gc, beta=20.0 * PER_US)
        t_end = np.asarray([std_tl.t_end])
        exact = closed_forms_rectangular(sched, std_tl, t_end)
        approx = closed_forms_rectangular(sched, std_tl, t_end, global_decay_approximation=True)
        ratio = approx.n2_out[0] / exact.n2_out[0]
        assert ratio == pytest.approx(math.exp(-gc * std_tl.T_W), rel=0.15)

    def test_rejects_non_rectangular_envelopes(self, std_tl):
        f_W = PulseEnvelope.trapezoid(0.0, std_tl.T_W, rise_time=0.05 * std_tl.T_W)
        f_R = PulseEnvelope.rectangular(std_tl.T2, std_tl.t_end)
        sched = RateSchedule(alpha=ALPHA_N3, beta=20.0 * PER_US, f_W=f_W, f_R=f_R)
        with pytest.raises(ParameterError, match="rectangular"):
            closed_forms_rectangular(sched, std_tl, [0.0])


class TestQuadrature:
    def test_no_source_gives_zero(self, std_tl):
        assert nsp_quadrature(rect_sched(alpha=0.0), std_tl, std_tl.T_W) == 0.0

    def test_rectangular_write_matches_growth_law(self, std_tl):
        # relaxation-free: N_sp(T_W) = e^{alpha T_W} - 1
        val = nsp_quadrature(rect_sched(gamma_c=0.0), std_tl, std_tl.T_W)
        assert val == pytest.approx(3.0, rel=1e-10)

    def test_trapezoid_envelope_cross_checks_rk4(self, std_tl):
        rise = 0.05 * std_tl.T_W
        f_W = PulseEnvelope.trapezoid(0.0, std_tl.T_W, rise_time=rise)
        f_R = PulseEnvelope.rectangular(std_tl.T2, std_tl.t_end)
        sched = RateSchedule(
            alpha=1.0 * PER_US, beta=8.0 * PER_US, f_W=f_W, f_R=f_R,
            gamma_c=0.03 * PER_US, k=3e9,
        )
        cfg = IntegratorConfig(rate_step_product=1e-3)
        traj = evolve_meanfield(sched, std_tl, cfg)
        for t in (0.5 * std_tl.T_W, std_tl.T_W, std_tl.T2, std_tl.T2 + 0.3 * US):
            q = nsp_quadrature(sched, std_tl, t)
            assert q == pytest.approx(traj.at("nsp", t), rel=1e-6)

    def test_tabulated_envelope_cross_checks_rk4(self, std_tl):
        times = np.linspace(0.0, std_tl.T_W, 9)
        values = [0.0, 0.4, 1.0, 0.8, 0.9, 1.0, 0.7, 0.3, 0.0]
        f_W = PulseEnvelope.tabulated(times, values)
        f_R = PulseEnvelope.rectangular(std_tl.T2, std_tl.t_end)
        sched = RateSchedule(alpha=1.2 * PER_US, beta=8.0 * PER_US,
                             f_W=f_W, f_R=f_R, gamma_c=0.05 * PER_US, k=3e9)
        traj = evolve_meanfield(sched, std_tl, IntegratorConfig(rate_step_product=1e-3))
        q = nsp_quadrature(sched, std_tl, std_tl.T_W)
        assert q == pytest.approx(traj.nsp_write_end, rel=1e-6)


class TestStokesSpinCorrespondence:
    def test_relaxation_free_residual_at_integration_tolerance(self, std_tl, tight_cfg):
        traj = evolve_meanfield(rect_sched(gamma_c=0.0), std_tl, tight_cfg)
        assert stokes_spin_correspondence(traj) <= 1e-9

    def test_zero_drive_residual_zero(self, std_tl, tight_cfg):
        traj = evolve_meanfield(rect_sched(alpha=0.0), std_tl, tight_cfg)
        assert stokes_spin_correspondence(traj) == 0.0

    def test_relaxations_break_correspondence(self, std_tl, tight_cfg):
        # negative control: with Gamma_tot > 0 the gap grows like the
        # integrated Gamma_tot * N_sp, which we recompute independently
        gc = 1.0e-3 * PER_US
        traj = evolve_meanfield(rect_sched(gamma_c=gc), std_tl, tight_cfg)
        w = traj.t <= std_tl.T_W
        expected_gap = np.trapezoid(gc * traj.nsp[w], traj.t[w])
        gap = traj.n1_out_write_end - traj.nsp_write_end
        assert gap > 0
        assert gap == pytest.approx(expected_gap, rel=0.05)


class TestCavityDynamics:
    def test_adiabatic_limit_reached_for_large_k(self):
        tl = Timeline(0.4 * US, 0.1 * US, 0.2 * US)
        gaps = []
        for k in (2.0e8, 4.0e8):
            sched = RateSchedule.rectangular(tl, alpha=2.0 * PER_US, beta=5.0 * PER_US, k=k)
            full = evolve_with_cavity(sched, tl, IntegratorConfig())
            i = np.searchsorted(full.t, tl.T_W)
            adiab = sched.alpha * (full.nsp[i] + 1.0) / (2.0 * k)
            gaps.append(abs(full.n1_in[i] - adiab) / adiab)
            assert gaps[-1] < 2.0 * sched.alpha / k
        # halving the gap when k doubles confirms the 1/k convergence
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.2)
