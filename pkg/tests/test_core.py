"""Core feedback-response unit and property tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavloop import core
from cavloop.errors import LoopInstabilityError
from cavloop.params import CavityParams, ThermalResponseModel

TWO_PI = 2 * np.pi


def make_cavity(kappa_ex_hz=0.5e9, kappa_s_hz=1.1e9, kappa_a_hz=100e6,
                detuning_hz=0.0):
    return CavityParams(kappa_ex=TWO_PI * kappa_ex_hz, kappa_s=TWO_PI * kappa_s_hz,
                        kappa_a=TWO_PI * kappa_a_hz, detuning=TWO_PI * detuning_hz)


class TestTotalKappa:
    def test_d1_split(self):
        cav = make_cavity(0.5e9, 1.1e9, 100e6)
        assert core.total_kappa(cav) == pytest.approx(TWO_PI * 1.7e9)

    def test_single_channel(self):
        cav = CavityParams(kappa_ex=1.0, kappa_s=0.0, kappa_a=0.0)
        assert core.total_kappa(cav) == 1.0

    def test_kerr_ring_split(self):
        cav = make_cavity(8e6, 1e6, 6e6)
        assert core.total_kappa(cav) == pytest.approx(TWO_PI * 15e6)


class TestSigmaD:
    def test_no_photons_no_feedback(self):
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        assert core.sigma_d(th, 0.0, TWO_PI * 1e6) == 0.0

    @given(gain=st.floats(-1e8, 1e8), gamma=st.floats(1e2, 1e10),
           omega=st.floats(-1e11, 1e11), n_c=st.floats(0, 1e8))
    @settings(max_examples=80, deadline=None)
    def test_antisymmetry(self, gain, gamma, omega, n_c):
        th = ThermalResponseModel.one_pole(gain, gamma)
        sd_pos = core.sigma_d(th, n_c, omega)
        sd_neg = core.sigma_d(th, n_c, -omega)
        assert np.conj(sd_neg) == pytest.approx(-sd_pos, abs=1e-30)

    def test_multi_pole_antisymmetry(self):
        th = ThermalResponseModel(poles=((TWO_PI * 2e6, TWO_PI * 0.3e6),
                                         (-TWO_PI * 5e5, TWO_PI * 4e7)))
        omega = np.linspace(-1e10, 1e10, 101)
        sd = core.sigma_d(th, 37.0, omega)
        np.testing.assert_allclose(np.conj(sd[::-1]), -sd, atol=1e-18)

    def test_high_frequency_asymptote_real(self):
        gain, gamma = TWO_PI * 2e6, TWO_PI * 1e4
        th = ThermalResponseModel.one_pole(gain, gamma)
        omega = TWO_PI * 5e9
        sd = core.sigma_d(th, 100.0, omega)
        asymptote = 100.0 * gain / omega
        assert sd.real == pytest.approx(asymptote, rel=(gamma / omega) ** 2 * 2)
        assert abs(sd.imag / sd.real) == pytest.approx(gamma / omega, rel=1e-6)


class TestChiC0:
    def test_resonance(self):
        cav = make_cavity()
        dbar = -TWO_PI * 5.3e9
        val = core.chi_c0(cav, dbar, -dbar)
        assert val == pytest.approx(2.0 / cav.kappa)

    def test_rolloff(self):
        cav = make_cavity()
        assert abs(core.chi_c0(cav, 0.0, 1e16)) < 1e-15
        assert abs(core.chi_c0(cav, 0.0, -1e16)) < 1e-15

    def test_d2_resonant_sideband(self):
        cav = make_cavity(73e6, 145.5e6, 1.5e6)
        omega_m = TWO_PI * 5.14e9
        val = core.chi_c0(cav, -omega_m, omega_m)
        assert val == pytest.approx(2.0 / (TWO_PI * 220e6))


class TestChiFb:
    def test_zero_photons(self):
        cav = make_cavity()
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        assert core.chi_fb(cav, th, 0.0, TWO_PI * 1e6) == 0.0

    def test_no_absorption_channel(self):
        cav = make_cavity(kappa_a_hz=0.0)
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        assert core.chi_fb(cav, th, 1e4, TWO_PI * 1e6) == 0.0

    def test_matches_determinant_loop_extraction(self, fig4):
        # Closed-loop over open-loop determinant ratio of the raw system
        # equals 1 - chi_fb without ever forming the chi_fb expression.
        from cavloop import oracle
        cav = fig4.cavity()
        omega = TWO_PI * np.array([1e6])
        ratio = oracle.loop_factor(cav, fig4.thermal, fig4.n_c, omega)
        cf = core.chi_fb(cav, fig4.thermal, fig4.n_c, omega[0])
        assert cf != 0.0
        assert ratio[0] == pytest.approx(1.0 - cf, rel=1e-12)


class TestChiCEff:
    def test_reduces_to_bare(self):
        cav = make_cavity()
        th = ThermalResponseModel.none()
        omega = TWO_PI * 1e9
        assert core.chi_c_eff(cav, th, 0.0, omega) == pytest.approx(
            core.chi_c0(cav, core.delta_bar(cav, th, 0.0), omega))

    @given(n_scale=st.floats(0.001, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_pointwise_limit_small_n(self, n_scale):
        cav = make_cavity(detuning_hz=-5.3e9)
        th = ThermalResponseModel.one_pole(TWO_PI * 10.0, TWO_PI * 1e6)
        omega = TWO_PI * 5.3e9
        n_c = 1e-6 * n_scale
        full = core.chi_c_eff(cav, th, n_c, omega)
        bare = core.chi_c0(cav, core.delta_bar(cav, th, n_c), omega)
        assert abs(full - bare) / abs(bare) < 1e-8
        assert np.isfinite(full)

    def test_lorentzian_matches_far_detuned(self):
        # |delta_bar| >= 10 kappa and |sigma_d| <= 0.05: Lorentzian within
        # 1% in |chi|^2 over [0.9, 1.1]|delta_bar|.
        rng = np.random.default_rng(12)
        for _ in range(20):
            kappa_hz = rng.uniform(50e6, 2e9)
            splits = rng.dirichlet([1, 1, 1]) * kappa_hz
            cav = make_cavity(*splits, detuning_hz=0.0)
            dbar = -rng.uniform(10, 30) * cav.kappa
            gamma = TWO_PI * rng.uniform(1e4, 1e6)
            omega_band = np.linspace(0.9, 1.1, 41) * abs(dbar)
            sigma_target = rng.uniform(0.001, 0.05)
            n_c = 1.0
            gain = sigma_target * abs(dbar)  # sigma_d ~ gain/Omega at band center
            th = ThermalResponseModel.one_pole(gain, gamma)
            full = core.chi_c_eff(cav, th, n_c, omega_band, dbar)
            kappa_eff, dbar_eff = core.effective_params(cav, th, n_c, abs(dbar), dbar)
            lor = core.chi_c_eff_lorentzian(kappa_eff, dbar_eff, omega_band)
            err = np.abs(np.abs(full) ** 2 - np.abs(lor) ** 2) / np.abs(full) ** 2
            assert err.max() < 0.01

    def test_fwhm_matches_kappa_eff_on_d1(self, d1):
        n_c = 1190.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        kappa_eff, dbar_eff = core.effective_params(cav, d1.thermal, n_c,
                                                    d1.mech.omega_m)
        grid = np.linspace(-dbar_eff - 2.5 * kappa_eff, -dbar_eff + 2.5 * kappa_eff,
                           200001)
        y = np.abs(core.chi_c_eff(cav, d1.thermal, n_c, grid)) ** 2
        above = grid[y >= y.max() / 2.0]
        fwhm = above[-1] - above[0]
        assert fwhm == pytest.approx(kappa_eff, rel=0.01)

    def test_instability_flagged(self):
        # At Omega = 0 with detuning > 0, chi_fb is real and positive and
        # scales with n_c, so the loop denominator can be driven through
        # zero exactly (DC thermal runaway).
        cav = make_cavity()
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        dbar = cav.kappa / 2.0
        cf1 = core.chi_fb(cav, th, 1.0, 0.0, dbar)
        assert cf1.imag == pytest.approx(0.0, abs=1e-18) and cf1.real > 0
        n_unstable = 1.0 / cf1.real
        with pytest.raises(LoopInstabilityError):
            core.chi_c_eff(cav, th, n_unstable, 0.0, dbar)
        with pytest.raises(LoopInstabilityError):
            core.inloop_flux_psd(cav, th, n_unstable, 0.0, dbar)


class TestEffectiveParams:
    def test_no_photons(self):
        cav = make_cavity(detuning_hz=-1e9)
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        kappa_eff, dbar_eff = core.effective_params(cav, th, 0.0, TWO_PI * 1e9)
        assert kappa_eff == cav.kappa
        assert dbar_eff == cav.detuning

    def test_d1_narrowing(self, d1):
        n_c = 1190.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        kappa_eff, _ = core.effective_params(cav, d1.thermal, n_c, d1.mech.omega_m)
        reduction = 1.0 - kappa_eff / cav.kappa
        assert 0.05 < reduction < 0.10
        assert kappa_eff / TWO_PI == pytest.approx(1.595e9, rel=2e-3)

    def test_d2_broadening(self, d2):
        n_c = 1110.0
        cav = d2.cavity_at_optimal_cooling(n_c)
        kappa_eff, _ = core.effective_params(cav, d2.thermal, n_c, d2.mech.omega_m)
        assert kappa_eff / TWO_PI == pytest.approx(297.7e6, rel=2e-3)
        assert 1.3 < kappa_eff / cav.kappa < 1.5

    def test_nonpositive_linewidth_flagged(self):
        cav = make_cavity(kappa_a_hz=1.5e9, kappa_ex_hz=0.1e9, kappa_s_hz=0.1e9)
        th = ThermalResponseModel.one_pole(TWO_PI * 1e9, TWO_PI * 1e3)
        with pytest.raises(LoopInstabilityError):
            core.effective_params(cav, th, 100.0, TWO_PI * 1e9)


class TestInloopPsd:
    def test_shot_noise_without_photons(self):
        cav = make_cavity()
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        assert core.inloop_flux_psd(cav, th, 0.0, TWO_PI * 1e6) == 1.0

    def test_antisquashing_in_cooling_configuration(self, d1):
        # Positive thermal gain at the mechanical frequency: in-loop
        # fluctuations enhanced above shot noise.
        n_c = 1190.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        val = core.inloop_flux_psd(cav, d1.thermal, n_c, d1.mech.omega_m)
        assert val > 1.0

    def test_far_detuned_approximation(self):
        cav = make_cavity(detuning_hz=0.0)
        th = ThermalResponseModel.one_pole(TWO_PI * 2.332e6, TWO_PI * 1e6)
        n_c = 1190.0
        dbar = -10.0 * cav.kappa
        omega = abs(dbar)
        full = core.inloop_flux_psd(cav, th, n_c, omega, delta_bar_value=dbar)
        approx = core.inloop_flux_psd_far_detuned(cav, th, n_c, omega)
        assert abs(full - approx) / full < 0.05


class TestReservoirCorrelators:
    def test_vacuum_set(self):
        c = core.reservoir_correlators(0.0, 0.0)
        assert (c.nn, c.n_nbar, c.aa, c.adad) == (0.0, 1.0, 0.0, 0.0)

    @given(re1=st.floats(-5, 5), im1=st.floats(-5, 5),
           re2=st.floats(-5, 5), im2=st.floats(-5, 5))
    @settings(max_examples=100, deadline=None)
    def test_sum_rule(self, re1, im1, re2, im2):
        c = core.reservoir_correlators(complex(re1, im1), complex(re2, im2))
        assert c.sum() == pytest.approx(1.0, abs=1e-9)

    def test_real_symmetric_case(self):
        sd = 0.37
        c = core.reservoir_correlators(sd, -sd)
        assert c.nn == pytest.approx(sd**2)
        assert c.n_nbar == pytest.approx((1.0 - sd) ** 2)


class TestSteadyState:
    def make(self):
        th = ThermalResponseModel.one_pole(gain=-TWO_PI * 2e6, gamma=TWO_PI * 1e6)
        cav = make_cavity(detuning_hz=-3e9)
        return cav, th

    def test_zero_drive(self):
        cav, th = self.make()
        roots = core.steady_state(cav, th, 0.0)
        assert len(roots) == 1 and roots[0].n_c == 0.0

    def test_linear_cavity(self):
        cav = make_cavity(detuning_hz=-1e9)
        th = ThermalResponseModel.none()
        flux = 1e12
        roots = core.steady_state(cav, th, flux)
        expected = cav.kappa_ex * flux / (cav.kappa**2 / 4 + cav.detuning**2)
        assert len(roots) == 1
        assert roots[0].n_c == pytest.approx(expected, rel=1e-12)

    def test_bistable_labels_and_brute_force_scan(self):
        cav, th = self.make()
        flux = 2.16455e11  # mid fold window for these parameters
        roots = core.steady_state(cav, th, flux)
        assert [m.branch for m in roots] == ["lower", "unstable", "upper"]
        assert roots[0].n_c < roots[1].n_c < roots[2].n_c

        # Brute-force: the residual on a dense grid changes sign exactly at
        # the reported roots, and its local slope matches the labels.
        shift = th.dc_sum * cav.kappa_a
        grid = np.linspace(1e-3, 30.0, 300001)
        resid = grid * (cav.kappa**2 / 4 + (cav.detuning - shift * grid) ** 2) \
            - cav.kappa_ex * flux
        crossings = grid[:-1][np.diff(np.sign(resid)) != 0]
        assert len(crossings) == 3
        for m, g in zip(roots, crossings):
            assert m.n_c == pytest.approx(g, abs=grid[1] - grid[0])
        for m in roots:
            eps = m.n_c * 1e-6
            slope = (np.interp(m.n_c + eps, grid, resid)
                     - np.interp(m.n_c - eps, grid, resid))
            assert (slope > 0) == (m.branch != "unstable")

    @given(flux=st.floats(1e8, 1e15), det_hz=st.floats(-6e9, 2e9),
           gain_hz=st.floats(-5e6, 5e6))
    @settings(max_examples=60, deadline=None)
    def test_residual_and_root_count_property(self, flux, det_hz, gain_hz):
        from hypothesis import assume
        cav = make_cavity(detuning_hz=det_hz)
        th = ThermalResponseModel.one_pole(TWO_PI * gain_hz, TWO_PI * 1e6)
        # Exclude the measure-zero fold set where a double root sits.
        shift = th.dc_sum * cav.kappa_a
        hyp2 = cav.kappa**2 / 4 + cav.detuning**2
        n_scale = cav.kappa_ex * flux / hyp2
        a = (shift * n_scale) ** 2 / hyp2
        b = -2 * cav.detuning * shift * n_scale / hyp2
        disc = -18 * a * b + 4 * b**3 + b**2 - 4 * a - 27 * a**2
        scale = max(abs(18 * a * b), abs(4 * b**3), b**2, abs(4 * a), 27 * a**2, 1e-300)
        assume(abs(disc) / scale > 1e-4)
        roots = core.steady_state(cav, th, flux)
        assert len(roots) in (1, 3)
        shift = th.dc_sum * cav.kappa_a
        for m in roots:
            resid = m.n_c * (cav.kappa**2 / 4
                             + (cav.detuning - shift * m.n_c) ** 2) \
                - cav.kappa_ex * flux
            assert abs(resid) <= 1e-12 * cav.kappa_ex * flux

    def test_kerr_shift_included(self):
        cav = make_cavity(detuning_hz=-1e9)
        th = ThermalResponseModel.none()
        g_kerr = -TWO_PI * 100.0
        flux = 1e10
        roots = core.steady_state(cav, th, flux, kerr_shift_per_photon=g_kerr)
        m = roots[0]
        assert m.delta_bar == pytest.approx(cav.detuning - g_kerr * m.n_c)


class TestTextbookLimit:
    def test_zero_gains_reduce_everything(self):
        cav = make_cavity(detuning_hz=-5.3e9)
        th = ThermalResponseModel.none()
        n_c = 1234.0
        omega = TWO_PI * np.linspace(1e9, 9e9, 301)
        kappa_eff, dbar_eff = core.effective_params(cav, th, n_c, TWO_PI * 5.3e9)
        assert kappa_eff == cav.kappa
        assert dbar_eff == core.delta_bar(cav, th, n_c)
        np.testing.assert_allclose(core.inloop_flux_psd(cav, th, n_c, omega), 1.0)
        np.testing.assert_array_equal(
            core.chi_c_eff(cav, th, n_c, omega),
            core.chi_c0(cav, core.delta_bar(cav, th, n_c), omega))
