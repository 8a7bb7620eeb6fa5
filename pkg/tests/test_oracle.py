"""Linear-system verifier: structure checks and closed-form equivalence."""

import numpy as np
import pytest

from cavloop import core, optomech, oracle, squeezing
from cavloop.errors import LoopInstabilityError
from cavloop.params import (
    BathModel,
    CavityParams,
    DetectionSetup,
    MechanicalMode,
    ThermalResponseModel,
)

TWO_PI = 2 * np.pi


def plain_cavity(detuning=0.0):
    return CavityParams(kappa_ex=TWO_PI * 8e6, kappa_s=TWO_PI * 1e6,
                        kappa_a=TWO_PI * 6e6, detuning=detuning)


class TestAssembly:
    def test_diagonal_without_couplings(self):
        cav = plain_cavity(detuning=-TWO_PI * 1e6)
        model = oracle.OracleModel(cav, ThermalResponseModel.none(), 0.0)
        omega = TWO_PI * 3e6
        sys = oracle.assemble(model, omega)
        m = sys.system_matrix[0]
        off_diag = m - np.diag(np.diag(m))
        assert np.max(np.abs(off_diag)) == 0.0
        dbar = model.resolved_delta_bar()
        assert m[0, 0] == pytest.approx(1.0 / core.chi_c0(cav, dbar, omega))
        assert m[1, 1] == pytest.approx(
            np.conj(1.0 / core.chi_c0(cav, dbar, -omega)))

    def test_conjugate_rows_random_draws(self, d1):
        rng = np.random.default_rng(3)
        for _ in range(12):
            n_c = rng.uniform(1, 2000)
            cav = d1.cavity(detuning=-TWO_PI * rng.uniform(1e9, 8e9))
            model = oracle.OracleModel(cav, d1.thermal, n_c, mech=d1.mech,
                                       g_kerr=-TWO_PI * rng.uniform(0, 1))
            omega = TWO_PI * rng.uniform(-8e9, 8e9)
            assert oracle.conjugate_row_defect(model, omega) < 1e-9

    def test_determinant_zeros_match_chi_eff_poles(self):
        # DC thermal runaway: |1 - chi_fb| -> 0 where the cavity-block
        # determinant crosses zero.
        cav = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                           kappa_a=TWO_PI * 100e6, detuning=0.0)
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        dbar = cav.kappa / 2.0
        cf1 = core.chi_fb(cav, th, 1.0, 0.0, dbar).real
        n_star = 1.0 / cf1
        grid = np.linspace(0.5 * n_star, 1.5 * n_star, 4001)
        dets = np.array([
            abs(oracle.loop_factor(cav, th, n, np.array([0.0]), delta_bar=dbar)[0])
            for n in grid])
        n_det_min = grid[np.argmin(dets)]
        assert n_det_min == pytest.approx(n_star, rel=1e-3)

    def test_singularity_raises_with_condition_report(self):
        cav = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                           kappa_a=TWO_PI * 100e6, detuning=0.0)
        th = ThermalResponseModel.one_pole(TWO_PI * 1e6, TWO_PI * 1e6)
        dbar = cav.kappa / 2.0
        n_star = 1.0 / core.chi_fb(cav, th, 1.0, 0.0, dbar).real
        model = oracle.OracleModel(cav, th, n_star, delta_bar=dbar)
        with pytest.raises(LoopInstabilityError, match="condition number"):
            oracle.solve_transfer(model, np.array([0.0]))


class TestVacuumBaselines:
    def test_homodyne_vacuum_everywhere(self):
        model = oracle.OracleModel(plain_cavity(), ThermalResponseModel.none(), 0.0)
        omega = TWO_PI * np.geomspace(1e3, 1e10, 40)
        for theta in (0.0, 0.7, 2.0):
            np.testing.assert_allclose(
                oracle.psd(model, oracle.Homodyne(theta), omega), 1.0, atol=1e-12)

    def test_heterodyne_vacuum(self):
        mech = MechanicalMode(omega_m=TWO_PI * 5e9, gamma_m=TWO_PI * 1e5,
                              g0=0.0, bath=BathModel(0.0))
        model = oracle.OracleModel(plain_cavity(detuning=-TWO_PI * 5e9),
                                   ThermalResponseModel.none(), 0.0, mech=mech)
        omega = TWO_PI * np.linspace(1e6, 1e8, 30)
        np.testing.assert_allclose(
            oracle.psd(model, oracle.Heterodyne(TWO_PI * 4e7), omega), 1.0,
            atol=1e-12)

    def test_inloop_vacuum_is_shot(self):
        model = oracle.OracleModel(plain_cavity(detuning=-TWO_PI * 2e7),
                                   ThermalResponseModel.none(), 0.0)
        omega = TWO_PI * np.geomspace(1e3, 1e9, 30)
        np.testing.assert_allclose(
            oracle.psd(model, oracle.InLoopFlux(), omega), 1.0, atol=1e-12)


class TestClosedFormEquivalence:
    def test_homodyne_matches_closed_form(self, fig4):
        cav = fig4.cavity()
        omega = TWO_PI * np.geomspace(1e4, 1e9, 501)
        model = oracle.OracleModel(cav, fig4.thermal, fig4.n_c,
                                   g_kerr=fig4.kerr.g_kerr)
        for theta in (0.1, 0.7, 1.3):
            closed = squeezing.homodyne_psd(cav, fig4.thermal, fig4.kerr,
                                            fig4.detection, fig4.n_c, theta,
                                            omega).total
            brute = oracle.psd(model, oracle.Homodyne(theta), omega,
                               eta_ex=fig4.detection.eta_ex)
            assert np.max(np.abs(closed - brute) / np.abs(brute)) < 1e-6

    def test_inloop_matches_closed_form(self, d1):
        n_c = 1190.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        omega = TWO_PI * np.linspace(1e6, 8e9, 301)
        closed = core.inloop_flux_psd(cav, d1.thermal, n_c, omega)
        model = oracle.OracleModel(cav, d1.thermal, n_c)
        brute = oracle.psd(model, oracle.InLoopFlux(), omega)
        assert np.max(np.abs(closed - brute) / np.abs(brute)) < 1e-12

    def test_heterodyne_converges_in_weak_coupling(self, d1):
        # The detected-sideband closed form is a weak-coupling result; the
        # exact solve must approach it as Gamma_eff/kappa_eff -> 0.
        det = DetectionSetup(eta_ex=0.15, delta_lo=TWO_PI * 40e6)
        errors = []
        for scale in (1.0, 0.1, 0.03):
            kappa_a = TWO_PI * 100e6
            th = ThermalResponseModel.from_kappa_a_sigma0(
                TWO_PI * 44e3 * scale, TWO_PI * 5.3e9, TWO_PI * 1e6, kappa_a)
            mech = MechanicalMode(omega_m=TWO_PI * 5.3e9, gamma_m=TWO_PI * 81e3,
                                  g0=TWO_PI * 829e3 * scale, bath=BathModel(31.0))
            cav0 = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                                kappa_a=kappa_a)
            detu = optomech.detuning_for_optimal_cooling(cav0, th, mech, 1190.0)
            cav = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                               kappa_a=kappa_a, detuning=detu)
            kappa_eff, _ = core.effective_params(cav, th, 1190.0, mech.omega_m)
            gamma_eff = mech.gamma_m + 4 * 1190.0 * mech.g0**2 / kappa_eff
            grid = np.linspace(det.delta_lo - 6 * gamma_eff,
                               det.delta_lo + 6 * gamma_eff, 801)
            closed = optomech.heterodyne_psd(cav, th, mech, det, 1190.0,
                                             grid).channel("psd")
            model = oracle.OracleModel(cav, th, 1190.0, mech=mech)
            brute = oracle.psd(model, oracle.Heterodyne(det.delta_lo), grid,
                               eta_ex=det.eta_ex)
            errors.append(np.max(np.abs(closed - brute) / np.abs(brute)))
        assert errors[0] < 1e-3
        assert errors[1] < errors[0] / 10
        assert errors[2] < 1e-6

    def test_gamma_opt_matches_oracle_sideband_width(self, d1):
        # Weak coupling: Lorentzian-fit width of the exact detected sideband
        # equals Gamma_m + Gamma_opt.
        from cavloop import fitting
        from cavloop.spectrum import Spectrum
        scale = 0.03
        kappa_a = TWO_PI * 100e6
        th = ThermalResponseModel.from_kappa_a_sigma0(
            TWO_PI * 44e3 * scale, TWO_PI * 5.3e9, TWO_PI * 1e6, kappa_a)
        mech = MechanicalMode(omega_m=TWO_PI * 5.3e9, gamma_m=TWO_PI * 81e3,
                              g0=TWO_PI * 829e3 * scale, bath=BathModel(31.0))
        cav0 = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                            kappa_a=kappa_a)
        n_c = 1190.0
        detu = optomech.detuning_for_optimal_cooling(cav0, th, mech, n_c)
        cav = CavityParams(kappa_ex=TWO_PI * 0.5e9, kappa_s=TWO_PI * 1.1e9,
                           kappa_a=kappa_a, detuning=detu)
        g_opt = optomech.gamma_opt(cav, th, mech, n_c, mech.omega_m)
        gamma_eff = mech.gamma_m + g_opt
        delta_lo = TWO_PI * 40e6
        grid = np.linspace(delta_lo - 10 * gamma_eff, delta_lo + 10 * gamma_eff, 4001)
        model = oracle.OracleModel(cav, th, n_c, mech=mech)
        brute = oracle.psd(model, oracle.Heterodyne(delta_lo), grid, eta_ex=0.15)
        fit = fitting.fit_mech_spectrum(Spectrum(omega=grid, channels={"psd": brute}))
        assert fit["gamma_eff"] == pytest.approx(gamma_eff, rel=3e-6)


class TestProperties:
    def test_psd_nonnegative(self, fig4, d1):
        omega = TWO_PI * np.geomspace(1e4, 1e9, 101)
        cav = fig4.cavity()
        model = oracle.OracleModel(cav, fig4.thermal, fig4.n_c,
                                   g_kerr=fig4.kerr.g_kerr)
        for theta in np.linspace(0, np.pi, 7):
            assert np.all(oracle.psd(model, oracle.Homodyne(theta), omega) >= 0)
        n_c = 1190.0
        cav1 = d1.cavity_at_optimal_cooling(n_c)
        m1 = oracle.OracleModel(cav1, d1.thermal, n_c, mech=d1.mech)
        grid = TWO_PI * np.linspace(1e6, 1e8, 101)
        assert np.all(oracle.psd(m1, oracle.Heterodyne(TWO_PI * 4e7), grid) >= 0)

    def test_per_channel_decomposition_sums_to_total(self, d1):
        # The PSD is bilinear in the input correlations, so per-channel
        # blocks of the correlation matrix contribute additively.
        n_c = 800.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        model = oracle.OracleModel(cav, d1.thermal, n_c, mech=d1.mech)
        omega = TWO_PI * np.linspace(3e7, 5e7, 11)
        w = omega - TWO_PI * 4e7 + d1.mech.omega_m
        v_a_p, _ = oracle._output_vectors(model, w)
        _, v_ad_m = oracle._output_vectors(model, -w)
        corr = oracle.input_correlations(model.resolved_n_th())
        total = 0.5 * (oracle._bilinear(v_a_p, corr, v_ad_m)
                       + oracle._bilinear(v_ad_m, corr, v_a_p))
        parts = np.zeros_like(total)
        for pair in ((0, 1), (2, 3), (4, 5), (6, 7)):
            sub = np.zeros_like(corr)
            sub[np.ix_(pair, pair)] = corr[np.ix_(pair, pair)]
            parts = parts + 0.5 * (oracle._bilinear(v_a_p, sub, v_ad_m)
                                   + oracle._bilinear(v_ad_m, sub, v_a_p))
        np.testing.assert_allclose(parts, total, rtol=1e-12)

    def test_doubling_thermal_occupancy_doubles_thermal_channel(self, d1):
        n_c = 400.0
        cav = d1.cavity_at_optimal_cooling(n_c)
        grid = TWO_PI * np.linspace(3.9e7, 4.1e7, 21)
        base = oracle.psd(
            oracle.OracleModel(cav, d1.thermal, n_c, mech=d1.mech, n_th=20.0),
            oracle.Heterodyne(TWO_PI * 4e7), grid)
        doubled = oracle.psd(
            oracle.OracleModel(cav, d1.thermal, n_c, mech=d1.mech, n_th=41.0),
            oracle.Heterodyne(TWO_PI * 4e7), grid)
        zero = oracle.psd(
            oracle.OracleModel(cav, d1.thermal, n_c, mech=d1.mech, n_th=0.0),
            oracle.Heterodyne(TWO_PI * 4e7), grid)
        # n_th enters the bath correlators linearly, so the PSD is affine
        # in n_th: equal slopes between any two pairs of occupancies.
        np.testing.assert_allclose((doubled - base) / 21.0,
                                   (base - zero) / 20.0, rtol=1e-9)
