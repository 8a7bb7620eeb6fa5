"""Sideband-cooling observables with the photothermal loop folded in.

All closed forms here live in the resolved-sideband, weak-coupling regime
with the cooling tone near the red sideband.  The loop enters through the
effective linewidth kappa_eff and detuning (both evaluated at the
mechanical frequency), through the backaction floor n_l, and through the
imprecision-backaction correlation in the detected spectrum.  The
mechanical susceptibility uses the half-width convention
chi_m = 1/(Gamma/2 - i(Omega - Omega_m)) throughout, which is the one
consistent with Gamma_eff = Gamma_m + 4 n_c g0^2 / kappa_eff.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import core
from .params import (
    HBAR,
    KB,
    CavityParams,
    DetectionSetup,
    MechanicalMode,
    ThermalResponseModel,
)
from .spectrum import Spectrum

DETUNING_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class CoolingReport:
    """Aggregated cooling figures at one drive strength."""

    n_c: float
    kappa_eff: float
    delta_bar_eff: float
    gamma_opt: float
    gamma_eff: float
    n_l: float
    n_th: float
    n_f: float
    bg_excess: float
    floor: float
    snr: float | None = None

    def as_dict(self) -> dict:
        out = {
            "n_c": self.n_c,
            "kappa_eff": self.kappa_eff,
            "delta_bar_eff": self.delta_bar_eff,
            "gamma_opt": self.gamma_opt,
            "gamma_eff": self.gamma_eff,
            "n_l": self.n_l,
            "n_th": self.n_th,
            "n_f": self.n_f,
            "bg_excess": self.bg_excess,
            "floor": self.floor,
        }
        if self.snr is not None:
            out["snr"] = self.snr
        return out


def chi_m(mech: MechanicalMode, omega):
    """Bare mechanical susceptibility 1/(Gamma_m/2 - i(Omega - Omega_m))."""
    omega = np.asarray(omega, dtype=float)
    return core._scalar_or_array(1.0 / (mech.gamma_m / 2.0 - 1j * (omega - mech.omega_m)), complex)


def chi_m_eff(mech: MechanicalMode, gamma_eff: float, omega):
    """Effective mechanical susceptibility 1/(Gamma_eff/2 - i(Omega - Omega_m))."""
    if gamma_eff <= 0:
        raise ValueError("gamma_eff must be > 0")
    omega = np.asarray(omega, dtype=float)
    return core._scalar_or_array(1.0 / (gamma_eff / 2.0 - 1j * (omega - mech.omega_m)), complex)


def _effective_cavity(cavity, thermal, mech, n_c):
    """(kappa_eff, delta_bar_eff) with sigma_d evaluated at Omega_m."""
    return core.effective_params(cavity, thermal, n_c, mech.omega_m)


def gamma_opt(cavity: CavityParams, thermal: ThermalResponseModel,
              mech: MechanicalMode, n_c: float, omega) -> float | np.ndarray:
    """Optomechanical damping rate kappa_eff * n_c * g0^2 * |chi_c,eff(Omega)|^2.

    chi_c,eff is the effective Lorentzian (kappa_eff, delta_bar_eff at
    Omega_m); at delta_bar_eff = -Omega_m and Omega = Omega_m this is
    exactly 4 n_c g0^2 / kappa_eff.
    """
    kappa_eff, dbar_eff = _effective_cavity(cavity, thermal, mech, n_c)
    chi = core.chi_c_eff_lorentzian(kappa_eff, dbar_eff, omega)
    return core._scalar_or_array(kappa_eff * n_c * mech.g0**2 * np.abs(chi) ** 2, float)


def omit_response(cavity: CavityParams, thermal: ThermalResponseModel,
                  mech: MechanicalMode, n_c: float, omega):
    """Coherent cavity response dressed by the mechanical mode.

    Returns (chi_c_om, reflection) with
    chi_c_om = 1/(kappa_eff/2 - i(delta_bar_eff + Omega) + n_c g0^2 chi_m(Omega))
    and the standard input-output reflection r = 1 - kappa_ex * chi_c_om.
    The interference dip at Omega_m is the induced-transparency window.
    """
    kappa_eff, dbar_eff = _effective_cavity(cavity, thermal, mech, n_c)
    omega = np.asarray(omega, dtype=float)
    chi = 1.0 / (kappa_eff / 2.0 - 1j * (dbar_eff + omega)
                 + n_c * mech.g0**2 * chi_m(mech, omega))
    refl = 1.0 - cavity.kappa_ex * chi
    return chi, refl


def cooling_limit(cavity: CavityParams, thermal: ThermalResponseModel,
                  n_c: float, kappa_eff: float, omega_m: float) -> float:
    """Backaction floor of sideband cooling under the dissipative loop.

    n_l = kappa_a * n_c^2 * |sigma_0(Omega_m)|^2 / kappa_eff.  sigma_0 is
    complex in general; its squared magnitude is used (at Omega_m >> gamma_th
    it is essentially real, where the notation is unambiguous anyway).
    """
    if kappa_eff <= 0:
        raise ValueError("kappa_eff must be > 0")
    s0 = core.sigma_0(thermal, omega_m)
    return cavity.kappa_a * n_c**2 * float(np.abs(s0)) ** 2 / kappa_eff


def final_occupancy(n_th: float, gamma_m: float, gamma_opt_value: float,
                    n_l: float) -> float:
    """Final phonon occupancy (n_th Gamma_m + Gamma_opt n_l) / Gamma_eff."""
    gamma_eff = gamma_m + gamma_opt_value
    if gamma_eff <= 0:
        raise ValueError("Gamma_m + Gamma_opt must be > 0")
    return (n_th * gamma_m + gamma_opt_value * n_l) / gamma_eff


def _warn_if_off_resonant(kappa_eff, dbar_eff, mech, cavity):
    if abs(dbar_eff + mech.omega_m) > DETUNING_WARN_FRACTION * cavity.kappa:
        warnings.warn(
            "detuning is off the optimal cooling point "
            f"(delta_bar_eff + Omega_m = {dbar_eff + mech.omega_m:.3g} rad/s); "
            "the detected-spectrum closed forms assume delta_bar_eff = -Omega_m",
            stacklevel=3)


def heterodyne_psd(cavity: CavityParams, thermal: ThermalResponseModel,
                   mech: MechanicalMode, detection: DetectionSetup,
                   n_c: float, omega_grid) -> Spectrum:
    """Balanced-heterodyne photocurrent PSD, shot-noise normalized.

    On the analyzer grid (sideband centered at delta_lo):

    S(w) = eta_ex (4 kappa_ex n_c g0^2/kappa_eff^2) Gamma_eff
           |chi_m,eff(w - delta_lo + Omega_m)|^2 (n_f - 2 n_l)
           + 1 + 4 eta_ex n_l kappa_ex/kappa_eff

    The -2 n_l piece is the imprecision-backaction correlation from the
    loop: for n_f < 2 n_l the sideband dips below the floor (squashing).
    """
    if detection.delta_lo <= 0:
        raise ValueError("heterodyne needs delta_lo > 0")
    kappa_eff, dbar_eff = _effective_cavity(cavity, thermal, mech, n_c)
    _warn_if_off_resonant(kappa_eff, dbar_eff, mech, cavity)

    n_l = cooling_limit(cavity, thermal, n_c, kappa_eff, mech.omega_m)
    g_opt = 4.0 * n_c * mech.g0**2 / kappa_eff
    gamma_eff = mech.gamma_m + g_opt
    n_th = mech.bath.n_th(n_c)
    n_f = final_occupancy(n_th, mech.gamma_m, g_opt, n_l)

    omega_grid = np.asarray(omega_grid, dtype=float)
    chi = chi_m_eff(mech, gamma_eff, omega_grid - detection.delta_lo + mech.omega_m)
    transduction = detection.eta_ex * (4.0 * cavity.kappa_ex * n_c * mech.g0**2
                                       / kappa_eff**2) * gamma_eff
    floor = 1.0 + 4.0 * detection.eta_ex * n_l * cavity.kappa_ex / kappa_eff
    psd = transduction * np.abs(chi) ** 2 * (n_f - 2.0 * n_l) + floor
    return Spectrum(omega=omega_grid, channels={"psd": psd})


def mechanical_psd(cavity: CavityParams, thermal: ThermalResponseModel,
                   mech: MechanicalMode, n_c: float, omega_grid) -> Spectrum:
    """Two-sided mechanical noise spectra.

    Channels: s_bb (Stokes-ordered, peaked at -Omega_m), s_bdbd
    (anti-Stokes-ordered, peaked at +Omega_m) and their sum
    s_xx_over_xzpf2.  The loop adds backaction through
    Gamma_+ = n_c g0^2 |chi_c(Omega_m)|^2 kappa_a |sigma_d|^2 and
    Gamma_- = n_c g0^2 |chi_c(Omega_m)|^2 (kappa_eff + kappa_a |sigma_d|^2).
    """
    kappa_eff, dbar_eff = _effective_cavity(cavity, thermal, mech, n_c)
    chi_c_m = core.chi_c_eff_lorentzian(kappa_eff, dbar_eff, mech.omega_m)
    abs_chi2 = float(np.abs(chi_c_m)) ** 2
    sd2 = float(np.abs(core.sigma_d(thermal, n_c, mech.omega_m))) ** 2

    gamma_plus = n_c * mech.g0**2 * abs_chi2 * cavity.kappa_a * sd2
    gamma_minus = n_c * mech.g0**2 * abs_chi2 * (kappa_eff + cavity.kappa_a * sd2)
    gamma_eff = mech.gamma_m + gamma_minus - gamma_plus
    n_th = mech.bath.n_th(n_c)

    omega_grid = np.asarray(omega_grid, dtype=float)
    chi_p = chi_m_eff(mech, gamma_eff, omega_grid)
    chi_m_neg = chi_m_eff(mech, gamma_eff, -omega_grid)
    s_bb = (n_th * mech.gamma_m + gamma_plus) * np.abs(chi_m_neg) ** 2
    s_bdbd = ((n_th + 1.0) * mech.gamma_m + gamma_minus) * np.abs(chi_p) ** 2
    return Spectrum(omega=omega_grid, channels={
        "s_bb": s_bb,
        "s_bdbd": s_bdbd,
        "s_xx_over_xzpf2": s_bb + s_bdbd,
    })


def detection_figures(cavity: CavityParams, thermal: ThermalResponseModel,
                      mech: MechanicalMode, detection: DetectionSetup,
                      n_c: float, temperature: float | None = None):
    """Excess noise floor and low-power sideband SNR.

    BG_ex = 4 eta_ex kappa_a kappa_ex n_c^2 |sigma_0(Omega_m)|^2 / kappa_eff^2;
    SNR = 16 eta_ex n_c g0^2 kappa_ex k_B T / (kappa^2 Gamma_m hbar Omega_m)
    (bare kappa: the SNR form holds at low cooling power).  SNR is None
    when no temperature is given.
    """
    kappa_eff, _ = _effective_cavity(cavity, thermal, mech, n_c)
    n_l = cooling_limit(cavity, thermal, n_c, kappa_eff, mech.omega_m)
    bg_ex = 4.0 * detection.eta_ex * n_l * cavity.kappa_ex / kappa_eff
    snr = None
    if temperature is not None:
        if temperature <= 0:
            raise ValueError("temperature must be > 0 for the SNR")
        snr = (16.0 * detection.eta_ex * n_c * mech.g0**2 * cavity.kappa_ex
               * KB * temperature
               / (cavity.kappa**2 * mech.gamma_m * HBAR * mech.omega_m))
    return bg_ex, snr


def cooling_report(cavity: CavityParams, thermal: ThermalResponseModel,
                   mech: MechanicalMode, detection: DetectionSetup,
                   n_c: float, temperature: float | None = None) -> CoolingReport:
    """One-stop cooling summary at a given intracavity photon number."""
    kappa_eff, dbar_eff = _effective_cavity(cavity, thermal, mech, n_c)
    g_opt = gamma_opt(cavity, thermal, mech, n_c, mech.omega_m)
    n_l = cooling_limit(cavity, thermal, n_c, kappa_eff, mech.omega_m)
    n_th = mech.bath.n_th(n_c)
    n_f = final_occupancy(n_th, mech.gamma_m, g_opt, n_l)
    bg_ex, snr = detection_figures(cavity, thermal, mech, detection, n_c, temperature)
    return CoolingReport(
        n_c=n_c, kappa_eff=kappa_eff, delta_bar_eff=dbar_eff,
        gamma_opt=g_opt, gamma_eff=mech.gamma_m + g_opt,
        n_l=n_l, n_th=n_th, n_f=n_f, bg_excess=bg_ex, floor=1.0 + bg_ex,
        snr=snr)


def detuning_for_optimal_cooling(cavity: CavityParams, thermal: ThermalResponseModel,
                                 mech: MechanicalMode, n_c: float) -> float:
    """Bare laser detuning that puts delta_bar_eff exactly at -Omega_m."""
    static = thermal.dc_sum * cavity.kappa_a * n_c
    shift = cavity.kappa_a * float(np.imag(core.sigma_d(thermal, n_c, mech.omega_m)))
    return -mech.omega_m + static - shift
