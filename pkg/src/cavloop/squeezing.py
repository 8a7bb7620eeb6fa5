"""Homodyne quadrature spectra of a Kerr cavity with photothermal feedback.

The Kerr shift is a backaction-evading (QND) in-loop measurement and can
squeeze the output field; photon absorption is not, and its loop always
adds excess quadrature noise.  When both coexist the coherent part of the
loop can nevertheless *improve* the Kerr squeezing in a frequency window.
Closed forms here assume zero shifted detuning and a one-pole thermal
model; anything outside that domain goes through the oracle module.

Detected-PSD conventions: shot noise = 1, external efficiency eta_ex
mixes vacuum as S_det = 1 + eta_ex (S - 1), cavity escape efficiency
eta_c = kappa_ex/kappa and absorbed fraction eta_a = kappa_a/kappa.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import UnsupportedConfigurationError
from .params import C_LIGHT, HBAR, CavityParams, DetectionSetup, KerrParams, ThermalResponseModel


@dataclass(frozen=True)
class QuadratureSpectrumPoint:
    """Decomposition of the homodyne PSD at one (or a grid of) frequency.

    total = kerr_part + excess_absorption + excess_coherent.
    excess_absorption >= 0 always; excess_coherent is signed and is the
    route to dissipation-improved squeezing.
    """

    total: np.ndarray
    kerr_part: np.ndarray
    excess_absorption: np.ndarray
    excess_coherent: np.ndarray


def kerr_coupling_estimate(omega_c: float, n0: float, n2: float, v_mode: float) -> float:
    """Per-photon Kerr shift -omega_c (n2/n0) (hbar omega_c c)/(V_mode n0).

    Negative for positive material inputs (self-phase modulation red-shifts
    the resonance per photon).
    """
    if min(omega_c, n0, v_mode) <= 0 or n2 < 0:
        raise ValueError("kerr estimate needs omega_c, n0, v_mode > 0 and n2 >= 0")
    return -omega_c * (n2 / n0) * (HBAR * omega_c * C_LIGHT) / (v_mode * n0)


def _check_closed_form_domain(cavity: CavityParams, thermal: ThermalResponseModel,
                              kerr: KerrParams, n_c: float) -> None:
    if thermal.n_poles != 1:
        raise UnsupportedConfigurationError(
            "zero-detuning closed forms hold for a one-pole thermal model only; "
            "use the oracle module for multi-pole models")
    dbar = core.delta_bar(cavity, thermal, n_c, kerr.g_kerr)
    if abs(dbar) > 1e-6 * cavity.kappa:
        raise UnsupportedConfigurationError(
            f"closed forms assume zero shifted detuning; got delta_bar = {dbar:.3g} rad/s "
            f"(set detuning = {detuning_for_zero_shift(cavity, thermal, kerr, n_c):.6g})")


def detuning_for_zero_shift(cavity: CavityParams, thermal: ThermalResponseModel,
                            kerr: KerrParams, n_c: float) -> float:
    """Bare detuning that cancels the static thermal + Kerr pulls."""
    return (thermal.dc_sum * cavity.kappa_a + kerr.g_kerr) * n_c


def _kerr_only_psd(cavity, eta_ex, n_c, g_kerr, theta, omega):
    kappa, eta_c = cavity.kappa, cavity.eta_c
    p = kappa**2 + 4.0 * omega**2
    s = np.sin(theta)
    c = np.cos(theta)
    return 1.0 - (16.0 * n_c * eta_ex * eta_c * kappa * s * g_kerr
                  * (p * c - 4.0 * n_c * kappa * s * g_kerr)) / p**2


def homodyne_psd(cavity: CavityParams, thermal: ThermalResponseModel,
                 kerr: KerrParams, detection: DetectionSetup, n_c: float,
                 theta: float, omega) -> QuadratureSpectrumPoint:
    """Quadrature PSD at angle theta, decomposed into its three closed forms.

    kerr_part is the pure-Kerr spectrum (shot noise included), the two
    excess terms are the incoherent (always >= 0) and coherent (signed)
    contributions of the photothermal loop.
    """
    _check_closed_form_domain(cavity, thermal, kerr, n_c)
    omega = np.asarray(omega, dtype=float)
    gain, gamma = thermal.poles[0]
    kappa = cavity.kappa
    eta_ex, eta_a, eta_c = detection.eta_ex, cavity.eta_a, cavity.eta_c
    p = kappa**2 + 4.0 * omega**2
    d2 = gamma**2 + omega**2
    sin2 = np.sin(theta) ** 2

    kerr_part = _kerr_only_psd(cavity, eta_ex, n_c, kerr.g_kerr, theta, omega)
    # Quadratic in the loop strength sigma_d = n_c*gain/(Omega + i*gamma):
    # exc_a = 4 eta_ex kappa_ex kappa_a |sigma_d|^2 |chi_c0|^2 sin^2(theta).
    exc_a = 16.0 * n_c**2 * eta_ex * eta_a * eta_c * kappa**2 * sin2 * gain**2 / (p * d2)
    exc_c = (64.0 * n_c**2 * eta_ex * eta_a * eta_c * kappa**2 * gain * kerr.g_kerr
             * sin2 * (kappa * gamma - 2.0 * omega**2)) / (p**2 * d2)
    return QuadratureSpectrumPoint(
        total=kerr_part + exc_a + exc_c,
        kerr_part=kerr_part,
        excess_absorption=exc_a,
        excess_coherent=exc_c,
    )


def kerr_min_and_angle(cavity: CavityParams, kerr: KerrParams,
                       detection: DetectionSetup, n_c: float,
                       omega) -> tuple[np.ndarray, np.ndarray]:
    """Minimum pure-Kerr PSD and its quadrature angle.

    With x = (kappa^2 + 4 Omega^2)/(4 n_c kappa g_kerr):
    S_min = 1 - 2 eta_ex eta_c / (sqrt(x^2 + 1) + 1) at theta = arctan(x)/2.
    Bounded below by 1 - eta_ex eta_c (reached only as x -> 0).
    """
    if kerr.g_kerr == 0.0:
        raise ValueError("g_kerr = 0: squeezing angle undefined")
    omega = np.asarray(omega, dtype=float)
    x = (cavity.kappa**2 + 4.0 * omega**2) / (4.0 * n_c * cavity.kappa * kerr.g_kerr)
    s_min = 1.0 - 2.0 * detection.eta_ex * cavity.eta_c / (np.sqrt(x**2 + 1.0) + 1.0)
    theta = np.mod(np.arctan(x) / 2.0, math.pi)
    return s_min, theta


def _sinusoid_coefficients(cavity, thermal, kerr, n_c, omega):
    """Coefficients (alpha, beta) of S(theta) = S0 - alpha sin2theta - beta cos2theta.

    Derived from the three closed forms at eta_ex = 1 (the angle does not
    depend on eta_ex).  The PSD minimum sits at 2*theta = atan2(alpha, beta).
    """
    gain, gamma = thermal.poles[0]
    kappa, eta_c, eta_a = cavity.kappa, cavity.eta_c, cavity.eta_a
    g_k = kerr.g_kerr
    p = kappa**2 + 4.0 * omega**2
    d2 = gamma**2 + omega**2
    alpha = 8.0 * n_c * eta_c * kappa * g_k / p
    k_a = 16.0 * n_c**2 * eta_a * eta_c * kappa**2 * gain**2 / (p * d2)
    k_c = (64.0 * n_c**2 * eta_a * eta_c * kappa**2 * gain * g_k
           * (kappa * gamma - 2.0 * omega**2)) / (p**2 * d2)
    beta = 32.0 * n_c**2 * eta_c * kappa**2 * g_k**2 / p**2 + 0.5 * (k_a + k_c)
    return alpha, beta


def combined_optimal_angle(cavity: CavityParams, thermal: ThermalResponseModel,
                           kerr: KerrParams, n_c: float, omega) -> np.ndarray:
    """Angle minimizing the total quadrature PSD, reported in [0, pi).

    The theta dependence of the total PSD is a pure sinusoid in 2*theta,
    S = S0 - alpha sin(2theta) - beta cos(2theta), so the minimum sits at
    2*theta = atan2(alpha, beta).  Writing tan(2theta) = -B/A with
    B = (kappa^2+4Omega^2)(gamma_th^2+Omega^2) > 0 reproduces the
    conventional A/B form; the A < 0 / A > 0 case split for the branch
    holds only for g_kerr > 0 and flips for the usual g_kerr < 0, which is
    why the branch here is tied to the coefficient signs instead.
    Degenerate (theta-independent) points fall back to a numeric scan and
    are reported with a warning.
    """
    _check_closed_form_domain(cavity, thermal, kerr, n_c)
    omega = np.asarray(omega, dtype=float)
    b = (cavity.kappa**2 + 4.0 * omega**2) * (thermal.poles[0][1] ** 2 + omega**2)
    if np.any(b <= 0):
        raise AssertionError("quadrature-angle denominator must be positive")
    alpha, beta = _sinusoid_coefficients(cavity, thermal, kerr, n_c, omega)
    scale = np.hypot(alpha, beta)
    theta = np.mod(np.arctan2(alpha, beta) / 2.0, math.pi)

    degenerate = scale <= 1e-300
    if np.any(degenerate):
        warnings.warn("PSD is quadrature-angle independent at some frequencies; "
                      "falling back to a numeric angle scan there", stacklevel=2)
        flat = np.atleast_1d(theta)
        for i in np.flatnonzero(np.atleast_1d(degenerate)):
            w = float(np.atleast_1d(omega)[i])
            flat[i] = _scan_angle(cavity, thermal, kerr, n_c, w)
        theta = flat if np.asarray(omega).shape else float(flat[0])
    return theta if np.asarray(theta).shape else float(theta)


def _scan_angle(cavity, thermal, kerr, n_c, omega) -> float:
    det = DetectionSetup(eta_ex=1.0)
    grid = np.linspace(0.0, math.pi, 721, endpoint=False)
    totals = [homodyne_psd(cavity, thermal, kerr, det, n_c, t, omega).total for t in grid]
    return float(grid[int(np.argmin(totals))])


def improvement_predicate(cavity: CavityParams, thermal: ThermalResponseModel,
                          kerr: KerrParams, n_c: float, omega,
                          theta: float) -> tuple[bool, bool]:
    """Two views of "does the loop improve the Kerr squeezing here".

    Returns (inequality, numeric_sign):
    - inequality: the literal condition
      g_a g_th (kappa^2 + 4 Omega^2) < g_kerr (8 Omega^2 - 4 kappa gamma_th),
      which is independent of n_c and theta;
    - numeric_sign: sign test S_ex_total(Omega, theta, n_c) < 0 on the
      evaluated excess terms.
    The two disagree for some sign combinations of g_a*g_th and g_kerr
    (the n_c and sign dependence does not cancel in general), so both are
    reported and never merged.
    """
    gain, gamma = thermal.poles[0]
    kappa = cavity.kappa
    omega_f = float(np.asarray(omega, dtype=float))
    inequality = bool(gain * (kappa**2 + 4.0 * omega_f**2)
                      < kerr.g_kerr * (8.0 * omega_f**2 - 4.0 * kappa * gamma))
    point = homodyne_psd(cavity, thermal, kerr, DetectionSetup(eta_ex=1.0),
                         n_c, theta, omega_f)
    numeric = bool(point.excess_absorption + point.excess_coherent < 0.0)
    return inequality, numeric
