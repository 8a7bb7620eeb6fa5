"""Feedback-modified single-cavity response.

Absorbed photons heat the cavity and shift its frequency, closing a
feedback loop on the intracavity field.  This module implements the
steady state of the driven cavity and every linear-response quantity of
that loop: the per-photon loop coefficient sigma_d, the bare and
effective optical susceptibilities, the effective linewidth/detuning,
the in-loop flux PSD, and the correlators of the effective dissipative
reservoir the loop creates.

Sign conventions: detuning Delta = omega_L - omega_c; spectra use the
exp(-i*Omega*t) Fourier convention, under which
sigma_d(Omega) = n_c * sum_j gain_j / (Omega + i*gamma_j) and
sigma_d*(-Omega) = -sigma_d(Omega).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LoopInstabilityError
from .params import (
    BRANCH_LOWER,
    BRANCH_UNSTABLE,
    BRANCH_UPPER,
    CavityParams,
    MeanField,
    ThermalResponseModel,
)

# |1 - chi_fb| below this is treated as a loop singularity rather than a
# huge-but-finite response.
INSTABILITY_TOL = 1e-9


def _scalar_or_array(x, cast):
    arr = np.asarray(x)
    return arr if arr.ndim else cast(arr)


def total_kappa(cavity: CavityParams) -> float:
    """Total cavity loss rate."""
    return cavity.kappa


def sigma_d(thermal: ThermalResponseModel, n_c: float, omega):
    """Photon-number-enhanced dissipation coefficient sigma_d(Omega).

    Dimensionless loop strength: sigma_d = n_c * sum_j gain_j/(Omega + i*gamma_j).
    Satisfies sigma_d*(-Omega) = -sigma_d(Omega) for real gains.
    """
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    return n_c * thermal.sigma0(omega)


def sigma_0(thermal: ThermalResponseModel, omega):
    """Single-photon dissipation coefficient sigma_0 = sigma_d / n_c."""
    return thermal.sigma0(omega)


def delta_bar(cavity: CavityParams, thermal: ThermalResponseModel, n_c: float,
              g_kerr: float = 0.0) -> float:
    """Shifted detuning including the static thermal and Kerr pulls.

    delta_bar = Delta - (kappa_a * sum_j gain_j/gamma_j + g_kerr) * n_c
    """
    return cavity.detuning - (thermal.dc_sum * cavity.kappa_a + g_kerr) * n_c


def chi_c0(cavity: CavityParams, delta_bar: float, omega):
    """Intrinsic optical susceptibility 1 / (kappa/2 - i(Omega + delta_bar))."""
    omega = np.asarray(omega, dtype=float)
    return _scalar_or_array(1.0 / (cavity.kappa / 2.0 - 1j * (omega + delta_bar)), complex)


def chi_fb(cavity: CavityParams, thermal: ThermalResponseModel, n_c: float,
           omega, delta_bar_value: float | None = None):
    """Open-loop feedback transfer function.

    chi_fb(Omega) = sigma_d(Omega) * kappa_a * (chi_c0(Omega) - chi_c0*(-Omega)),
    the loop gain of the absorbed-flux detection loop normalized to shot noise.
    """
    if delta_bar_value is None:
        delta_bar_value = delta_bar(cavity, thermal, n_c)
    omega = np.asarray(omega, dtype=float)
    sd = sigma_d(thermal, n_c, omega)
    chi = chi_c0(cavity, delta_bar_value, omega)
    chi_conj = np.conj(chi_c0(cavity, delta_bar_value, -omega))
    return _scalar_or_array(sd * cavity.kappa_a * (chi - chi_conj), complex)


def chi_c_eff(cavity: CavityParams, thermal: ThermalResponseModel, n_c: float,
              omega, delta_bar_value: float | None = None):
    """Closed-loop (modified) optical susceptibility chi_c0 / (1 - chi_fb).

    Raises LoopInstabilityError when the loop denominator crosses zero.
    """
    if delta_bar_value is None:
        delta_bar_value = delta_bar(cavity, thermal, n_c)
    denom = 1.0 - chi_fb(cavity, thermal, n_c, omega, delta_bar_value)
    if np.any(np.abs(denom) < INSTABILITY_TOL):
        raise LoopInstabilityError(
            f"|1 - chi_fb| < {INSTABILITY_TOL:g}: feedback loop at instability")
    return chi_c0(cavity, delta_bar_value, omega) / denom


def effective_params(cavity: CavityParams, thermal: ThermalResponseModel,
                     n_c: float, omega_eval: float,
                     delta_bar_value: float | None = None) -> tuple[float, float]:
    """Effective linewidth and detuning of the feedback-modified Lorentzian.

    kappa_eff = kappa - 2*kappa_a*Re[sigma_d(omega_eval)]
    delta_bar_eff = delta_bar + kappa_a*Im[sigma_d(omega_eval)]

    omega_eval is explicit on purpose: sideband-cooling observables evaluate
    sigma_d at the mechanical frequency, generic sweeps at the probe
    frequency.  Note Re sigma_d flips sign with omega_eval, so the
    linewidth narrowing/broadening statements assume omega_eval > 0.
    """
    if delta_bar_value is None:
        delta_bar_value = delta_bar(cavity, thermal, n_c)
    sd = sigma_d(thermal, n_c, omega_eval)
    kappa_eff = cavity.kappa - 2.0 * cavity.kappa_a * np.real(sd)
    delta_bar_eff = delta_bar_value + cavity.kappa_a * np.imag(sd)
    if kappa_eff <= 0:
        raise LoopInstabilityError(
            f"effective linewidth {kappa_eff:g} <= 0: loop drives the cavity unstable")
    return float(kappa_eff), float(delta_bar_eff)


def chi_c_eff_lorentzian(kappa_eff: float, delta_bar_eff: float, omega):
    """Far-detuned Lorentzian approximation 1/(kappa_eff/2 - i(delta_bar_eff + Omega)).

    First order in sigma_d; companion to the full chi_c_eff.
    """
    omega = np.asarray(omega, dtype=float)
    return _scalar_or_array(1.0 / (kappa_eff / 2.0 - 1j * (delta_bar_eff + omega)), complex)


def inloop_flux_psd(cavity: CavityParams, thermal: ThermalResponseModel,
                    n_c: float, omega, delta_bar_value: float | None = None):
    """In-loop absorbed-flux PSD normalized to shot noise: |1 - chi_fb|^-2.

    Values below (above) 1 are squashing (anti-squashing) of the in-loop
    photocurrent.  Diverges at loop instability, which raises instead.
    """
    denom = np.abs(1.0 - chi_fb(cavity, thermal, n_c, omega, delta_bar_value))
    if np.any(denom < INSTABILITY_TOL):
        raise LoopInstabilityError("in-loop PSD divergent: loop at instability")
    return _scalar_or_array(denom ** -2.0, float)


def inloop_flux_psd_far_detuned(cavity: CavityParams, thermal: ThermalResponseModel,
                                n_c: float, omega):
    """Far-detuned approximation |1 - 2 n_c kappa_a g / (Omega kappa)|^-2.

    Valid for delta_bar << -kappa at Omega ~ |delta_bar|, where sigma_d is
    essentially real (g = sum of pole gains).
    """
    gain_sum = sum(g for g, _ in thermal.poles)
    omega = np.asarray(omega, dtype=float)
    return _scalar_or_array(
        np.abs(1.0 - 2.0 * n_c * cavity.kappa_a * gain_sum / (omega * cavity.kappa)) ** -2.0,
        float)


@dataclass(frozen=True)
class ReservoirCorrelators:
    """Spectral densities of the effective dissipative reservoir at (Omega, -Omega).

    nn     : <a_d^dag(Omega) a_d(Omega')>
    n_nbar : <a_d(Omega) a_d^dag(Omega')>
    aa     : <a_d(Omega) a_d(Omega')>
    adad   : <a_d^dag(Omega) a_d^dag(Omega')>
    """

    nn: complex
    n_nbar: complex
    aa: complex
    adad: complex

    def sum(self) -> complex:
        return self.nn + self.n_nbar + self.aa + self.adad


def reservoir_correlators(sigma_at_omega: complex,
                          sigma_at_omega_prime: complex) -> ReservoirCorrelators:
    """Correlators of the loop reservoir a_d = a_in - sigma_d (a_in + a_in^dag).

    Inputs are sigma_d(Omega) and sigma_d(Omega') with Omega' = -Omega.
    At sigma_d = 0 these reduce to the vacuum set (0, 1, 0, 0); their sum
    is identically 1.
    """
    s, sp = complex(sigma_at_omega), complex(sigma_at_omega_prime)
    return ReservoirCorrelators(
        nn=-s * sp,
        n_nbar=(1.0 - s) * (1.0 + sp),
        aa=-(1.0 - s) * sp,
        adad=s * (1.0 + sp),
    )


def _steady_state_residual(n, kappa, det, shift, kappa_ex, flux):
    return n * (kappa**2 / 4.0 + (det - shift * n) ** 2) - kappa_ex * flux


def _positive_roots_cubic(a: float, b: float) -> list[float]:
    """Positive real roots of r(u) = a*u^3 + b*u^2 + u - 1 with a >= 0.

    Roots are isolated by bracketing the monotone intervals between the
    turning points of r (exact quadratic solve), then refined by brentq.
    Robust for leading coefficients all the way down to underflow, where
    the far fixed points leave float range and only the near ones remain.
    """
    from scipy.optimize import brentq

    def r(u):
        return ((a * u + b) * u + 1.0) * u - 1.0

    edges = [0.0]
    if a > 0.0:
        disc = 4.0 * b * b - 12.0 * a
        if disc > 0.0:  # two turning points of the cubic
            q = -(2.0 * b + np.copysign(np.sqrt(disc), b)) / 2.0
            turns = sorted({q / (3.0 * a), 1.0 / q if q != 0.0 else np.inf})
            edges.extend(t for t in turns if np.isfinite(t) and t > 0.0)
        upper = max(edges[-1], 1.0) * 2.0
        while r(upper) <= 0.0:
            upper *= 8.0
        edges.append(upper)
    elif b != 0.0:
        # Degenerate leading term (underflowed shift^2): quadratic.
        disc = 1.0 + 4.0 * b
        if disc < 0.0:
            return []
        q = -(1.0 + np.copysign(np.sqrt(disc), 1.0)) / 2.0
        return [u for u in (q / b, -1.0 / q) if u > 0.0 and np.isfinite(u)]
    else:
        return [1.0]

    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        r_lo, r_hi = r(lo), r(hi)
        if r_lo == 0.0:
            roots.append(lo)
        elif r_lo * r_hi < 0.0:
            roots.append(brentq(r, lo, hi, xtol=1e-300, rtol=1e-15))
    if r(edges[-1]) == 0.0:
        roots.append(edges[-1])
    return sorted(set(roots))


def steady_state(cavity: CavityParams, thermal: ThermalResponseModel,
                 input_flux: float, kerr_shift_per_photon: float = 0.0,
                 tol: float = 1e-12) -> list[MeanField]:
    """All steady-state photon numbers of the driven cavity.

    Solves n_c*(kappa^2/4 + delta_bar(n_c)^2) = kappa_ex*F_in with
    delta_bar(n_c) = Delta - (kappa_a*sum_j gain_j/gamma_j + g_kerr)*n_c.
    The static shift makes this a cubic in n_c (exactly, even for
    multi-pole models); roots come from the closed-form cubic and are
    polished by Newton steps.  Stability follows the slope of the
    residual: d(residual)/dn_c > 0 is stable.

    Returns roots sorted ascending in n_c.  Raises if polishing cannot
    reach a relative residual of ``tol``.
    """
    if input_flux < 0:
        raise ValueError("input_flux must be >= 0")
    kappa = cavity.kappa
    det = cavity.detuning
    shift = thermal.dc_sum * cavity.kappa_a + kerr_shift_per_photon
    drive = cavity.kappa_ex * input_flux

    if drive == 0.0:
        return [MeanField(n_c=0.0, delta_bar=det, branch=BRANCH_LOWER)]

    # Normalize to the linear-cavity photon scale: with u = n/n_scale the
    # fixed-point equation becomes a*u^3 + b*u^2 + u - 1 = 0, immune to
    # coefficient under/overflow for physically tiny or huge shifts.
    hyp2 = kappa**2 / 4.0 + det**2
    n_scale = drive / hyp2
    shift_scaled = shift * n_scale
    a = shift_scaled**2 / hyp2
    b = -2.0 * det * shift_scaled / hyp2
    roots = n_scale * np.array(sorted(_positive_roots_cubic(a, b)))

    out = []
    for n in roots:
        # Newton polish on the exact residual.
        for _ in range(60):
            r = _steady_state_residual(n, kappa, det, shift, cavity.kappa_ex, input_flux)
            dr = (kappa**2 / 4.0 + (det - shift * n) ** 2
                  + n * 2.0 * (det - shift * n) * (-shift))
            if dr == 0.0:
                break
            step = r / dr
            n -= step
            if abs(step) <= 1e-16 * max(abs(n), 1.0):
                break
        resid = _steady_state_residual(n, kappa, det, shift, cavity.kappa_ex, input_flux)
        if abs(resid) > tol * drive:
            raise LoopInstabilityError(
                f"steady-state root polishing stalled: relative residual "
                f"{abs(resid) / drive:.3e} at n_c = {n:.6g}")
        slope = (kappa**2 / 4.0 + (det - shift * n) ** 2
                 - 2.0 * shift * n * (det - shift * n))
        out.append((float(n), slope > 0.0))

    out.sort(key=lambda t: t[0])
    # Polishing can merge fold-adjacent roots; never report duplicates.
    deduped = []
    for n, stable in out:
        if deduped and abs(n - deduped[-1][0]) <= 1e-9 * max(abs(n), 1e-300):
            continue
        deduped.append((n, stable))
    out = deduped
    fields = []
    stable_idx = [i for i, (_, s) in enumerate(out) if s]
    for i, (n, stable) in enumerate(out):
        if not stable:
            branch = BRANCH_UNSTABLE
        elif stable_idx and i == stable_idx[-1] and len(stable_idx) > 1:
            branch = BRANCH_UPPER
        else:
            branch = BRANCH_LOWER
        fields.append(MeanField(n_c=n, delta_bar=det - shift * n, branch=branch))
    return fields
