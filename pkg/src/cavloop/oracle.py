"""Brute-force verifier for every closed-form PSD in the package.

The primitive frequency-domain Langevin system for the fluctuation vector
x = (da, da^dag, db, db^dag) is assembled coefficient by coefficient and
solved by dense linear algebra; detected spectra follow by propagating the
input correlation matrix through the solution.  The photothermal loop
enters only through its primitive pieces: the sigma_d*kappa_a*(da+da^dag)
mixing term in the system matrix and the sigma_d-mixed absorbed input
(a_d = a_in - sigma_d (a_in + a_in^dag)) in the input matrix.  No
effective linewidth, no resummed susceptibility, no closed-form shortcut
appears anywhere on this path, which is what makes it an independent
check of the analytic module results.

Input channel ordering (fixed so correlation matrices are reproducible):

    0: a_ex,in   1: a_ex,in^dag
    2: a_s,in    3: a_s,in^dag
    4: a_a,in    5: a_a,in^dag
    6: b_in      7: b_in^dag

The conjugate channels of the passive vacuum inputs are carried
explicitly because the da^dag row needs them; correlators are the plain
vacuum/thermal ones (the absorbed channel is *not* pre-squeezed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .errors import LoopInstabilityError
from .params import CavityParams, MechanicalMode, ThermalResponseModel

N_INPUTS = 8

# Placeholder decoupled mechanical rows used when no mechanical mode is given.
_DUMMY_OMEGA_M = 1.0
_DUMMY_GAMMA_M = 1.0


@dataclass(frozen=True)
class OracleModel:
    """Parameter bundle for the linear-system verifier."""

    cavity: CavityParams
    thermal: ThermalResponseModel
    n_c: float
    mech: MechanicalMode | None = None
    n_th: float | None = None
    g_kerr: float = 0.0
    delta_bar: float | None = None

    def resolved_delta_bar(self) -> float:
        if self.delta_bar is not None:
            return self.delta_bar
        return core.delta_bar(self.cavity, self.thermal, self.n_c, self.g_kerr)

    def resolved_n_th(self) -> float:
        if self.n_th is not None:
            return self.n_th
        if self.mech is not None:
            return self.mech.bath.n_th(self.n_c)
        return 0.0


@dataclass(frozen=True)
class Homodyne:
    """Balanced homodyne of the output field at quadrature angle theta."""

    theta: float


@dataclass(frozen=True)
class Heterodyne:
    """Single-sideband balanced heterodyne with the LO blue of the pump.

    delta_lo > 0 is the analyzer frequency of the thermomechanical
    sideband.  The projection keeps the signal band around +Omega_m and
    holds the image band at its vacuum value; LO filtering details beyond
    that are a modeling choice of this verifier.
    """

    delta_lo: float


@dataclass(frozen=True)
class InLoopFlux:
    """Absorbed-photon flux fluctuations, normalized to shot noise."""


@dataclass(frozen=True)
class LinearSystem:
    """Assembled system M x = B xi at one frequency (or a batch).

    system_matrix M has shape (..., 4, 4), input_matrix B (..., 4, 8), and
    input_correlations C (8, 8) holds the densities <xi_i(w) xi_j(-w)>.
    """

    omega: np.ndarray
    system_matrix: np.ndarray
    input_matrix: np.ndarray
    input_correlations: np.ndarray


def input_correlations(n_th: float) -> np.ndarray:
    """Vacuum + thermal input correlation densities <xi_i(w) xi_j(-w)>."""
    c = np.zeros((N_INPUTS, N_INPUTS), dtype=complex)
    c[0, 1] = 1.0          # <a_ex a_ex^dag>
    c[2, 3] = 1.0          # <a_s a_s^dag>
    c[4, 5] = 1.0          # <a_a a_a^dag>
    c[6, 7] = n_th + 1.0   # <b b^dag>
    c[7, 6] = n_th         # <b^dag b>
    return c


def assemble(model: OracleModel, omega) -> LinearSystem:
    """Build the 4x4 system and 4x8 input matrix at the given frequency grid."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cav, thermal = model.cavity, model.thermal
    dbar = model.resolved_delta_bar()

    sd = np.asarray(core.sigma_d(thermal, model.n_c, omega), dtype=complex)
    # Loop + Kerr mixing coefficient multiplying (da + da^dag) in the da row;
    # its conjugate row carries -F by sigma_d*(-w) = -sigma_d(w).
    f = sd * cav.kappa_a - 1j * model.n_c * model.g_kerr

    inv_chi = 1.0 / np.asarray(core.chi_c0(cav, dbar, omega), dtype=complex)
    inv_chi_conj = np.conj(1.0 / np.asarray(core.chi_c0(cav, dbar, -omega), dtype=complex))

    if model.mech is not None:
        omega_m, gamma_m, g0 = model.mech.omega_m, model.mech.gamma_m, model.mech.g0
    else:
        omega_m, gamma_m, g0 = _DUMMY_OMEGA_M, _DUMMY_GAMMA_M, 0.0
    g = g0 * np.sqrt(model.n_c)  # mean-field phase chosen real

    inv_chi_m = gamma_m / 2.0 - 1j * (omega - omega_m)
    inv_chi_m_conj = gamma_m / 2.0 - 1j * (omega + omega_m)

    n = omega.size
    M = np.zeros((n, 4, 4), dtype=complex)
    M[:, 0, 0] = inv_chi - f
    M[:, 0, 1] = -f
    M[:, 0, 2] = -1j * g
    M[:, 1, 0] = f
    M[:, 1, 1] = inv_chi_conj + f
    M[:, 1, 3] = 1j * g
    M[:, 2, 0] = -1j * g
    M[:, 2, 2] = inv_chi_m
    M[:, 3, 1] = 1j * g
    M[:, 3, 3] = inv_chi_m_conj

    B = np.zeros((n, 4, N_INPUTS), dtype=complex)
    rt_ex, rt_s, rt_a = np.sqrt(cav.kappa_ex), np.sqrt(cav.kappa_s), np.sqrt(cav.kappa_a)
    B[:, 0, 0] = rt_ex
    B[:, 0, 2] = rt_s
    B[:, 0, 4] = rt_a * (1.0 - sd)
    B[:, 0, 5] = -rt_a * sd
    B[:, 1, 1] = rt_ex
    B[:, 1, 3] = rt_s
    B[:, 1, 4] = rt_a * sd
    B[:, 1, 5] = rt_a * (1.0 + sd)
    B[:, 2, 6] = np.sqrt(gamma_m)
    B[:, 3, 7] = np.sqrt(gamma_m)

    return LinearSystem(omega=omega, system_matrix=M, input_matrix=B,
                        input_correlations=input_correlations(model.resolved_n_th()))


def solve_transfer(model: OracleModel, omega) -> np.ndarray:
    """Transfer matrices T(w) = M(w)^-1 B(w), shape (n, 4, 8)."""
    sys = assemble(model, omega)
    M, B = sys.system_matrix, sys.input_matrix
    # Near-singularity screen: determinant against its Hadamard scale.
    scale = np.prod(np.linalg.norm(M, axis=2), axis=1)
    ratio = np.abs(np.linalg.det(M)) / scale
    if np.any(ratio < 1e-13):
        i = int(np.argmin(ratio))
        cond = float(np.linalg.cond(M[i]))
        raise LoopInstabilityError(
            f"singular Langevin system at Omega = {sys.omega[i]:.6g} rad/s "
            f"(condition number {cond:.3e})")
    try:
        return np.linalg.solve(M, B)
    except np.linalg.LinAlgError as exc:
        raise LoopInstabilityError(f"singular Langevin system: {exc}") from exc


def _output_vectors(model: OracleModel, omega):
    """Coefficient vectors of a_out(w) and a_out^dag(w) over the 8 inputs."""
    T = solve_transfer(model, omega)
    n = T.shape[0]
    rt_ex = np.sqrt(model.cavity.kappa_ex)
    v_a = -rt_ex * T[:, 0, :]
    v_ad = -rt_ex * T[:, 1, :]
    v_a[:, 0] += 1.0   # a_ex,out = a_ex,in - sqrt(kappa_ex) da
    v_ad[:, 1] += 1.0
    return v_a, v_ad


def _bilinear(w1: np.ndarray, corr: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """sum_ij w1_i C_ij w2_j per frequency row."""
    return np.einsum("ni,ij,nj->n", w1, corr, w2)


def psd(model: OracleModel, measurement, omega, eta_ex: float = 1.0) -> np.ndarray:
    """Detected symmetrized PSD, normalized to shot noise.

    The external detection efficiency mixes vacuum into the detected field:
    S_detected = 1 + eta_ex (S_field - 1).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    corr = input_correlations(model.resolved_n_th())

    if isinstance(measurement, Homodyne):
        v_a_p, v_ad_p = _output_vectors(model, omega)
        v_a_m, v_ad_m = _output_vectors(model, -omega)
        ph = np.exp(-1j * measurement.theta)
        w_p = ph * v_a_p + np.conj(ph) * v_ad_p
        w_m = ph * v_a_m + np.conj(ph) * v_ad_m
        s = 0.5 * (_bilinear(w_p, corr, w_m) + _bilinear(w_m, corr, w_p))
    elif isinstance(measurement, Heterodyne):
        if model.mech is None:
            raise ValueError("heterodyne measurement needs a mechanical mode")
        w = omega - measurement.delta_lo + model.mech.omega_m
        v_a_p, _ = _output_vectors(model, w)
        _, v_ad_m = _output_vectors(model, -w)
        s_aad = _bilinear(v_a_p, corr, v_ad_m)
        s_ada = _bilinear(v_ad_m, corr, v_a_p)
        s = 0.5 * (s_aad + s_ada) + 0.5  # image band held at vacuum
    elif isinstance(measurement, InLoopFlux):
        s = _inloop_psd(model, omega, corr)
        return np.real(s)
    else:
        raise TypeError(f"unknown measurement {measurement!r}")

    s = np.real(s)
    return 1.0 + eta_ex * (s - 1.0)


def _inloop_psd(model: OracleModel, omega, corr) -> np.ndarray:
    # q = sqrt(kappa_a)(da + da^dag) - (a_a + a_a^dag) is the absorbed-flux
    # fluctuation per sqrt(shot); its vacuum PSD is exactly 1.
    rt_a = np.sqrt(model.cavity.kappa_a)

    def weight(w):
        T = solve_transfer(model, w)
        vec = rt_a * (T[:, 0, :] + T[:, 1, :])
        vec[:, 4] -= 1.0
        vec[:, 5] -= 1.0
        return vec

    w_p, w_m = weight(omega), weight(-omega)
    return 0.5 * (_bilinear(w_p, corr, w_m) + _bilinear(w_m, corr, w_p))


def loop_factor(cavity: CavityParams, thermal: ThermalResponseModel, n_c: float,
                omega, delta_bar: float | None = None, g_kerr: float = 0.0):
    """Closed-loop over open-loop determinant ratio of the cavity block.

    Equals 1 - chi_fb exactly (for g_kerr = 0), extracted from the raw
    matrices without using the chi_fb formula.
    """
    closed = OracleModel(cavity, thermal, n_c, g_kerr=g_kerr, delta_bar=delta_bar)
    opened = OracleModel(cavity, ThermalResponseModel.none(), 0.0,
                         delta_bar=closed.resolved_delta_bar())
    det_c = _cavity_block_det(closed, omega)
    det_o = _cavity_block_det(opened, omega)
    return det_c / det_o


def _cavity_block_det(model: OracleModel, omega) -> np.ndarray:
    sys = assemble(model, omega)
    blk = sys.system_matrix[:, :2, :2]
    return np.linalg.det(blk)


def conjugate_row_defect(model: OracleModel, omega: float) -> float:
    """Consistency of the da^dag row with the conjugated da row at -Omega.

    Under conjugation at -Omega the column roles swap within each
    (annihilator, creator) pair; returns the max absolute coefficient
    mismatch, which construction should keep at machine precision.
    """
    swap = [1, 0, 3, 2]
    sys_p = assemble(model, omega)
    sys_m = assemble(model, -omega)
    m_p, m_m = sys_p.system_matrix[0], sys_m.system_matrix[0]
    b_p, b_m = sys_p.input_matrix[0], sys_m.input_matrix[0]
    defect = np.max(np.abs(m_p[1, swap] - np.conj(m_m[0, :])))
    defect = max(defect, np.max(np.abs(m_p[3, swap] - np.conj(m_m[2, :]))))
    in_swap = [1, 0, 3, 2, 5, 4, 7, 6]
    defect = max(defect, np.max(np.abs(b_p[1, in_swap] - np.conj(b_m[0, :]))))
    defect = max(defect, np.max(np.abs(b_p[3, in_swap] - np.conj(b_m[2, :]))))
    return float(defect)
