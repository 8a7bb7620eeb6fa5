"""Shared parameter fixtures: the two measured devices and the Kerr-ring set."""

import numpy as np
import pytest

from cavloop import optomech, squeezing
from cavloop.params import (
    BathModel,
    CavityParams,
    DetectionSetup,
    KerrParams,
    MechanicalMode,
    ThermalResponseModel,
)

TWO_PI = 2 * np.pi


class DeviceSet:
    """Cavity + thermal + mechanics bundle with detuning helpers."""

    def __init__(self, kappa_ex_hz, kappa_s_hz, kappa_a_hz, slope_hz, gamma_th_hz,
                 omega_m_hz, gamma_m_hz, g0_hz, n_th0, heating=0.0, eta_ex=0.15,
                 delta_lo_hz=40e6):
        self._base = dict(kappa_ex=TWO_PI * kappa_ex_hz, kappa_s=TWO_PI * kappa_s_hz,
                          kappa_a=TWO_PI * kappa_a_hz)
        self.thermal = ThermalResponseModel.from_kappa_a_sigma0(
            TWO_PI * slope_hz, TWO_PI * omega_m_hz, TWO_PI * gamma_th_hz,
            TWO_PI * kappa_a_hz)
        self.mech = MechanicalMode(
            omega_m=TWO_PI * omega_m_hz, gamma_m=TWO_PI * gamma_m_hz,
            g0=TWO_PI * g0_hz, bath=BathModel(n_th0=n_th0, heating_per_photon=heating))
        self.detection = DetectionSetup(eta_ex=eta_ex, delta_lo=TWO_PI * delta_lo_hz)

    def cavity(self, detuning=0.0):
        return CavityParams(detuning=detuning, **self._base)

    def cavity_at_optimal_cooling(self, n_c):
        det = optomech.detuning_for_optimal_cooling(
            self.cavity(), self.thermal, self.mech, n_c)
        return self.cavity(detuning=det)


@pytest.fixture(scope="session")
def d1():
    """Cryogenic device: kappa/2pi = 1.7 GHz, loop narrows the linewidth."""
    return DeviceSet(kappa_ex_hz=0.5e9, kappa_s_hz=1.1e9, kappa_a_hz=100e6,
                     slope_hz=44e3, gamma_th_hz=1e6,
                     omega_m_hz=5.3e9, gamma_m_hz=81e3, g0_hz=829e3,
                     n_th0=31.0, heating=0.068)


@pytest.fixture(scope="session")
def d2():
    """Ambient device: kappa/2pi = 220 MHz, loop broadens the linewidth."""
    return DeviceSet(kappa_ex_hz=73e6, kappa_s_hz=145.5e6, kappa_a_hz=1.5e6,
                     slope_hz=-35e3, gamma_th_hz=1e6,
                     omega_m_hz=5.14e9, gamma_m_hz=2.56e6, g0_hz=1.12e6,
                     n_th0=1198.0, delta_lo_hz=100e6)


class KerrSet:
    """Low-loss Kerr micro-ring with a weak photothermal loop."""

    def __init__(self):
        self._base = dict(kappa_ex=TWO_PI * 8e6, kappa_s=TWO_PI * 1e6,
                          kappa_a=TWO_PI * 6e6)
        self.thermal = ThermalResponseModel.one_pole(gain=-TWO_PI * 0.05,
                                                     gamma=TWO_PI * 20e3)
        self.kerr = KerrParams(g_kerr=-TWO_PI * 0.5)
        self.n_c = 1e7
        self.detection = DetectionSetup(eta_ex=1.0)

    def cavity(self, detuning=None, thermal=None, kerr=None):
        if detuning is None:
            detuning = squeezing.detuning_for_zero_shift(
                CavityParams(**self._base), thermal or self.thermal,
                kerr or self.kerr, self.n_c)
        return CavityParams(detuning=detuning, **self._base)


@pytest.fixture(scope="session")
def fig4():
    return KerrSet()
