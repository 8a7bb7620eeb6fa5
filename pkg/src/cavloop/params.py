"""Domain parameter types.

All rates and frequencies held by these dataclasses are angular (rad/s).
Configuration files and CSV output use ordinary frequency (Hz); the
conversion by 2*pi happens at that boundary only (see config / spectrum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23       # J/K
C_LIGHT = 299792458.0   # m/s


@dataclass(frozen=True)
class CavityParams:
    """Optical cavity loss rates and laser detuning.

    kappa_ex : external (input/output) coupling rate
    kappa_s  : scattering loss rate (no local heating)
    kappa_a  : absorption loss rate (drives the photothermal loop)
    detuning : bare laser detuning Delta = omega_L - omega_c (signed)
    omega_c  : optical resonance frequency; only needed by the Kerr
               coupling estimate, optional otherwise
    """

    kappa_ex: float
    kappa_s: float
    kappa_a: float
    detuning: float = 0.0
    omega_c: float | None = None

    def __post_init__(self):
        for name in ("kappa_ex", "kappa_s", "kappa_a"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.kappa <= 0:
            raise ValueError("total loss rate kappa must be > 0")

    @property
    def kappa(self) -> float:
        """Total loss rate kappa_ex + kappa_s + kappa_a."""
        return self.kappa_ex + self.kappa_s + self.kappa_a

    @property
    def eta_c(self) -> float:
        """Cavity coupling efficiency kappa_ex / kappa."""
        return self.kappa_ex / self.kappa

    @property
    def eta_a(self) -> float:
        """Absorbed fraction kappa_a / kappa."""
        return self.kappa_a / self.kappa


@dataclass(frozen=True)
class ThermalResponseModel:
    """Photothermal response as a sum of single-pole terms.

    Each pole is (gain, gamma): ``gain`` is the per-photon product of the
    flux-to-temperature and temperature-to-frequency coefficients
    (rad/s per intracavity photon, signed), ``gamma`` the thermal decay
    rate.  Only this product is ever experimentally constrained, so it is
    what the model stores; kappa_a lives separately in CavityParams.
    """

    poles: tuple[tuple[float, float], ...]

    def __post_init__(self):
        poles = tuple((float(g), float(gm)) for g, gm in self.poles)
        if not poles:
            raise ValueError("thermal model needs at least one pole")
        for _, gamma in poles:
            if gamma <= 0:
                raise ValueError(f"thermal pole decay rate must be > 0, got {gamma}")
        object.__setattr__(self, "poles", poles)

    @classmethod
    def one_pole(cls, gain: float, gamma: float) -> "ThermalResponseModel":
        return cls(poles=((gain, gamma),))

    @classmethod
    def none(cls) -> "ThermalResponseModel":
        """A pole with zero gain: no photothermal feedback."""
        return cls(poles=((0.0, 1.0),))

    @classmethod
    def from_kappa_a_sigma0(cls, target: float, omega: float, gamma: float,
                            kappa_a: float) -> "ThermalResponseModel":
        """One-pole model whose Re[kappa_a*sigma_0(omega)] equals ``target``.

        Convenient for building models from a fitted linewidth-vs-photon
        slope (the experimentally accessible combination).
        """
        if kappa_a <= 0:
            raise ValueError("kappa_a must be > 0 to back out a thermal gain")
        gain = target * (omega**2 + gamma**2) / (omega * kappa_a)
        return cls.one_pole(gain, gamma)

    @property
    def n_poles(self) -> int:
        return len(self.poles)

    def sigma0(self, omega):
        """Per-photon dissipation coefficient sigma_0(Omega) = sum_j gain_j/(Omega + i*gamma_j)."""
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape, dtype=complex)
        for gain, gamma in self.poles:
            out = out + gain / (omega + 1j * gamma)
        out = np.asarray(out)
        return out if out.ndim else complex(out)

    @property
    def dc_sum(self) -> float:
        """sum_j gain_j / gamma_j — static shift per photon per unit kappa_a."""
        return sum(g / gm for g, gm in self.poles)


BRANCH_LOWER = "lower"
BRANCH_UPPER = "upper"
BRANCH_UNSTABLE = "unstable"


@dataclass(frozen=True)
class MeanField:
    """One steady-state solution of the driven cavity.

    branch is 'lower' / 'upper' / 'unstable' for the bistable cubic; a
    single stable root is labeled 'lower'.
    """

    n_c: float
    delta_bar: float
    branch: str

    @property
    def stable(self) -> bool:
        return self.branch != BRANCH_UNSTABLE


@dataclass(frozen=True)
class BathModel:
    """Mechanical bath occupancy, optionally with linear absorption heating.

    n_th(n_c) = n_th0 + heating_per_photon * n_c.  The linear form is a
    phenomenological choice; heating_per_photon defaults to zero.
    """

    n_th0: float
    heating_per_photon: float = 0.0

    def __post_init__(self):
        if self.n_th0 < 0 or self.heating_per_photon < 0:
            raise ValueError("bath occupancy parameters must be >= 0")

    def n_th(self, n_c: float) -> float:
        return self.n_th0 + self.heating_per_photon * n_c


@dataclass(frozen=True)
class MechanicalMode:
    """Mechanical oscillator dispersively coupled to the cavity.

    The resolved-sideband closed forms are exact only for kappa << omega_m;
    that condition is documented, not enforced.
    """

    omega_m: float
    gamma_m: float
    g0: float
    x_zpf: float = 1.0
    bath: BathModel = field(default_factory=lambda: BathModel(0.0))

    def __post_init__(self):
        if self.omega_m <= 0 or self.gamma_m <= 0:
            raise ValueError("omega_m and gamma_m must be > 0")
        if self.g0 < 0:
            raise ValueError("g0 must be >= 0")


@dataclass(frozen=True)
class DetectionSetup:
    """Measurement-chain parameters.

    eta_ex   : external detection efficiency in [0, 1]
    delta_lo : heterodyne local-oscillator offset (analyzer frequency of the
               thermomechanical sideband), > 0 convention
    theta    : homodyne quadrature angle (rad)
    """

    eta_ex: float = 1.0
    delta_lo: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta_ex <= 1.0:
            raise ValueError("eta_ex must lie in [0, 1]")


@dataclass(frozen=True)
class KerrParams:
    """Kerr nonlinearity: per-photon frequency shift g_kerr (typically < 0).

    The optional material/mode fields allow estimating g_kerr from first
    principles; see squeezing.kerr_coupling_estimate.
    """

    g_kerr: float
    n2: float | None = None
    n0: float | None = None
    v_mode: float | None = None

    def has_material_estimate(self) -> bool:
        return None not in (self.n2, self.n0, self.v_mode)


@dataclass(frozen=True)
class MaterialProps:
    """Bulk material constants for the thermal solver."""

    density: float           # kg/m^3
    heat_capacity: float     # J/(kg K)
    conductivity: float      # W/(m K)
    refractive_index: float
    dn_dt: float             # 1/K

    def __post_init__(self):
        for name in ("density", "heat_capacity", "conductivity", "refractive_index"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


# Bulk constants commonly used with the thermal solver.
SILICON = MaterialProps(density=2329.0, heat_capacity=700.0, conductivity=130.0,
                        refractive_index=3.48, dn_dt=16.0e-5)
SILICA = MaterialProps(density=2203.0, heat_capacity=703.0, conductivity=1.38,
                       refractive_index=1.50, dn_dt=1.29e-5)
SILICON_NITRIDE = MaterialProps(density=3290.0, heat_capacity=800.0, conductivity=30.0,
                                refractive_index=2.00, dn_dt=2.45e-5)


def thermal_occupancy(omega: float, temperature: float) -> float:
    """Bose occupancy of a mode at angular frequency omega and temperature T."""
    if temperature <= 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (KB * temperature))
