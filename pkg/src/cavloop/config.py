"""Run configuration: YAML parsing, validation, and unit conversion.

Configuration files speak ordinary frequency (Hz); the library speaks
angular frequency (rad/s).  This module owns that boundary: every *_hz
key is multiplied by 2*pi exactly once, here.  Validation is collective
(one pass reports every violation with its dotted key path) and strict
about unknown keys.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any

import yaml

from .errors import ConfigError
from .params import (
    SILICA,
    SILICON,
    SILICON_NITRIDE,
    BathModel,
    CavityParams,
    DetectionSetup,
    KerrParams,
    MaterialProps,
    MechanicalMode,
    ThermalResponseModel,
)
from .thermal import BC_FIXED, BC_INSULATING, Geometry1D

TWO_PI = 2.0 * math.pi

# Sanity ceiling for thermal decay rates; faster poles are almost surely a
# units mistake (Hz vs rad/s, or kHz typed as GHz).
GAMMA_TH_SANITY_HZ = 100e9

# Allowed mismatch between a configured g_kerr and its material estimate.
KERR_ESTIMATE_TOLERANCE = 0.25

DETUNING_AUTO = "auto"

_MATERIALS = {
    "silicon": SILICON,
    "silica": SILICA,
    "silicon_nitride": SILICON_NITRIDE,
}

_SCHEMA: dict[str, set[str]] = {
    "cavity": {"kappa_ex_hz", "kappa_s_hz", "kappa_a_hz", "detuning_hz",
               "resonance_hz"},
    "thermal": {"poles"},
    "mechanical": {"omega_m_hz", "gamma_m_hz", "g0_hz", "x_zpf_m", "bath"},
    "kerr": {"g_kerr_hz", "n2_m2_per_w", "n0", "v_mode_m3", "g_kerr_override"},
    "detection": {"eta_ex", "delta_lo_hz", "theta_rad"},
    "drive": {"n_c", "input_flux_per_s"},
    "sweep": {"start_hz", "stop_hz", "points", "scale"},
    "squeezing": {"angle"},
    "thermal_solver": {"material", "geometry", "absorbed_power_w", "fit_poles"},
    "oracle_check": {"mode", "theta_rad"},
    "fit": {"model", "channel"},
    "thermometry": {"anchor_n_c", "anchor_n_th"},
}
_TOP_SCALARS = {"temperature_k"}
_BATH_KEYS = {"n_th0", "heating_per_photon"}
_POLE_KEYS = {"gain_hz", "gamma_hz"}
_MATERIAL_KEYS = {"density", "heat_capacity", "conductivity",
                  "refractive_index", "dn_dt"}
_GEOMETRY_KEYS = {"outer_radius_m", "mode_radius_m", "points", "boundary"}


@dataclass
class RunConfig:
    """Validated configuration with typed accessors.

    ``raw`` is the normalized dict the config hash is computed from;
    accessors build domain objects on demand and raise ConfigError when a
    command needs a section that was not provided.
    """

    raw: dict
    path: str | None = None

    # -- section presence ---------------------------------------------------
    def has(self, section: str) -> bool:
        return section in self.raw

    def _need(self, section: str) -> dict:
        if section not in self.raw:
            raise ConfigError([f"missing required config section '{section}'"])
        return self.raw[section]

    # -- accessors ----------------------------------------------------------
    def cavity(self, detuning: float | None = None) -> CavityParams:
        sec = self._need("cavity")
        if detuning is None:
            det = sec.get("detuning_hz", 0.0)
            if det == DETUNING_AUTO:
                raise ConfigError(
                    ["cavity.detuning_hz is 'auto' but this command cannot derive it"])
            detuning = TWO_PI * float(det)
        resonance = sec.get("resonance_hz")
        return CavityParams(
            kappa_ex=TWO_PI * sec["kappa_ex_hz"],
            kappa_s=TWO_PI * sec.get("kappa_s_hz", 0.0),
            kappa_a=TWO_PI * sec.get("kappa_a_hz", 0.0),
            detuning=detuning,
            omega_c=TWO_PI * resonance if resonance is not None else None,
        )

    def detuning_is_auto(self) -> bool:
        return self.raw.get("cavity", {}).get("detuning_hz") == DETUNING_AUTO

    def thermal(self) -> ThermalResponseModel:
        if not self.has("thermal"):
            return ThermalResponseModel.none()
        poles = tuple((TWO_PI * p["gain_hz"], TWO_PI * p["gamma_hz"])
                      for p in self.raw["thermal"]["poles"])
        return ThermalResponseModel(poles=poles)

    def mechanical(self) -> MechanicalMode:
        sec = self._need("mechanical")
        bath = sec.get("bath", {})
        return MechanicalMode(
            omega_m=TWO_PI * sec["omega_m_hz"],
            gamma_m=TWO_PI * sec["gamma_m_hz"],
            g0=TWO_PI * sec["g0_hz"],
            x_zpf=sec.get("x_zpf_m", 1.0),
            bath=BathModel(n_th0=bath.get("n_th0", 0.0),
                           heating_per_photon=bath.get("heating_per_photon", 0.0)),
        )

    def kerr(self) -> KerrParams:
        sec = self._need("kerr")
        return KerrParams(
            g_kerr=TWO_PI * sec["g_kerr_hz"],
            n2=sec.get("n2_m2_per_w"),
            n0=sec.get("n0"),
            v_mode=sec.get("v_mode_m3"),
        )

    def detection(self) -> DetectionSetup:
        sec = self.raw.get("detection", {})
        return DetectionSetup(
            eta_ex=sec.get("eta_ex", 1.0),
            delta_lo=TWO_PI * sec.get("delta_lo_hz", 0.0),
            theta=sec.get("theta_rad", 0.0),
        )

    def n_c(self) -> float:
        sec = self._need("drive")
        if "n_c" not in sec:
            raise ConfigError(["drive.n_c is required by this command"])
        return float(sec["n_c"])

    def input_flux(self) -> float | None:
        flux = self.raw.get("drive", {}).get("input_flux_per_s")
        return float(flux) if flux is not None else None

    def sweep(self) -> tuple[float, float, int, bool]:
        sec = self._need("sweep")
        return (float(sec["start_hz"]), float(sec["stop_hz"]),
                int(sec["points"]), sec.get("scale", "linear") == "log")

    def temperature(self) -> float | None:
        t = self.raw.get("temperature_k")
        return float(t) if t is not None else None

    def material(self) -> MaterialProps:
        sec = self._need("thermal_solver")
        mat = sec["material"]
        if isinstance(mat, str):
            return _MATERIALS[mat]
        return MaterialProps(**mat)

    def geometry(self) -> Geometry1D:
        sec = self._need("thermal_solver")
        geo = sec["geometry"]
        return Geometry1D.gaussian_mode(
            outer_radius=geo["outer_radius_m"],
            mode_radius=geo["mode_radius_m"],
            points=geo.get("points", 240),
            boundary=geo.get("boundary", BC_FIXED),
        )

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _validate(raw: Any) -> list[str]:
    errs: list[str] = []
    if not isinstance(raw, dict):
        return ["config root must be a mapping"]

    for key in raw:
        if key not in _SCHEMA and key not in _TOP_SCALARS:
            errs.append(f"unknown top-level key '{key}'")
    for section, allowed in _SCHEMA.items():
        if section not in raw:
            continue
        sec = raw[section]
        if not isinstance(sec, dict):
            errs.append(f"{section}: must be a mapping")
            continue
        for key in sec:
            if key not in allowed:
                errs.append(f"{section}.{key}: unknown key")

    def num(path, value, minimum=None, maximum=None, strict_min=False):
        if not _is_number(value):
            errs.append(f"{path}: expected a number, got {value!r}")
            return
        if minimum is not None and (value <= minimum if strict_min else value < minimum):
            op = ">" if strict_min else ">="
            errs.append(f"{path}: must be {op} {minimum}, got {value}")
        if maximum is not None and value > maximum:
            errs.append(f"{path}: must be <= {maximum}, got {value}")

    cav = raw.get("cavity")
    if cav is not None and isinstance(cav, dict):
        for key in ("kappa_ex_hz", "kappa_s_hz", "kappa_a_hz"):
            if key in cav:
                num(f"cavity.{key}", cav[key], minimum=0.0)
        if "kappa_ex_hz" not in cav:
            errs.append("cavity.kappa_ex_hz: required")
        det = cav.get("detuning_hz")
        if det is not None and det != DETUNING_AUTO and not _is_number(det):
            errs.append(f"cavity.detuning_hz: expected a number or '{DETUNING_AUTO}'")
        if "resonance_hz" in cav:
            num("cavity.resonance_hz", cav["resonance_hz"], minimum=0.0, strict_min=True)

    th = raw.get("thermal")
    if th is not None and isinstance(th, dict):
        poles = th.get("poles")
        if not isinstance(poles, list) or not poles:
            errs.append("thermal.poles: must be a non-empty list")
        else:
            for i, pole in enumerate(poles):
                if not isinstance(pole, dict) or set(pole) - _POLE_KEYS or \
                        not _POLE_KEYS <= set(pole):
                    errs.append(f"thermal.poles[{i}]: needs exactly keys "
                                f"gain_hz and gamma_hz")
                    continue
                num(f"thermal.poles[{i}].gamma_hz", pole["gamma_hz"],
                    minimum=0.0, strict_min=True)
                if _is_number(pole["gamma_hz"]) and pole["gamma_hz"] > GAMMA_TH_SANITY_HZ:
                    errs.append(f"thermal.poles[{i}].gamma_hz: {pole['gamma_hz']:g} Hz "
                                f"exceeds the {GAMMA_TH_SANITY_HZ:g} Hz sanity ceiling "
                                "(units mistake?)")
                if not _is_number(pole["gain_hz"]):
                    errs.append(f"thermal.poles[{i}].gain_hz: expected a number")

    mech = raw.get("mechanical")
    if mech is not None and isinstance(mech, dict):
        for key in ("omega_m_hz", "gamma_m_hz"):
            if key in mech:
                num(f"mechanical.{key}", mech[key], minimum=0.0, strict_min=True)
            else:
                errs.append(f"mechanical.{key}: required")
        if "g0_hz" in mech:
            num("mechanical.g0_hz", mech["g0_hz"], minimum=0.0)
        else:
            errs.append("mechanical.g0_hz: required")
        if "x_zpf_m" in mech:
            num("mechanical.x_zpf_m", mech["x_zpf_m"], minimum=0.0, strict_min=True)
        bath = mech.get("bath")
        if bath is not None:
            if not isinstance(bath, dict) or set(bath) - _BATH_KEYS:
                errs.append("mechanical.bath: allowed keys are n_th0, heating_per_photon")
            else:
                for key in bath:
                    num(f"mechanical.bath.{key}", bath[key], minimum=0.0)

    kerr = raw.get("kerr")
    if kerr is not None and isinstance(kerr, dict):
        if "g_kerr_hz" not in kerr:
            errs.append("kerr.g_kerr_hz: required")
        elif not _is_number(kerr["g_kerr_hz"]):
            errs.append("kerr.g_kerr_hz: expected a number")
        for key in ("n2_m2_per_w", "n0", "v_mode_m3"):
            if key in kerr:
                num(f"kerr.{key}", kerr[key], minimum=0.0, strict_min=(key != "n2_m2_per_w"))
        errs.extend(_check_kerr_estimate(raw))

    det = raw.get("detection")
    if det is not None and isinstance(det, dict):
        if "eta_ex" in det:
            num("detection.eta_ex", det["eta_ex"], minimum=0.0, maximum=1.0)
        if "delta_lo_hz" in det:
            num("detection.delta_lo_hz", det["delta_lo_hz"], minimum=0.0)
        if "theta_rad" in det:
            num("detection.theta_rad", det["theta_rad"])

    drive = raw.get("drive")
    if drive is not None and isinstance(drive, dict):
        for key in drive:
            num(f"drive.{key}", drive[key], minimum=0.0)

    sweep = raw.get("sweep")
    if sweep is not None and isinstance(sweep, dict):
        for key in ("start_hz", "stop_hz"):
            if key in sweep:
                num(f"sweep.{key}", sweep[key])
            else:
                errs.append(f"sweep.{key}: required")
        if "points" in sweep:
            if not isinstance(sweep["points"], int) or sweep["points"] < 2:
                errs.append("sweep.points: must be an integer >= 2")
        else:
            errs.append("sweep.points: required")
        if sweep.get("scale", "linear") not in ("linear", "log"):
            errs.append("sweep.scale: must be 'linear' or 'log'")
        if (_is_number(sweep.get("start_hz")) and _is_number(sweep.get("stop_hz"))
                and sweep["stop_hz"] <= sweep["start_hz"]):
            errs.append("sweep.stop_hz: must exceed sweep.start_hz")
        if sweep.get("scale") == "log" and _is_number(sweep.get("start_hz")) \
                and sweep["start_hz"] <= 0:
            errs.append("sweep.start_hz: log sweeps need start_hz > 0")

    sq = raw.get("squeezing")
    if sq is not None and isinstance(sq, dict):
        angle = sq.get("angle", "optimal")
        if angle != "optimal" and not _is_number(angle):
            errs.append("squeezing.angle: must be 'optimal' or an angle in rad")

    ts = raw.get("thermal_solver")
    if ts is not None and isinstance(ts, dict):
        mat = ts.get("material")
        if mat is None:
            errs.append("thermal_solver.material: required")
        elif isinstance(mat, str):
            if mat not in _MATERIALS:
                errs.append(f"thermal_solver.material: unknown material '{mat}' "
                            f"(known: {sorted(_MATERIALS)})")
        elif isinstance(mat, dict):
            if set(mat) != _MATERIAL_KEYS:
                errs.append(f"thermal_solver.material: needs exactly keys "
                            f"{sorted(_MATERIAL_KEYS)}")
            else:
                for key, value in mat.items():
                    if key != "dn_dt":
                        num(f"thermal_solver.material.{key}", value,
                            minimum=0.0, strict_min=True)
        else:
            errs.append("thermal_solver.material: must be a name or mapping")
        geo = ts.get("geometry")
        if geo is None:
            errs.append("thermal_solver.geometry: required")
        elif not isinstance(geo, dict) or set(geo) - _GEOMETRY_KEYS:
            errs.append(f"thermal_solver.geometry: allowed keys {sorted(_GEOMETRY_KEYS)}")
        else:
            for key in ("outer_radius_m", "mode_radius_m"):
                if key in geo:
                    num(f"thermal_solver.geometry.{key}", geo[key],
                        minimum=0.0, strict_min=True)
                else:
                    errs.append(f"thermal_solver.geometry.{key}: required")
            if "boundary" in geo and geo["boundary"] not in (BC_FIXED, BC_INSULATING):
                errs.append(f"thermal_solver.geometry.boundary: must be "
                            f"'{BC_FIXED}' or '{BC_INSULATING}'")
        if "absorbed_power_w" in ts:
            num("thermal_solver.absorbed_power_w", ts["absorbed_power_w"],
                minimum=0.0, strict_min=True)
        if "fit_poles" in ts and (not isinstance(ts["fit_poles"], int)
                                  or ts["fit_poles"] < 1):
            errs.append("thermal_solver.fit_poles: must be an integer >= 1")

    oc = raw.get("oracle_check")
    if oc is not None and isinstance(oc, dict):
        if oc.get("mode") not in ("homodyne", "heterodyne", "inloop"):
            errs.append("oracle_check.mode: must be homodyne, heterodyne, or inloop")
        if "theta_rad" in oc:
            num("oracle_check.theta_rad", oc["theta_rad"])

    fit = raw.get("fit")
    if fit is not None and isinstance(fit, dict):
        if fit.get("model", "bare") not in ("bare", "with-mechanics"):
            errs.append("fit.model: must be 'bare' or 'with-mechanics'")

    tm = raw.get("thermometry")
    if tm is not None and isinstance(tm, dict):
        for key in ("anchor_n_c", "anchor_n_th"):
            if key in tm:
                num(f"thermometry.{key}", tm[key], minimum=0.0)
            else:
                errs.append(f"thermometry.{key}: required")

    if "temperature_k" in raw:
        num("temperature_k", raw["temperature_k"], minimum=0.0, strict_min=True)

    return errs


def _check_kerr_estimate(raw: dict) -> list[str]:
    kerr = raw.get("kerr", {})
    cav = raw.get("cavity", {})
    needed = ("n2_m2_per_w", "n0", "v_mode_m3")
    if not all(k in kerr and _is_number(kerr[k]) for k in needed):
        return []
    if not _is_number(kerr.get("g_kerr_hz")):
        return []
    if not _is_number(cav.get("resonance_hz")):
        return ["kerr: material estimate check needs cavity.resonance_hz"]
    if kerr.get("g_kerr_override"):
        return []
    from .squeezing import kerr_coupling_estimate
    est = kerr_coupling_estimate(TWO_PI * cav["resonance_hz"], kerr["n0"],
                                 kerr["n2_m2_per_w"], kerr["v_mode_m3"]) / TWO_PI
    got = kerr["g_kerr_hz"]
    if est == 0.0 and got == 0.0:
        return []
    if est == 0.0 or abs(got - est) / abs(est) > KERR_ESTIMATE_TOLERANCE:
        return [f"kerr.g_kerr_hz: {got:g} Hz disagrees with the material estimate "
                f"{est:.3g} Hz by more than {KERR_ESTIMATE_TOLERANCE:.0%}; set "
                "kerr.g_kerr_override: true to keep it"]
    return []


def parse_config(path) -> RunConfig:
    """Load and validate a YAML config file; raises ConfigError with every
    violation found."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"invalid YAML in {path}: {exc}"]) from exc
    if raw is None:
        raw = {}
    errs = _validate(raw)
    if errs:
        raise ConfigError(errs)
    return RunConfig(raw=raw, path=str(path))


def config_from_dict(raw: dict) -> RunConfig:
    """Validate an in-memory config mapping (used by tests and the API)."""
    errs = _validate(raw)
    if errs:
        raise ConfigError(errs)
    return RunConfig(raw=raw)
