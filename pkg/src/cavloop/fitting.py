"""Spectroscopy fitting pipeline and noise thermometry.

Mirrors the measurement flow of a cavity-spectroscopy experiment:

1. coherent cavity response -> (kappa_eff, delta_bar_eff) per drive power;
2. linewidth-vs-photon-number series -> bare kappa and the loop slope
   kappa_a*sigma_0(Omega_m);
3. detected mechanical sidebands -> (Gamma_eff, area, floor) per power;
4. damping-vs-photon-number series (with kappa_eff folded in) -> g0, Gamma_m;
5. noise thermometry anchored at the lowest power -> eta_ex and the
   phonon-occupancy curve.

Nonlinear fits run Levenberg-Marquardt least squares with seeded initial
guesses; linear fits are the exact weighted normal-equation solutions.
Uncertainties are one-standard-error from the linearized covariance at
the optimum (absolute when data uncertainties are supplied, scaled by
reduced chi-square otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import FitConvergenceError
from .spectrum import Spectrum

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max-iter"
STATUS_SINGULAR = "singular"


@dataclass
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    status: str
    n_iter: int
    residual_norm_initial: float = np.nan
    covariance: np.ndarray | None = None
    param_order: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> float:
        return self.params[name]


@dataclass(frozen=True)
class PowerSeries:
    """Measured quantity vs intracavity photon number, with uncertainties."""

    n_c: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        n_c = np.asarray(self.n_c, dtype=float)
        values = np.asarray(self.values, dtype=float)
        sigmas = np.asarray(self.sigmas, dtype=float)
        if not (n_c.shape == values.shape == sigmas.shape) or n_c.ndim != 1:
            raise ValueError("series arrays must be 1D and equally long")
        if np.any(np.diff(n_c) <= 0):
            raise ValueError("n_c must be strictly increasing")
        if np.any(sigmas <= 0):
            raise ValueError("uncertainties must be > 0")
        object.__setattr__(self, "n_c", n_c)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sigmas", sigmas)

    def __len__(self):
        return self.n_c.size


def _covariance(jac: np.ndarray, cost: float, n_points: int, n_params: int,
                absolute: bool) -> np.ndarray | None:
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return None
    if not absolute and n_points > n_params:
        cov = cov * (2.0 * cost / (n_points - n_params))
    return cov


def _run_least_squares(model, p0, names, data, sigma=None,
                       max_nfev=2000) -> FitResult:
    data = np.asarray(data, dtype=float)
    weights = 1.0 if sigma is None else 1.0 / np.asarray(sigma, dtype=float)

    def residual(p):
        return (model(p) - data) * weights

    r0 = residual(np.asarray(p0, dtype=float))
    sol = least_squares(residual, p0, method="lm", max_nfev=max_nfev)
    cov = _covariance(sol.jac, sol.cost, data.size, len(p0), absolute=sigma is not None)
    stderr = {}
    status = STATUS_CONVERGED if sol.status > 0 else STATUS_MAX_ITER
    if cov is None:
        status = STATUS_SINGULAR
        stderr = {n: np.inf for n in names}
    else:
        diag = np.diag(cov)
        if np.any(diag < 0) or not np.all(np.isfinite(diag)):
            status = STATUS_SINGULAR
        stderr = {n: float(np.sqrt(abs(d))) for n, d in zip(names, diag)}
    return FitResult(
        params={n: float(v) for n, v in zip(names, sol.x)},
        stderr=stderr,
        residual_norm=float(np.linalg.norm(sol.fun)),
        status=status,
        n_iter=int(sol.nfev),
        residual_norm_initial=float(np.linalg.norm(r0)),
        covariance=cov,
        param_order=tuple(names),
    )


def weighted_linear_fit(x, y, sigma) -> tuple[float, float, float, float]:
    """Exact weighted LSQ of y = intercept + slope*x via normal equations.

    Returns (intercept, slope, intercept_err, slope_err).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.asarray(sigma, dtype=float) ** 2
    s0, sx, sxx = np.sum(w), np.sum(w * x), np.sum(w * x * x)
    sy, sxy = np.sum(w * y), np.sum(w * x * y)
    det = s0 * sxx - sx * sx
    if det <= 0 or np.unique(x).size < 2:
        raise FitConvergenceError("linear fit needs at least 2 distinct x values")
    intercept = (sxx * sy - sx * sxy) / det
    slope = (s0 * sxy - sx * sy) / det
    return intercept, slope, float(np.sqrt(sxx / det)), float(np.sqrt(s0 / det))


# ---------------------------------------------------------------------------
# coherent cavity response


def _reflection_model(omega, kappa_ex, kappa_eff, delta_bar_eff, scale,
                      g2nc=0.0, omega_m=0.0, gamma_m=1.0):
    denom = (kappa_eff / 2.0 - 1j * (delta_bar_eff + omega))
    if g2nc:
        denom = denom + g2nc / (gamma_m / 2.0 - 1j * (omega - omega_m))
    chi = 1.0 / denom
    return scale * np.abs(1.0 - kappa_ex * chi) ** 2


def _seed_reflection(omega, data):
    """Initial (kappa_eff, delta_bar_eff, scale) from the dip location/width."""
    scale = float(np.median(data))
    if scale <= 0:
        scale = float(np.max(data)) or 1.0
    i_min = int(np.argmin(data))
    dip_center = omega[i_min]
    depth = scale - data[i_min]
    half = data[i_min] + 0.5 * depth
    below = np.flatnonzero(data <= half)
    if below.size >= 2:
        width = omega[below[-1]] - omega[below[0]]
    else:
        width = (omega[-1] - omega[0]) / 10.0
    width = max(width, (omega[1] - omega[0]) * 2.0)
    return width, -dip_center, scale


def fit_coherent_response(spectrum: Spectrum, kappa_ex: float,
                          model: str = "bare", channel: str = "response",
                          initial: dict | None = None) -> FitResult:
    """Fit |reflection|^2 data to the driven-cavity response.

    model='bare' fits (kappa_eff, delta_bar_eff, scale); 'with-mechanics'
    adds the induced-transparency window via (g2nc, omega_m, gamma_m),
    where g2nc = n_c*g0^2.  kappa_ex is held fixed (known from design or
    low-power calibration).  Seeds come from the dip location and width,
    overridable through ``initial``.
    """
    omega = spectrum.omega
    data = np.asarray(spectrum.channel(channel), dtype=float)
    sigma = spectrum.sigmas.get(channel)
    if np.ptp(data) == 0.0:
        return FitResult(params={}, stderr={}, residual_norm=np.inf,
                         status=STATUS_SINGULAR, n_iter=0)
    width, dbar, scale = _seed_reflection(omega, data)
    seeds = {"kappa_eff": width, "delta_bar_eff": dbar, "scale": scale}
    if model == "with-mechanics":
        seeds.update({"g2nc": (width / 10.0) ** 2, "omega_m": -dbar,
                      "gamma_m": width / 100.0})
    if initial:
        seeds.update(initial)

    if model == "bare":
        names = ("kappa_eff", "delta_bar_eff", "scale")

        def fn(p):
            return _reflection_model(omega, kappa_ex, *p)

    elif model == "with-mechanics":
        names = ("kappa_eff", "delta_bar_eff", "scale", "g2nc", "omega_m", "gamma_m")

        def fn(p):
            return _reflection_model(omega, kappa_ex, *p)

    else:
        raise ValueError(f"unknown model {model!r}")

    p0 = [seeds[n] for n in names]
    return _run_least_squares(fn, p0, names, data, sigma)


# ---------------------------------------------------------------------------
# power series


def fit_linewidth_series(series: PowerSeries) -> FitResult:
    """kappa_eff(n_c) = kappa - 2 * kappa_a_sigma0 * n_c, exact weighted LSQ.

    Reports the intercept as ``kappa`` and the loop slope as
    ``kappa_a_sigma0`` = -slope/2 (positive when the linewidth narrows
    with power).
    """
    if len(series) < 3:
        raise FitConvergenceError("linewidth series needs at least 3 points")
    intercept, slope, ierr, serr = weighted_linear_fit(
        series.n_c, series.values, series.sigmas)
    resid = (intercept + slope * series.n_c - series.values) / series.sigmas
    return FitResult(
        params={"kappa": intercept, "kappa_a_sigma0": -slope / 2.0},
        stderr={"kappa": ierr, "kappa_a_sigma0": serr / 2.0},
        residual_norm=float(np.linalg.norm(resid)),
        status=STATUS_CONVERGED,
        n_iter=1,
        residual_norm_initial=float(np.linalg.norm(resid)),
    )


def fit_damping_series(series: PowerSeries, kappa_eff) -> FitResult:
    """Gamma_eff = Gamma_m + g0^2 * (4 n_c / kappa_eff), exact weighted LSQ.

    ``kappa_eff`` is supplied per point (from the coherent-response fits)
    rather than re-derived, keeping the damping fit decoupled from the
    loop model.  Reports g0 (sqrt of the slope) and gamma_m.
    """
    kappa_eff = np.asarray(kappa_eff, dtype=float)
    if kappa_eff.shape != series.n_c.shape:
        raise ValueError("kappa_eff must be given per series point")
    x = 4.0 * series.n_c / kappa_eff
    intercept, slope, ierr, serr = weighted_linear_fit(x, series.values, series.sigmas)
    if slope <= 0:
        raise FitConvergenceError(
            f"damping series slope {slope:g} <= 0: no optomechanical damping")
    g0 = float(np.sqrt(slope))
    resid = (intercept + slope * x - series.values) / series.sigmas
    return FitResult(
        params={"g0": g0, "gamma_m": intercept},
        stderr={"g0": serr / (2.0 * g0), "gamma_m": ierr},
        residual_norm=float(np.linalg.norm(resid)),
        status=STATUS_CONVERGED,
        n_iter=1,
        residual_norm_initial=float(np.linalg.norm(resid)),
    )


# ---------------------------------------------------------------------------
# mechanical sideband


def _lorentzian_model(omega, floor, height, center, gamma):
    return floor + height / (1.0 + (2.0 * (omega - center) / gamma) ** 2)


def fit_mech_spectrum(spectrum: Spectrum, channel: str = "psd") -> FitResult:
    """Floor + Lorentzian fit of a detected mechanical sideband.

    Reports gamma_eff (FWHM), center, floor, height, and the sideband
    area = height*gamma_eff/4 (the integral over the ordinary-frequency
    measure dOmega/2pi), with propagated uncertainty.  Data with no
    significant peak come back with status 'singular'.
    """
    omega = spectrum.omega
    data = np.asarray(spectrum.channel(channel), dtype=float)
    sigma = spectrum.sigmas.get(channel)

    floor0 = float(np.median(data))
    i_pk = int(np.argmax(np.abs(data - floor0)))
    height0 = float(data[i_pk] - floor0)
    center0 = float(omega[i_pk])
    span = omega[-1] - omega[0]
    mask = np.abs(data - floor0) >= 0.5 * abs(height0)
    gamma0 = float(omega[mask][-1] - omega[mask][0]) if mask.sum() >= 2 else span / 10.0
    gamma0 = max(gamma0, 2.0 * float(np.min(np.diff(omega))))

    names = ("floor", "height", "center", "gamma_eff")

    def fn(p):
        return _lorentzian_model(omega, *p)

    result = _run_least_squares(fn, [floor0, height0, center0, gamma0], names,
                                data, sigma)
    result.params["gamma_eff"] = abs(result.params["gamma_eff"])
    h, g = result.params["height"], result.params["gamma_eff"]
    result.params["area"] = h * g / 4.0
    if result.covariance is not None and result.status == STATUS_CONVERGED:
        grad = np.zeros(len(names))
        grad[names.index("height")] = g / 4.0
        grad[names.index("gamma_eff")] = h / 4.0
        var = float(grad @ result.covariance @ grad)
        result.stderr["area"] = float(np.sqrt(abs(var)))
        if abs(h) < 2.0 * result.stderr["height"]:
            result.status = STATUS_SINGULAR
    else:
        result.stderr["area"] = np.inf
        result.status = STATUS_SINGULAR
    return result


# ---------------------------------------------------------------------------
# thermometry


@dataclass(frozen=True)
class ThermometryPoint:
    """Per-power inputs to the thermometry: sideband fit + model quantities."""

    n_c: float
    area: float
    area_sigma: float
    floor: float
    floor_sigma: float
    kappa_eff: float
    n_l: float = 0.0


@dataclass(frozen=True)
class ThermometryModel:
    """Global parameters entering the area-to-phonon conversion."""

    g0: float
    gamma_m: float
    kappa_ex: float


@dataclass
class ThermometryResult:
    calibration: float            # multiplies raw areas into phonons (= 1/eta_ex)
    eta_ex: float
    n_f: np.ndarray
    n_f_sigma: np.ndarray
    n_c: np.ndarray
    eta_ex_floor: float | None = None
    anchor_n_f: float = np.nan


def thermometry(points: list[ThermometryPoint], anchor_n_c: float,
                anchor_n_th: float, model: ThermometryModel) -> ThermometryResult:
    """Anchored mechanical noise thermometry.

    The lowest-power point's bath occupancy ``anchor_n_th`` is converted to
    an anchor phonon number through the damping model (the anchor is not
    assumed backaction-free), which fixes the single calibration factor
    between sideband area and phonons and hence eta_ex; every other area
    then maps to n_f including its loop correlation offset 2*n_l.  Floors
    give an independent eta_ex estimate when the loop floor is resolved.
    """
    if not points:
        raise FitConvergenceError("thermometry needs at least one point")
    n_c = np.array([p.n_c for p in points])
    idx = int(np.argmin(np.abs(n_c - anchor_n_c)))
    anchor = points[idx]
    if abs(anchor.n_c - anchor_n_c) > 1e-6 * max(abs(anchor_n_c), 1.0):
        raise FitConvergenceError(
            f"anchor n_c = {anchor_n_c:g} not present in the series")
    if anchor.area <= 0 or anchor.area_sigma / anchor.area > 0.5:
        raise FitConvergenceError(
            "anchor sideband too uncertain to calibrate "
            f"(relative area error {anchor.area_sigma / max(anchor.area, 1e-300):.2f})")

    def raw(p: ThermometryPoint) -> float:
        # area = eta_ex * 4 kappa_ex n_c g0^2 (n_f - 2 n_l)/kappa_eff^2
        return p.area * p.kappa_eff**2 / (4.0 * model.kappa_ex * p.n_c * model.g0**2)

    g_opt_anchor = 4.0 * anchor.n_c * model.g0**2 / anchor.kappa_eff
    anchor_n_f = ((anchor_n_th * model.gamma_m + g_opt_anchor * anchor.n_l)
                  / (model.gamma_m + g_opt_anchor))
    target = anchor_n_f - 2.0 * anchor.n_l
    if target <= 0:
        raise FitConvergenceError("anchor sideband is squashed; cannot anchor")

    raw_anchor = raw(anchor)
    eta_ex = raw_anchor / target
    if eta_ex <= 0:
        raise FitConvergenceError(f"unphysical eta_ex = {eta_ex:g} from anchor")
    calibration = 1.0 / eta_ex

    rel_anchor = anchor.area_sigma / anchor.area
    n_f = np.empty(len(points))
    n_f_sigma = np.empty(len(points))
    for i, p in enumerate(points):
        signal = calibration * raw(p)
        n_f[i] = signal + 2.0 * p.n_l
        rel_i = p.area_sigma / p.area if p.area > 0 else np.inf
        n_f_sigma[i] = abs(signal) * float(np.hypot(rel_i, rel_anchor))

    eta_floor = _eta_from_floors(points, model)
    return ThermometryResult(calibration=calibration, eta_ex=eta_ex,
                             n_f=n_f, n_f_sigma=n_f_sigma, n_c=n_c,
                             eta_ex_floor=eta_floor, anchor_n_f=anchor_n_f)


def _eta_from_floors(points, model: ThermometryModel) -> float | None:
    """Weighted eta_ex from the excess floors: floor = 1 + eta_ex*4 n_l kappa_ex/kappa_eff."""
    est, wts = [], []
    for p in points:
        if p.n_l <= 0 or not np.isfinite(p.floor_sigma) or p.floor_sigma <= 0:
            continue
        coeff = 4.0 * p.n_l * model.kappa_ex / p.kappa_eff
        est.append((p.floor - 1.0) / coeff)
        wts.append((coeff / p.floor_sigma) ** 2)
    if not est:
        return None
    return float(np.average(est, weights=wts))
