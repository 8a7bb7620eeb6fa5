"""Command-line interface.

One subcommand per physics question; every command reads a YAML config
(`--config`), writes CSV spectra / key-value reports into `--out`, and is
deterministic: identical inputs produce byte-identical outputs.  Output
files embed the config hash in their comment header unless
`--no-metadata` is given.

Exit codes: 0 success, 2 usage, 3 config, 4 numeric-instability,
5 fit-nonconvergence, 6 io.  Failures print a JSON error record to
stderr.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, core, fitting, optomech, oracle, squeezing, thermal
from .config import DETUNING_AUTO, RunConfig, parse_config
from .errors import (
    CavloopError,
    ConfigError,
    FitConvergenceError,
    LoopInstabilityError,
    SpectrumIOError,
    UnsupportedConfigurationError,
)
from .plotting import emit_plot
from .spectrum import (
    Spectrum,
    Table,
    frequency_grid,
    read_csv,
    read_table,
    write_csv,
    write_table,
)

TWO_PI = 2.0 * math.pi

EXIT_CODES = {
    "config": 3,
    "numeric-instability": 4,
    "fit-nonconvergence": 5,
    "io": 6,
}


def _category(exc: Exception) -> str:
    if isinstance(exc, (ConfigError, UnsupportedConfigurationError)):
        return "config"
    if isinstance(exc, LoopInstabilityError):
        return "numeric-instability"
    if isinstance(exc, FitConvergenceError):
        return "fit-nonconvergence"
    return "io"


def _fail(exc: Exception) -> None:
    category = _category(exc)
    record = {"error": {"category": category, "message": str(exc)}}
    if isinstance(exc, ConfigError):
        record["error"]["violations"] = exc.violations
    click.echo(json.dumps(record), err=True)
    sys.exit(EXIT_CODES[category])


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CavloopError, OSError) as exc:
            _fail(exc)
    return wrapper


def common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="YAML run configuration.")(fn)
    fn = click.option("--out", "out_dir", default=".", type=click.Path(),
                      help="Output directory.")(fn)
    fn = click.option("--grid", "grid_spec", default=None,
                      help="Override sweep: start,stop,points[,log] in Hz.")(fn)
    fn = click.option("--no-metadata", is_flag=True,
                      help="Omit provenance comments from outputs.")(fn)
    fn = click.option("--jobs", default=1, show_default=True,
                      help="Worker threads for grid evaluation.")(fn)
    fn = click.option("--plot", "render_plot", is_flag=True,
                      help="Also render the spectrum to SVG.")(fn)
    return fn


class Ctx:
    """Resolved per-command context: config, grid, output policy."""

    def __init__(self, command, config_path, out_dir, grid_spec, no_metadata, jobs):
        self.command = command
        self.cfg: RunConfig = parse_config(config_path)
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.grid_spec = grid_spec
        self.metadata_on = not no_metadata
        self.jobs = max(int(jobs), 1)

    def metadata(self) -> dict[str, str]:
        return {
            "tool": f"cavloop {__version__}",
            "command": self.command,
            "config_hash": self.cfg.config_hash(),
        }

    def grid(self) -> np.ndarray:
        if self.grid_spec:
            parts = [p.strip() for p in self.grid_spec.split(",")]
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
                raise ConfigError(
                    ["--grid must be start,stop,points[,log] (Hz)"])
            try:
                start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ConfigError([f"--grid: {exc}"]) from exc
            return frequency_grid(start, stop, points, log=len(parts) == 4)
        start, stop, points, log = self.cfg.sweep()
        return frequency_grid(start, stop, points, log=log)

    def write_spectrum(self, spec: Spectrum, name: str,
                       render_plot: bool = False, **plot_kwargs) -> Path:
        spec.metadata = self.metadata() if self.metadata_on else {}
        path = self.out / f"{name}.csv"
        write_csv(spec, path, include_metadata=self.metadata_on)
        click.echo(f"wrote {path}")
        if render_plot:
            svg = self.out / f"{name}.svg"
            emit_plot(spec, svg, **plot_kwargs)
            click.echo(f"wrote {svg}")
        return path

    def write_table(self, table: Table, name: str) -> Path:
        table.metadata = self.metadata() if self.metadata_on else {}
        path = self.out / f"{name}.csv"
        write_table(table, path, include_metadata=self.metadata_on)
        click.echo(f"wrote {path}")
        return path

    def write_report(self, values: dict, name: str) -> Path:
        path = self.out / f"{name}.txt"
        lines = []
        if self.metadata_on:
            for key, val in self.metadata().items():
                lines.append(f"# {key}: {val}")
        for key, val in values.items():
            if isinstance(val, float):
                lines.append(f"{key} = {val!r}")
            else:
                lines.append(f"{key} = {val}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        click.echo(f"wrote {path}")
        return path


def _resolved_detuning(ctx: Ctx, mode: str) -> float:
    """Detuning in rad/s; 'auto' derives the command's canonical condition."""
    cfg = ctx.cfg
    if not cfg.detuning_is_auto():
        return cfg.cavity().detuning
    cavity0 = cfg.cavity(detuning=0.0)
    if mode == "cooling":
        return optomech.detuning_for_optimal_cooling(
            cavity0, cfg.thermal(), cfg.mechanical(), cfg.n_c())
    if mode == "zero-shift":
        return squeezing.detuning_for_zero_shift(
            cavity0, cfg.thermal(), cfg.kerr(), cfg.n_c())
    raise ConfigError([f"cavity.detuning_hz '{DETUNING_AUTO}' is not supported "
                       f"by the {ctx.command} command"])


@click.group()
@click.version_option(__version__, prog_name="cavloop")
def main():
    """Frequency-domain cavity spectroscopy with dissipative feedback."""


@main.command("cavity-response")
@common_options
@_guarded
def cavity_response(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Feedback-modified cavity susceptibility and in-loop PSD sweep."""
    ctx = Ctx("cavity-response", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    detuning = (_resolved_detuning(ctx, "cooling") if cfg.detuning_is_auto()
                else cfg.cavity().detuning)
    cavity = cfg.cavity(detuning=detuning)
    th = cfg.thermal()
    n_c = cfg.n_c()
    omega = ctx.grid()
    dbar = core.delta_bar(cavity, th, n_c)
    sd = core.sigma_d(th, n_c, omega)
    spec = Spectrum(omega=omega, channels={
        "chi_c0": core.chi_c0(cavity, dbar, omega),
        "chi_c_eff": core.chi_c_eff(cavity, th, n_c, omega, dbar),
        "chi_c_eff_abs2": np.abs(core.chi_c_eff(cavity, th, n_c, omega, dbar)) ** 2,
        "inloop_psd": core.inloop_flux_psd(cavity, th, n_c, omega, dbar),
        "kappa_eff_hz": (cavity.kappa - 2.0 * cavity.kappa_a * np.real(sd)) / TWO_PI,
        "delta_bar_eff_hz": (dbar + cavity.kappa_a * np.imag(sd)) / TWO_PI,
    })
    ctx.write_spectrum(spec, "cavity_response", render_plot,
                       channels=["chi_c_eff_abs2", "inloop_psd"], log_y=True)


@main.command("heterodyne")
@common_options
@_guarded
def heterodyne(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Balanced-heterodyne sideband PSD on the analyzer grid."""
    ctx = Ctx("heterodyne", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "cooling"))
    spec = optomech.heterodyne_psd(cavity, cfg.thermal(), cfg.mechanical(),
                                   cfg.detection(), cfg.n_c(), ctx.grid())
    ctx.write_spectrum(spec, "heterodyne_psd", render_plot, ref_line=1.0)


@main.command("mech-psd")
@common_options
@_guarded
def mech_psd(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Two-sided mechanical displacement spectra."""
    ctx = Ctx("mech-psd", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "cooling"))
    spec = optomech.mechanical_psd(cavity, cfg.thermal(), cfg.mechanical(),
                                   cfg.n_c(), ctx.grid())
    ctx.write_spectrum(spec, "mechanical_psd", render_plot, log_y=True)


@main.command("cooling-report")
@common_options
@_guarded
def cooling_report_cmd(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Sideband-cooling summary: kappa_eff, damping, n_l, n_f, floor, SNR."""
    ctx = Ctx("cooling-report", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "cooling"))
    report = optomech.cooling_report(cavity, cfg.thermal(), cfg.mechanical(),
                                     cfg.detection(), cfg.n_c(), cfg.temperature())
    values = {
        "n_c": report.n_c,
        "kappa_eff_hz": report.kappa_eff / TWO_PI,
        "delta_bar_eff_hz": report.delta_bar_eff / TWO_PI,
        "gamma_opt_hz": report.gamma_opt / TWO_PI,
        "gamma_eff_hz": report.gamma_eff / TWO_PI,
        "n_l": report.n_l,
        "n_th": report.n_th,
        "n_f": report.n_f,
        "bg_excess": report.bg_excess,
        "floor": report.floor,
    }
    if report.snr is not None:
        values["snr"] = report.snr
    ctx.write_report(values, "cooling_report")


@main.command("squeezing")
@common_options
@_guarded
def squeezing_cmd(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Homodyne quadrature PSD sweep at a fixed or per-frequency optimal angle."""
    ctx = Ctx("squeezing", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "zero-shift"))
    th, kerr, det = cfg.thermal(), cfg.kerr(), cfg.detection()
    n_c = cfg.n_c()
    omega = ctx.grid()
    angle = cfg.raw.get("squeezing", {}).get("angle", "optimal")
    if angle == "optimal":
        theta = np.asarray(squeezing.combined_optimal_angle(cavity, th, kerr, n_c, omega))
    else:
        theta = np.full(omega.shape, float(angle))
    point = squeezing.homodyne_psd(cavity, th, kerr, det, n_c, theta, omega)
    kerr_min, _ = squeezing.kerr_min_and_angle(cavity, kerr, det, n_c, omega)
    spec = Spectrum(omega=omega, channels={
        "total": point.total,
        "kerr_part": point.kerr_part,
        "excess_absorption": point.excess_absorption,
        "excess_coherent": point.excess_coherent,
        "kerr_only_min": kerr_min,
        "theta_rad": theta,
    })
    ctx.write_spectrum(spec, "squeezing_psd", render_plot,
                       channels=["total", "kerr_only_min"], log_x=True, ref_line=1.0)


@main.command("thermal-response")
@common_options
@_guarded
def thermal_response(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot):
    """Geometry-resolved photothermal response and optional pole fit."""
    ctx = Ctx("thermal-response", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    sec = cfg.raw.get("thermal_solver")
    if sec is None:
        raise ConfigError(["missing required config section 'thermal_solver'"])
    power = sec.get("absorbed_power_w", 1.0)
    spec = thermal.heat_response(cfg.geometry(), cfg.material(), ctx.grid(),
                                 absorbed_power=power)
    ctx.write_spectrum(spec, "thermal_response", render_plot, log_x=True, log_y=True)
    n_poles = sec.get("fit_poles")
    if n_poles:
        resonance = cfg.raw.get("cavity", {}).get("resonance_hz")
        if resonance is None:
            raise ConfigError(
                ["thermal_solver.fit_poles needs cavity.resonance_hz for the "
                 "per-photon gain conversion"])
        per_watt = Spectrum(omega=spec.omega, channels={
            "dwc_over_wc": spec.channel("dwc_over_wc") / power})
        model, fit = thermal.fit_poles(per_watt, n_poles, TWO_PI * resonance)
        values: dict = {"n_poles": n_poles, "residual_norm": fit.residual_norm}
        for i, (gain, gamma) in enumerate(model.poles):
            values[f"pole{i}_gain_hz"] = gain / TWO_PI
            values[f"pole{i}_gamma_hz"] = gamma / TWO_PI
        ctx.write_report(values, "thermal_poles")


@main.command("fit-response")
@common_options
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Spectrum CSV with the coherent response channel.")
@_guarded
def fit_response(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot,
                 input_path):
    """Fit a coherent cavity response for kappa_eff and the detuning."""
    ctx = Ctx("fit-response", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    sec = cfg.raw.get("fit", {})
    spec = read_csv(input_path)
    result = fitting.fit_coherent_response(
        spec, cfg.cavity(detuning=0.0).kappa_ex,
        model=sec.get("model", "bare"), channel=sec.get("channel", "response"))
    _report_fit(ctx, result, "fit_response",
                hz_params=("kappa_eff", "delta_bar_eff", "omega_m", "gamma_m"))


@main.command("fit-linewidth-series")
@common_options
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Series table: n_c, kappa_eff_hz, sigma_kappa_eff_hz.")
@_guarded
def fit_linewidth_series_cmd(config_path, out_dir, grid_spec, no_metadata, jobs,
                             render_plot, input_path):
    """Linear fit of kappa_eff vs n_c for the bare kappa and loop slope."""
    ctx = Ctx("fit-linewidth-series", config_path, out_dir, grid_spec,
              no_metadata, jobs)
    table = read_table(input_path)
    series = fitting.PowerSeries(
        n_c=table.column("n_c"),
        values=TWO_PI * table.column("kappa_eff_hz"),
        sigmas=TWO_PI * table.column("sigma_kappa_eff_hz"))
    result = fitting.fit_linewidth_series(series)
    _report_fit(ctx, result, "fit_linewidth", hz_params=("kappa", "kappa_a_sigma0"))


@main.command("fit-mech")
@common_options
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Spectrum CSV with the detected sideband (channel 'psd').")
@_guarded
def fit_mech(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot,
             input_path):
    """Floor + Lorentzian fit of a detected mechanical sideband."""
    ctx = Ctx("fit-mech", config_path, out_dir, grid_spec, no_metadata, jobs)
    sec = ctx.cfg.raw.get("fit", {})
    spec = read_csv(input_path)
    result = fitting.fit_mech_spectrum(spec, channel=sec.get("channel", "psd"))
    _report_fit(ctx, result, "fit_mech",
                hz_params=("gamma_eff", "center", "area"))


@main.command("thermometry")
@common_options
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Series table: n_c, area_hz, sigma_area_hz, floor, "
                   "sigma_floor, kappa_eff_hz, n_l.")
@_guarded
def thermometry_cmd(config_path, out_dir, grid_spec, no_metadata, jobs,
                    render_plot, input_path):
    """Anchored noise thermometry: eta_ex and the phonon-number series."""
    ctx = Ctx("thermometry", config_path, out_dir, grid_spec, no_metadata, jobs)
    cfg = ctx.cfg
    sec = cfg.raw.get("thermometry")
    if sec is None:
        raise ConfigError(["missing required config section 'thermometry'"])
    mech = cfg.mechanical()
    table = read_table(input_path)
    points = [
        fitting.ThermometryPoint(
            n_c=n, area=TWO_PI * a, area_sigma=TWO_PI * sa,
            floor=f, floor_sigma=sf, kappa_eff=TWO_PI * ke, n_l=nl)
        for n, a, sa, f, sf, ke, nl in zip(
            table.column("n_c"), table.column("area_hz"),
            table.column("sigma_area_hz"), table.column("floor"),
            table.column("sigma_floor"), table.column("kappa_eff_hz"),
            table.column("n_l"))
    ]
    model = fitting.ThermometryModel(g0=mech.g0, gamma_m=mech.gamma_m,
                                     kappa_ex=cfg.cavity(detuning=0.0).kappa_ex)
    result = fitting.thermometry(points, sec["anchor_n_c"], sec["anchor_n_th"], model)
    values = {
        "eta_ex": result.eta_ex,
        "calibration": result.calibration,
        "anchor_n_f": result.anchor_n_f,
    }
    if result.eta_ex_floor is not None:
        values["eta_ex_floor"] = result.eta_ex_floor
    ctx.write_report(values, "thermometry")
    ctx.write_table(Table(columns={
        "n_c": result.n_c, "n_f": result.n_f, "sigma_n_f": result.n_f_sigma}),
        "thermometry_nf")


@main.command("oracle-check")
@common_options
@click.option("--compare", "compare_paths", nargs=2, type=click.Path(),
              default=None, help="Compare two spectrum CSVs instead of running.")
@_guarded
def oracle_check(config_path, out_dir, grid_spec, no_metadata, jobs, render_plot,
                 compare_paths):
    """Side-by-side closed form vs brute-force linear-system PSD."""
    ctx = Ctx("oracle-check", config_path, out_dir, grid_spec, no_metadata, jobs)
    if compare_paths:
        _compare_spectra(*compare_paths)
        return
    cfg = ctx.cfg
    sec = cfg.raw.get("oracle_check")
    if sec is None:
        raise ConfigError(["missing required config section 'oracle_check'"])
    mode = sec["mode"]
    omega = ctx.grid()
    n_c = cfg.n_c()
    th = cfg.thermal()

    if mode == "homodyne":
        cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "zero-shift"))
        kerr, det = cfg.kerr(), cfg.detection()
        theta = sec.get("theta_rad", cfg.detection().theta)
        closed = squeezing.homodyne_psd(cavity, th, kerr, det, n_c, theta, omega).total
        model = oracle.OracleModel(cavity, th, n_c, g_kerr=kerr.g_kerr)
        brute = _oracle_map(model, oracle.Homodyne(theta), omega, det.eta_ex, ctx.jobs)
    elif mode == "heterodyne":
        cavity = cfg.cavity(detuning=_resolved_detuning(ctx, "cooling"))
        mech, det = cfg.mechanical(), cfg.detection()
        closed = optomech.heterodyne_psd(cavity, th, mech, det, n_c,
                                         omega).channel("psd")
        model = oracle.OracleModel(cavity, th, n_c, mech=mech)
        brute = _oracle_map(model, oracle.Heterodyne(det.delta_lo), omega,
                            det.eta_ex, ctx.jobs)
    else:  # inloop
        detuning = (_resolved_detuning(ctx, "cooling")
                    if ctx.cfg.detuning_is_auto() else cfg.cavity().detuning)
        cavity = cfg.cavity(detuning=detuning)
        closed = np.asarray(core.inloop_flux_psd(cavity, th, n_c, omega))
        model = oracle.OracleModel(cavity, th, n_c)
        brute = _oracle_map(model, oracle.InLoopFlux(), omega, 1.0, ctx.jobs)

    rel_err = np.abs(closed - brute) / np.abs(brute)
    spec = Spectrum(omega=omega, channels={
        "closed_form": np.asarray(closed, dtype=float),
        "oracle": brute,
        "rel_err": rel_err,
    })
    ctx.write_spectrum(spec, "oracle_check", render_plot,
                       channels=["rel_err"], log_y=True)
    click.echo(f"max rel_err = {np.max(rel_err):.3e}")


def _oracle_map(model, measurement, omega, eta_ex, jobs) -> np.ndarray:
    if jobs <= 1 or omega.size < 64:
        return oracle.psd(model, measurement, omega, eta_ex=eta_ex)
    chunks = np.array_split(omega, jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(
            lambda w: oracle.psd(model, measurement, w, eta_ex=eta_ex), chunks)
    return np.concatenate(list(parts))


def _compare_spectra(path_a, path_b) -> None:
    spec_a, spec_b = read_csv(path_a), read_csv(path_b)
    hash_a = spec_a.metadata.get("config_hash")
    hash_b = spec_b.metadata.get("config_hash")
    if hash_a != hash_b or hash_a is None:
        raise ConfigError(
            [f"config hash mismatch: {path_a} has {hash_a!r}, {path_b} has "
             f"{hash_b!r}; refusing to compare spectra from different runs"])
    if spec_a.omega.shape != spec_b.omega.shape or \
            not np.allclose(spec_a.omega, spec_b.omega):
        raise SpectrumIOError("frequency grids differ; cannot compare")
    common = sorted(set(spec_a.channels) & set(spec_b.channels))
    if not common:
        raise SpectrumIOError("no common channels to compare")
    for name in common:
        a, b = spec_a.channels[name], spec_b.channels[name]
        scale = np.maximum(np.abs(b), 1e-300)
        err = float(np.max(np.abs(a - b) / scale))
        click.echo(f"{name}: max rel_err = {err:.3e}")


@main.command("plot")
@click.argument("input_path", type=click.Path())
@click.option("--out", "out_dir", default=".", type=click.Path())
@click.option("--channels", default=None, help="Comma-separated channel names.")
@click.option("--logx", is_flag=True)
@click.option("--logy", is_flag=True)
@click.option("--title", default=None)
@click.option("--ref-line", type=float, default=None,
              help="Horizontal reference line (e.g. 1.0 for shot noise).")
@_guarded
def plot_cmd(input_path, out_dir, channels, logx, logy, title, ref_line):
    """Render a spectrum CSV to a deterministic SVG figure."""
    spec = read_csv(input_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / (Path(input_path).stem + ".svg")
    names = [c.strip() for c in channels.split(",")] if channels else None
    emit_plot(spec, path, channels=names, log_x=logx, log_y=logy,
              title=title, ref_line=ref_line)
    click.echo(f"wrote {path}")


def _report_fit(ctx: Ctx, result: fitting.FitResult, name: str,
                hz_params=()) -> None:
    values: dict = {"status": result.status, "n_iter": result.n_iter,
                    "residual_norm": result.residual_norm}
    for key, val in result.params.items():
        if key in hz_params:
            values[f"{key}_hz"] = val / TWO_PI
            err = result.stderr.get(key)
            if err is not None:
                values[f"sigma_{key}_hz"] = err / TWO_PI
        else:
            values[key] = val
            err = result.stderr.get(key)
            if err is not None:
                values[f"sigma_{key}"] = err
    ctx.write_report(values, name)
    if result.status != fitting.STATUS_CONVERGED:
        raise FitConvergenceError(
            f"fit finished with status '{result.status}' (see {name}.txt)")
