"""Spectrum payload and its CSV file format.

A Spectrum is a frequency grid plus labeled channels (real or complex) and
optional per-channel uncertainties.  Internally the grid is angular
(rad/s); on disk the first column is ordinary frequency `freq_hz`.
Complex channels are stored as `<name>_re` / `<name>_im` column pairs and
reassembled on read.  `#`-prefixed header lines carry provenance metadata
(`# key: value`).  Floats are written with shortest round-trip repr, so a
file produced by this module re-reads and re-writes byte-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpectrumIOError

FORMAT_LINE = "cavloop spectrum v1"


@dataclass
class Spectrum:
    """Frequency grid (rad/s) with labeled sample channels."""

    omega: np.ndarray
    channels: dict[str, np.ndarray]
    sigmas: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.ndim != 1:
            raise SpectrumIOError("frequency grid must be one-dimensional")
        if np.any(np.diff(self.omega) <= 0):
            raise SpectrumIOError("frequency grid must be strictly increasing")
        if not self.channels:
            raise SpectrumIOError("spectrum needs at least one channel")
        for name, values in self.channels.items():
            values = np.asarray(values)
            if values.shape != self.omega.shape:
                raise SpectrumIOError(
                    f"channel {name!r} length {values.shape} != grid {self.omega.shape}")
            self.channels[name] = values
        for name, values in self.sigmas.items():
            if name not in self.channels:
                raise SpectrumIOError(f"sigma column for unknown channel {name!r}")
            self.sigmas[name] = np.asarray(values, dtype=float)

    @property
    def freq_hz(self) -> np.ndarray:
        return self.omega / (2.0 * math.pi)

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise SpectrumIOError(
                f"no channel {name!r}; available: {sorted(self.channels)}") from None


def _fmt(x: float) -> str:
    return repr(float(x))


def _columns(spec: Spectrum):
    """Flatten channels into (header, column-array) pairs, re/im split."""
    cols = [("freq_hz", spec.freq_hz)]
    for name, values in spec.channels.items():
        if np.iscomplexobj(values):
            cols.append((f"{name}_re", np.real(values)))
            cols.append((f"{name}_im", np.imag(values)))
        else:
            cols.append((name, np.asarray(values, dtype=float)))
        if name in spec.sigmas:
            cols.append((f"sigma_{name}", spec.sigmas[name]))
    return cols


def write_csv(spec: Spectrum, path, include_metadata: bool = True) -> None:
    cols = _columns(spec)
    lines = [f"# {FORMAT_LINE}"]
    if include_metadata:
        for key, value in spec.metadata.items():
            lines.append(f"# {key}: {value}")
    lines.append(",".join(name for name, _ in cols))
    arrays = [values for _, values in cols]
    for i in range(spec.omega.size):
        lines.append(",".join(_fmt(a[i]) for a in arrays))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> Spectrum:
    metadata: dict[str, str] = {}
    header = None
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise SpectrumIOError(f"cannot open spectrum file {path}: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body == FORMAT_LINE:
                    continue
                if ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SpectrumIOError(
                    f"{path}: row has {len(parts)} fields, header has {len(header)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise SpectrumIOError(f"{path}: non-numeric field ({exc})") from exc
    if header is None or not rows:
        raise SpectrumIOError(f"{path}: no data rows")
    if header[0] != "freq_hz":
        raise SpectrumIOError(f"{path}: first column must be freq_hz, got {header[0]!r}")

    data = np.asarray(rows, dtype=float)
    omega = data[:, 0] * 2.0 * math.pi
    channels: dict[str, np.ndarray] = {}
    sigmas: dict[str, np.ndarray] = {}
    i = 1
    while i < len(header):
        name = header[i]
        if name.endswith("_re") and i + 1 < len(header) and header[i + 1] == name[:-3] + "_im":
            channels[name[:-3]] = data[:, i] + 1j * data[:, i + 1]
            i += 2
        elif name.startswith("sigma_"):
            sigmas[name[len("sigma_"):]] = data[:, i]
            i += 1
        else:
            channels[name] = data[:, i]
            i += 1
    return Spectrum(omega=omega, channels=channels, sigmas=sigmas, metadata=metadata)


TABLE_FORMAT_LINE = "cavloop table v1"


@dataclass
class Table:
    """Plain labeled-column table (power series, thermometry output).

    Same comment/metadata conventions as spectrum files, but without the
    frequency-grid invariants.
    """

    columns: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {np.asarray(v).size for v in self.columns.values()}
        if not self.columns or len(lengths) != 1:
            raise SpectrumIOError("table needs equally long, non-empty columns")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SpectrumIOError(
                f"no column {name!r}; available: {sorted(self.columns)}") from None


def write_table(table: Table, path, include_metadata: bool = True) -> None:
    lines = [f"# {TABLE_FORMAT_LINE}"]
    if include_metadata:
        for key, value in table.metadata.items():
            lines.append(f"# {key}: {value}")
    names = list(table.columns)
    lines.append(",".join(names))
    arrays = [table.columns[n] for n in names]
    for i in range(arrays[0].size):
        lines.append(",".join(_fmt(a[i]) for a in arrays))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path) -> Table:
    metadata: dict[str, str] = {}
    header = None
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise SpectrumIOError(f"cannot open table {path}: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body != TABLE_FORMAT_LINE and ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SpectrumIOError(
                    f"{path}: row has {len(parts)} fields, header has {len(header)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise SpectrumIOError(f"{path}: non-numeric field ({exc})") from exc
    if header is None or not rows:
        raise SpectrumIOError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return Table(columns={name: data[:, i] for i, name in enumerate(header)},
                 metadata=metadata)


def frequency_grid(start_hz: float, stop_hz: float, points: int,
                   log: bool = False) -> np.ndarray:
    """Angular-frequency grid from an ordinary-frequency specification."""
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    if stop_hz <= start_hz:
        raise ValueError("grid stop must exceed start")
    if log:
        if start_hz <= 0:
            raise ValueError("log grid needs start > 0")
        f = np.geomspace(start_hz, stop_hz, points)
    else:
        f = np.linspace(start_hz, stop_hz, points)
    return 2.0 * math.pi * f
