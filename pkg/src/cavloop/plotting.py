"""Static figure rendering for spectrum files.

Output is SVG with a fixed hash salt and no date metadata, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .errors import SpectrumIOError  # noqa: E402
from .spectrum import Spectrum  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cavloop"


def emit_plot(spec: Spectrum, path, channels: list[str] | None = None,
              log_x: bool = False, log_y: bool = False,
              title: str | None = None, ref_line: float | None = None) -> None:
    """Render selected channels of a spectrum to an SVG file.

    Complex channels are plotted as their magnitude.  ``ref_line`` draws a
    horizontal reference (e.g. the shot-noise floor at 1.0).
    """
    if spec.omega.size == 0:
        raise SpectrumIOError("cannot plot an empty spectrum")
    names = channels if channels is not None else sorted(spec.channels)
    missing = [n for n in names if n not in spec.channels]
    if missing:
        raise SpectrumIOError(f"channels not in spectrum: {missing}")

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    x = spec.freq_hz
    for name in names:
        y = spec.channels[name]
        if np.iscomplexobj(y):
            ax.plot(x, np.abs(y), label=f"|{name}|")
        else:
            ax.plot(x, y, label=name)
    if ref_line is not None:
        ax.axhline(ref_line, color="k", linestyle="--", linewidth=0.8)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    if len(names) > 1 or ref_line is not None:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
