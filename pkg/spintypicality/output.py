import hashlib
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pandas as pd
from matplotlib import rc_context
from matplotlib.figure import Figure

from spintypicality.errors import DimensionError, DomainError, OutputError
from spintypicality.experiments import PolarizationTrace, TimeGrid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
LINESTYLES = ("-", "--", "-.", ":")
SVG_SETTINGS = {"svg.hashsalt": "spintypicality", "svg.fonttype": "none"}


def _frame(series):
    if not series:
        raise DomainError("nothing to write, no traces given")
    grid = series[0].grid
    columns = {"t": grid.times}
    for trace in series:
        if trace.grid != grid:
            raise DimensionError(f"trace {trace.label!r} is sampled on {trace.grid}, expected {grid}")
        if trace.label in columns:
            raise DomainError(f"duplicate column {trace.label!r}")
        columns[trace.label] = np.asarray(trace.values, dtype=np.float64)
    return pd.DataFrame(columns)


def _parent(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise OutputError(f"cannot create {path.parent}: {error}") from error
    return path


def emit_csv(series, path):
    """
    Writes traces sharing one grid as CSV.

    Args
    ----------
    series : list
        Traces (polarization or residual), one column each, named by their label
    path : str
        Output file

    Returns
    -------
     Path: the written file
    """
    frame = _frame(series)
    path = _parent(path)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    except OSError as error:
        raise OutputError(f"cannot write {path}: {error}") from error
    logger.info("wrote %d column(s) to %s", len(series), path)
    return path


def read_csv_traces(path):
    """Reads a CSV written by ``emit_csv`` back into one trace per column."""
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except OSError as error:
        raise OutputError(f"cannot read {path}: {error}") from error
    if "t" not in frame.columns or len(frame) < 2:
        raise DimensionError(f"{path} holds no trace: need a 't' column and at least 2 rows")
    times = frame["t"].to_numpy()
    grid = TimeGrid(float(times[-1]), len(times))
    return [PolarizationTrace(grid, frame[name].to_numpy(), name) for name in frame.columns if name != "t"]


def emit_svg_plot(series, path, time_unit="1/b_x", title=None):
    """
    Static line plot of one or more traces as a standalone SVG document.

    The y axis is fixed to [-1, 1] with a reference line at 0. Every trace
    is drawn in its own line style and grouped under its label as SVG id.
    """
    if not series:
        raise DomainError("nothing to plot, no traces given")
    path = _parent(path)
    with rc_context(SVG_SETTINGS):
        fig = Figure(figsize=(7, 4))
        ax = fig.subplots()
        for k, trace in enumerate(series):
            (line,) = ax.plot(trace.times, trace.values, LINESTYLES[k % len(LINESTYLES)], label=trace.label)
            line.set_gid(trace.label)
        ax.axhline(0.0, color="grey", linewidth=0.5)
        ax.set_ylim(-1.0, 1.0)
        ax.set_xlim(0.0, series[0].grid.t_max)
        ax.set_xlabel(f"t [{time_unit}]")
        ax.set_ylabel("P(t)")
        if title:
            ax.set_title(title)
        ax.legend()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as error:
            raise OutputError(f"cannot write {path}: {error}") from error
    logger.info("wrote plot of %d trace(s) to %s", len(series), path)
    return path


def checksum(path):
    """sha256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(manifest, path):
    path = _parent(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True, default=_json_default)
            handle.write("\n")
    except OSError as error:
        raise OutputError(f"cannot write {path}: {error}") from error
    logger.info("wrote manifest %s", path)
    return path


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")
