"""Plain-text interchange formats.

All numbers are written with 17 significant digits so files round-trip
doubles exactly.  Every writer accepts an optional ``provenance`` mapping
that is echoed as ``# key=value`` header lines (config hash, method, ...).
"""

import csv
import hashlib
import io as _io
import json
import os

import numpy as np

from .direct import DiscreteBath
from .exceptions import ConfigError
from .orthopoly import ChainCoefficients
from .timeseries import TimeGrid, TimeSeries

__all__ = ["fmt", "config_hash", "write_bath", "read_bath", "write_chain", "read_chain",
           "write_series", "read_series", "write_summary", "write_columns", "write_manifest",
           "read_header"]

SUMMARY_COLUMNS = ("method", "N_b", "t_max_empirical", "t_max_predicted",
                   "max_error_before_tmax")


def fmt(x):
    """17 significant digits, the shortest form that round-trips a double."""
    return format(float(x), ".17g")


def config_hash(cfg):
    """sha256 of the canonical JSON form of a config mapping."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _provenance_lines(provenance):
    if not provenance:
        return []
    return [f"# {k}={provenance[k]}" for k in sorted(provenance)]


def _write(path, lines):
    # newline="\n" keeps output byte-identical across platforms
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_header(path):
    """``# key=value`` pairs from the leading comment block."""
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    out[k] = v
    return out


def _data_rows(path):
    with open(path) as fh:
        return [line.split() for line in fh if line.strip() and not line.startswith("#")]


def write_bath(path, bath, provenance=None):
    a, b = bath.support
    lines = [f"# method={bath.method} N_b={bath.n_modes} support={fmt(a)},{fmt(b)}"]
    lines += _provenance_lines(provenance)
    lines += [f"{n} {fmt(x)} {fmt(w)}"
              for n, (x, w) in enumerate(zip(bath.energies, bath.weights), 1)]
    _write(path, lines)


def read_bath(path):
    head = read_header(path)
    try:
        a, b = (float(v) for v in head["support"].split(","))
        method = head.get("method", "")
        n_b = int(head["N_b"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed bath header ({exc})", "bath_file") from exc
    rows = _data_rows(path)
    if len(rows) != n_b:
        raise ConfigError(f"{path}: header says N_b={n_b} but {len(rows)} rows found",
                          "bath_file")
    x = np.array([float(r[1]) for r in rows])
    w = np.array([float(r[2]) for r in rows])
    return DiscreteBath(x, w, method, (a, b))


def write_chain(path, chain, provenance=None):
    lines = [f"# v_tot={fmt(chain.v_tot)} N_b={chain.n_sites}"]
    lines += _provenance_lines(provenance)
    betas = [None] + list(chain.betas)  # beta_0 is not written
    for n, a in enumerate(chain.alphas):
        lines.append(f"{n} {fmt(a)}" + ("" if n == 0 else f" {fmt(betas[n])}"))
    _write(path, lines)


def read_chain(path):
    head = read_header(path)
    rows = _data_rows(path)
    alphas = [float(r[1]) for r in rows]
    betas = [float(r[2]) for r in rows[1:]]
    return ChainCoefficients(float(head["v_tot"]), alphas, betas, {"source": str(path)})


def write_series(path, series, provenance=None):
    """``t,re,im`` for complex series, ``t,value`` for real ones."""
    lines = [f"# name={series.name or 'series'} dt={fmt(series.grid.dt)} "
             f"count={series.grid.count}"]
    lines += _provenance_lines(provenance)
    vals = np.asarray(series.values)
    t = series.grid.times
    if np.iscomplexobj(vals):
        lines.append("t,re,im")
        lines += [f"{fmt(ti)},{fmt(v.real)},{fmt(v.imag)}" for ti, v in zip(t, vals)]
    else:
        lines.append("t,value")
        lines += [f"{fmt(ti)},{fmt(v)}" for ti, v in zip(t, vals)]
    _write(path, lines)


def read_series(path):
    head = read_header(path)
    with open(path) as fh:
        body = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(_io.StringIO("".join(body)))
    cols = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row])
    dt = float(head.get("dt", data[1, 0] - data[0, 0] if len(data) > 1 else 1.0))
    grid = TimeGrid(dt, len(data))
    if cols == ["t", "re", "im"]:
        vals = data[:, 1] + 1j * data[:, 2]
    elif cols == ["t", "value"]:
        vals = data[:, 1]
    else:
        raise ConfigError(f"{path}: unknown columns {cols}", "series_file")
    return TimeSeries(grid, vals, head.get("name", ""))


def write_summary(path, rows, provenance=None):
    lines = _provenance_lines(provenance) + [",".join(SUMMARY_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c in ("method", "N_b") else fmt(r[c])
                              for c in SUMMARY_COLUMNS))
    _write(path, lines)


def write_columns(path, columns, provenance=None):
    """CSV of named equal-length numeric columns."""
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    lines = _provenance_lines(provenance) + [",".join(names)]
    lines += [",".join(fmt(v) for v in row) for row in zip(*cols)]
    _write(path, lines)


def write_manifest(path, data):
    with open(path, "w", newline="\n") as fh:
        json.dump(data, fh, sort_keys=True, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    return str(obj)
