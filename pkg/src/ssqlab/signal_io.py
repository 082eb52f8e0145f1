"""Signal files and delimited output tables.

Text signals start with a header ``# dt=<seconds> t0=<seconds>`` followed by
one sample per line, either ``value`` or ``re,im``. Binary signals are
``b"SSQ1"``, a little-endian u64 count, f64 dt, f64 t0 and then interleaved
f64 real/imaginary pairs.
"""

from __future__ import annotations

import io
import math
import os
import re
import struct

import numpy as np

from .errors import DataError
from .sst import TFR, SignalGrid

__all__ = [
    "MAGIC",
    "read_signal",
    "write_signal",
    "read_text_signal",
    "write_text_signal",
    "read_binary_signal",
    "write_binary_signal",
    "write_table",
    "write_matrix",
    "write_tfr",
]

MAGIC = b"SSQ1"
_HEAD = struct.Struct("<4sQdd")
_HEADER_RE = re.compile(r"^#\s*dt\s*=\s*(\S+)\s+t0\s*=\s*(\S+)\s*$")


def _float(tok, row):
    try:
        x = float(tok)
    except ValueError:
        raise DataError(f"row {row}: cannot parse {tok!r} as a number") from None
    if not math.isfinite(x):
        raise DataError(f"row {row}: non-finite value {tok!r}")
    return x


def read_text_signal(path) -> SignalGrid:
    """Parse a text signal file; errors name the offending line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty input file")
    m = _HEADER_RE.match(lines[0].strip())
    if m is None:
        raise DataError(f"row 1: expected header '# dt=<seconds> t0=<seconds>', got {lines[0]!r}")
    dt, t0 = _float(m.group(1), 1), _float(m.group(2), 1)
    if not dt > 0:
        raise DataError("row 1: dt must be positive")
    vals = []
    for row, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) == 1:
            vals.append(complex(_float(parts[0], row), 0.0))
        elif len(parts) == 2:
            vals.append(complex(_float(parts[0], row), _float(parts[1], row)))
        else:
            raise DataError(f"row {row}: expected 'value' or 're,im', got {line!r}")
    if not vals:
        raise DataError(f"{path}: no samples after the header")
    return SignalGrid(np.array(vals), dt, t0)


def write_text_signal(path, signal: SignalGrid, real: bool = None):
    """Write a text signal; purely real signals use one column unless ``real=False``."""
    x = signal.samples
    if real is None:
        real = not np.any(x.imag)
    buf = io.StringIO()
    buf.write("# dt=%.17g t0=%.17g\n" % (signal.dt, signal.t0))
    for z in x:
        if real:
            buf.write("%.17g\n" % z.real)
        else:
            buf.write("%.17g,%.17g\n" % (z.real, z.imag))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def write_binary_signal(path, signal: SignalGrid):
    x = np.ascontiguousarray(signal.samples, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, x.size, float(signal.dt), float(signal.t0)))
        fh.write(x.view("<f8").tobytes())


def read_binary_signal(path) -> SignalGrid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size:
        raise DataError(f"{path}: truncated header")
    magic, n, dt, t0 = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    body = raw[_HEAD.size:]
    if len(body) != 16 * n:
        raise DataError(f"{path}: header declares {n} samples, body holds {len(body) / 16:g}")
    if n == 0:
        raise DataError(f"{path}: signal is empty")
    x = np.frombuffer(body, dtype="<f8").view("<c16").astype(complex)
    return SignalGrid(x, dt, t0)


def _is_binary(path):
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_signal(path) -> SignalGrid:
    """Read a signal, detecting the binary format by its magic bytes."""
    if not os.path.exists(path):
        raise DataError(f"{path}: no such file")
    return read_binary_signal(path) if _is_binary(path) else read_text_signal(path)


def write_signal(path, signal: SignalGrid):
    """Write binary for ``*.ssq`` / ``*.bin`` paths, text otherwise."""
    if str(path).endswith((".ssq", ".bin")):
        write_binary_signal(path, signal)
    else:
        write_text_signal(path, signal)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_table(path, header, rows, delimiter=","):
    """Delimited table with one header row; floats at full precision."""
    lines = [delimiter.join(header)]
    for r in rows:
        if len(r) != len(header):
            raise DataError(f"row has {len(r)} fields, header has {len(header)}")
        lines.append(delimiter.join(_fmt(x) for x in r))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_matrix(path, times, freqs, values, delimiter=","):
    """Real matrix, row-major: header row of frequencies, first column times."""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(times), len(freqs)):
        raise DataError("matrix shape does not match its axes")
    header = ["time\\freq"] + ["%.17g" % f for f in freqs]
    rows = [[float(t)] + [float(v) for v in row] for t, row in zip(times, values)]
    write_table(path, header, rows, delimiter)


def write_tfr(path, tfr: TFR, part: str = "abs"):
    """Write ``abs``, ``real`` or ``imag`` of a TFR as a matrix table."""
    v = tfr.values
    if part == "abs":
        m = np.abs(v)
    elif part == "real":
        m = v.real
    elif part == "imag":
        m = v.imag
    else:
        raise ValueError(f"unknown part {part!r}")
    write_matrix(path, tfr.times, tfr.freqs, m)
