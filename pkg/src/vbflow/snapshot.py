"""Binary field snapshots.

Layout::

    VBSNAP 1
    key = value            (header lines, ASCII)
    ...
    DATA
    <payload>

The payload holds little-endian float64 physical values of ``vx``, ``vy`` and
``b`` (each ``N x N``, row-major, first index ``x``).  Physical values of a
band-limited field do not determine its coefficients to the last bit, so the
payload continues with the little-endian complex128 coefficient arrays of the
same three fields in the same order; the header line
``coefficients = complex128-le`` announces that block and readers restore the
state from it.  ``time`` is written with ``repr`` and therefore round-trips
exactly.
"""

from __future__ import annotations

import numpy as np

from .dynamics import State
from .spectral import Grid, SpectralField, VectorField

__all__ = ["SnapshotError", "write_snapshot", "read_snapshot", "MAGIC", "FIELD_ORDER"]

MAGIC = b"VBSNAP 1"
FIELD_ORDER = ("vx", "vy", "b")


class SnapshotError(ValueError):
    """Malformed or truncated snapshot."""


def write_snapshot(state: State, header: dict | None = None) -> bytes:
    """Serialize ``state``; extra ``header`` entries are written as ``key = value`` lines."""
    grid = state.grid
    lines = [MAGIC.decode()]
    base = {
        "N": str(grid.N),
        "L": repr(grid.L),
        "time": repr(float(state.time)),
        "fields": ",".join(FIELD_ORDER),
        "layout": "float64-le row-major physical",
        "coefficients": "complex128-le",
    }
    for key, value in (header or {}).items():
        if key in base or key == "DATA":
            raise SnapshotError(f"header key {key!r} is reserved")
        text = value if isinstance(value, str) else repr(value)
        if "\n" in key or "\n" in text or "=" in key:
            raise SnapshotError(f"header entry {key!r} is not a single line")
        base[key] = text
    for key, value in base.items():
        lines.append(f"{key} = {value}")
    lines.append("DATA")
    head = ("\n".join(lines) + "\n").encode("ascii")
    comps = (state.v.x, state.v.y, state.b)
    phys = b"".join(np.ascontiguousarray(c.values, dtype="<f8").tobytes() for c in comps)
    coef = b"".join(np.ascontiguousarray(c.coeffs, dtype="<c16").tobytes() for c in comps)
    return head + phys + coef


def read_snapshot(data: bytes) -> tuple[State, dict]:
    """Inverse of :func:`write_snapshot`; returns ``(state, header)`` with header values as strings."""
    first, sep, rest = data.partition(b"\n")
    if first != MAGIC or not sep:
        raise SnapshotError(f"bad magic line {first[:16]!r}, expected {MAGIC!r}")
    header: dict[str, str] = {}
    while True:
        line, sep, rest = rest.partition(b"\n")
        if not sep:
            raise SnapshotError("truncated header: no DATA line")
        if line == b"DATA":
            break
        try:
            key, value = line.decode("ascii").split("=", 1)
        except (UnicodeDecodeError, ValueError):
            raise SnapshotError(f"malformed header line {line[:40]!r}") from None
        header[key.strip()] = value.strip()
    for key in ("N", "L", "time", "fields", "coefficients"):
        if key not in header:
            raise SnapshotError(f"header is missing {key!r}")
    if header["fields"] != ",".join(FIELD_ORDER) or header["coefficients"] != "complex128-le":
        raise SnapshotError(f"unsupported field order or coefficient layout: {header['fields']!r}")
    try:
        grid = Grid(int(header["N"]), float(header["L"]))
        time = float(header["time"])
    except ValueError as exc:
        raise SnapshotError(f"invalid header value: {exc}") from None
    n2 = grid.N * grid.N
    expected = 3 * n2 * 8 + 3 * n2 * 16
    if len(rest) != expected:
        raise SnapshotError(f"payload has {len(rest)} bytes, expected {expected} for N={grid.N}")
    coef = np.frombuffer(rest, dtype="<c16", count=3 * n2, offset=3 * n2 * 8).reshape(3, grid.N, grid.N)
    fields = [SpectralField(grid, coef[i].astype(complex)) for i in range(3)]
    state = State(VectorField((fields[0], fields[1])), fields[2], time)
    return state, header


def physical_block(data: bytes) -> np.ndarray:
    """The ``(3, N, N)`` physical-value block of a snapshot, without building a state."""
    _, header = read_snapshot(data)
    n = int(header["N"])
    start = data.index(b"\nDATA\n") + len(b"\nDATA\n")
    return np.frombuffer(data, dtype="<f8", count=3 * n * n, offset=start).reshape(3, n, n)
