"""Binary snapshot/block formats and deterministic JSON/CSV emission.

Snapshot files (magic PXFLD1) hold one complex transverse field; block
cache files (magic PXSPK1) hold one real medium block. All scalars are
little-endian; floats are 64-bit. Text outputs are byte-stable across
reruns: JSON keys are sorted and CSV floats use the shortest round-trip
representation, with no embedded timestamps.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .grid import Grid
from .medium import FieldBlock
from .propagate import Field
from .rng import SeedPath
from .scaling import RegimeKind, ScalingRegime

SNAPSHOT_MAGIC = b"PXFLD1"
BLOCK_MAGIC = b"PXSPK1"
FORMAT_VERSION = 1


def write_snapshot(path, field: Field) -> None:
    """Write a field snapshot: header {magic, version, d, n, length, z,
    regime (theta, epsilon, eta, beta)}, then interleaved re/im float64."""
    r = field.regime
    header = SNAPSHOT_MAGIC + struct.pack(
        "<III", FORMAT_VERSION, field.grid.d, field.grid.n) + struct.pack(
        "<dddddd", field.grid.length, field.z, r.theta, r.epsilon, r.eta, r.beta)
    flat = field.values.ravel()
    data = np.empty(2 * flat.size, dtype="<f8")
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path, dz: float = 1.0) -> Field:
    """Read a PXFLD1 snapshot; dz is not stored and must be supplied to
    rebuild a solver-ready grid."""
    raw = Path(path).read_bytes()
    if raw[:6] != SNAPSHOT_MAGIC:
        raise ParseError(f"{path}: bad magic {raw[:6]!r}")
    version, d, n = struct.unpack("<III", raw[6:18])
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    length, z, theta, epsilon, eta, beta = struct.unpack("<dddddd", raw[18:66])
    flat = np.frombuffer(raw[66:], dtype="<f8")
    values = (flat[0::2] + 1j * flat[1::2]).reshape((n,) * d)
    grid = Grid(d=d, n=n, length=length, dz=dz)
    regime = ScalingRegime(theta=theta, epsilon=epsilon, eta=eta, beta=beta,
                           kind=RegimeKind.CUSTOM)
    return Field(values=values.copy(), z=z, grid=grid, regime=regime)


def write_block_cache(path, block: FieldBlock) -> None:
    """Write a medium block: header {magic, version, d, n_slabs, n,
    delta_s, dx, seed_path}, then float64 samples in slab-major order."""
    header = BLOCK_MAGIC + struct.pack(
        "<IIII", FORMAT_VERSION, block.grid.d, block.n_slabs, block.grid.n
    ) + struct.pack("<dd", block.delta_s, block.grid.dx) + struct.pack(
        "<QQQ", *block.seed_path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(block.samples, dtype="<f8").tobytes())


def read_block_cache(path, dz: float = 1.0) -> FieldBlock:
    raw = Path(path).read_bytes()
    if raw[:6] != BLOCK_MAGIC:
        raise ParseError(f"{path}: bad magic {raw[:6]!r}")
    version, d, n_slabs, n = struct.unpack("<IIII", raw[6:22])
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    delta_s, dx = struct.unpack("<dd", raw[22:38])
    seed_path = SeedPath(*struct.unpack("<QQQ", raw[38:62]))
    samples = np.frombuffer(raw[62:], dtype="<f8").reshape((n_slabs,) + (n,) * d)
    grid = Grid(d=d, n=n, length=n * dx, dz=dz)
    z_extent = n_slabs * delta_s
    return FieldBlock(samples=samples.copy(), z_extent=z_extent, delta_s=delta_s,
                      t0=seed_path.block * z_extent, grid=grid, seed_path=seed_path)


def format_number(x) -> str:
    """Shortest round-trip text for floats; plain text for the rest."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, columns, rows, preamble: dict | None = None) -> None:
    """Write rows (sequences aligned with ``columns``) with a '#' preamble
    carrying provenance (seed, config hash, version)."""
    lines = []
    if preamble:
        meta = " ".join(f"{k}={v}" for k, v in sorted(preamble.items()))
        lines.append(f"# pxspk {meta}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_number(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, payload: dict) -> None:
    """Deterministic JSON: sorted keys, no timestamps."""
    Path(path).write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=1)
                          + "\n")
