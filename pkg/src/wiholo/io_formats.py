"""Readers and writers for the on-disk formats.

Holograms and curves are CSV (inspectable, diffable); volumes are raw
little-endian float32 with a text manifest; slices are 8-bit binary PGM
with a text sidecar recording the linear intensity mapping. All writers
are deterministic: identical data produces identical bytes. Floats are
serialized with ``repr``, which round-trips exactly.
"""

from __future__ import annotations

import ast
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .analysis import Curve1D
from .forward import FrequencyBin
from .hologram import Hologram
from .imaging import ImageVolume, Point3, VolumeSpec
from .scene import ScanAperture


class FormatError(ValueError):
    """Malformed or inconsistent file content."""


PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# Hologram CSV
# ---------------------------------------------------------------------------

def write_hologram_csv(hologram: Hologram, path: PathLike) -> None:
    """Header line with grid geometry, then one row per (i, j, bin)."""
    ap = hologram.aperture
    bins = ";".join(repr(b.f_hz) for b in hologram.bins)
    origin = ",".join(repr(v) for v in (ap.origin.x, ap.origin.y, ap.origin.z))
    ref = ",".join(
        repr(v)
        for v in (ap.reference_position.x, ap.reference_position.y, ap.reference_position.z)
    )
    lines = [
        f"# wiholo-hologram nx={ap.nx} ny={ap.ny} dx={ap.dx!r} dy={ap.dy!r}"
        f" origin={origin} reference={ref} bins={bins}",
        "i,j,f_hz,re,im",
    ]
    for i in range(ap.nx):
        for j in range(ap.ny):
            for bi, b in enumerate(hologram.bins):
                v = hologram.values[i, j, bi]
                lines.append(f"{i},{j},{b.f_hz!r},{float(v.real)!r},{float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_hologram_csv(path: PathLike) -> Hologram:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# wiholo-hologram "):
        raise FormatError(f"{path}: not a hologram CSV")
    fields = {}
    for token in text[0][len("# wiholo-hologram ") :].split():
        key, _, val = token.partition("=")
        fields[key] = val
    try:
        nx, ny = int(fields["nx"]), int(fields["ny"])
        dx, dy = float(fields["dx"]), float(fields["dy"])
        ox, oy, oz = (float(v) for v in fields["origin"].split(","))
        rx, ry, rz = (float(v) for v in fields["reference"].split(","))
        bins = tuple(FrequencyBin(float(v)) for v in fields["bins"].split(";"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad hologram header ({exc})") from exc
    aperture = ScanAperture(
        origin=Point3(ox, oy, oz),
        nx=nx,
        ny=ny,
        dx=dx,
        dy=dy,
        reference_position=Point3(rx, ry, rz),
    )
    values = np.zeros((nx, ny, len(bins)), dtype=complex)
    seen = np.zeros(values.shape, dtype=bool)
    freq_index = {repr(b.f_hz): k for k, b in enumerate(bins)}
    for ln, row in enumerate(text[2:], start=3):
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != 5:
            raise FormatError(f"{path}:{ln}: expected 5 columns")
        i, j = int(parts[0]), int(parts[1])
        bi = freq_index.get(repr(float(parts[2])))
        if bi is None or not (0 <= i < nx and 0 <= j < ny):
            raise FormatError(f"{path}:{ln}: row outside declared grid/bins")
        values[i, j, bi] = complex(float(parts[3]), float(parts[4]))
        seen[i, j, bi] = True
    if not seen.all():
        raise FormatError(f"{path}: missing rows for {int((~seen).sum())} grid entries")
    return Hologram(values=values, aperture=aperture, bins=bins)


# ---------------------------------------------------------------------------
# PGM slices
# ---------------------------------------------------------------------------

def write_slice_pgm(values: np.ndarray, path: PathLike, meta: Optional[dict] = None) -> None:
    """8-bit binary PGM, min -> 0 and max -> 255; mapping goes to a sidecar.

    A constant slice maps to all zeros. ``values`` is indexed (x, y);
    image rows are y, columns x. Extra ``meta`` entries (e.g. the slice
    depth) are recorded in the sidecar.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise FormatError("slice must be 2-D")
    if not np.all(np.isfinite(v)):
        raise FormatError("slice contains non-finite values")
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pix = np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pix = np.zeros(v.shape, dtype=np.uint8)
    nx, ny = v.shape
    header = f"P5\n{nx} {ny}\n255\n".encode()
    Path(path).write_bytes(header + pix.T.tobytes())
    side = {"min": lo, "max": hi, "nx": nx, "ny": ny}
    for k, v in (meta or {}).items():
        side[k] = float(v) if isinstance(v, float) else v
    lines = [f"{k}={side[k]!r}" for k in sorted(side)]
    Path(str(path) + ".meta").write_text("\n".join(lines) + "\n")


def read_slice_pgm(path: PathLike) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`write_slice_pgm` up to 8-bit quantization."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        nx, ny = (int(t) for t in parts[1].split())
        maxval = int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: expected 8-bit PGM")
    body = parts[3]
    if len(body) != nx * ny:
        raise FormatError(f"{path}: pixel payload is {len(body)} bytes, expected {nx * ny}")
    pix = np.frombuffer(body, dtype=np.uint8).reshape(ny, nx).T
    meta: dict = {}
    for line in Path(str(path) + ".meta").read_text().splitlines():
        if not line.strip():
            continue
        key, _, val = line.partition("=")
        try:
            meta[key] = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            meta[key] = val
    lo, hi = float(meta["min"]), float(meta["max"])
    values = lo + pix.astype(float) / 255.0 * (hi - lo)
    return values, meta


# ---------------------------------------------------------------------------
# Volumes: raw float32 + manifest
# ---------------------------------------------------------------------------

def write_volume(volume: ImageVolume, path: PathLike) -> None:
    """Raw little-endian float32, x fastest, then y, then z; text manifest."""
    spec = volume.spec
    raw = volume.values.astype("<f4").tobytes(order="F")
    Path(path).write_bytes(raw)
    zs = ";".join(repr(float(z)) for z in spec.axis_z())
    manifest = "\n".join(
        [
            "wiholo-volume",
            f"nx={spec.nx}",
            f"ny={spec.ny}",
            f"nz={spec.nz}",
            f"dx={spec.dx!r}",
            f"dy={spec.dy!r}",
            f"dz={spec.dz!r}",
            f"origin={spec.origin.x!r},{spec.origin.y!r},{spec.origin.z!r}",
            f"z_slices={zs}",
        ]
    )
    Path(str(path) + ".manifest").write_text(manifest + "\n")


def read_volume(path: PathLike) -> ImageVolume:
    lines = Path(str(path) + ".manifest").read_text().splitlines()
    if not lines or lines[0] != "wiholo-volume":
        raise FormatError(f"{path}: missing or foreign manifest")
    kv = {}
    for line in lines[1:]:
        if line.strip():
            key, _, val = line.partition("=")
            kv[key] = val
    try:
        nx, ny, nz = int(kv["nx"]), int(kv["ny"]), int(kv["nz"])
        dx, dy, dz = float(kv["dx"]), float(kv["dy"]), float(kv["dz"])
        ox, oy, oz = (float(v) for v in kv["origin"].split(","))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad manifest ({exc})") from exc
    raw = Path(path).read_bytes()
    expect = nx * ny * nz * 4
    if len(raw) != expect:
        raise FormatError(f"{path}: raw size {len(raw)} != manifest size {expect}")
    values = np.frombuffer(raw, dtype="<f4").reshape((nx, ny, nz), order="F").astype(float)
    spec = VolumeSpec(Point3(ox, oy, oz), nx, ny, nz, dx, dy, dz)
    return ImageVolume(spec=spec, values=values)


# ---------------------------------------------------------------------------
# Curves and metrics CSV
# ---------------------------------------------------------------------------

def write_curve_csv(curve: Curve1D, path: PathLike) -> None:
    lines = ["coordinate,value"]
    lines += [f"{float(c)!r},{float(v)!r}" for c, v in zip(curve.coordinates, curve.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path: PathLike) -> Curve1D:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "coordinate,value":
        raise FormatError(f"{path}: not a curve CSV")
    coords, vals = [], []
    for row in lines[1:]:
        if not row.strip():
            continue
        c, _, v = row.partition(",")
        coords.append(float(c))
        vals.append(float(v))
    return Curve1D(np.array(coords), np.array(vals))


def write_metrics_csv(metrics: dict, path: PathLike) -> None:
    lines = ["metric,value"]
    for key in sorted(metrics):
        val = metrics[key]
        val = float(val) if isinstance(val, (int, float)) and not isinstance(val, bool) else val
        lines.append(f"{key},{val!r}")
    Path(path).write_text("\n".join(lines) + "\n")
