"""Quantitative metrics on reconstructed images.

Crest finding on 1-D cuts, per-depth focus curves, zero-mean correlation
between slices, and point-spread-function width measurement. All pure
functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import find_peaks

from .forward import FrequencyBin
from .hologram import Hologram
from .imaging import ImageVolume, Point3, SliceStack, VolumeSpec, backproject


class AnalysisError(ValueError):
    """Degenerate input to a metric."""


@dataclass(frozen=True)
class Curve1D:
    """Sampled 1-D cut with monotone coordinates in meters."""

    coordinates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coordinates", np.asarray(self.coordinates, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.coordinates.shape != self.values.shape or self.coordinates.ndim != 1:
            raise AnalysisError("coordinates and values must be equal-length 1-D arrays")
        if self.coordinates.size == 0:
            raise AnalysisError("empty curve")
        if self.coordinates.size > 1 and not np.all(np.diff(self.coordinates) > 0):
            raise AnalysisError("coordinates must be strictly increasing")

    def normalized(self) -> "Curve1D":
        """Peak-normalized copy (max value exactly 1)."""
        peak = self.values.max()
        if peak <= 0:
            raise AnalysisError("curve has no positive peak to normalize by")
        return Curve1D(self.coordinates, self.values / peak)


@dataclass(frozen=True)
class FocusReport:
    """Per-depth focus metric and the depth where it peaks."""

    z_values: tuple
    metric_values: tuple
    argmax_z: float


def find_crests(curve: Curve1D, min_prominence: float = 0.2) -> list[float]:
    """Coordinates of local maxima with prominence >= fraction of the peak.

    The curve is peak-normalized first, so the result is invariant under
    positive rescaling. Plateau crests report their left edge (ties break
    toward the smaller coordinate). Boundary samples are not crests.
    """
    c = curve.normalized()
    idx, props = find_peaks(c.values, prominence=min_prominence, plateau_size=(1, None))
    left = props.get("left_edges", idx)
    return sorted(float(c.coordinates[i]) for i in left)


def focus_curve(stack: SliceStack, metric: str = "max") -> FocusReport:
    """Evaluate a focus metric per slice and report the best depth.

    ``max`` is the per-slice peak intensity (robust for point-like
    targets); ``sharpness`` is sum(I^2)/sum(I)^2, better suited to
    extended targets. The first slice wins ties.
    """
    if stack.n_slices == 0:
        raise AnalysisError("empty stack")
    if metric not in ("max", "sharpness"):
        raise AnalysisError(f"unknown focus metric {metric!r}")
    vals = []
    for s in range(stack.n_slices):
        img = stack.slice_at(s)
        if metric == "max":
            vals.append(float(img.max()))
        else:
            total = float(img.sum())
            vals.append(float((img**2).sum()) / total**2 if total > 0 else 0.0)
    best = int(np.argmax(vals))
    return FocusReport(
        z_values=tuple(stack.z_values),
        metric_values=tuple(vals),
        argmax_z=float(stack.z_values[best]),
    )


def image_similarity(a: Union[ImageVolume, np.ndarray], b: Union[ImageVolume, np.ndarray]) -> float:
    """Zero-mean normalized cross-correlation between two same-grid images."""
    if isinstance(a, ImageVolume) and isinstance(b, ImageVolume):
        if a.spec != b.spec:
            raise AnalysisError("slices live on different grids")
        av, bv = a.values, b.values
    else:
        av = a.values if isinstance(a, ImageVolume) else np.asarray(a, dtype=float)
        bv = b.values if isinstance(b, ImageVolume) else np.asarray(b, dtype=float)
        if av.shape != bv.shape:
            raise AnalysisError("slices have different shapes")
    da = av - av.mean()
    db = bv - bv.mean()
    na = float(np.sqrt((da**2).sum()))
    nb = float(np.sqrt((db**2).sum()))
    if na == 0.0 or nb == 0.0:
        raise AnalysisError("zero-variance image in similarity")
    return float((da * db).sum() / (na * nb))


def profile_through_peak(
    values: np.ndarray,
    x0: float,
    y0: float,
    dx: float,
    dy: float,
    axis: str = "x",
) -> Curve1D:
    """Peak-normalized cut through the global maximum of a 2-D slice."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise AnalysisError("expected a 2-D slice")
    pi, pj = np.unravel_index(int(np.argmax(v)), v.shape)
    if axis == "x":
        coords = x0 + dx * np.arange(v.shape[0])
        cut = v[:, pj]
    elif axis == "y":
        coords = y0 + dy * np.arange(v.shape[1])
        cut = v[pi, :]
    else:
        raise AnalysisError(f"unknown axis {axis!r}")
    return Curve1D(coords, cut).normalized()


def fwhm_of_profile(curve: Curve1D) -> float:
    """Full width at half maximum, linearly interpolated between samples.

    Raises if the peak sits on the curve boundary or either half-maximum
    crossing is missing.
    """
    v = curve.normalized().values
    x = curve.coordinates
    p = int(np.argmax(v))
    if p == 0 or p == v.size - 1:
        raise AnalysisError("profile peak lies on the boundary")
    half = 0.5

    def cross(idx_from: int, step: int) -> float:
        i = idx_from
        while 0 <= i + step < v.size and v[i + step] > half:
            i += step
        j = i + step
        if j < 0 or j >= v.size:
            raise AnalysisError("no half-maximum crossing on one side")
        # linear interpolation between samples i (above) and j (below)
        frac = (v[i] - half) / (v[i] - v[j])
        return float(x[i] + frac * (x[j] - x[i]))

    return cross(p, +1) - cross(p, -1)


def psf_fwhm(
    hologram: Hologram,
    z: float,
    bin: FrequencyBin,
    axis: str = "x",
    pitch: float = 0.02,
    margin: float = 0.2,
) -> float:
    """Point-spread width of a single-target hologram at its true depth.

    Back-projects the hologram onto a fine aperture-footprint grid
    (``pitch`` spacing, extended by ``margin`` per side) at depth ``z``
    and measures the FWHM of the *intensity* (squared-magnitude) cut
    through the image peak, the usual convention under which a uniform
    aperture gives ~lambda*z/D. Image grids hold field magnitude, hence
    the squaring here.
    """
    ap = hologram.aperture
    x0 = ap.origin.x - margin
    y0 = ap.origin.y - margin
    nx = int(round((ap.span_x + 2 * margin) / pitch)) + 1
    ny = int(round((ap.span_y + 2 * margin) / pitch)) + 1
    vspec = VolumeSpec(Point3(x0, y0, z), nx, ny, 1, pitch, pitch, 1.0)
    img = backproject(hologram, vspec, bin)
    prof = profile_through_peak(img.values[:, :, 0], x0, y0, pitch, pitch, axis=axis)
    return fwhm_of_profile(Curve1D(prof.coordinates, prof.values**2))


def local_maxima_2d(
    values: np.ndarray,
    min_rel: float = 0.3,
    neighborhood: int = 3,
) -> list[tuple[int, int]]:
    """Grid indices of local maxima at least ``min_rel`` of the global peak."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise AnalysisError("expected a 2-D slice")
    peak = v.max()
    if peak <= 0:
        return []
    local = v == maximum_filter(v, size=neighborhood, mode="nearest")
    keep = local & (v >= min_rel * peak)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(keep))]
