"""Image formation from holograms: matched-filter back-propagation.

The direct route re-phases every aperture sample by exp(+j*k*R) toward
each voxel and sums (receive-path compensation only; the transmit leg is
constant per scatterer across the aperture and cannot defocus). The fast
route evaluates the same sum for a whole aperture-aligned slice at once
by FFT convolution with the sampled spherical-phase kernel, which makes
it bit-comparable against the direct sum. A textbook plane-wave
propagation kernel (with evanescent cutoff) is available as an
alternative transfer function.

Normalization follows the object/background ratio rule: the displayed
image is (object - background) / background, voxelwise and guarded
against vanishing background.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.fft import next_fast_len

from .forward import FrequencyBin
from .hologram import Hologram
from .scene import Point3, ScanAperture


class ImagingError(ValueError):
    """Invalid reconstruction geometry or parameters."""


@dataclass(frozen=True)
class VolumeSpec:
    """Regular voxel grid: origin corner, counts and spacings."""

    origin: Point3
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ImagingError("voxel counts must be >= 1")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ImagingError("voxel spacings must be positive")

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny, self.nz)

    def axis_x(self) -> np.ndarray:
        return self.origin.x + self.dx * np.arange(self.nx)

    def axis_y(self) -> np.ndarray:
        return self.origin.y + self.dy * np.arange(self.ny)

    def axis_z(self) -> np.ndarray:
        return self.origin.z + self.dz * np.arange(self.nz)


@dataclass(frozen=True)
class ImageVolume:
    """Real-valued intensity volume on a :class:`VolumeSpec` grid."""

    spec: VolumeSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != self.spec.shape:
            raise ImagingError(f"volume shape {self.values.shape} != {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ImagingError("volume contains non-finite values")


@dataclass(frozen=True)
class TaperSpec:
    """Aperture weighting: 'none' (pure matched filter) or separable 'hann'."""

    kind: str = "none"

    def __post_init__(self):
        if self.kind not in ("none", "hann"):
            raise ImagingError(f"unknown taper {self.kind!r}")

    def weights(self, aperture: ScanAperture) -> np.ndarray:
        if self.kind == "none":
            return np.ones((aperture.nx, aperture.ny))
        wx = np.hanning(aperture.nx) if aperture.nx > 1 else np.ones(1)
        wy = np.hanning(aperture.ny) if aperture.ny > 1 else np.ones(1)
        return wx[:, None] * wy[None, :]


@dataclass(frozen=True)
class SliceStack:
    """Cross-range slices at a list of depths, on one common (x, y) grid."""

    x0: float
    y0: float
    dx: float
    dy: float
    z_values: tuple
    values: np.ndarray  # (nx, ny, n_slices)

    def __post_init__(self):
        object.__setattr__(self, "z_values", tuple(float(z) for z in self.z_values))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 3 or self.values.shape[2] != len(self.z_values):
            raise ImagingError("stack shape does not match z list")

    @property
    def n_slices(self) -> int:
        return len(self.z_values)

    def slice_at(self, index: int) -> np.ndarray:
        return self.values[:, :, index]

    def to_volume(self) -> ImageVolume:
        """Pack as an ImageVolume; the z list must be uniform (or single)."""
        if self.n_slices == 0:
            raise ImagingError("empty stack cannot form a volume")
        if self.n_slices == 1:
            dz = 1.0
        else:
            steps = np.diff(self.z_values)
            dz = float(steps[0])
            if dz <= 0 or not np.allclose(steps, dz, rtol=0, atol=1e-9):
                raise ImagingError("stack z values are not uniformly spaced")
        spec = VolumeSpec(
            origin=Point3(self.x0, self.y0, self.z_values[0]),
            nx=self.values.shape[0],
            ny=self.values.shape[1],
            nz=self.n_slices,
            dx=self.dx,
            dy=self.dy,
            dz=dz,
        )
        return ImageVolume(spec=spec, values=self.values)


def _node_weights(
    hologram: Hologram,
    taper: Optional[TaperSpec],
    node_mask: Optional[np.ndarray],
) -> np.ndarray:
    ap = hologram.aperture
    w = (taper or TaperSpec()).weights(ap)
    if node_mask is not None:
        mask = np.asarray(node_mask, dtype=bool)
        if mask.shape != (ap.nx, ap.ny):
            raise ImagingError("node mask shape does not match the aperture")
        w = w * mask
    return w


def backproject(
    hologram: Hologram,
    volume: VolumeSpec,
    bin: FrequencyBin,
    taper: Optional[TaperSpec] = None,
    node_mask: Optional[np.ndarray] = None,
    range_compensate: bool = False,
) -> ImageVolume:
    """Direct matched-filter sum |sum_n w_n R_n exp(+j*k*|r - x_n|)| per voxel.

    ``range_compensate`` additionally multiplies each term by the node-
    voxel distance, undoing the one-way spreading loss (off by default;
    the background normalization handles amplitudes).

    The whole volume must lie in front of the aperture plane.
    """
    ap = hologram.aperture
    if volume.origin.z <= ap.origin.z:
        raise ImagingError("reconstruction volume must lie in front of the aperture (z > 0)")
    grid = hologram.grid_at(bin)
    w = _node_weights(hologram, taper, node_mask)
    k = bin.k

    xs = volume.axis_x()[:, None, None]
    ys = volume.axis_y()[None, :, None]
    zs = volume.axis_z()[None, None, :]
    acc = np.zeros(volume.shape, dtype=complex)
    for i in range(ap.nx):
        for j in range(ap.ny):
            wij = w[i, j]
            if wij == 0.0:
                continue
            node = ap.node_position(i, j)
            r = np.sqrt((xs - node.x) ** 2 + (ys - node.y) ** 2 + (zs - node.z) ** 2)
            if np.any(r == 0.0):
                raise ImagingError("voxel coincides with an aperture node")
            term = np.exp(1j * k * r)
            if range_compensate:
                term = term * r
            acc += (wij * grid[i, j]) * term
    return ImageVolume(spec=volume, values=np.abs(acc))


def _wrapped_offsets(n: int) -> np.ndarray:
    """FFT-layout signed sample offsets 0, 1, ..., -2, -1."""
    return (np.arange(n) + n // 2) % n - n // 2


def angular_spectrum_slice(
    hologram: Hologram,
    z: float,
    bin: FrequencyBin,
    taper: Optional[TaperSpec] = None,
    node_mask: Optional[np.ndarray] = None,
    kernel: str = "matched",
    pad_factor: int = 2,
    extend: int = 0,
) -> np.ndarray:
    """FFT-propagated cross-range slice at depth ``z`` above the aperture plane.

    ``kernel="matched"`` (default) convolves with the sampled spherical
    phase kernel exp(+j*k*R); on the aperture-aligned grid this equals
    the direct back-projection sum to floating-point accuracy, at FFT
    cost. ``kernel="analytic"`` instead multiplies the hologram's plane-
    wave spectrum by exp(+j*z*sqrt(k^2-kx^2-ky^2)) and zeroes evanescent
    components (kx^2+ky^2 > k^2).

    ``extend`` grows the output window by that many grid cells per side
    (matched kernel only). Zero padding is at least ``pad_factor`` times
    the grid and always enough to keep the convolution exact. z = 0
    returns the hologram magnitude itself (zero-distance propagation).

    Returns the magnitude image, shape (nx + 2*extend, ny + 2*extend),
    aligned so pixel (extend, extend) sits at the aperture origin.
    """
    ap = hologram.aperture
    if z < 0:
        raise ImagingError("propagation depth must be >= 0")
    if kernel not in ("matched", "analytic"):
        raise ImagingError(f"unknown kernel {kernel!r}")
    if pad_factor < 2:
        raise ImagingError("pad factor must be >= 2")
    field = hologram.grid_at(bin) * _node_weights(hologram, taper, node_mask)
    if z == 0.0:
        if extend:
            field = np.pad(field, extend)
        return np.abs(field)

    k = bin.k
    if kernel == "matched":
        px = next_fast_len(max(pad_factor * ap.nx, 2 * (ap.nx + extend) - 1))
        py = next_fast_len(max(pad_factor * ap.ny, 2 * (ap.ny + extend) - 1))
        ux = _wrapped_offsets(px)[:, None] * ap.dx
        uy = _wrapped_offsets(py)[None, :] * ap.dy
        kern = np.exp(1j * k * np.sqrt(ux**2 + uy**2 + z**2))
        spec = np.fft.fft2(field, s=(px, py)) * np.fft.fft2(kern)
        out = np.fft.ifft2(spec)
        ix = (np.arange(-extend, ap.nx + extend)) % px
        iy = (np.arange(-extend, ap.ny + extend)) % py
        return np.abs(out[np.ix_(ix, iy)])

    if extend:
        raise ImagingError("extend requires the matched kernel")
    px = next_fast_len(pad_factor * ap.nx)
    py = next_fast_len(pad_factor * ap.ny)
    kx = 2.0 * np.pi * np.fft.fftfreq(px, d=ap.dx)[:, None]
    ky = 2.0 * np.pi * np.fft.fftfreq(py, d=ap.dy)[None, :]
    kt2 = kx**2 + ky**2
    kz = np.sqrt(np.maximum(k**2 - kt2, 0.0))
    prop = np.where(kt2 <= k**2, np.exp(1j * kz * z), 0.0)
    out = np.fft.ifft2(np.fft.fft2(field, s=(px, py)) * prop)
    return np.abs(out[: ap.nx, : ap.ny])


def backproject_multiband(
    hologram: Hologram,
    volume: VolumeSpec,
    bins: Sequence[FrequencyBin],
    taper: Optional[TaperSpec] = None,
    node_mask: Optional[np.ndarray] = None,
) -> ImageVolume:
    """Incoherent average of single-bin reconstructions over ``bins``.

    Alternative to single-bin coherent imaging: magnitudes are averaged,
    so speckle decorrelates slightly across the analyzed band while
    focusing is unchanged.
    """
    bins = tuple(bins)
    if not bins:
        raise ImagingError("need at least one bin to average")
    acc = np.zeros(volume.shape)
    for b in bins:
        acc += backproject(hologram, volume, b, taper=taper, node_mask=node_mask).values
    return ImageVolume(spec=volume, values=acc / len(bins))


def normalize_image(
    b_object: ImageVolume,
    b_background: ImageVolume,
    epsilon: float = 1e-3,
) -> ImageVolume:
    """Voxelwise (object - background) / background with a guarded denominator.

    Background values below ``epsilon`` times the background maximum are
    clamped to that floor so the ratio stays finite; where the background
    is above the floor the division is exact. Identical inputs give an
    exactly zero image.
    """
    if b_object.spec != b_background.spec:
        raise ImagingError("object and background grids differ")
    if epsilon <= 0:
        raise ImagingError("epsilon must be positive")
    bb = b_background.values
    floor = epsilon * bb.max()
    denom = np.maximum(bb, floor if floor > 0 else 1.0)
    return ImageVolume(spec=b_object.spec, values=(b_object.values - bb) / denom)


def aligned_slice_grid(aperture: ScanAperture, extend: int = 0) -> tuple:
    """(x0, y0, dx, dy, nx, ny) of the aperture-aligned slice grid."""
    return (
        aperture.origin.x - extend * aperture.dx,
        aperture.origin.y - extend * aperture.dy,
        aperture.dx,
        aperture.dy,
        aperture.nx + 2 * extend,
        aperture.ny + 2 * extend,
    )


def reconstruct_stack(
    hologram: Hologram,
    z_list: Sequence[float],
    bin: FrequencyBin,
    method: str = "direct",
    taper: Optional[TaperSpec] = None,
    node_mask: Optional[np.ndarray] = None,
    grid: Optional[tuple] = None,
    extend: int = 0,
) -> SliceStack:
    """One cross-range slice per requested depth, consistent method throughout.

    ``method="direct"`` evaluates the matched-filter sum on ``grid``
    (an (x0, y0, dx, dy, nx, ny) tuple, default the aperture-aligned
    footprint). ``method="angular"`` uses the FFT route and is restricted
    to the aperture-aligned grid, optionally extended.
    """
    if method not in ("direct", "angular"):
        raise ImagingError(f"unknown method {method!r}")
    ap = hologram.aperture
    if method == "angular":
        if grid is not None:
            raise ImagingError("angular method uses the aperture-aligned grid")
        x0, y0, dx, dy, nx, ny = aligned_slice_grid(ap, extend)
        slices = [
            angular_spectrum_slice(
                hologram, z - ap.origin.z, bin, taper=taper, node_mask=node_mask, extend=extend
            )
            for z in z_list
        ]
    else:
        x0, y0, dx, dy, nx, ny = grid if grid is not None else aligned_slice_grid(ap, extend)
        slices = []
        for z in z_list:
            vspec = VolumeSpec(Point3(x0, y0, z), nx, ny, 1, dx, dy, 1.0)
            img = backproject(hologram, vspec, bin, taper=taper, node_mask=node_mask)
            slices.append(img.values[:, :, 0])
    values = np.stack(slices, axis=-1) if slices else np.zeros((nx, ny, 0))
    return SliceStack(x0=x0, y0=y0, dx=dx, dy=dy, z_values=tuple(z_list), values=values)
