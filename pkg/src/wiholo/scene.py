"""Scene geometry and scan-aperture definitions.

Coordinate convention: right-handed, aperture plane at z = 0 with +z
pointing into the scene. All lengths in meters, frequencies in hertz.
Emitters (routers) and scatterers (targets) live at z > 0; the scanning
antenna moves on a regular grid in the z = 0 plane while a fixed
reference antenna supplies the second receive channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .constants import SPEED_OF_LIGHT


class SceneError(ValueError):
    """Invalid scene geometry or configuration."""


@dataclass(frozen=True)
class Point3:
    """A point in meters; aperture plane is z = 0, scene at z > 0."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise SceneError(f"non-finite {name} coordinate")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def translate(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0) -> "Point3":
        return Point3(self.x + dx, self.y + dy, self.z + dz)


@dataclass(frozen=True)
class Scatterer:
    """Point target under the single-scattering (Born) model.

    ``reflectivity`` is the dimensionless complex scattering amplitude;
    the scattered field is linear in it.
    """

    position: Point3
    reflectivity: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.position.z <= 0.0:
            raise SceneError(f"scatterer must sit at z > 0, got z={self.position.z}")
        if not (math.isfinite(self.reflectivity.real) and math.isfinite(self.reflectivity.imag)):
            raise SceneError("scatterer reflectivity must be finite")


@dataclass(frozen=True)
class Emitter:
    """A transmitting router. ``power_scale`` multiplies its field amplitude.

    ``power_scale`` may be zero for noise-floor studies; negative values
    are rejected.
    """

    position: Point3
    carrier_hz: float = 2.4372e9
    power_scale: float = 1.0

    def __post_init__(self):
        if self.position.z <= 0.0:
            raise SceneError(f"emitter must sit at z > 0, got z={self.position.z}")
        if self.carrier_hz <= 0.0:
            raise SceneError("emitter carrier must be positive")
        if not (math.isfinite(self.power_scale) and self.power_scale >= 0.0):
            raise SceneError("emitter power_scale must be finite and >= 0")


@dataclass(frozen=True)
class WallSlab:
    """Homogeneous slab parallel to the aperture plane."""

    z_front: float
    thickness: float
    rel_permittivity: float = 1.0
    loss_factor: float = 0.0

    def __post_init__(self):
        if self.z_front < 0.0:
            raise SceneError("wall z_front must be >= 0")
        if self.thickness < 0.0:
            raise SceneError("wall thickness must be >= 0")
        if self.rel_permittivity < 1.0:
            raise SceneError("wall rel_permittivity must be >= 1")
        if not 0.0 <= self.loss_factor <= 1.0:
            raise SceneError("wall loss_factor must be in [0, 1]")

    @property
    def z_mid(self) -> float:
        return self.z_front + 0.5 * self.thickness


@dataclass(frozen=True)
class Scene:
    """Ground truth for a simulation: emitters, targets, optional wall.

    An empty scatterer list is a valid background scene (used for the
    reference acquisition of the image normalization).
    """

    emitters: tuple
    scatterers: tuple = ()
    wall: Optional[WallSlab] = None

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if len(self.emitters) == 0:
            raise SceneError("scene needs at least one emitter")
        for s in self.scatterers:
            for e in self.emitters:
                if s.position == e.position:
                    raise SceneError(
                        f"scatterer coincides with emitter at {s.position}"
                    )

    def without_scatterers(self) -> "Scene":
        """Background copy of this scene (same emitters/wall, no targets)."""
        return Scene(emitters=self.emitters, scatterers=(), wall=self.wall)

    def scatterer_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Positions (N, 3) and reflectivities (N,) as arrays for vector math."""
        if not self.scatterers:
            return np.zeros((0, 3)), np.zeros(0, dtype=complex)
        pos = np.array([s.position.as_array() for s in self.scatterers])
        refl = np.array([s.reflectivity for s in self.scatterers], dtype=complex)
        return pos, refl


@dataclass(frozen=True)
class ScanAperture:
    """Regular 2-D grid of scanning-antenna positions in the z = 0 plane.

    Node (i, j) sits at ``origin + (i*dx, j*dy, 0)``. The fixed reference
    antenna must not coincide with any node. Traversal order during
    acquisition is boustrophedon ("s-order"): even rows left-to-right,
    odd rows right-to-left.
    """

    origin: Point3
    nx: int
    ny: int
    dx: float
    dy: float
    reference_position: Point3
    traversal: str = "s-order"

    def __post_init__(self):
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        if self.nx < 1 or self.ny < 1:
            raise SceneError("aperture needs nx, ny >= 1")
        if self.dx <= 0.0 or self.dy <= 0.0:
            raise SceneError("aperture spacing must be positive")
        if self.traversal != "s-order":
            raise SceneError(f"unknown traversal {self.traversal!r}")
        ref = self.reference_position
        # reference on the grid lattice and inside the grid extent -> collision
        ei = (ref.x - self.origin.x) / self.dx
        ej = (ref.y - self.origin.y) / self.dy
        if (
            ref.z == self.origin.z
            and abs(ei - round(ei)) < 1e-9
            and abs(ej - round(ej)) < 1e-9
            and 0 <= round(ei) < self.nx
            and 0 <= round(ej) < self.ny
        ):
            raise SceneError("reference antenna coincides with an aperture node")

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def span_x(self) -> float:
        return (self.nx - 1) * self.dx

    @property
    def span_y(self) -> float:
        return (self.ny - 1) * self.dy

    def node_position(self, i: int, j: int) -> Point3:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise SceneError(f"node index ({i}, {j}) outside {self.nx}x{self.ny} grid")
        return Point3(self.origin.x + i * self.dx, self.origin.y + j * self.dy, self.origin.z)

    def node_grid(self) -> np.ndarray:
        """All node positions as an (nx, ny, 3) array."""
        xs = self.origin.x + self.dx * np.arange(self.nx)
        ys = self.origin.y + self.dy * np.arange(self.ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        gz = np.full_like(gx, self.origin.z)
        return np.stack([gx, gy, gz], axis=-1)


def make_aperture(
    origin: Point3,
    span_x: float,
    span_y: float,
    dx: float,
    dy: float,
    reference: Point3,
) -> ScanAperture:
    """Build the scan grid covering ``span_x`` by ``span_y``.

    Endpoints are inclusive: nx = floor(span_x/dx) + 1, so a 1 m span at
    5 cm steps gives 21 positions. A zero span collapses to a single
    position along that axis.

    Parameters
    ----------
    origin : Point3
        Lower-left grid node; must have z = 0 by convention (not enforced,
        the grid plane is wherever origin.z puts it).
    span_x, span_y : float
        Extent of the scan in meters, >= 0.
    dx, dy : float
        Grid step in meters, > 0.
    reference : Point3
        Fixed reference-antenna position, distinct from every node.
    """
    if span_x < 0.0 or span_y < 0.0:
        raise SceneError("aperture spans must be >= 0")
    if dx <= 0.0 or dy <= 0.0:
        raise SceneError("aperture spacing must be positive")
    # guard the floor against representation error at exact multiples
    nx = int(math.floor(span_x / dx + 1e-9)) + 1
    ny = int(math.floor(span_y / dy + 1e-9)) + 1
    return ScanAperture(origin=origin, nx=nx, ny=ny, dx=dx, dy=dy, reference_position=reference)


def default_reference(origin: Point3, carrier_hz: float = 2.4372e9) -> Point3:
    """Reference antenna one wavelength outside the aperture corner, at z = 0.

    The hologram magnitude image is insensitive to this choice up to a
    global complex factor, so any off-grid spot works.
    """
    lam = SPEED_OF_LIGHT / carrier_hz
    return Point3(origin.x - lam, origin.y - lam, origin.z)


def s_order_positions(aperture: ScanAperture) -> list[tuple[tuple[int, int], Point3]]:
    """Nodes in boustrophedon acquisition order.

    Row j is swept left-to-right when j is even, right-to-left when odd,
    so consecutive positions differ by one grid step except at row turns.

    Returns
    -------
    list of ((i, j), Point3)
        Every node exactly once, in traversal order.
    """
    out = []
    for j in range(aperture.ny):
        cols: Iterator[int] = range(aperture.nx) if j % 2 == 0 else reversed(range(aperture.nx))
        for i in cols:
            out.append(((i, j), aperture.node_position(i, j)))
    return out


def nyquist_spacing(f_hz: float) -> float:
    """Half-wavelength aperture sampling step for frequency ``f_hz``."""
    if f_hz <= 0.0:
        raise SceneError("frequency must be positive")
    return 0.5 * SPEED_OF_LIGHT / f_hz


def decimate_aperture(aperture: ScanAperture, d: int) -> ScanAperture:
    """Keep every d-th row and column of the grid.

    The retained nodes are those with i % d == 0 and j % d == 0, so the
    spacing grows to d*dx, d*dy and the counts become ceil(n/d). The
    reference antenna is unchanged. ``d = 1`` returns an equal aperture.

    This is the per-axis reading of reduced spatial sampling (spacing
    d * lambda/2); see ``s_track_mask`` for the along-track alternative.
    """
    if d < 1:
        raise SceneError("decimation factor must be >= 1")
    nx = -(-aperture.nx // d)
    ny = -(-aperture.ny // d)
    return ScanAperture(
        origin=aperture.origin,
        nx=nx,
        ny=ny,
        dx=aperture.dx * d,
        dy=aperture.dy * d,
        reference_position=aperture.reference_position,
        traversal=aperture.traversal,
    )


def s_track_mask(aperture: ScanAperture, d: int) -> np.ndarray:
    """Boolean (nx, ny) mask keeping every d-th position along the S-track.

    Alternative decimation reading: thin the measurement sequence rather
    than the grid axes. Useful as a node mask for back-projection.
    """
    if d < 1:
        raise SceneError("decimation factor must be >= 1")
    mask = np.zeros((aperture.nx, aperture.ny), dtype=bool)
    for order, ((i, j), _) in enumerate(s_order_positions(aperture)):
        if order % d == 0:
            mask[i, j] = True
    return mask


def load_scene(config_text: str) -> Scene:
    """Parse the ``[scene]`` section of a config document into a Scene."""
    from . import config as _config

    return _config.parse_scene_text(config_text)


def emit_scene_config(scene: Scene) -> str:
    """Serialize a Scene back to config text; inverse of :func:`load_scene`."""
    from . import config as _config

    return _config.emit_scene_text(scene)
