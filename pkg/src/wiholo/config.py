"""Run configuration: TOML parsing, validation, defaulting, serialization.

The config document has sections [scene], [aperture], [waveform],
[window], [simulation], [reconstruction] and [analysis] plus top-level
``seed`` and ``out_dir``. Unknown keys are rejected in strict mode;
every omitted key has a documented default. ``emit_config`` writes a
fully-defaulted document that parses back to an equal RunConfig.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .hologram import WindowSpec
from .scene import (
    Emitter,
    Point3,
    ScanAperture,
    Scatterer,
    Scene,
    SceneError,
    WallSlab,
    decimate_aperture,
    default_reference,
    make_aperture,
)
from .waveform import WaveformSpec


class ConfigError(ValueError):
    """Syntax or schema violation, with the offending key path."""


@dataclass(frozen=True)
class ReconSpec:
    """Reconstruction parameters from the [reconstruction] section.

    ``epsilon`` feeds the background-normalization denominator guard.
    """

    bin_hz: float
    method: str = "direct"
    z_slices: tuple = ()
    taper: str = "none"
    extend: int = 0
    grid: Optional[tuple] = None  # (x0, y0, dx, dy, nx, ny)
    epsilon: float = 1e-3


@dataclass(frozen=True)
class AnalysisSpec:
    """Metric parameters from the [analysis] section.

    ``profile_z`` pins the slice used for the crest profile; when absent
    the slice with the best focus metric is used.
    """

    min_prominence: float = 0.2
    crest_axis: str = "x"
    focus_metric: str = "max"
    profile_z: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    """Everything one deterministic run needs."""

    seed: int
    scene: Scene
    aperture: ScanAperture
    waveform: WaveformSpec
    window: WindowSpec
    snr_db: float = math.inf
    recon: ReconSpec = ReconSpec(bin_hz=2.4372e9)
    analysis: AnalysisSpec = AnalysisSpec()
    out_dir: Optional[str] = None


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------

class _Table:
    """Dict wrapper that tracks consumed keys and reports dotted paths."""

    def __init__(self, data: dict, path: str, strict: bool):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or '<root>'}: expected a table")
        self.data = data
        self.path = path
        self.strict = strict
        self.used: set = set()

    def _full(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, kind, default=None, required: bool = False):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"missing required key {self._full(key)!r}")
            return default
        val = self.data[key]
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if kind is not None and not isinstance(val, kind):
            raise ConfigError(
                f"{self._full(key)}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}"
            )
        return val

    def sub(self, key: str) -> Optional["_Table"]:
        self.used.add(key)
        if key not in self.data:
            return None
        return _Table(self.data[key], self._full(key), self.strict)

    def sub_list(self, key: str) -> list:
        self.used.add(key)
        items = self.data.get(key, [])
        if not isinstance(items, list):
            raise ConfigError(f"{self._full(key)}: expected an array of tables")
        return [_Table(t, f"{self._full(key)}[{n}]", self.strict) for n, t in enumerate(items)]

    def finish(self):
        unknown = set(self.data) - self.used
        if unknown:
            names = ", ".join(sorted(self._full(u) for u in unknown))
            if self.strict:
                raise ConfigError(f"unknown key(s): {names}")
            warnings.warn(f"ignoring unknown config key(s): {names}")


def _point(table: _Table, key: str, default: Optional[Point3] = None, required=False) -> Optional[Point3]:
    raw = table.take(key, list, required=required)
    if raw is None:
        return default
    if len(raw) != 3 or not all(isinstance(v, (int, float)) for v in raw):
        raise ConfigError(f"{table._full(key)}: expected [x, y, z] in meters")
    return Point3(float(raw[0]), float(raw[1]), float(raw[2]))


def _pair(table: _Table, key: str, default=None, required=False):
    raw = table.take(key, list, required=required)
    if raw is None:
        return default
    if len(raw) != 2 or not all(isinstance(v, (int, float)) for v in raw):
        raise ConfigError(f"{table._full(key)}: expected [x, y]")
    return float(raw[0]), float(raw[1])


# ---------------------------------------------------------------------------
# Section parsers
# ---------------------------------------------------------------------------

def _parse_scene(table: _Table, default_carrier: float) -> Scene:
    emitters = []
    for et in table.sub_list("emitters"):
        pos = _point(et, "position", required=True)
        carrier = et.take("carrier_hz", float, default=default_carrier)
        power = et.take("power_scale", float, default=1.0)
        et.finish()
        try:
            emitters.append(Emitter(position=pos, carrier_hz=carrier, power_scale=power))
        except SceneError as exc:
            raise ConfigError(f"{et.path}: {exc}") from exc
    scatterers = []
    for st in table.sub_list("scatterers"):
        pos = _point(st, "position", required=True)
        refl_raw = st.take("reflectivity", None, default=1.0)
        st.finish()
        if isinstance(refl_raw, list):
            if len(refl_raw) != 2:
                raise ConfigError(f"{st.path}.reflectivity: expected scalar or [re, im]")
            refl = complex(float(refl_raw[0]), float(refl_raw[1]))
        elif isinstance(refl_raw, (int, float)):
            refl = complex(float(refl_raw), 0.0)
        else:
            raise ConfigError(f"{st.path}.reflectivity: expected scalar or [re, im]")
        try:
            scatterers.append(Scatterer(position=pos, reflectivity=refl))
        except SceneError as exc:
            raise ConfigError(f"{st.path}: {exc}") from exc
    wall = None
    wt = table.sub("wall")
    if wt is not None:
        z_front = wt.take("z_front", float, required=True)
        thickness = wt.take("thickness", float, required=True)
        eps = wt.take("rel_permittivity", float, default=1.0)
        loss = wt.take("loss_factor", float, default=0.0)
        wt.finish()
        try:
            wall = WallSlab(z_front=z_front, thickness=thickness, rel_permittivity=eps, loss_factor=loss)
        except SceneError as exc:
            raise ConfigError(f"{wt.path}: {exc}") from exc
    table.finish()
    try:
        return Scene(emitters=tuple(emitters), scatterers=tuple(scatterers), wall=wall)
    except SceneError as exc:
        raise ConfigError(f"scene: {exc}") from exc


def _parse_aperture(table: _Table, carrier_hz: float) -> ScanAperture:
    origin = _point(table, "origin", default=Point3(0.0, 0.0, 0.0))
    span = _pair(table, "span", required=True)
    spacing = _pair(table, "spacing", required=True)
    reference = _point(table, "reference", default=None)
    decimate = table.take("decimate", int, default=1)
    table.finish()
    if reference is None:
        reference = default_reference(origin, carrier_hz)
    try:
        ap = make_aperture(origin, span[0], span[1], spacing[0], spacing[1], reference)
        if decimate != 1:
            ap = decimate_aperture(ap, decimate)
    except SceneError as exc:
        raise ConfigError(f"aperture: {exc}") from exc
    return ap


def _parse_waveform(table: Optional[_Table], seed: int) -> WaveformSpec:
    if table is None:
        return WaveformSpec(seed=seed)
    carrier = table.take("carrier_hz", float, default=2.4372e9)
    chip_rate = table.take("chip_rate_hz", float, default=11e6)
    spc = table.take("samples_per_chip", int, default=4)
    n_bits = table.take("n_bits", int, default=64)
    table.finish()
    try:
        return WaveformSpec(
            carrier_hz=carrier, chip_rate_hz=chip_rate, samples_per_chip=spc,
            n_bits=n_bits, seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"waveform: {exc}") from exc


def _parse_window(table: Optional[_Table]) -> WindowSpec:
    if table is None:
        return WindowSpec()
    width = table.take("width_s", float, default=1e-6)
    hop = table.take("hop_s", float, default=None)
    count = table.take("count", int, default=64)
    table.finish()
    try:
        return WindowSpec(width_s=width, hop_s=hop, count=count)
    except ValueError as exc:
        raise ConfigError(f"window: {exc} (key 'window.count' / 'window.width_s')") from exc


def _parse_recon(table: Optional[_Table], default_bin: float) -> ReconSpec:
    if table is None:
        return ReconSpec(bin_hz=default_bin)
    bin_hz = table.take("bin_hz", float, default=default_bin)
    method = table.take("method", str, default="direct")
    if method not in ("direct", "angular"):
        raise ConfigError(f"reconstruction.method: expected 'direct' or 'angular', got {method!r}")
    z_raw = table.take("z_slices", list, default=[])
    if not all(isinstance(z, (int, float)) for z in z_raw):
        raise ConfigError("reconstruction.z_slices: expected an array of depths in meters")
    taper = table.take("taper", str, default="none")
    if taper not in ("none", "hann"):
        raise ConfigError(f"reconstruction.taper: expected 'none' or 'hann', got {taper!r}")
    extend = table.take("extend", int, default=0)
    epsilon = table.take("epsilon", float, default=1e-3)
    if epsilon <= 0:
        raise ConfigError("reconstruction.epsilon must be positive")
    grid = None
    gt = table.sub("grid")
    if gt is not None:
        grid = (
            gt.take("x0", float, required=True),
            gt.take("y0", float, required=True),
            gt.take("dx", float, required=True),
            gt.take("dy", float, required=True),
            gt.take("nx", int, required=True),
            gt.take("ny", int, required=True),
        )
        gt.finish()
    table.finish()
    return ReconSpec(
        bin_hz=bin_hz,
        method=method,
        z_slices=tuple(float(z) for z in z_raw),
        taper=taper,
        extend=extend,
        grid=grid,
        epsilon=epsilon,
    )


def _parse_analysis(table: Optional[_Table]) -> AnalysisSpec:
    if table is None:
        return AnalysisSpec()
    prom = table.take("min_prominence", float, default=0.2)
    axis = table.take("crest_axis", str, default="x")
    if axis not in ("x", "y"):
        raise ConfigError(f"analysis.crest_axis: expected 'x' or 'y', got {axis!r}")
    metric = table.take("focus_metric", str, default="max")
    if metric not in ("max", "sharpness"):
        raise ConfigError(f"analysis.focus_metric: expected 'max' or 'sharpness', got {metric!r}")
    profile_z = table.take("profile_z", float, default=None)
    table.finish()
    return AnalysisSpec(
        min_prominence=prom, crest_axis=axis, focus_metric=metric, profile_z=profile_z
    )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def parse_config_dict(doc: dict, strict: bool = True) -> RunConfig:
    """Validate an already-parsed TOML document into a RunConfig."""
    root = _Table(doc, "", strict)
    seed = root.take("seed", int, default=0)
    out_dir = root.take("out_dir", str, default=None)
    waveform = _parse_waveform(root.sub("waveform"), seed)
    scene_table = root.sub("scene")
    if scene_table is None:
        raise ConfigError("missing required section [scene]")
    scene = _parse_scene(scene_table, waveform.carrier_hz)
    ap_table = root.sub("aperture")
    if ap_table is None:
        raise ConfigError("missing required section [aperture]")
    aperture = _parse_aperture(ap_table, waveform.carrier_hz)
    window = _parse_window(root.sub("window"))
    sim = root.sub("simulation")
    snr_db = math.inf
    if sim is not None:
        snr_db = sim.take("snr_db", float, default=math.inf)
        sim.finish()
    if math.isnan(snr_db):
        raise ConfigError("simulation.snr_db: must not be NaN")
    recon = _parse_recon(root.sub("reconstruction"), waveform.carrier_hz)
    analysis = _parse_analysis(root.sub("analysis"))
    root.finish()
    return RunConfig(
        seed=seed,
        scene=scene,
        aperture=aperture,
        waveform=waveform,
        window=window,
        snr_db=snr_db,
        recon=recon,
        analysis=analysis,
        out_dir=out_dir,
    )


def parse_config(text: str, strict: bool = True) -> RunConfig:
    """Parse and validate a config document.

    Raises :class:`ConfigError` with the line number on TOML syntax
    errors, or with the dotted key path on schema violations.
    """
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    return parse_config_dict(doc, strict=strict)


def apply_override(doc: dict, assignment: str) -> None:
    """Apply one ``dotted.key=value`` override to a parsed document in place."""
    key_path, sep, value = assignment.partition("=")
    if not sep:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    try:
        parsed = _toml.loads(f"v = {value}")["v"]
    except _toml.TOMLDecodeError:
        parsed = value.strip()  # bare string convenience
    node = doc
    parts = key_path.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key_path!r} crosses a non-table value")
    node[parts[-1]] = parsed


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == math.inf:
            return "inf"
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {type(value).__name__}")


def emit_config(cfg: RunConfig) -> str:
    """Write a fully-defaulted document that parses back to an equal config."""
    out = [f"seed = {cfg.seed}"]
    if cfg.out_dir is not None:
        out.append(f"out_dir = {_fmt(cfg.out_dir)}")
    wf = cfg.waveform
    out += [
        "",
        "[waveform]",
        f"carrier_hz = {_fmt(wf.carrier_hz)}",
        f"chip_rate_hz = {_fmt(wf.chip_rate_hz)}",
        f"samples_per_chip = {wf.samples_per_chip}",
        f"n_bits = {wf.n_bits}",
    ]
    w = cfg.window
    out += ["", "[window]", f"width_s = {_fmt(w.width_s)}"]
    if w.hop_s is not None:
        out.append(f"hop_s = {_fmt(w.hop_s)}")
    out.append(f"count = {w.count}")
    out += ["", "[simulation]", f"snr_db = {_fmt(cfg.snr_db)}"]
    ap = cfg.aperture
    out += [
        "",
        "[aperture]",
        f"origin = {_fmt([ap.origin.x, ap.origin.y, ap.origin.z])}",
        f"span = {_fmt([ap.span_x, ap.span_y])}",
        f"spacing = {_fmt([ap.dx, ap.dy])}",
        f"reference = {_fmt([ap.reference_position.x, ap.reference_position.y, ap.reference_position.z])}",
    ]
    rc = cfg.recon
    out += [
        "",
        "[reconstruction]",
        f"bin_hz = {_fmt(rc.bin_hz)}",
        f"method = {_fmt(rc.method)}",
        f"z_slices = {_fmt(list(rc.z_slices))}",
        f"taper = {_fmt(rc.taper)}",
        f"extend = {rc.extend}",
        f"epsilon = {_fmt(rc.epsilon)}",
    ]
    if rc.grid is not None:
        x0, y0, dx, dy, nx, ny = rc.grid
        out.append(
            "grid = { x0 = %s, y0 = %s, dx = %s, dy = %s, nx = %d, ny = %d }"
            % (_fmt(x0), _fmt(y0), _fmt(dx), _fmt(dy), nx, ny)
        )
    an = cfg.analysis
    out += [
        "",
        "[analysis]",
        f"min_prominence = {_fmt(an.min_prominence)}",
        f"crest_axis = {_fmt(an.crest_axis)}",
        f"focus_metric = {_fmt(an.focus_metric)}",
    ]
    if an.profile_z is not None:
        out.append(f"profile_z = {_fmt(an.profile_z)}")
    out += ["", "[scene]"]
    if cfg.scene.wall is not None:
        wl = cfg.scene.wall
        out += [
            "",
            "[scene.wall]",
            f"z_front = {_fmt(wl.z_front)}",
            f"thickness = {_fmt(wl.thickness)}",
            f"rel_permittivity = {_fmt(wl.rel_permittivity)}",
            f"loss_factor = {_fmt(wl.loss_factor)}",
        ]
    for e in cfg.scene.emitters:
        out += [
            "",
            "[[scene.emitters]]",
            f"position = {_fmt([e.position.x, e.position.y, e.position.z])}",
            f"carrier_hz = {_fmt(e.carrier_hz)}",
            f"power_scale = {_fmt(e.power_scale)}",
        ]
    for s in cfg.scene.scatterers:
        out += [
            "",
            "[[scene.scatterers]]",
            f"position = {_fmt([s.position.x, s.position.y, s.position.z])}",
            f"reflectivity = {_fmt([s.reflectivity.real, s.reflectivity.imag])}",
        ]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Scene-only helpers (used by scene.load_scene / scene.emit_scene_config)
# ---------------------------------------------------------------------------

def parse_scene_text(text: str, strict: bool = True) -> Scene:
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    if "scene" not in doc:
        raise ConfigError("missing required section [scene]")
    carrier = 2.4372e9
    wf = doc.get("waveform")
    if isinstance(wf, dict) and isinstance(wf.get("carrier_hz"), (int, float)):
        carrier = float(wf["carrier_hz"])
    return _parse_scene(_Table(doc["scene"], "scene", strict), carrier)


def emit_scene_text(scene: Scene) -> str:
    out = ["[scene]"]
    if scene.wall is not None:
        wl = scene.wall
        out += [
            "",
            "[scene.wall]",
            f"z_front = {_fmt(wl.z_front)}",
            f"thickness = {_fmt(wl.thickness)}",
            f"rel_permittivity = {_fmt(wl.rel_permittivity)}",
            f"loss_factor = {_fmt(wl.loss_factor)}",
        ]
    for e in scene.emitters:
        out += [
            "",
            "[[scene.emitters]]",
            f"position = {_fmt([e.position.x, e.position.y, e.position.z])}",
            f"carrier_hz = {_fmt(e.carrier_hz)}",
            f"power_scale = {_fmt(e.power_scale)}",
        ]
    for s in scene.scatterers:
        out += [
            "",
            "[[scene.scatterers]]",
            f"position = {_fmt([s.position.x, s.position.y, s.position.z])}",
            f"reflectivity = {_fmt([s.reflectivity.real, s.reflectivity.imag])}",
        ]
    return "\n".join(out) + "\n"
