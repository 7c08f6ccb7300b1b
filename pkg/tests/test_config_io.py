import math

import numpy as np
import pytest

from wiholo.analysis import Curve1D
from wiholo.config import (
    ConfigError,
    apply_override,
    emit_config,
    parse_config,
    parse_config_dict,
)
from wiholo.forward import FrequencyBin
from wiholo.hologram import Hologram
from wiholo.imaging import ImageVolume, Point3, VolumeSpec
from wiholo.io_formats import (
    FormatError,
    read_curve_csv,
    read_hologram_csv,
    read_slice_pgm,
    read_volume,
    write_curve_csv,
    write_hologram_csv,
    write_metrics_csv,
    write_slice_pgm,
    write_volume,
)
from wiholo.scene import make_aperture

MINIMAL = """
[scene]
[[scene.emitters]]
position = [0.8, 0.3, 1.8]

[aperture]
span = [1.0, 0.0]
spacing = [0.05, 0.05]
"""


def test_minimal_config_gets_documented_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.waveform.carrier_hz == pytest.approx(2.4372e9)
    assert cfg.waveform.chip_rate_hz == pytest.approx(11e6)
    assert cfg.window.width_s == pytest.approx(1e-6)
    assert cfg.window.count == 64
    assert cfg.seed == 0
    assert cfg.snr_db == math.inf
    assert cfg.aperture.nx == 21
    # default reference: one wavelength outside the corner, off the grid
    assert cfg.aperture.reference_position.x < 0


def test_unknown_key_rejected_with_path():
    bad = MINIMAL + "\n[apertur]\nspacing = [0.05, 0.05]\n"
    with pytest.raises(ConfigError) as ei:
        parse_config(bad)
    assert "apertur" in str(ei.value)

    bad2 = MINIMAL.replace("spacing", "spacingg")
    with pytest.raises(ConfigError) as ei2:
        parse_config(bad2)
    assert "spacing" in str(ei2.value)


def test_unknown_key_warns_in_lenient_mode():
    bad = MINIMAL + "\nnonsense = 3\n"
    with pytest.warns(UserWarning):
        cfg = parse_config(bad, strict=False)
    assert cfg.aperture.nx == 21


def test_syntax_error_reports_location():
    with pytest.raises(ConfigError) as ei:
        parse_config("[scene\n")
    assert "syntax" in str(ei.value)


def test_missing_required_sections():
    with pytest.raises(ConfigError):
        parse_config("[aperture]\nspan = [1.0, 0.0]\nspacing = [0.05, 0.05]\n")
    with pytest.raises(ConfigError):
        parse_config("[scene]\n[[scene.emitters]]\nposition = [0.1, 0.1, 1.0]\n")


def test_full_config_round_trips_to_equal_runconfig():
    text = """
seed = 42
out_dir = "runs/demo"

[waveform]
carrier_hz = 2.4372e9
chip_rate_hz = 11.0e6
samples_per_chip = 4
n_bits = 32

[window]
width_s = 1e-6
count = 32

[simulation]
snr_db = 25.0

[aperture]
origin = [0.0, 0.0, 0.0]
span = [1.17, 1.3]
spacing = [0.0615, 0.0615]
reference = [-0.123, -0.123, 0.0]

[reconstruction]
bin_hz = 2.4372e9
method = "angular"
z_slices = [0.6, 0.7, 0.8]
taper = "hann"
extend = 2
epsilon = 0.05

[analysis]
min_prominence = 0.25
crest_axis = "y"
focus_metric = "sharpness"
profile_z = 0.7

[scene]
[scene.wall]
z_front = 0.2
thickness = 0.06
rel_permittivity = 2.0
loss_factor = 0.1

[[scene.emitters]]
position = [0.3, 0.3, 2.0]
power_scale = 0.5

[[scene.scatterers]]
position = [0.5, 0.6, 0.7]
reflectivity = [1.5, -0.5]
"""
    cfg = parse_config(text)
    again = parse_config(emit_config(cfg))
    assert again == cfg
    # and emission is a fixed point
    assert emit_config(again) == emit_config(cfg)


def test_overrides():
    import tomli

    doc = tomli.loads(MINIMAL)
    apply_override(doc, "simulation.snr_db=20.0")
    apply_override(doc, "seed=7")
    cfg = parse_config_dict(doc)
    assert cfg.snr_db == 20.0 and cfg.seed == 7
    with pytest.raises(ConfigError):
        apply_override(doc, "no-equals-sign")


def test_scatterer_scalar_reflectivity():
    text = MINIMAL + "\n[[scene.scatterers]]\nposition = [0.5, 0.0, 0.8]\nreflectivity = 3.5\n"
    cfg = parse_config(text)
    assert cfg.scene.scatterers[0].reflectivity == 3.5 + 0j


def test_decimate_in_aperture_section():
    text = MINIMAL.replace("span = [1.0, 0.0]", "span = [1.17, 1.3]").replace(
        "spacing = [0.05, 0.05]", "spacing = [0.0615, 0.0615]\ndecimate = 2"
    )
    cfg = parse_config(text)
    assert (cfg.aperture.nx, cfg.aperture.ny) == (10, 11)


def test_bad_values_name_their_key():
    with pytest.raises(ConfigError) as ei:
        parse_config(MINIMAL + "\n[window]\ncount = 0\n")
    assert "count" in str(ei.value)
    with pytest.raises(ConfigError) as ei2:
        parse_config(MINIMAL + "\n[reconstruction]\nmethod = 'sideways'\n")
    assert "method" in str(ei2.value)


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

def test_pgm_round_trip_within_quantization(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.uniform(-3.0, 5.0, (17, 13))
    path = tmp_path / "slice.pgm"
    write_slice_pgm(values, path, meta={"z": 0.8})
    back, meta = read_slice_pgm(path)
    dyn = values.max() - values.min()
    assert np.max(np.abs(back - values)) <= dyn / 255.0
    assert meta["z"] == 0.8


def test_pgm_constant_slice_all_zero_pixels(tmp_path):
    path = tmp_path / "flat.pgm"
    write_slice_pgm(np.full((8, 8), 2.5), path)
    raw = path.read_bytes()
    body = raw.split(b"\n", 3)[3]
    assert body == bytes(64)
    back, _ = read_slice_pgm(path)
    assert np.allclose(back, 2.5)


def test_pgm_file_size_64x64(tmp_path):
    path = tmp_path / "s.pgm"
    write_slice_pgm(np.random.default_rng(0).uniform(0, 1, (64, 64)), path)
    header = b"P5\n64 64\n255\n"
    assert path.stat().st_size == len(header) + 4096


def test_pgm_malformed_header(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(FormatError):
        read_slice_pgm(path)


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------

def vol_fixture(nx=4, ny=3, nz=2):
    spec = VolumeSpec(Point3(0.1, 0.2, 0.5), nx, ny, nz, 0.05, 0.05, 0.1)
    rng = np.random.default_rng(2)
    vals = rng.uniform(0, 1, spec.shape).astype(np.float32).astype(float)
    return ImageVolume(spec, vals)


def test_volume_round_trip_bit_exact(tmp_path):
    vol = vol_fixture()
    p1 = tmp_path / "a.raw"
    p2 = tmp_path / "b.raw"
    write_volume(vol, p1)
    back = read_volume(p1)
    write_volume(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.spec == vol.spec
    assert np.array_equal(back.values, vol.values)


def test_volume_x_fastest_ordering(tmp_path):
    vol = vol_fixture()
    path = tmp_path / "v.raw"
    write_volume(vol, path)
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    # sample (i, j, k) lives at index i + nx*(j + ny*k)
    spec = vol.spec
    assert raw[1 + spec.nx * (2 + spec.ny * 1)] == np.float32(vol.values[1, 2, 1])


def test_volume_truncated_raw_rejected(tmp_path):
    vol = vol_fixture()
    path = tmp_path / "v.raw"
    write_volume(vol, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        read_volume(path)


def test_volume_size_64x64x9(tmp_path):
    spec = VolumeSpec(Point3(0, 0, 0.5), 64, 64, 9, 0.02, 0.02, 0.1)
    path = tmp_path / "v.raw"
    write_volume(ImageVolume(spec, np.zeros(spec.shape)), path)
    assert path.stat().st_size == 64 * 64 * 9 * 4 == 147456


# ---------------------------------------------------------------------------
# Hologram CSV / curves / metrics
# ---------------------------------------------------------------------------

def test_hologram_csv_bit_exact_round_trip(tmp_path):
    ap = make_aperture(Point3(0, 0, 0), 0.2, 0.1, 0.05, 0.05, Point3(-0.123, -0.123, 0))
    rng = np.random.default_rng(5)
    bins = (FrequencyBin(2.4372e9), FrequencyBin(2.4382e9))
    vals = rng.standard_normal((ap.nx, ap.ny, 2)) + 1j * rng.standard_normal((ap.nx, ap.ny, 2))
    h = Hologram(vals, ap, bins)
    p1, p2 = tmp_path / "h1.csv", tmp_path / "h2.csv"
    write_hologram_csv(h, p1)
    back = read_hologram_csv(p1)
    write_hologram_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.values, h.values)
    assert back.aperture == h.aperture


def test_hologram_csv_rejects_missing_rows(tmp_path):
    ap = make_aperture(Point3(0, 0, 0), 0.1, 0.0, 0.05, 0.05, Point3(-0.123, -0.123, 0))
    h = Hologram(np.ones((ap.nx, 1, 1), complex), ap, (FrequencyBin(2.4372e9),))
    path = tmp_path / "h.csv"
    write_hologram_csv(h, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(FormatError):
        read_hologram_csv(path)


def test_curve_csv_round_trip(tmp_path):
    curve = Curve1D(np.linspace(0, 1, 11), np.random.default_rng(0).uniform(0, 1, 11))
    path = tmp_path / "c.csv"
    write_curve_csv(curve, path)
    back = read_curve_csv(path)
    assert np.array_equal(back.coordinates, curve.coordinates)
    assert np.array_equal(back.values, curve.values)


def test_metrics_csv_sorted_and_reprd(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics_csv({"b_metric": 2.0, "a_metric": 0.1}, path)
    text = path.read_text().splitlines()
    assert text[0] == "metric,value"
    assert text[1].startswith("a_metric,") and text[2].startswith("b_metric,")
