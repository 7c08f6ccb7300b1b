import math

import numpy as np
import pytest

from wiholo.forward import FrequencyBin, predict_hologram_value
from wiholo.hologram import Hologram
from wiholo.imaging import (
    ImageVolume,
    ImagingError,
    Point3,
    TaperSpec,
    VolumeSpec,
    angular_spectrum_slice,
    backproject,
    normalize_image,
    reconstruct_stack,
)
from wiholo.scene import Emitter, Scene, make_aperture

CARRIER = 2.4372e9
BIN = FrequencyBin(CARRIER)
REF = Point3(-0.123, -0.123, 0.0)


def aperture_2d(span=0.8, step=0.0615):
    return make_aperture(Point3(0, 0, 0), span, span, step, step, REF)


def point_hologram(aperture, target: Point3, include_1_over_r=True):
    """Analytic single-target hologram, direct path removed."""
    vals = np.zeros((aperture.nx, aperture.ny, 1), dtype=complex)
    k = BIN.k
    for i in range(aperture.nx):
        for j in range(aperture.ny):
            node = aperture.node_position(i, j)
            r = node.distance_to(target)
            g = np.exp(-1j * k * r)
            if include_1_over_r:
                g = g / (4 * math.pi * r)
            vals[i, j, 0] = g
    return Hologram(values=vals, aperture=aperture, bins=(BIN,))


def test_backproject_peak_at_true_scatterer():
    ap = aperture_2d()
    target = Point3(0.42, 0.36, 0.8)
    h = point_hologram(ap, target)
    vol = VolumeSpec(Point3(0.0, 0.0, 0.8), 33, 33, 1, 0.025, 0.025, 1.0)
    img = backproject(h, vol, BIN)
    # brute-force argmax over the whole volume
    idx = np.unravel_index(np.argmax(img.values), img.values.shape)
    best = (vol.axis_x()[idx[0]], vol.axis_y()[idx[1]])
    assert abs(best[0] - target.x) <= vol.dx / 2 + 1e-9
    assert abs(best[1] - target.y) <= vol.dy / 2 + 1e-9


def test_backproject_zero_hologram_zero_image():
    ap = aperture_2d(span=0.3)
    h = Hologram(np.zeros((ap.nx, ap.ny, 1), complex), ap, (BIN,))
    vol = VolumeSpec(Point3(0, 0, 0.5), 5, 5, 2, 0.1, 0.1, 0.1)
    img = backproject(h, vol, BIN)
    assert np.all(img.values == 0.0)


def test_backproject_two_scatterers_crest_spacing():
    # two targets 0.4 m apart, 21-node 1 m line: crest spacing within a scan
    # interval of truth
    ap = make_aperture(Point3(0, 0, 0), 1.0, 0.0, 0.05, 0.05, REF)
    h1 = point_hologram(ap, Point3(0.3, 0.0, 1.0))
    h2 = point_hologram(ap, Point3(0.7, 0.0, 1.0))
    # distinct illumination phases, as any real transmit geometry gives;
    # an exactly in-phase pair would add a midway interference fringe
    h = Hologram(h1.values + 1j * h2.values, ap, (BIN,))
    vol = VolumeSpec(Point3(0.0, 0.0, 1.0), 101, 1, 1, 0.01, 0.05, 1.0)
    img = backproject(h, vol, BIN)
    prof = img.values[:, 0, 0]
    from wiholo.analysis import Curve1D, find_crests

    curve = Curve1D(vol.axis_x(), prof).normalized()
    crests = find_crests(curve, 0.2)
    assert len(crests) >= 2
    # the two dominant crests carry the separation; ideal point pairs also
    # show a weak first-sidelobe overlap bump between them
    value_at = dict(zip(curve.coordinates, curve.values))
    top2 = sorted(sorted(crests, key=lambda c: -value_at[c])[:2])
    assert value_at[top2[0]] > 0.9 and value_at[top2[1]] > 0.9
    assert all(value_at[c] < 0.6 for c in crests if c not in top2)
    assert top2[1] - top2[0] == pytest.approx(0.4, abs=0.05)


def test_backproject_errors():
    ap = aperture_2d(span=0.3)
    h = point_hologram(ap, Point3(0.1, 0.1, 0.6))
    with pytest.raises(Exception):
        backproject(h, VolumeSpec(Point3(0, 0, 0.5), 3, 3, 1, 0.1, 0.1, 1.0), FrequencyBin(2.6e9))
    with pytest.raises(ImagingError):
        backproject(h, VolumeSpec(Point3(0, 0, 0.0), 3, 3, 1, 0.1, 0.1, 1.0), BIN)


def test_backproject_global_phase_invariance():
    ap = aperture_2d(span=0.4)
    h = point_hologram(ap, Point3(0.2, 0.2, 0.7))
    alpha = np.exp(1j * 1.234)
    h2 = Hologram(h.values * alpha, ap, (BIN,))
    vol = VolumeSpec(Point3(0, 0, 0.7), 9, 9, 1, 0.05, 0.05, 1.0)
    a = backproject(h, vol, BIN).values
    b = backproject(h2, vol, BIN).values
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_backproject_two_target_linearity_of_peaks():
    ap = aperture_2d()
    t1, t2 = Point3(0.15, 0.2, 0.8), Point3(0.65, 0.6, 0.8)
    h = Hologram(
        point_hologram(ap, t1).values + point_hologram(ap, t2).values, ap, (BIN,)
    )
    vol = VolumeSpec(Point3(0.0, 0.0, 0.8), 33, 33, 1, 0.025, 0.025, 1.0)
    img = backproject(h, vol, BIN).values[:, :, 0]
    from wiholo.analysis import local_maxima_2d

    found = {
        (round(vol.axis_x()[i], 3), round(vol.axis_y()[j], 3))
        for i, j in local_maxima_2d(img, min_rel=0.5, neighborhood=5)
    }
    for t in (t1, t2):
        assert any(abs(fx - t.x) <= 0.025 and abs(fy - t.y) <= 0.025 for fx, fy in found)


def test_backproject_shift_equivariance():
    step = 0.0615
    t = Point3(0.30, 0.24, 0.9)
    shift = (2 * step, 3 * step)  # whole grid cells keep the sampling aligned
    ap1 = aperture_2d()
    ap2 = make_aperture(
        Point3(shift[0], shift[1], 0.0), 0.8, 0.8, step, step,
        Point3(REF.x + shift[0], REF.y + shift[1], 0.0),
    )
    h1 = point_hologram(ap1, t)
    h2 = point_hologram(ap2, Point3(t.x + shift[0], t.y + shift[1], t.z))
    vol1 = VolumeSpec(Point3(0.0, 0.0, 0.9), 25, 25, 1, 0.03, 0.03, 1.0)
    vol2 = VolumeSpec(Point3(shift[0], shift[1], 0.9), 25, 25, 1, 0.03, 0.03, 1.0)
    a = backproject(h1, vol1, BIN).values
    b = backproject(h2, vol2, BIN).values
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * a.max())


def test_direct_path_artifact_focuses_at_emitter():
    # un-subtracted background hologram refocuses at the router (x, y)
    ap = aperture_2d(span=1.2)
    tx = Point3(0.62, 0.48, 1.9)
    scene = Scene(emitters=(Emitter(tx, CARRIER, 1.0),))
    vals = np.zeros((ap.nx, ap.ny, 1), dtype=complex)
    for i in range(ap.nx):
        for j in range(ap.ny):
            vals[i, j, 0] = predict_hologram_value(scene, ap.node_position(i, j), REF, BIN)
    h = Hologram(vals, ap, (BIN,))
    vol = VolumeSpec(Point3(0.0, 0.0, 1.9), 49, 49, 1, 0.025, 0.025, 1.0)
    img = backproject(h, vol, BIN)
    idx = np.unravel_index(np.argmax(img.values), img.values.shape)
    assert abs(vol.axis_x()[idx[0]] - tx.x) <= 0.025 + 1e-9
    assert abs(vol.axis_y()[idx[1]] - tx.y) <= 0.025 + 1e-9


def test_angular_spectrum_zero_distance_identity():
    ap = aperture_2d(span=0.5)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal((ap.nx, ap.ny, 1)) + 1j * rng.standard_normal((ap.nx, ap.ny, 1))
    h = Hologram(vals, ap, (BIN,))
    for kernel in ("matched", "analytic"):
        out = angular_spectrum_slice(h, 0.0, BIN, kernel=kernel)
        assert np.allclose(out, np.abs(vals[:, :, 0]), atol=1e-9)


def test_angular_spectrum_matched_equals_direct_sum():
    ap = aperture_2d()
    h = point_hologram(ap, Point3(0.42, 0.36, 0.8))
    z = 0.8
    fast = angular_spectrum_slice(h, z, BIN, kernel="matched")
    vol = VolumeSpec(Point3(0.0, 0.0, z), ap.nx, ap.ny, 1, ap.dx, ap.dy, 1.0)
    direct = backproject(h, vol, BIN).values[:, :, 0]
    rel = np.sqrt(((fast - direct) ** 2).mean() / (direct**2).mean())
    assert rel <= 1e-3


def test_angular_spectrum_matched_extend_matches_direct():
    ap = aperture_2d(span=0.5)
    h = point_hologram(ap, Point3(0.1, 0.4, 0.6))
    ext = 3
    fast = angular_spectrum_slice(h, 0.6, BIN, kernel="matched", extend=ext)
    vol = VolumeSpec(
        Point3(-ext * ap.dx, -ext * ap.dy, 0.6),
        ap.nx + 2 * ext, ap.ny + 2 * ext, 1, ap.dx, ap.dy, 1.0,
    )
    direct = backproject(h, vol, BIN).values[:, :, 0]
    rel = np.sqrt(((fast - direct) ** 2).mean() / (direct**2).mean())
    assert rel <= 1e-9


def test_angular_spectrum_analytic_evanescent_cutoff():
    # with an artificially tiny wavenumber every nonzero spatial frequency
    # is evanescent; only the DC plane wave survives
    ap = aperture_2d(span=0.5)
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((ap.nx, ap.ny, 1)) + 1j * rng.standard_normal((ap.nx, ap.ny, 1))
    vals -= vals.mean()  # remove the DC component as well
    tiny = FrequencyBin(1e3)  # k ~ 2e-5 rad/m
    h = Hologram(vals, ap, (tiny,))
    out = angular_spectrum_slice(h, 0.5, tiny, kernel="analytic")
    # all propagating content was removed except (near-zero) DC
    assert out.max() <= 1e-10 * np.abs(vals).max()


def test_angular_spectrum_rejects_bad_args():
    ap = aperture_2d(span=0.3)
    h = point_hologram(ap, Point3(0.1, 0.1, 0.5))
    with pytest.raises(ImagingError):
        angular_spectrum_slice(h, -0.1, BIN)
    with pytest.raises(ImagingError):
        angular_spectrum_slice(h, 0.5, BIN, kernel="nope")
    with pytest.raises(ImagingError):
        angular_spectrum_slice(h, 0.5, BIN, kernel="analytic", extend=2)
    with pytest.raises(ImagingError):
        angular_spectrum_slice(h, 0.5, BIN, pad_factor=1)


def test_taper_weights():
    ap = aperture_2d(span=0.5)
    w = TaperSpec("none").weights(ap)
    assert np.all(w == 1.0)
    wh = TaperSpec("hann").weights(ap)
    assert wh.min() >= 0.0 and wh.max() <= 1.0
    assert wh[ap.nx // 2, ap.ny // 2] == wh.max()
    with pytest.raises(ImagingError):
        TaperSpec("hamming")


def test_normalize_image_identities():
    spec = VolumeSpec(Point3(0, 0, 0.5), 4, 4, 2, 0.1, 0.1, 0.1)
    rng = np.random.default_rng(11)
    b = ImageVolume(spec, rng.uniform(0.5, 2.0, spec.shape))
    zero = normalize_image(b, b)
    assert np.all(zero.values == 0.0)
    twice = normalize_image(ImageVolume(spec, 2 * b.values), b)
    assert np.allclose(twice.values, 1.0, atol=1e-12)


def test_normalize_image_guarded_division():
    spec = VolumeSpec(Point3(0, 0, 0.5), 2, 2, 1, 0.1, 0.1, 0.1)
    b = ImageVolume(spec, np.array([[[1.0], [0.0]], [[0.5], [1e-9]]]))
    o = ImageVolume(spec, np.ones(spec.shape))
    out = normalize_image(o, b, epsilon=1e-3)
    assert np.all(np.isfinite(out.values))
    # zero background voxel divided by the floor 1e-3 * max
    assert out.values[0, 1, 0] == pytest.approx(1.0 / 1e-3)
    all_zero = ImageVolume(spec, np.zeros(spec.shape))
    out2 = normalize_image(o, all_zero)
    assert np.all(np.isfinite(out2.values))


def test_normalize_image_spec_mismatch():
    a = ImageVolume(VolumeSpec(Point3(0, 0, 0.5), 2, 2, 1, 0.1, 0.1, 0.1), np.ones((2, 2, 1)))
    b = ImageVolume(VolumeSpec(Point3(0, 0, 0.6), 2, 2, 1, 0.1, 0.1, 0.1), np.ones((2, 2, 1)))
    with pytest.raises(ImagingError):
        normalize_image(a, b)


def test_reconstruct_stack_depth_focus():
    # single target at z=0.8: per-slice peak is largest at the true depth
    # (slice grid fine enough to capture the peak, not just aperture nodes)
    ap = aperture_2d()
    h = point_hologram(ap, Point3(0.4, 0.4, 0.8))
    stack = reconstruct_stack(
        h, [0.6, 0.7, 0.8, 0.9, 1.0], BIN, method="direct",
        grid=(0.0, 0.0, 0.02, 0.02, 41, 41),
    )
    peaks = [stack.slice_at(i).max() for i in range(stack.n_slices)]
    assert stack.z_values[int(np.argmax(peaks))] == pytest.approx(0.8)


def test_reconstruct_stack_empty():
    ap = aperture_2d(span=0.3)
    h = point_hologram(ap, Point3(0.1, 0.1, 0.5))
    stack = reconstruct_stack(h, [], BIN)
    assert stack.n_slices == 0
    with pytest.raises(ImagingError):
        stack.to_volume()


def test_reconstruct_stack_methods_agree():
    ap = aperture_2d(span=0.5)
    h = point_hologram(ap, Point3(0.2, 0.3, 0.7))
    zs = [0.6, 0.7, 0.8]
    d = reconstruct_stack(h, zs, BIN, method="direct")
    a = reconstruct_stack(h, zs, BIN, method="angular")
    assert np.allclose(a.values, d.values, rtol=1e-9, atol=1e-12 * d.values.max())


def test_stack_to_volume_uniform_z_required():
    ap = aperture_2d(span=0.3)
    h = point_hologram(ap, Point3(0.1, 0.1, 0.5))
    stack = reconstruct_stack(h, [0.4, 0.5, 0.7], BIN)
    with pytest.raises(ImagingError):
        stack.to_volume()
    vol = reconstruct_stack(h, [0.4, 0.5, 0.6], BIN).to_volume()
    assert vol.spec.nz == 3 and vol.spec.dz == pytest.approx(0.1)


def test_backproject_node_mask_matches_manual_subset():
    ap = aperture_2d(span=0.5)
    h = point_hologram(ap, Point3(0.2, 0.2, 0.7))
    mask = np.zeros((ap.nx, ap.ny), dtype=bool)
    mask[::2, ::2] = True
    vol = VolumeSpec(Point3(0, 0, 0.7), 7, 7, 1, 0.07, 0.07, 1.0)
    masked = backproject(h, vol, BIN, node_mask=mask).values
    zeroed = Hologram(h.values * mask[:, :, None], ap, (BIN,))
    expect = backproject(zeroed, vol, BIN).values
    assert np.allclose(masked, expect, rtol=1e-12)


def test_backproject_multiband_average():
    from wiholo.imaging import backproject_multiband

    ap = aperture_2d(span=0.4)
    t = Point3(0.2, 0.2, 0.6)
    bins = (BIN, FrequencyBin(CARRIER + 5e6))
    vals = np.zeros((ap.nx, ap.ny, 2), dtype=complex)
    for bi, b in enumerate(bins):
        for i in range(ap.nx):
            for j in range(ap.ny):
                r = ap.node_position(i, j).distance_to(t)
                vals[i, j, bi] = np.exp(-1j * b.k * r) / (4 * math.pi * r)
    h = Hologram(vals, ap, bins)
    vol = VolumeSpec(Point3(0, 0, 0.6), 9, 9, 1, 0.05, 0.05, 1.0)
    avg = backproject_multiband(h, vol, bins)
    manual = (backproject(h, vol, bins[0]).values + backproject(h, vol, bins[1]).values) / 2
    assert np.allclose(avg.values, manual)
    with pytest.raises(ImagingError):
        backproject_multiband(h, vol, ())


def test_backproject_range_compensation_flag():
    ap = aperture_2d(span=0.4)
    h = point_hologram(ap, Point3(0.2, 0.2, 0.6))
    vol = VolumeSpec(Point3(0.15, 0.15, 0.6), 5, 5, 1, 0.025, 0.025, 1.0)
    plain = backproject(h, vol, BIN).values
    comp = backproject(h, vol, BIN, range_compensate=True).values
    assert not np.allclose(plain, comp)
    # each term gains a factor R (node-voxel distance, ~0.65 m here)
    idx = np.unravel_index(np.argmax(plain), plain.shape)
    assert comp[idx] == pytest.approx(plain[idx] * 0.65, rel=0.1)
