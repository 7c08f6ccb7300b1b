import math

import numpy as np
import pytest

from wiholo.analysis import (
    AnalysisError,
    Curve1D,
    find_crests,
    focus_curve,
    fwhm_of_profile,
    image_similarity,
    local_maxima_2d,
    profile_through_peak,
    psf_fwhm,
)
from wiholo.forward import FrequencyBin
from wiholo.hologram import Hologram
from wiholo.imaging import ImageVolume, Point3, SliceStack, VolumeSpec
from wiholo.scene import make_aperture

CARRIER = 2.4372e9
BIN = FrequencyBin(CARRIER)


def gaussian_curve(centers, sigma=0.05, x0=-0.5, x1=1.5, n=401):
    x = np.linspace(x0, x1, n)
    y = np.zeros_like(x)
    for c in centers:
        y += np.exp(-((x - c) ** 2) / (2 * sigma**2))
    return Curve1D(x, y)


def test_find_crests_two_gaussians():
    c = gaussian_curve([0.3, 0.7])
    crests = find_crests(c, 0.2)
    assert len(crests) == 2
    assert crests[1] - crests[0] == pytest.approx(0.4, abs=0.006)


def test_find_crests_monotone_curve():
    x = np.linspace(0, 1, 50)
    assert find_crests(Curve1D(x, x + 0.1), 0.2) == []


def test_find_crests_rescale_invariant():
    c = gaussian_curve([0.2, 0.9], sigma=0.08)
    a = find_crests(c, 0.2)
    b = find_crests(Curve1D(c.coordinates, 37.5 * c.values), 0.2)
    assert a == b


def test_find_crests_plateau_breaks_toward_smaller_coordinate():
    x = np.arange(11.0)
    y = np.array([0, 1, 1, 1, 0, 0, 0, 0, 2, 0, 0.0])
    crests = find_crests(Curve1D(x, y), 0.2)
    assert crests == [1.0, 8.0]  # left edge of the flat crest


def test_find_crests_empty_curve_rejected():
    with pytest.raises(AnalysisError):
        Curve1D(np.array([]), np.array([]))


def test_curve_normalized_peak_is_one():
    c = gaussian_curve([0.5]).normalized()
    assert c.values.max() == pytest.approx(1.0)


def make_stack(peaks_by_slice):
    nx = ny = 11
    vals = np.zeros((nx, ny, len(peaks_by_slice)))
    for k, p in enumerate(peaks_by_slice):
        vals[5, 5, k] = p
        vals[2, 3, k] = p / 3
    return SliceStack(0.0, 0.0, 0.05, 0.05, tuple(0.5 + 0.1 * k for k in range(len(peaks_by_slice))), vals)


def test_focus_curve_peak_metric():
    stack = make_stack([1.0, 3.0, 2.0])
    rep = focus_curve(stack, metric="max")
    assert rep.argmax_z == pytest.approx(0.6)
    assert rep.metric_values == (1.0, 3.0, 2.0)


def test_focus_curve_constant_slices_tie_break_smallest_z():
    stack = make_stack([2.0, 2.0, 2.0])
    rep = focus_curve(stack, metric="max")
    assert rep.argmax_z == pytest.approx(0.5)


def test_focus_curve_scale_invariant_argmax():
    stack = make_stack([1.0, 3.0, 2.0])
    scaled = SliceStack(
        stack.x0, stack.y0, stack.dx, stack.dy, stack.z_values, 17.3 * stack.values
    )
    assert focus_curve(scaled).argmax_z == focus_curve(stack).argmax_z


def test_focus_curve_sharpness_prefers_concentrated():
    nx = ny = 10
    spread = np.ones((nx, ny))
    tight = np.zeros((nx, ny))
    tight[4, 4] = spread.sum()  # same total intensity, concentrated
    vals = np.stack([spread, tight], axis=-1)
    stack = SliceStack(0, 0, 0.1, 0.1, (0.5, 0.6), vals)
    rep = focus_curve(stack, metric="sharpness")
    assert rep.argmax_z == pytest.approx(0.6)


def test_focus_curve_empty_and_bad_metric():
    stack = make_stack([1.0])
    with pytest.raises(AnalysisError):
        focus_curve(SliceStack(0, 0, 0.1, 0.1, (), np.zeros((3, 3, 0))))
    with pytest.raises(AnalysisError):
        focus_curve(stack, metric="entropy")


def test_image_similarity_identity_and_negation():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, (16, 16))
    assert image_similarity(a, a) == pytest.approx(1.0)
    assert image_similarity(a, -a + 5.0) == pytest.approx(-1.0)


def test_image_similarity_symmetric_and_bounded():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 1, (12, 12))
    b = rng.uniform(0, 1, (12, 12))
    s1, s2 = image_similarity(a, b), image_similarity(b, a)
    assert s1 == pytest.approx(s2)
    assert -1.0 <= s1 <= 1.0


def test_image_similarity_errors():
    spec1 = VolumeSpec(Point3(0, 0, 0.5), 4, 4, 1, 0.1, 0.1, 1.0)
    spec2 = VolumeSpec(Point3(0, 0, 0.6), 4, 4, 1, 0.1, 0.1, 1.0)
    a = ImageVolume(spec1, np.random.default_rng(0).uniform(0, 1, (4, 4, 1)))
    b = ImageVolume(spec2, a.values)
    with pytest.raises(AnalysisError):
        image_similarity(a, b)
    with pytest.raises(AnalysisError):
        image_similarity(np.ones((4, 4)), np.ones((4, 4)))  # zero variance


def test_fwhm_gaussian_identity():
    sigma = 0.04
    c = gaussian_curve([0.5], sigma=sigma, x0=0.0, x1=1.0, n=801)
    assert fwhm_of_profile(c) == pytest.approx(2.355 * sigma, abs=0.0015)


def test_fwhm_errors():
    x = np.linspace(0, 1, 9)
    with pytest.raises(AnalysisError):
        fwhm_of_profile(Curve1D(x, x))  # peak on boundary
    y = 0.8 + 0.2 * np.exp(-((x - 0.5) ** 2) / 0.02)  # never drops below half max
    with pytest.raises(AnalysisError):
        fwhm_of_profile(Curve1D(x, y))


def point_hologram(aperture, target):
    vals = np.zeros((aperture.nx, aperture.ny, 1), dtype=complex)
    k = BIN.k
    for i in range(aperture.nx):
        for j in range(aperture.ny):
            r = aperture.node_position(i, j).distance_to(target)
            vals[i, j, 0] = np.exp(-1j * k * r) / (4 * math.pi * r)
    return Hologram(values=vals, aperture=aperture, bins=(BIN,))


def psf_case(d_aperture, z):
    step = 0.0615
    ap = make_aperture(
        Point3(0, 0, 0), d_aperture, d_aperture, step, step, Point3(-0.2, -0.2, 0)
    )
    target = Point3(d_aperture / 2, d_aperture / 2, z)
    return point_hologram(ap, target)


def test_psf_fwhm_matches_diffraction_width():
    lam = BIN.lambda_m
    h = psf_fwhm(psf_case(1.0, 0.8), 0.8, BIN, axis="x", pitch=0.01)
    assert h == pytest.approx(lam * 0.8 / 1.0, rel=0.30)
    h2 = psf_fwhm(psf_case(1.17, 1.0), 1.0, BIN, axis="x", pitch=0.01)
    assert h2 == pytest.approx(lam * 1.0 / 1.17, rel=0.30)


def test_psf_fwhm_scaling_laws():
    # width grows with depth and shrinks with aperture size, each within
    # 30% of the lam*z/D law over a factor-2 sweep
    lam = BIN.lambda_m
    widths = {}
    for d_ap in (0.6, 1.2):
        for z in (0.6, 0.9, 1.2):
            span = psf_case(d_ap, z).aperture.span_x
            w = psf_fwhm(psf_case(d_ap, z), z, BIN, axis="x", pitch=0.01)
            widths[(d_ap, z)] = w
            assert w == pytest.approx(lam * z / span, rel=0.30)
    assert widths[(0.6, 1.2)] / widths[(0.6, 0.6)] == pytest.approx(2.0, rel=0.30)
    assert widths[(0.6, 0.9)] / widths[(1.2, 0.9)] == pytest.approx(2.0, rel=0.30)


def test_profile_through_peak_axes():
    vals = np.zeros((9, 7))
    vals[6, 2] = 3.0
    cx = profile_through_peak(vals, 0.0, 0.0, 0.1, 0.1, axis="x")
    assert cx.values.argmax() == 6
    cy = profile_through_peak(vals, 0.0, 0.0, 0.1, 0.1, axis="y")
    assert cy.values.argmax() == 2
    with pytest.raises(AnalysisError):
        profile_through_peak(vals, 0, 0, 0.1, 0.1, axis="z")


def test_local_maxima_2d():
    v = np.zeros((9, 9))
    v[2, 2] = 1.0
    v[6, 7] = 0.8
    v[4, 4] = 0.1  # below threshold
    got = set(local_maxima_2d(v, min_rel=0.3))
    assert got == {(2, 2), (6, 7)}
    assert local_maxima_2d(np.zeros((4, 4))) == []
