"""Windowed cross-channel correlation over the scan aperture.

For every scan position both channel records are cut into 1 us windows
(one spreading-code period each), Fourier transformed, and correlated
bin by bin: conj(F{reference}) * F{scanning}, averaged over windows.
The conjugation cancels the modulation common to both channels and
leaves the relative propagation phase, which is the quantity the
back-propagation imaging needs. Assembling the averaged value per node
and per analysis bin yields the complex hologram grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .forward import FrequencyBin, simulate_rx_pair
from .scene import Point3, Scene, ScanAperture, s_order_positions
from .seeding import derive_seed
from .waveform import TimeSeries, TimeSeriesPair, WaveformSpec


class HologramError(ValueError):
    """Invalid windowing or bin selection."""


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window: width (default one symbol), hop, windows to average."""

    width_s: float = 1e-6
    hop_s: Optional[float] = None
    count: int = 64

    def __post_init__(self):
        if self.width_s <= 0:
            raise HologramError("window width must be positive")
        if self.hop_s is not None and self.hop_s <= 0:
            raise HologramError("window hop must be positive")
        if self.count < 1:
            raise HologramError("window count must be >= 1")

    @property
    def hop(self) -> float:
        return self.width_s if self.hop_s is None else self.hop_s

    def width_samples(self, sample_rate_hz: float) -> int:
        n = self.width_s * sample_rate_hz
        if abs(n - round(n)) > 1e-6:
            raise HologramError(
                f"window width {self.width_s} s is not a whole number of samples at {sample_rate_hz} Hz"
            )
        return int(round(n))

    def hop_samples(self, sample_rate_hz: float) -> int:
        n = self.hop * sample_rate_hz
        if abs(n - round(n)) > 1e-6:
            raise HologramError(
                f"window hop {self.hop} s is not a whole number of samples at {sample_rate_hz} Hz"
            )
        return int(round(n))


@dataclass(frozen=True)
class WindowSpectrum:
    """DFT of one window; frequencies are absolute (carrier + offset)."""

    freqs_hz: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class Hologram:
    """Complex correlation values on the aperture grid at selected bins."""

    values: np.ndarray  # (nx, ny, n_bins) complex
    aperture: ScanAperture
    bins: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        object.__setattr__(self, "bins", tuple(self.bins))
        expect = (self.aperture.nx, self.aperture.ny, len(self.bins))
        if self.values.shape != expect:
            raise HologramError(f"hologram shape {self.values.shape} != {expect}")
        if not np.all(np.isfinite(self.values.view(float))):
            raise HologramError("hologram contains non-finite values")

    def bin_index(self, bin: FrequencyBin) -> int:
        for i, b in enumerate(self.bins):
            if abs(b.f_hz - bin.f_hz) <= 0.5:
                return i
        raise HologramError(f"bin {bin.f_hz} Hz not present in hologram")

    def grid_at(self, bin: FrequencyBin) -> np.ndarray:
        """The (nx, ny) complex grid for one analysis bin."""
        return self.values[:, :, self.bin_index(bin)]


def _window_slice(series: TimeSeries, w: WindowSpec, window_index: int) -> np.ndarray:
    length = w.width_samples(series.sample_rate_hz)
    hop = w.hop_samples(series.sample_rate_hz)
    if window_index < 0:
        raise HologramError("window index must be >= 0")
    start = window_index * hop
    stop = start + length
    if stop > len(series):
        raise HologramError(
            f"window {window_index} ([{start}, {stop})) exceeds series length {len(series)}"
        )
    return series.samples[start:stop]


def available_windows(series: TimeSeries, w: WindowSpec) -> int:
    length = w.width_samples(series.sample_rate_hz)
    hop = w.hop_samples(series.sample_rate_hz)
    if len(series) < length:
        return 0
    return (len(series) - length) // hop + 1


def windowed_spectrum(series: TimeSeries, w: WindowSpec, window_index: int) -> WindowSpectrum:
    """Plain DFT of one rectangular window.

    Bin spacing is 1/width (1 MHz at the defaults); reported frequencies
    are absolute, i.e. the series carrier plus the envelope offset.
    """
    seg = _window_slice(series, w, window_index)
    values = np.fft.fft(seg)
    offsets = np.fft.fftfreq(seg.size, d=1.0 / series.sample_rate_hz)
    return WindowSpectrum(freqs_hz=series.carrier_hz + offsets, values=values)


def _bin_offset_index(series: TimeSeries, w: WindowSpec, bin: FrequencyBin) -> int:
    length = w.width_samples(series.sample_rate_hz)
    offset = bin.f_hz - series.carrier_hz
    if abs(offset) > series.sample_rate_hz / 2.0:
        raise HologramError(
            f"bin {bin.f_hz} Hz outside the analyzed band around {series.carrier_hz} Hz"
        )
    spacing = series.sample_rate_hz / length  # == 1/width
    idx = offset / spacing
    if abs(idx - round(idx)) > 1e-6:
        raise HologramError(
            f"bin {bin.f_hz} Hz does not fall on the {spacing:.0f} Hz window bin grid"
        )
    return int(round(idx)) % length


def holo_value(
    pair: TimeSeriesPair,
    w: WindowSpec,
    bin: FrequencyBin,
    conjugate_reference: bool = True,
) -> complex:
    """Window-averaged cross-channel correlation at one frequency bin.

    With ``conjugate_reference`` (the default) this is
    mean_w conj(F{ref}) * F{sca}, the correlation convention that cancels
    the common transmit modulation. ``conjugate_reference=False`` gives
    the literal product of the two transforms for comparison.
    """
    n_avail = available_windows(pair.ref, w)
    if n_avail < w.count:
        raise HologramError(f"only {n_avail} windows available, {w.count} requested")
    k = _bin_offset_index(pair.ref, w, bin)
    length = w.width_samples(pair.ref.sample_rate_hz)
    hop = w.hop_samples(pair.ref.sample_rate_hz)
    idx = np.arange(w.count)[:, None] * hop + np.arange(length)[None, :]
    ref_wins = np.fft.fft(pair.ref.samples[idx], axis=1)[:, k]
    sca_wins = np.fft.fft(pair.sca.samples[idx], axis=1)[:, k]
    left = np.conj(ref_wins) if conjugate_reference else ref_wins
    return complex(np.mean(left * sca_wins))


def build_hologram(
    scene: Scene,
    aperture: ScanAperture,
    spec: WaveformSpec,
    w: WindowSpec,
    bins: Sequence[FrequencyBin],
    snr_db: float = math.inf,
    seed: int = 0,
    threads: int = 1,
    conjugate_reference: bool = True,
) -> Hologram:
    """Acquire and correlate every S-order scan position.

    Each node gets a freshly seeded acquisition (new payload bits, new
    noise) derived from ``seed`` and its position in the scan order, so
    results are reproducible and independent of execution order.
    ``threads`` only parallelizes the per-node work; the assembled grid
    is identical for any thread count.
    """
    bins = tuple(bins)
    if not bins:
        raise HologramError("need at least one analysis bin")
    values = np.zeros((aperture.nx, aperture.ny, len(bins)), dtype=complex)
    order = s_order_positions(aperture)
    reference = aperture.reference_position

    def node_values(item):
        node_rank, ((i, j), pos) = item
        pair = simulate_rx_pair(
            scene,
            pos,
            reference,
            spec,
            bins=bins,
            snr_db=snr_db,
            seed=derive_seed(seed, "acquire", node_rank),
        )
        vals = [holo_value(pair, w, b, conjugate_reference=conjugate_reference) for b in bins]
        return i, j, vals

    items = list(enumerate(order))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(node_values, items))
    else:
        results = [node_values(it) for it in items]
    for i, j, vals in results:
        values[i, j, :] = vals
    return Hologram(values=values, aperture=aperture, bins=bins)


def decimate_hologram(hologram: Hologram, d: int) -> Hologram:
    """Keep every d-th row and column of measurements from a full scan.

    Mirrors ``scene.decimate_aperture``: the retained values are the ones
    actually measured at the kept nodes, so this models acquiring fewer
    measurements rather than re-scanning on a coarser grid.
    """
    from .scene import decimate_aperture

    ap = decimate_aperture(hologram.aperture, d)
    return Hologram(values=hologram.values[::d, ::d, :], aperture=ap, bins=hologram.bins)


def bit_invariance_check(
    scene: Scene,
    node: Point3,
    reference: Point3,
    spec: WaveformSpec,
    w: WindowSpec,
    bin: FrequencyBin,
    seed_a: int = 1,
    seed_b: int = 2,
) -> float:
    """Hologram phase shift between two different random payloads.

    Noiseless acquisition at one node, identical geometry, payload seeds
    ``seed_a`` vs ``seed_b``. Returns |wrapped phase difference| in rad;
    the correlation should cancel the modulation, leaving ~0.
    """
    vals = []
    for s in (seed_a, seed_b):
        pair = simulate_rx_pair(scene, node, reference, spec, snr_db=math.inf, seed=s)
        vals.append(holo_value(pair, w, bin))
    delta = np.angle(vals[1] / vals[0])
    return float(abs(delta))
