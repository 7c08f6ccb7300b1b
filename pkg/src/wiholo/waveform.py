"""Barker-coded DSSS baseband waveforms.

The routers are modeled in the 1 Mb/s direct-sequence mode: each payload
bit is differentially BPSK-encoded and spread by the length-11 Barker
sequence, giving a 1 us symbol at the default 11 MHz chip rate. That
symbol duration is what makes a 1 us correlation window line up with
exactly one spreading-code period.

Signals are complex baseband envelopes; carrier phase is applied per
propagation path by the forward model, not synthesized here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import rng_for

BARKER11_CHIPS = (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1)


class WaveformError(ValueError):
    """Invalid waveform parameters."""


@dataclass(frozen=True)
class BarkerSequence:
    """Length-11 Barker spreading code (+-1 chips)."""

    chips: tuple = BARKER11_CHIPS

    def __post_init__(self):
        if len(self.chips) != 11 or any(c not in (-1, 1) for c in self.chips):
            raise WaveformError("expected 11 chips of +-1")

    def as_array(self) -> np.ndarray:
        return np.array(self.chips, dtype=float)

    def autocorrelation(self) -> np.ndarray:
        """Aperiodic autocorrelation at lags -10..10 (brute force)."""
        c = self.as_array()
        return np.correlate(c, c, mode="full")


def barker11() -> BarkerSequence:
    """The 11-chip Barker code used by 1 Mb/s DSSS."""
    return BarkerSequence()


@dataclass(frozen=True)
class WaveformSpec:
    """Parameters of the synthesized router emission.

    The envelope sample rate is chip_rate_hz * samples_per_chip and one
    symbol (= one payload bit) spans 11 chips, i.e. 1 us at defaults.
    """

    carrier_hz: float = 2.4372e9
    chip_rate_hz: float = 11e6
    samples_per_chip: int = 4
    n_bits: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.chip_rate_hz <= 0:
            raise WaveformError("carrier and chip rate must be positive")
        if self.samples_per_chip < 2:
            raise WaveformError("need at least 2 samples per chip")
        if self.n_bits < 0:
            raise WaveformError("n_bits must be >= 0")

    @property
    def sample_rate_hz(self) -> float:
        return self.chip_rate_hz * self.samples_per_chip

    @property
    def symbol_duration_s(self) -> float:
        return 11.0 / self.chip_rate_hz

    @property
    def samples_per_symbol(self) -> int:
        return 11 * self.samples_per_chip


@dataclass(frozen=True)
class TimeSeries:
    """Sampled complex baseband envelope.

    ``carrier_hz`` records the RF frequency the envelope is referenced
    to, so spectra can be reported on an absolute frequency axis.
    """

    samples: np.ndarray
    sample_rate_hz: float
    t0: float = 0.0
    carrier_hz: float = 2.4372e9

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.sample_rate_hz <= 0:
            raise WaveformError("sample rate must be positive")
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise WaveformError("time series needs at least one sample")

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate_hz


@dataclass(frozen=True)
class TimeSeriesPair:
    """Reference- and scanning-channel records from one oscilloscope trigger."""

    ref: TimeSeries
    sca: TimeSeries

    def __post_init__(self):
        if len(self.ref) != len(self.sca):
            raise WaveformError("channel lengths differ")
        if self.ref.sample_rate_hz != self.sca.sample_rate_hz:
            raise WaveformError("channel sample rates differ")
        if self.ref.t0 != self.sca.t0:
            raise WaveformError("channel start times differ")
        if self.ref.carrier_hz != self.sca.carrier_hz:
            raise WaveformError("channel carrier references differ")


def payload_bits(seed: int, n_bits: int) -> np.ndarray:
    """Deterministic pseudorandom payload: same seed, same bits."""
    if n_bits < 0:
        raise WaveformError("n_bits must be >= 0")
    rng = rng_for(seed, "payload")
    return rng.integers(0, 2, size=n_bits, dtype=np.int8)


def dsss_baseband(bits: np.ndarray, spec: WaveformSpec) -> TimeSeries:
    """Differentially BPSK-encoded, Barker-spread envelope for ``bits``.

    Each bit becomes one 11-chip symbol; a 1 bit flips the symbol phase
    by pi relative to the previous symbol (first symbol reference phase
    is +1). Chips are rectangular with ``spec.samples_per_chip`` samples,
    so every sample has unit magnitude and the envelope has unit average
    power exactly.
    """
    bits = np.asarray(bits)
    if bits.size == 0:
        raise WaveformError("empty payload")
    if np.any((bits != 0) & (bits != 1)):
        raise WaveformError("bits must be 0/1")
    # DBPSK: cumulative product of (-1)^bit
    signs = np.cumprod(np.where(bits == 1, -1.0, 1.0))
    chips = barker11().as_array()
    symbol = np.repeat(chips, spec.samples_per_chip)
    samples = (signs[:, None] * symbol[None, :]).reshape(-1).astype(complex)
    return TimeSeries(
        samples=samples,
        sample_rate_hz=spec.sample_rate_hz,
        t0=0.0,
        carrier_hz=spec.carrier_hz,
    )
