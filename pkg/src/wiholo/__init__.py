"""Passive Wi-Fi synthetic-aperture holographic imaging toolkit.

Simulates two-channel Wi-Fi acquisitions over a scanned 2-D aperture,
forms the windowed cross-correlation hologram, reconstructs 3-D images
by matched-filter back-propagation, and quantifies resolution, depth
focusing, spatial-subsampling degradation and router refocusing.
"""

__version__ = "0.1.0"

from .analysis import Curve1D, FocusReport, find_crests, focus_curve, image_similarity, psf_fwhm
from .forward import ChannelResponse, FrequencyBin, channel_response, green, simulate_rx_pair
from .hologram import Hologram, WindowSpec, build_hologram, holo_value, windowed_spectrum
from .imaging import (
    ImageVolume,
    SliceStack,
    TaperSpec,
    VolumeSpec,
    angular_spectrum_slice,
    backproject,
    normalize_image,
    reconstruct_stack,
)
from .scene import (
    Emitter,
    Point3,
    ScanAperture,
    Scatterer,
    Scene,
    WallSlab,
    decimate_aperture,
    load_scene,
    make_aperture,
    nyquist_spacing,
    s_order_positions,
)
from .waveform import (
    BarkerSequence,
    TimeSeries,
    TimeSeriesPair,
    WaveformSpec,
    barker11,
    dsss_baseband,
    payload_bits,
)
