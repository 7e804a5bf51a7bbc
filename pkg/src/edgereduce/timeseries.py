"""Signal containers and the small DSP toolkit shared by every reducer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# A window whose standard deviation is below this fraction of its scale is
# treated as flat (zero variance).
FLAT_TOLERANCE = 1e-10


def _as_readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real-valued signal.

    Samples are stored as a read-only float64 array. ``source_bytes`` records
    the size of the file the series was decoded from, when known; it is the
    denominator for reduction accounting.
    """

    samples: np.ndarray
    sample_rate_hz: float
    channel_label: str = ""
    origin_timestamp: datetime | None = None
    source_bytes: int | None = field(default=None, compare=False)

    def __post_init__(self):
        samples = _as_readonly(self.samples)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(
            samples,
            self.sample_rate_hz,
            self.channel_label,
            self.origin_timestamp,
            self.source_bytes,
        )

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        return self.with_samples(self.samples[start:stop])


@dataclass(frozen=True)
class Frame:
    start_index: int
    values: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        values = _as_readonly(self.values)
        if self.start_index < 0:
            raise ValueError("start_index must be >= 0")
        if values.size == 0:
            raise ValueError("frame values must be non-empty")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def frame(series: TimeSeries, frame_len_samples: int, hop_samples: int) -> list[Frame]:
    """Cut ``series`` into fixed-length frames; the trailing partial frame is dropped."""
    if frame_len_samples < 1 or hop_samples < 1:
        raise ValueError("frame_len_samples and hop_samples must be >= 1")
    n = len(series)
    if n < frame_len_samples:
        raise ValueError("input too short")
    count = (n - frame_len_samples) // hop_samples + 1
    x = series.samples
    return [
        Frame(k * hop_samples, x[k * hop_samples : k * hop_samples + frame_len_samples], series.sample_rate_hz)
        for k in range(count)
    ]


def rms(values) -> float:
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty frame")
    return float(np.sqrt(np.mean(x * x)))


def is_flat(mean: float, std: float) -> bool:
    return std <= FLAT_TOLERANCE * max(1.0, abs(mean))


def z_normalize(values) -> np.ndarray:
    """Return ``values`` shifted to zero mean and scaled to unit population stdev.

    Flat input (see ``is_flat``) maps to all zeros instead of raising, so that
    search loops can skip it cheaply.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("degenerate series")
    mean = x.mean()
    std = x.std()
    if is_flat(mean, std):
        return np.zeros_like(x)
    return (x - mean) / std


def butterworth_lowpass_coefficients(cutoff_hz: float, sample_rate_hz: float):
    """Second-order Butterworth low-pass via the pre-warped bilinear transform.

    Returns ``(b, a)`` with ``a[0] == 1``.
    """
    k = math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b0 = k2 * norm
    b = np.array([b0, 2.0 * b0, b0])
    a = np.array([1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - math.sqrt(2.0) * k + k2) * norm])
    return b, a


def lowpass(series: TimeSeries, cutoff_hz: float) -> TimeSeries:
    nyquist = series.sample_rate_hz / 2.0
    if not (0.0 < cutoff_hz < nyquist):
        raise ValueError("invalid cutoff")
    # scipy.signal is slow to import and only the pitch chain needs it
    from scipy.signal import lfilter

    b, a = butterworth_lowpass_coefficients(cutoff_hz, series.sample_rate_hz)
    return series.with_samples(lfilter(b, a, series.samples))


def median_filter(values, window: int) -> np.ndarray:
    """Running median with a centred odd window.

    Near the ends the window shrinks symmetrically (``2*k+1`` samples where
    ``k`` is the distance to the nearer edge), so every output is an element
    of the input.
    """
    x = np.asarray(values, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd")
    n = x.size
    if window > n:
        raise ValueError("window longer than input")
    half = window // 2
    out = np.empty_like(x)
    if n - 2 * half > 0:
        out[half : n - half] = np.median(sliding_window_view(x, window), axis=1)
    for i in list(range(min(half, n))) + list(range(max(n - half, half), n)):
        k = min(i, n - 1 - i)
        out[i] = np.median(x[i - k : i + k + 1])
    return out
