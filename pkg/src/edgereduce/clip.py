"""Speech feature chain: frame loudness and AMDF pitch, reduced to two numbers per file.

Loudness is the RMS of each unfiltered frame, averaged over all frames.
Pitch runs on a low-passed copy of the signal: every frame gets an AMDF
curve over the admissible lag range, voiced frames contribute a
fundamental-frequency estimate, and the voiced track is median-filtered
before averaging to knock out octave jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .timeseries import Frame, TimeSeries, frame, lowpass, median_filter, rms

UNVOICED = None


@dataclass(frozen=True)
class PitchConfig:
    f0_min_hz: float = 60.0
    f0_max_hz: float = 400.0
    frame_ms: float = 40.0
    hop_ms: float = 20.0
    lowpass_cutoff_hz: float = 900.0
    median_window: int = 5
    voicing_ratio: float = 0.35
    # A dip counts as the period if its AMDF is within this fraction of the
    # (mean - min) span above the global minimum; shorter lags win.
    dip_tolerance: float = 0.25

    def lag_range(self, sample_rate_hz: float) -> tuple[int, int]:
        if not (0 < self.f0_min_hz < self.f0_max_hz < sample_rate_hz / 2):
            raise ValueError("f0 range must satisfy 0 < f0_min < f0_max < rate/2")
        return math.ceil(sample_rate_hz / self.f0_max_hz), math.floor(sample_rate_hz / self.f0_min_hz)


@dataclass(frozen=True)
class FeatureRecord:
    avg_loudness: float
    avg_f0_hz: float | None
    n_frames: int
    n_voiced: int
    source_id: str = ""
    start_time: datetime | None = None
    end_time: datetime | None = None


def amdf(frame_values, lag: int) -> float:
    """Mean of ``|x[n] - x[n - lag]|`` over the overlapping part of the frame."""
    x = np.asarray(frame_values, dtype=np.float64)
    if not (1 <= lag < x.size):
        raise ValueError("invalid lag")
    return float(np.mean(np.abs(x[lag:] - x[:-lag])))


def amdf_curve(x: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    return np.array([np.mean(np.abs(x[lag:] - x[:-lag])) for lag in range(lag_min, lag_max + 1)])


def _pick_lag(curve: np.ndarray, tolerance: float) -> int:
    """Index into ``curve`` of the shortest-lag dip that is close to the global minimum."""
    lo = curve.min()
    cutoff = lo + tolerance * (curve.mean() - lo)
    k = int(np.argmax(curve <= cutoff))
    while k + 1 < curve.size and curve[k + 1] < curve[k]:
        k += 1
    return k


def estimate_pitch(frame_: Frame, config: PitchConfig = PitchConfig()) -> float | None:
    """Fundamental frequency of one frame in Hz, or ``None`` when unvoiced.

    The voicing test compares the chosen AMDF dip against the mean AMDF over
    the lag range, so it does not depend on the frame's amplitude.
    """
    rate = frame_.sample_rate_hz
    lag_min, lag_max = config.lag_range(rate)
    x = frame_.values
    if lag_max >= x.size:
        raise ValueError("frame too short for f0_min")
    curve = amdf_curve(x, lag_min, lag_max)
    mean = curve.mean()
    if not mean > 0.0:
        return UNVOICED
    k = _pick_lag(curve, config.dip_tolerance)
    if curve[k] > config.voicing_ratio * mean:
        return UNVOICED
    return rate / (lag_min + k)


def pitch_track(series: TimeSeries, config: PitchConfig = PitchConfig()) -> list[float | None]:
    """Raw per-frame pitch estimates (``None`` for unvoiced frames)."""
    filtered = lowpass(series, config.lowpass_cutoff_hz)
    frame_len, hop = _frame_geometry(series.sample_rate_hz, config)
    return [estimate_pitch(f, config) for f in frame(filtered, frame_len, hop)]


def refine_track(voiced_f0, window: int) -> np.ndarray:
    f0 = np.asarray(voiced_f0, dtype=np.float64)
    if f0.size == 0:
        return f0
    w = min(window, f0.size if f0.size % 2 else f0.size - 1)
    return median_filter(f0, w)


def _frame_geometry(rate: float, config: PitchConfig) -> tuple[int, int]:
    frame_len = int(round(config.frame_ms * rate / 1000.0))
    hop = max(1, int(round(config.hop_ms * rate / 1000.0)))
    return frame_len, hop


def clip_process(series: TimeSeries, config: PitchConfig = PitchConfig(), source_id: str = "") -> FeatureRecord:
    frame_len, hop = _frame_geometry(series.sample_rate_hz, config)
    if len(series) < frame_len:
        raise ValueError("input too short")
    loudness = [rms(f.values) for f in frame(series, frame_len, hop)]
    track = pitch_track(series, config)
    voiced = [f0 for f0 in track if f0 is not UNVOICED]
    refined = refine_track(voiced, config.median_window)
    start = series.origin_timestamp
    end = start + timedelta(seconds=series.duration_s) if start is not None else None
    return FeatureRecord(
        avg_loudness=float(np.mean(loudness)),
        avg_f0_hz=float(np.mean(refined)) if refined.size else None,
        n_frames=len(loudness),
        n_voiced=len(voiced),
        source_id=source_id or series.channel_label,
        start_time=start,
        end_time=end,
    )
