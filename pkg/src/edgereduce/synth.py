"""Synthetic test signals: vowel-like speech, tone/pulse probes and beat trains.

The speech generator drives a glottal pulse train with a wandering pitch
contour through three formant resonators and a syllable-rate amplitude
envelope. It stands in for patient recordings when none are available.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .ingest import write_wav
from .timeseries import TimeSeries

# (F1, F2, F3) in Hz for a handful of vowels
VOWELS = {
    "a": (730, 1090, 2440),
    "i": (270, 2290, 3010),
    "u": (300, 870, 2240),
    "e": (530, 1840, 2480),
    "o": (570, 840, 2410),
}


def _resonator(x, freq, bandwidth, rate):
    r = math.exp(-math.pi * bandwidth / rate)
    theta = 2 * math.pi * freq / rate
    a = [1.0, -2 * r * math.cos(theta), r * r]
    b = [1.0 - r]
    return lfilter(b, a, x)


def synthetic_speech(
    duration_s: float = 4.0,
    sample_rate: int = 8000,
    f0_hz: float = 140.0,
    seed: int = 0,
    amplitude: float = 0.4,
) -> TimeSeries:
    """Vowel-like utterance with syllables, pauses and a drifting pitch."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    # pitch contour: slow declination plus vibrato-like wobble
    contour = f0_hz * (1.0 + 0.08 * np.sin(2 * np.pi * 0.7 * t + rng.uniform(0, 6.3)) - 0.05 * t / duration_s)
    contour *= 1.0 + 0.01 * rng.standard_normal(n).cumsum() / math.sqrt(n)
    phase = np.cumsum(contour) / sample_rate
    pulses = np.diff(np.floor(phase), prepend=0.0)
    glottal = lfilter([1.0], [1.0, -0.95], pulses)  # spectral tilt
    # syllables: ~4 Hz with random vowel per syllable and short pauses
    out = np.zeros(n)
    syl = int(0.25 * sample_rate)
    names = list(VOWELS)
    for start in range(0, n, syl):
        stop = min(n, start + syl)
        seg = glottal[start:stop]
        f1, f2, f3 = VOWELS[names[rng.integers(len(names))]]
        y = (_resonator(seg, f1, 90, sample_rate) + 0.6 * _resonator(seg, f2, 110, sample_rate)
             + 0.3 * _resonator(seg, f3, 160, sample_rate))
        env = np.sin(np.linspace(0, np.pi, stop - start)) ** 0.6
        if rng.random() < 0.15:
            env *= 0.0
        out[start:stop] = y * env
    out += 0.002 * rng.standard_normal(n)
    peak = np.max(np.abs(out)) or 1.0
    return TimeSeries(amplitude * out / peak, float(sample_rate), f"speech-{seed}")


def write_speech_corpus(directory, n_files: int = 10, duration_s: float = 4.0, sample_rate: int = 8000,
                        seed: int = 0) -> list[Path]:
    """Write ``n_files`` synthetic utterances as 16-bit WAV files; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for k in range(n_files):
        series = synthetic_speech(duration_s, sample_rate, f0_hz=float(rng.uniform(100, 220)), seed=seed * 1000 + k)
        path = directory / f"speech_{k:02d}.wav"
        write_wav(path, series)
        paths.append(path)
    return paths


def tone(freq_hz: float, duration_s: float = 1.0, sample_rate: int = 8000, amplitude: float = 0.5) -> TimeSeries:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return TimeSeries(amplitude * np.sin(2 * np.pi * freq_hz * t), float(sample_rate), f"tone-{freq_hz:g}")


def pulse_train(freq_hz: float, duration_s: float = 1.0, sample_rate: int = 8000, amplitude: float = 0.5) -> TimeSeries:
    """Band-limited pulse train: equal-amplitude cosine harmonics up to Nyquist."""
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    k_max = int((sample_rate / 2 - 1) // freq_hz)
    x = sum(np.cos(2 * np.pi * k * freq_hz * t) for k in range(1, k_max + 1)) / k_max
    return TimeSeries(amplitude * x, float(sample_rate), f"pulses-{freq_hz:g}")


def qrs_pulse(t: np.ndarray) -> np.ndarray:
    """Single PQRST-like complex centred on the R wave at ``t = 0`` (seconds, mV)."""
    g = lambda mu, sigma: np.exp(-(((t - mu) / sigma) ** 2))
    return (1.0 * g(0.0, 0.010) - 0.15 * g(-0.025, 0.008) - 0.25 * g(0.025, 0.010)
            + 0.2 * g(0.25, 0.05) + 0.1 * g(-0.18, 0.03))


def beat_train(duration_s: float = 30.0, rate_hz: float = 360.0, period_s: float = 1.0, first_s: float = 0.5,
               noise_mv: float = 0.0, wander_mv: float = 0.0, rr_jitter: float = 0.0, seed: int = 0
               ) -> tuple[TimeSeries, np.ndarray]:
    """ECG-like beat train and the sample indices of its R waves."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    centers = []
    c = first_s
    while c < duration_s - 0.05:
        centers.append(c)
        c += period_s * (1.0 + rr_jitter * rng.uniform(-1, 1))
    x = np.zeros(n)
    for c in centers:
        lo, hi = int(max(0, (c - 0.4) * rate_hz)), int(min(n, (c + 0.5) * rate_hz))
        x[lo:hi] += qrs_pulse(t[lo:hi] - c)
    if wander_mv:
        x += wander_mv * np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 6.3))
    if noise_mv:
        x += noise_mv * rng.standard_normal(n)
    r_idx = np.round(np.array(centers) * rate_hz).astype(np.int64)
    return TimeSeries(x, rate_hz, "beats"), r_idx
