import time

import numpy as np
import pytest

from edgereduce.qrs import PanTompkinsDetector, QrsAnnotationSet, pan_tompkins, rr_intervals
from edgereduce.synth import beat_train
from edgereduce.timeseries import TimeSeries
from oracles import match_beats


def test_rr_examples():
    rr = rr_intervals(QrsAnnotationSet([0, 360, 720], 360.0)).intervals_ms
    np.testing.assert_allclose(rr, [1000.0, 1000.0])
    rr = rr_intervals(QrsAnnotationSet([0, 300], 360.0)).intervals_ms
    assert rr[0] == pytest.approx(833.33, abs=0.01)
    with pytest.raises(ValueError, match="not enough beats"):
        rr_intervals(QrsAnnotationSet([5], 360.0))


def test_annotation_set_must_increase():
    with pytest.raises(ValueError):
        QrsAnnotationSet([10, 10], 360.0)


def test_insufficient_signal():
    with pytest.raises(ValueError, match="insufficient signal"):
        pan_tompkins(TimeSeries(np.zeros(300), 360.0))
    with pytest.raises(ValueError, match="insufficient signal"):
        pan_tompkins(TimeSeries(np.zeros(1000), 90.0))


def test_all_zero_signal():
    assert len(pan_tompkins(TimeSeries(np.zeros(3600), 360.0))) == 0


def test_synthetic_beat_train():
    x, r = beat_train(30.0, 360.0)
    qrs = pan_tompkins(x)
    assert 29 <= len(qrs) <= 30
    tp, fn, fp = match_beats(r, qrs.fiducials, tolerance=18)  # 50 ms
    assert fp == 0 and tp >= 29


@pytest.mark.parametrize("rate", [250.0, 360.0, 500.0])
def test_noisy_jittered_train(rate):
    x, r = beat_train(60.0, rate, period_s=0.8, noise_mv=0.03, wander_mv=0.3, rr_jitter=0.1, seed=3)
    qrs = pan_tompkins(x)
    tp, fn, fp = match_beats(r, qrs.fiducials, tolerance=int(0.05 * rate))
    assert fn <= 1 and fp <= 1


def test_refractory_spacing(ecg208):
    qrs = pan_tompkins(ecg208)
    assert np.all(np.diff(qrs.fiducials) >= 0.2 * 360)
    assert np.all(rr_intervals(qrs).intervals_ms > 200.0)


@pytest.mark.parametrize("chunk", [1, 97, 360, 1000, 5000])
def test_chunked_equals_whole(ecg208, chunk):
    x = ecg208.slice(0, 20000)
    whole = pan_tompkins(x)
    np.testing.assert_array_equal(pan_tompkins(x, chunk_samples=chunk).fiducials, whole.fiducials)


def test_push_returns_incremental_fiducials(ecg208):
    x = ecg208.samples[:10000]
    det = PanTompkinsDetector(360.0)
    got = []
    for i in range(0, x.size, 500):
        got += det.push(x[i : i + 500])
    got += det.flush()
    np.testing.assert_array_equal(got, pan_tompkins(ecg208.slice(0, 10000)).fiducials)


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_amplitude_scaling(ecg208, c):
    x = ecg208.slice(0, 20000)
    a = pan_tompkins(x).fiducials
    b = pan_tompkins(x.with_samples(c * x.samples)).fiducials
    np.testing.assert_array_equal(a, b)


def test_record208_plausible_and_fast(ecg208):
    t0 = time.perf_counter()
    qrs = pan_tompkins(ecg208)
    assert time.perf_counter() - t0 < 5.0
    bpm = 60.0 * len(qrs) / ecg208.duration_s
    assert 70 < bpm < 130
