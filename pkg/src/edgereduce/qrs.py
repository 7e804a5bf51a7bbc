"""Pan-Tompkins QRS detection.

The detector works on a 200 Hz copy of the input (linear interpolation) so
that the classic integer-coefficient filters apply unchanged:

* low-pass  y(n) = 2y(n-1) - y(n-2) + x(n) - 2x(n-6) + x(n-12)
* high-pass y(n) = x(n-16) - (1/32) * sum_{k=0}^{31} x(n-k)
* derivative y(n) = (2x(n) + x(n-1) - x(n-3) - 2x(n-4)) / 8
* squaring, then a 150 ms moving-window integrator.

The recursive low-pass is realised as its equivalent 11-tap FIR (the pole
pair at z=1 cancels), which keeps long records free of round-off drift.

Peaks of the integrated signal are classified with the usual adaptive
signal/noise estimates, a 200 ms refractory period, a 360 ms T-wave slope
test and search-back at 166% of the regular RR average. Fiducials are the
band-pass maxima near each accepted peak, mapped back to the input grid.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .timeseries import TimeSeries

FS = 200.0
_LP_TAPS = np.array([1, 2, 3, 4, 5, 6, 5, 4, 3, 2, 1], dtype=np.float64) / 36.0
_HP_TAPS = np.full(32, -1.0 / 32.0)
_HP_TAPS[16] += 1.0
_DER_TAPS = np.array([2.0, 1.0, 0.0, -1.0, -2.0]) / 8.0
_MWI_LEN = 30
_MWI_TAPS = np.full(_MWI_LEN, 1.0 / _MWI_LEN)

BANDPASS_DELAY = 21  # low-pass 5 + high-pass 16 samples at 200 Hz
MWI_DELAY = 37  # raw R wave to integrator peak, samples at 200 Hz
PEAK_HALF_WIDTH = 20  # integrator peaks must dominate +-100 ms
LEARN_SAMPLES = 400  # 2 s
REFINE_HALF_WIDTH = 8  # +-40 ms
SLOPE_SPAN = 30
REFRACTORY_S = 0.200
T_WAVE_S = 0.360
RR_LOW, RR_HIGH, RR_MISSED = 0.92, 1.16, 1.66


@dataclass(frozen=True)
class QrsAnnotationSet:
    fiducials: np.ndarray
    sample_rate_hz: float
    source_id: str = ""

    def __post_init__(self):
        f = np.asarray(self.fiducials, dtype=np.int64)
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("fiducials must be strictly increasing")
        object.__setattr__(self, "fiducials", f)

    def __len__(self):
        return int(self.fiducials.size)


@dataclass(frozen=True)
class RrSeries:
    intervals_ms: np.ndarray = field(default_factory=lambda: np.zeros(0))


def rr_intervals(qrs: QrsAnnotationSet) -> RrSeries:
    if len(qrs) < 2:
        raise ValueError("not enough beats")
    return RrSeries(np.diff(qrs.fiducials).astype(np.float64) / qrs.sample_rate_hz * 1000.0)


class _Fir:
    """Causal FIR with carried history; output is independent of chunking."""

    def __init__(self, taps):
        self.taps = np.asarray(taps, dtype=np.float64)
        self.hist = np.zeros(self.taps.size - 1)

    def __call__(self, x):
        xs = np.concatenate([self.hist, x])
        n = x.size
        k_len = self.taps.size
        y = np.zeros(n)
        for k in range(k_len):
            y += self.taps[k] * xs[k_len - 1 - k : k_len - 1 - k + n]
        self.hist = xs[xs.size - (k_len - 1) :]
        return y


class _Resampler:
    """Linear-interpolation resampler onto the 200 Hz grid."""

    def __init__(self, rate_in):
        self.rate_in = float(rate_in)
        self.buf = np.zeros(0)
        self.buf_base = 0  # input index of buf[0]
        self.k = 0  # next output index

    def _position(self, k):
        return k * self.rate_in / FS

    def __call__(self, x, final=False):
        self.buf = np.concatenate([self.buf, np.asarray(x, dtype=np.float64)])
        n_in = self.buf_base + self.buf.size
        # outputs whose right neighbour has arrived (or exact hits at the end)
        k_hi = math.floor((n_in - 1) * FS / self.rate_in) + 1
        while k_hi > self.k and self._position(k_hi - 1) > n_in - 1:
            k_hi -= 1
        ks = np.arange(self.k, k_hi)
        if ks.size == 0:
            return np.zeros(0)
        pos = self._position(ks)
        i0 = np.floor(pos).astype(np.int64)
        frac = pos - i0
        if not final:
            keep = i0 + 1 < n_in
            ks, pos, i0, frac = ks[keep], pos[keep], i0[keep], frac[keep]
        else:
            keep = (i0 + 1 < n_in) | (frac == 0.0)
            ks, pos, i0, frac = ks[keep], pos[keep], i0[keep], frac[keep]
        if ks.size == 0:
            return np.zeros(0)
        local = i0 - self.buf_base
        right = np.minimum(local + 1, self.buf.size - 1)
        y = self.buf[local] + frac * (self.buf[right] - self.buf[local])
        self.k = int(ks[-1]) + 1
        drop = max(0, math.floor(self._position(self.k)) - self.buf_base)
        drop = min(drop, self.buf.size)
        self.buf = self.buf[drop:]
        self.buf_base += drop
        return y


@dataclass
class _Peak:
    index: int  # integrator index (200 Hz)
    value: float
    fiducial: int  # input-grid sample index
    slope: float


class PanTompkinsDetector:
    """Streaming Pan-Tompkins detector.

    Feed chunks with :meth:`push`; each call returns fiducials (input-grid
    sample indices) confirmed so far. :meth:`flush` ends the stream. A
    detector instance is single-threaded.
    """

    def __init__(self, sample_rate_hz: float):
        if sample_rate_hz < 100:
            raise ValueError("insufficient signal")
        self.rate = float(sample_rate_hz)
        self._resample = _Resampler(self.rate)
        self._lp = _Fir(_LP_TAPS)
        self._hp = _Fir(_HP_TAPS)
        self._der = _Fir(_DER_TAPS)
        self._mwi = _Fir(_MWI_TAPS)
        self._offset = None
        self._n_in = 0
        # 200 Hz histories, all sharing the same global index base
        self._bp = np.zeros(0)
        self._dv = np.zeros(0)
        self._iw = np.zeros(0)
        self._base = 0
        self._next = 0  # next integrator index to examine
        self._learned = False
        self.spki = 0.0
        self.npki = 0.0
        self._last: _Peak | None = None
        self._candidates: list[_Peak] = []
        self._rr_recent: deque[int] = deque(maxlen=8)
        self._rr_regular: deque[int] = deque(maxlen=8)
        self._refractory = math.ceil(REFRACTORY_S * self.rate)
        self._t_wave = T_WAVE_S * self.rate
        self.fiducials: list[int] = []

    # thresholds ------------------------------------------------------
    @property
    def threshold1(self) -> float:
        return self.npki + 0.25 * (self.spki - self.npki)

    @property
    def threshold2(self) -> float:
        return 0.5 * self.threshold1

    def _rr_missed_limit(self):
        if not self._rr_recent:
            return None
        regular = self._rr_regular or self._rr_recent
        return RR_MISSED * (sum(regular) / len(regular))

    # stream ----------------------------------------------------------
    def push(self, chunk) -> list[int]:
        x = np.asarray(chunk, dtype=np.float64)
        self._n_in += x.size
        return self._feed(self._resample(x), final=False)

    def flush(self) -> list[int]:
        return self._feed(self._resample(np.zeros(0), final=True), final=True)

    def _feed(self, x200, final):
        if x200.size:
            if self._offset is None:
                self._offset = float(x200[0])
            bp = self._hp(self._lp(x200 - self._offset))
            dv = self._der(bp)
            iw = self._mwi(dv * dv)
            self._bp = np.concatenate([self._bp, bp])
            self._dv = np.concatenate([self._dv, dv])
            self._iw = np.concatenate([self._iw, iw])
        total = self._base + self._iw.size
        if not self._learned:
            if total < LEARN_SAMPLES + PEAK_HALF_WIDTH and not final:
                return []
            learn = self._iw[: LEARN_SAMPLES]
            if learn.size == 0:
                return []
            self.spki = float(learn.max())
            self.npki = float(learn.mean())
            self._learned = True
        stop = total if final else total - PEAK_HALF_WIDTH
        emitted = self._scan(stop, total)
        if final:
            emitted += self._search_back(total)
        self._trim()
        return emitted

    def _at(self, arr, lo, hi):
        lo = max(lo, self._base)
        hi = min(hi, self._base + arr.size)
        if hi <= lo:
            return arr[0:0], lo
        return arr[lo - self._base : hi - self._base], lo

    def _scan(self, stop, total):
        out = []
        if stop <= self._next:
            return out
        w = PEAK_HALF_WIDTH
        seg, seg_lo = self._at(self._iw, self._next - w, min(stop + w, total))
        for n in range(self._next, stop):
            v = seg[n - seg_lo]
            if v <= 0.0:
                continue
            left = seg[max(n - w, seg_lo) - seg_lo : n - seg_lo]
            if left.size and v <= left.max():
                continue
            right = seg[n + 1 - seg_lo : n + 1 + w - seg_lo]
            if right.size and v < right.max():
                continue
            out += self._classify(n, float(v))
        self._next = stop
        return out

    def _make_peak(self, n, v):
        center = n - MWI_DELAY + BANDPASS_DELAY
        bp, lo = self._at(self._bp, center - REFINE_HALF_WIDTH, center + REFINE_HALF_WIDTH + 1)
        if bp.size:
            r_bp = lo + int(np.argmax(np.abs(bp)))
        else:
            r_bp = center
        r200 = max(r_bp - BANDPASS_DELAY, 0)
        fid = min(int(round(r200 * self.rate / FS)), max(self._n_in - 1, 0))
        dv, _ = self._at(self._dv, n - SLOPE_SPAN, n + 1)
        slope = float(np.abs(dv).max()) if dv.size else 0.0
        return _Peak(n, v, fid, slope)

    def _classify(self, n, v):
        out = []
        limit = self._rr_missed_limit()
        if limit is not None and self._last is not None and n - self._last.index > limit:
            out += self._search_back(n)
        peak = self._make_peak(n, v)
        last = self._last
        if last is not None and peak.fiducial - last.fiducial < self._refractory:
            return out
        if v > self.threshold1:
            is_t_wave = (
                last is not None
                and peak.fiducial - last.fiducial < self._t_wave
                and peak.slope < 0.5 * last.slope
            )
            if not is_t_wave:
                self.spki = 0.125 * v + 0.875 * self.spki
                out.append(self._accept(peak))
                return out
        self.npki = 0.125 * v + 0.875 * self.npki
        self._candidates.append(peak)
        return out

    def _search_back(self, now):
        out = []
        while True:
            limit = self._rr_missed_limit()
            last = self._last
            if limit is None or last is None or now - last.index <= limit:
                return out
            thr = self.threshold2
            pool = [
                p for p in self._candidates
                if p.index > last.index
                and p.fiducial - last.fiducial >= self._refractory
                and p.value > thr
            ]
            if not pool:
                return out
            best = max(pool, key=lambda p: (p.value, -p.index))
            self.spki = 0.25 * best.value + 0.75 * self.spki
            out.append(self._accept(best))

    def _accept(self, peak):
        last = self._last
        if last is not None:
            rr = peak.index - last.index
            limit_avg = None
            if self._rr_regular:
                limit_avg = sum(self._rr_regular) / len(self._rr_regular)
            self._rr_recent.append(rr)
            if limit_avg is None or RR_LOW * limit_avg <= rr <= RR_HIGH * limit_avg:
                self._rr_regular.append(rr)
        self._last = peak
        self._candidates = [p for p in self._candidates if p.index > peak.index]
        self.fiducials.append(peak.fiducial)
        return peak.fiducial

    def _trim(self):
        keep_from = self._next - 2 * PEAK_HALF_WIDTH - MWI_DELAY - REFINE_HALF_WIDTH - SLOPE_SPAN
        drop = keep_from - self._base
        if drop > 0:
            self._bp = self._bp[drop:]
            self._dv = self._dv[drop:]
            self._iw = self._iw[drop:]
            self._base += drop


def pan_tompkins(series: TimeSeries, source_id: str = "", chunk_samples: int | None = None) -> QrsAnnotationSet:
    """Detect QRS complexes in ``series``.

    ``chunk_samples`` feeds the detector in pieces; the result is the same as
    a single push.
    """
    if series.sample_rate_hz < 100 or series.duration_s < 2.0:
        raise ValueError("insufficient signal")
    det = PanTompkinsDetector(series.sample_rate_hz)
    x = series.samples
    step = chunk_samples or max(len(x), 1)
    for i in range(0, len(x), step):
        det.push(x[i : i + step])
    det.flush()
    return QrsAnnotationSet(np.array(det.fiducials, dtype=np.int64), series.sample_rate_hz, source_id or series.channel_label)
