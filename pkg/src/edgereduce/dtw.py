"""Dynamic time warping distance and pruned subsequence search.

Local cost is the squared difference, accumulated without a final square
root, over the step set {(1,0), (0,1), (1,1)}. A Sakoe-Chiba band restricts
cells to ``|i - j| <= radius``.

The search follows the usual cascade: a first/last point bound, then
LB_Keogh against the query envelope, then a DTW that abandons as soon as the
best partial path plus the LB_Keogh contributions of the untouched columns
exceeds the threshold. Every stage can be switched off independently; with
all of them off the search degenerates to a full DP per offset.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .timeseries import FLAT_TOLERANCE, Frame, TimeSeries

UNCONSTRAINED = -1


@dataclass(frozen=True)
class DtwConfig:
    """Search/distance configuration.

    ``band_radius`` is an absolute Sakoe-Chiba half-width in samples and wins
    when set. Otherwise ``band_fraction`` of the query length is used
    (rounded, minimum 1 for non-zero fractions). Both ``None`` means
    unconstrained.
    """

    band_radius: int | None = None
    band_fraction: float | None = 0.05
    normalize: bool = True
    use_lb_kim: bool = True
    use_lb_keogh: bool = True
    early_abandon: bool = True

    @classmethod
    def unconstrained(cls, **kwargs) -> "DtwConfig":
        return cls(band_radius=None, band_fraction=None, **kwargs)

    @classmethod
    def no_pruning(cls, **kwargs) -> "DtwConfig":
        return cls(use_lb_kim=False, use_lb_keogh=False, early_abandon=False, **kwargs)

    def radius_for(self, query_len: int) -> int:
        """Resolved band radius for a query of ``query_len`` samples, or ``UNCONSTRAINED``."""
        if self.band_radius is not None:
            if self.band_radius < 0:
                raise ValueError("band_radius must be >= 0")
            return int(self.band_radius)
        if self.band_fraction is None:
            return UNCONSTRAINED
        r = int(round(self.band_fraction * query_len))
        if self.band_fraction > 0:
            r = max(r, 1)
        return min(r, query_len)


@dataclass(frozen=True)
class MatchEvent:
    offset: int
    length: int
    distance: float
    query_id: str = ""


# --------------------------------------------------------------------------
# numba kernels


@nb.njit(cache=True, nogil=True)
def _dtw_kernel(a, b, radius, abandon_at, col_bound):
    """Banded DTW; returns inf once the running bound exceeds ``abandon_at``.

    ``col_bound[k]`` must be a lower bound on the cost of all columns >= k
    (a suffix sum), or all zeros. Rows index ``a``, columns index ``b``.
    """
    n = a.shape[0]
    m = b.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    curr = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        if radius < 0:
            lo = 1
            hi = m
        else:
            lo = max(1, i - radius)
            hi = min(m, i + radius)
        curr[:] = inf
        row_min = inf
        ai = a[i - 1]
        for j in range(lo, hi + 1):
            d = ai - b[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if curr[j - 1] < best:
                best = curr[j - 1]
            v = d * d + best
            curr[j] = v
            if v < row_min:
                row_min = v
        if hi < m:
            rest = col_bound[hi]
        else:
            rest = 0.0
        if row_min + rest > abandon_at:
            return inf
        prev, curr = curr, prev
    return prev[m]


@nb.njit(cache=True, nogil=True)
def _envelope(x, radius):
    n = x.shape[0]
    upper = np.empty(n)
    lower = np.empty(n)
    for i in range(n):
        lo = max(0, i - radius)
        hi = min(n - 1, i + radius)
        u = x[lo]
        lw = x[lo]
        for k in range(lo + 1, hi + 1):
            if x[k] > u:
                u = x[k]
            if x[k] < lw:
                lw = x[k]
        upper[i] = u
        lower[i] = lw
    return upper, lower


@nb.njit(cache=True, nogil=True)
def _search_kernel(
    query, stream, start, stop, radius, threshold, normalize, flat_tol,
    use_kim, use_keogh, early_abandon, best_mode, excl_lo, excl_hi,
):
    """Scan offsets ``[start, stop)``.

    In threshold mode returns every (offset, distance) with distance <=
    threshold. In best mode the threshold tightens to the best distance found
    and only the single best offset (outside ``[excl_lo, excl_hi)``) is
    returned.
    """
    m = query.shape[0]
    eff_radius = radius if radius >= 0 else m
    upper, lower = _envelope(query, eff_radius)
    offsets = np.empty(max(stop - start, 0), dtype=np.int64)
    dists = np.empty(max(stop - start, 0))
    count = 0
    cand = np.empty(m)
    contrib = np.empty(m)
    col_bound = np.zeros(m + 1)
    zero_bound = np.zeros(m + 1)
    limit = threshold
    slack = 1e-9 * max(1.0, abs(threshold)) if threshold < np.inf else 0.0
    best_off = -1
    best_d = np.inf
    for t in range(start, stop):
        if best_mode and t >= excl_lo and t < excl_hi:
            continue
        if normalize:
            s = 0.0
            for k in range(m):
                s += stream[t + k]
            mean = s / m
            ss = 0.0
            for k in range(m):
                dv = stream[t + k] - mean
                ss += dv * dv
            std = math.sqrt(ss / m)
            if std <= flat_tol * max(1.0, abs(mean)):
                continue
            for k in range(m):
                cand[k] = (stream[t + k] - mean) / std
        else:
            for k in range(m):
                cand[k] = stream[t + k]
        cut = limit + slack
        if use_kim:
            d0 = query[0] - cand[0]
            kim = d0 * d0
            if m > 1:
                d1 = query[m - 1] - cand[m - 1]
                kim += d1 * d1
            if kim > cut:
                continue
        bound = zero_bound
        if use_keogh:
            lb = 0.0
            for k in range(m):
                c = cand[k]
                if c > upper[k]:
                    dv = c - upper[k]
                    contrib[k] = dv * dv
                elif c < lower[k]:
                    dv = c - lower[k]
                    contrib[k] = dv * dv
                else:
                    contrib[k] = 0.0
                lb += contrib[k]
            if lb > cut:
                continue
            if early_abandon:
                col_bound[m] = 0.0
                for k in range(m - 1, -1, -1):
                    col_bound[k] = col_bound[k + 1] + contrib[k]
                bound = col_bound
        if early_abandon:
            d = _dtw_kernel(query, cand, radius, cut, bound)
        else:
            d = _dtw_kernel(query, cand, radius, np.inf, zero_bound)
        if d <= limit:
            if best_mode:
                if d < best_d:
                    best_d = d
                    best_off = t
                    limit = d
                    slack = 1e-9 * max(1.0, abs(d))
            else:
                offsets[count] = t
                dists[count] = d
                count += 1
    if best_mode:
        if best_off >= 0:
            offsets[0] = best_off
            dists[0] = best_d
            count = 1
    return offsets[:count], dists[:count]


# --------------------------------------------------------------------------
# public API


def _as_array(x, name):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def dtw_distance(a, b, config: DtwConfig | None = None) -> float:
    """DTW distance between two sequences (no normalization applied here).

    The band radius is resolved against the shorter input. Raises
    ``ValueError`` for empty input or a band too narrow to reach the end cell.
    """
    config = config or DtwConfig.unconstrained()
    a = _as_array(a, "a")
    b = _as_array(b, "b")
    if a.size == 0 or b.size == 0:
        raise ValueError("empty series")
    radius = config.radius_for(min(a.size, b.size))
    if radius >= 0 and abs(a.size - b.size) > radius:
        raise ValueError("band excludes endpoint")
    return float(_dtw_kernel(a, b, radius, np.inf, np.zeros(b.size + 1)))


def lb_keogh(query, candidate, band_radius: int) -> float:
    """LB_Keogh of ``candidate`` against the envelope of ``query``."""
    q = _as_array(query, "query")
    c = _as_array(candidate, "candidate")
    if q.size != c.size:
        raise ValueError("length mismatch")
    if band_radius < 0:
        raise ValueError("band_radius must be >= 0")
    upper, lower = _envelope(q, int(band_radius))
    above = np.clip(c - upper, 0.0, None)
    below = np.clip(lower - c, 0.0, None)
    return float(np.sum(above * above + below * below))


def _prepare_query(query, normalize):
    q = _as_array(query.values if isinstance(query, Frame) else query, "query")
    if normalize:
        if q.size < 2:
            raise ValueError("degenerate series")
        mean = q.mean()
        std = q.std()
        if std <= FLAT_TOLERANCE * max(1.0, abs(mean)):
            raise ValueError("query is flat; cannot z-normalize")
        q = (q - mean) / std
    return q


def _stream_array(stream):
    return _as_array(stream.samples if isinstance(stream, TimeSeries) else stream, "stream")


def subsequence_search(
    query: Frame | np.ndarray,
    stream: TimeSeries | np.ndarray,
    config: DtwConfig,
    threshold: float,
    query_id: str = "",
    jobs: int = 1,
) -> list[MatchEvent]:
    """All offsets whose window lies within ``threshold`` DTW distance of the query.

    Results are sorted by offset and do not depend on ``jobs`` or on which
    pruning stages are enabled.
    """
    q = _prepare_query(query, config.normalize)
    s = _stream_array(stream)
    m = q.size
    if m > s.size:
        raise ValueError("query too long")
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    radius = config.radius_for(m)
    n_off = s.size - m + 1

    def scan(lo, hi):
        return _search_kernel(
            q, s, lo, hi, radius, float(threshold), config.normalize, FLAT_TOLERANCE,
            config.use_lb_kim, config.use_lb_keogh, config.early_abandon, False, 0, 0,
        )

    if jobs <= 1 or n_off < 2 * jobs:
        parts = [scan(0, n_off)]
    else:
        bounds = np.linspace(0, n_off, jobs + 1).astype(int)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda k: scan(bounds[k], bounds[k + 1]), range(jobs)))
    return [
        MatchEvent(int(o), m, float(d), query_id)
        for offs, dists in parts
        for o, d in zip(offs, dists)
    ]


def nearest_match(
    query: Frame | np.ndarray,
    stream: TimeSeries | np.ndarray,
    config: DtwConfig,
    exclude: tuple[int, int] | None = None,
) -> MatchEvent | None:
    """Best-matching offset, optionally ignoring offsets in ``[exclude[0], exclude[1])``.

    Returns ``None`` if every window is flat or excluded.
    """
    q = _prepare_query(query, config.normalize)
    s = _stream_array(stream)
    m = q.size
    if m > s.size:
        raise ValueError("query too long")
    lo, hi = exclude if exclude is not None else (0, 0)
    offs, dists = _search_kernel(
        q, s, 0, s.size - m + 1, config.radius_for(m), np.inf, config.normalize, FLAT_TOLERANCE,
        config.use_lb_kim, config.use_lb_keogh, config.early_abandon, True, int(lo), int(hi),
    )
    if offs.size == 0:
        return None
    return MatchEvent(int(offs[0]), m, float(dists[0]))


def window_dedup(matches, window_len: int) -> list[MatchEvent]:
    """Keep only the closest match in each consecutive ``window_len``-sample tile.

    Ties go to the smaller offset.
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    best: dict[int, MatchEvent] = {}
    for ev in matches:
        tile = ev.offset // window_len
        cur = best.get(tile)
        if cur is None or ev.distance < cur.distance or (
            ev.distance == cur.distance and ev.offset < cur.offset
        ):
            best[tile] = ev
    return [best[k] for k in sorted(best)]
