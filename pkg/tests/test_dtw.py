import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgereduce.dtw import (DtwConfig, MatchEvent, dtw_distance, lb_keogh, nearest_match,
                            subsequence_search, window_dedup)
from edgereduce.timeseries import Frame, TimeSeries
from oracles import naive_dtw, search_oracle

series = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=12)


def test_distance_examples():
    unc = DtwConfig.unconstrained()
    assert dtw_distance([0, 0, 0], [1, 1, 1], unc) == 3.0
    assert dtw_distance([1, 2, 3], [1, 2, 2, 3], unc) == 0.0
    x = np.random.default_rng(0).normal(size=30)
    assert dtw_distance(x, x, unc) == 0.0


def test_distance_errors():
    with pytest.raises(ValueError, match="empty series"):
        dtw_distance([], [1.0])
    with pytest.raises(ValueError, match="band excludes endpoint"):
        dtw_distance([1, 2, 3, 4], [1, 2], DtwConfig(band_radius=1))


@settings(max_examples=150)
@given(series, series)
def test_distance_matches_naive_oracle_and_is_symmetric(a, b):
    d = dtw_distance(a, b, DtwConfig.unconstrained())
    assert d == pytest.approx(naive_dtw(a, b), rel=1e-12, abs=1e-12)
    assert d == pytest.approx(dtw_distance(b, a, DtwConfig.unconstrained()), rel=1e-12, abs=1e-12)
    assert d >= 0


@settings(max_examples=100)
@given(st.integers(2, 15), st.integers(0, 2**31 - 1))
def test_band_monotone_and_bounded_by_euclid(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=n)
    prev = np.inf
    for r in range(n + 1):
        d = dtw_distance(a, b, DtwConfig(band_radius=r))
        assert d == pytest.approx(naive_dtw(a, b, r), rel=1e-12)
        assert d <= prev + 1e-12
        prev = d
    assert dtw_distance(a, b, DtwConfig(band_radius=0)) == pytest.approx(np.sum((a - b) ** 2))


def test_lb_keogh_examples():
    assert lb_keogh([1, 2], [2, 4], 0) == 5.0
    assert lb_keogh([3, 1, 4, 1, 5], [3, 1, 4, 1, 5], 2) == 0.0
    with pytest.raises(ValueError, match="length mismatch"):
        lb_keogh([1, 2], [1, 2, 3], 1)


@pytest.mark.parametrize("radius", [1, 4, 16])
def test_lb_keogh_lower_bounds_dtw(radius):
    rng = np.random.default_rng(radius)
    for _ in range(100):
        n = int(rng.integers(radius + 1, 40))
        a, b = rng.normal(size=n), rng.normal(size=n)
        assert lb_keogh(a, b, radius) <= naive_dtw(a, b, radius) + 1e-12


def test_config_radius():
    assert DtwConfig().radius_for(100) == 5
    assert DtwConfig().radius_for(10) == 1
    assert DtwConfig(band_radius=7).radius_for(100) == 7
    assert DtwConfig.unconstrained().radius_for(100) == -1


def test_planted_pattern():
    rng = np.random.default_rng(7)
    s = rng.normal(size=2000)
    q = s[512:544].copy()
    hits = subsequence_search(q, TimeSeries(s, 100.0), DtwConfig(normalize=False), threshold=1e-6)
    assert [(h.offset, h.distance) for h in hits] == [(512, 0.0)]
    hits = subsequence_search(Frame(0, q, 100.0), s, DtwConfig(), threshold=1e-6)
    assert [h.offset for h in hits] == [512]
    assert hits[0].distance < 1e-20


def test_flat_windows_skipped():
    s = np.r_[np.zeros(50), np.sin(np.arange(50)), np.zeros(50)]
    q = np.sin(np.arange(10))
    hits = subsequence_search(q, s, DtwConfig(), threshold=1e9)
    offs = {h.offset for h in hits}
    assert not offs & set(range(0, 41))
    assert not offs & set(range(100, 141))


def test_search_errors():
    with pytest.raises(ValueError, match="query too long"):
        subsequence_search(np.arange(5.0), np.arange(4.0), DtwConfig(), 1.0)
    with pytest.raises(ValueError, match="threshold"):
        subsequence_search(np.arange(3.0), np.arange(10.0), DtwConfig(), 0.0)
    with pytest.raises(ValueError, match="flat"):
        subsequence_search(np.ones(3), np.arange(10.0), DtwConfig(), 1.0)


@pytest.mark.parametrize("normalize", [True, False])
@pytest.mark.parametrize("band", [0, 3, None])
def test_search_matches_full_dp_oracle(normalize, band):
    rng = np.random.default_rng(11)
    s = rng.normal(size=600).cumsum()
    q = s[200:232] + 0.1 * rng.normal(size=32)
    cfg = DtwConfig(band_radius=band, band_fraction=None, normalize=normalize)
    oracle_all = search_oracle(q, s, band, np.inf, normalize)[1]
    thr = float(np.quantile(oracle_all, 0.2))
    offs, dists = search_oracle(q, s, band, thr, normalize)
    hits = subsequence_search(q, s, cfg, thr)
    assert [h.offset for h in hits] == offs.tolist()
    np.testing.assert_allclose([h.distance for h in hits], dists, rtol=0, atol=1e-9)
    plain = subsequence_search(q, s, DtwConfig.no_pruning(band_radius=band, band_fraction=None,
                                                          normalize=normalize), thr)
    assert plain == hits
    assert subsequence_search(q, s, cfg, thr, jobs=3) == hits


def test_nearest_match_with_exclusion():
    rng = np.random.default_rng(5)
    s = rng.normal(size=800)
    q = s[100:140]
    s = s.copy()
    s[500:540] = q + 0.01 * rng.normal(size=40)
    best = nearest_match(q, s, DtwConfig())
    assert best.offset == 100 and best.distance < 1e-20
    other = nearest_match(q, s, DtwConfig(), exclude=(61, 140))
    assert other.offset == 500
    _, d = search_oracle(q, s, 2, np.inf)
    d[61:140] = np.inf
    assert other.distance == pytest.approx(d.min(), abs=1e-9)


def test_window_dedup_examples():
    ev = lambda o, d: MatchEvent(o, 8, d)
    assert window_dedup([ev(10, 0.5), ev(20, 0.3)], 100) == [ev(20, 0.3)]
    assert window_dedup([ev(10, 0.5), ev(150, 0.3)], 100) == [ev(10, 0.5), ev(150, 0.3)]
    assert window_dedup([ev(10, 0.4), ev(20, 0.4)], 100) == [ev(10, 0.4)]
    assert window_dedup([], 10) == []


@given(st.lists(st.tuples(st.integers(0, 1000), st.floats(0, 5)), max_size=40), st.integers(1, 200))
def test_window_dedup_properties(pairs, w):
    evs = [MatchEvent(o, 4, d) for o, d in sorted(set(pairs))]
    out = window_dedup(evs, w)
    assert len(out) <= len(evs)
    for e in out:
        tile = [x for x in evs if x.offset // w == e.offset // w]
        assert e.distance == min(x.distance for x in tile)
