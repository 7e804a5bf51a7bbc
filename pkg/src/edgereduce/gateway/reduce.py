"""Reduction strategies and per-source reduction reports.

Every strategy turns one source into one artifact. Reduction is measured
against the on-disk size of the source, and the reduced size is the length
of the serialized artifact, header included, so the two numbers in a report
are exactly what would be stored locally and what crosses the uplink.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..clip import PitchConfig, clip_process
from ..dtw import DtwConfig, MatchEvent, nearest_match, subsequence_search, window_dedup
from ..errors import StrategyMismatch
from ..ingest import SourceDescriptor, _record_paths, read, source_size
from ..qrs import pan_tompkins
from ..timeseries import is_flat
from .artifact import (ReductionArtifact, encode_feature_record, encode_match_events, encode_qrs,
                       make_artifact, serialize_artifact)
from .codec import DEFAULT_LEVEL, gzip_compress

STRATEGY_KINDS = ("clip", "dtw_index", "qrs_events", "gzip", "passthrough")
CONTENT_KIND = {"clip": "feature_record", "dtw_index": "match_events", "qrs_events": "qrs_events",
                "gzip": "gzip", "passthrough": "raw"}
REPORT_SCHEMA = 1

AUDIO_MIN_RATE_HZ = 4000.0
ECG_MIN_RATE_HZ = 100.0
# auto-query length when none is configured, by signal domain
DEFAULT_QUERY_MS = {"audio": 40.0, "ecg": 250.0}

NOTES = {
    "clip": "avg_loudness is the mean of per-frame RMS of the unfiltered signal",
    "dtw_index": "reduced bytes count the full serialized MatchEvent list (offset and distance per match)",
    "qrs_events": "reduced bytes count fiducials only; RR intervals are recomputed on decode",
    "gzip": "lossless; single RFC 1952 member of the source file bytes",
    "passthrough": "lossless; raw copy of the source file bytes",
}


def reduction_percent(original_bytes: int, reduced_bytes: int) -> float:
    """``100 * (1 - reduced / original)``; negative when the output is larger."""
    if original_bytes <= 0:
        raise ValueError("empty source")
    if reduced_bytes < 0:
        raise ValueError("reduced_bytes must be >= 0")
    return 100.0 * (1.0 - reduced_bytes / original_bytes)


def signal_domain(rate_hz: float) -> str:
    if rate_hz >= AUDIO_MIN_RATE_HZ:
        return "audio"
    if rate_hz >= ECG_MIN_RATE_HZ:
        return "ecg"
    return "other"


@dataclass(frozen=True)
class DtwQuerySpec:
    """How the DTW-index strategy picks its reference pattern and threshold.

    With ``query=None`` the reference is the highest-energy window of
    ``query_ms`` taken from the source itself (hop of half a window). With
    ``threshold=None`` the threshold is ``threshold_factor`` times the
    distance of the best match outside the query's own neighbourhood.
    """

    config: DtwConfig = field(default_factory=DtwConfig)
    query: tuple[float, ...] | None = None
    query_id: str = ""
    query_ms: float | None = None
    threshold: float | None = None
    threshold_factor: float = 2.0
    window_len: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.threshold is not None and not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if not self.threshold_factor > 0:
            raise ValueError("threshold_factor must be > 0")
        if self.query_ms is not None and not self.query_ms > 0:
            raise ValueError("query_ms must be > 0")


@dataclass(frozen=True)
class ReductionStrategy:
    kind: str
    pitch: PitchConfig | None = None
    dtw: DtwQuerySpec | None = None
    gzip_level: int = DEFAULT_LEVEL

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if (self.pitch is not None) != (self.kind == "clip"):
            raise ValueError("pitch config is required for clip and only for clip")
        if (self.dtw is not None) != (self.kind == "dtw_index"):
            raise ValueError("dtw config is required for dtw_index and only for dtw_index")

    @classmethod
    def default(cls, kind: str) -> "ReductionStrategy":
        if kind == "clip":
            return cls(kind, pitch=PitchConfig())
        if kind == "dtw_index":
            return cls(kind, dtw=DtwQuerySpec())
        return cls(kind)


@dataclass(frozen=True)
class ReductionReport:
    strategy: str
    source_id: str
    original_bytes: int
    reduced_bytes: int
    reduction_percent: float
    processing_seconds: float
    lossy: bool
    note: str = ""
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"schema": REPORT_SCHEMA, **asdict(self)}, sort_keys=False)


def auto_query(samples: np.ndarray, query_len: int) -> int:
    """Offset of the highest-energy non-flat window of ``query_len`` samples (hop ``query_len // 2``)."""
    if query_len < 2 or query_len > samples.size:
        raise ValueError("query too long")
    hop = max(1, query_len // 2)
    best, best_off = -1.0, -1
    for off in range(0, samples.size - query_len + 1, hop):
        w = samples[off : off + query_len]
        if is_flat(float(w.mean()), float(w.std())):
            continue
        energy = float(np.dot(w, w))
        if energy > best:
            best, best_off = energy, off
    if best_off < 0:
        raise ValueError("query is flat; cannot z-normalize")
    return best_off


def _dtw_index(series, spec: DtwQuerySpec, source_id: str):
    x = series.samples
    details = {}
    if spec.query is not None:
        query = np.asarray(spec.query, dtype=np.float64)
        query_id = spec.query_id or "query"
        exclude = None
    else:
        ms = spec.query_ms or DEFAULT_QUERY_MS.get(signal_domain(series.sample_rate_hz), 40.0)
        m = max(2, int(round(ms * series.sample_rate_hz / 1000.0)))
        q0 = auto_query(x, m)
        query = x[q0 : q0 + m]
        query_id = spec.query_id or f"{source_id}@{q0}"
        # trivial matches: windows overlapping the query itself
        exclude = (max(0, q0 - m + 1), q0 + m)
        details["query_offset"] = q0
    m = query.size
    threshold = spec.threshold
    if threshold is None:
        best = nearest_match(query, x, spec.config, exclude=exclude)
        base = best.distance if best is not None else 0.0
        threshold = spec.threshold_factor * base
        if not threshold > 0:
            threshold = 1e-9 * max(1.0, float(m))
        details["nearest_distance"] = base
    matches = subsequence_search(query, x, spec.config, threshold, query_id=query_id, jobs=spec.jobs)
    kept = window_dedup(matches, spec.window_len or m)
    details.update(query_len=m, threshold=threshold, n_candidates=len(matches), n_matches=len(kept))
    return encode_match_events(kept, m, query_id), details, kept


def _check_applicable(kind: str, rate: float):
    dom = signal_domain(rate)
    if kind == "clip" and dom != "audio":
        raise StrategyMismatch(f"strategy/source mismatch: clip needs audio (>= {AUDIO_MIN_RATE_HZ:g} Hz), got {rate:g} Hz")
    if kind == "qrs_events" and dom != "ecg":
        raise StrategyMismatch(f"strategy/source mismatch: qrs_events needs ECG-rate input, got {rate:g} Hz")


def _read_source_bytes(source: SourceDescriptor) -> bytes:
    path = _record_paths(source.path)[1] if source.kind == "mitbih212" else source.path
    return path.read_bytes()


@dataclass
class ReductionResult:
    artifact: ReductionArtifact
    report: ReductionReport
    wire: bytes
    matches: list[MatchEvent] | None = None


def reduce_source(source: SourceDescriptor, strategy: ReductionStrategy, created_at=None) -> ReductionResult:
    """Apply ``strategy`` to ``source`` and measure the result."""
    original = source_size(source)
    sid = source.source_id
    details: dict = {}
    matches = None
    t0 = time.perf_counter()
    if strategy.kind in ("gzip", "passthrough"):
        raw = _read_source_bytes(source)
        body = gzip_compress(raw, strategy.gzip_level) if strategy.kind == "gzip" else raw
    else:
        series = read(source)
        _check_applicable(strategy.kind, series.sample_rate_hz)
        if strategy.kind == "clip":
            rec = clip_process(series, strategy.pitch, source_id=sid)
            body = encode_feature_record(rec)
            details = {"avg_loudness": rec.avg_loudness, "avg_f0_hz": rec.avg_f0_hz,
                       "n_frames": rec.n_frames, "n_voiced": rec.n_voiced}
        elif strategy.kind == "dtw_index":
            body, details, matches = _dtw_index(series, strategy.dtw, sid)
        else:
            qrs = pan_tompkins(series, source_id=sid)
            body = encode_qrs(qrs)
            details = {"n_beats": len(qrs)}
    artifact = make_artifact(CONTENT_KIND[strategy.kind], body, sid, created_at)
    wire = serialize_artifact(artifact)
    elapsed = time.perf_counter() - t0
    report = ReductionReport(
        strategy.kind, sid, original, len(wire), reduction_percent(original, len(wire)), elapsed,
        artifact.lossy, NOTES[strategy.kind],
        {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in details.items()},
    )
    return ReductionResult(artifact, report, wire, matches)


def reduce(source: SourceDescriptor, strategy: ReductionStrategy) -> tuple[ReductionArtifact, ReductionReport]:
    result = reduce_source(source, strategy)
    return result.artifact, result.report
