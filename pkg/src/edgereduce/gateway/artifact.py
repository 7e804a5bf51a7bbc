"""Reduction artifacts and their binary wire format.

Layout (all integers little-endian)::

    magic      4s   b"EDRA"
    version    u8   1
    kind       u8   content kind code
    flags      u8   bit 0 = lossy
    reserved   u8   0
    created_at i64  microseconds since the Unix epoch, UTC
    id_len     u16
    source_id  id_len bytes, UTF-8
    body       kind-specific payload, to end of message

Bodies:

* ``feature_record``: u8 presence flags (f0, start, end), f64 avg_loudness,
  f64 avg_f0_hz, u32 n_frames, u32 n_voiced, i64 start_us, i64 end_us.
* ``match_events``: u32 query length, u16 query-id length + UTF-8 bytes,
  u32 count, then count x (u32 offset, f64 distance).
* ``qrs_events``: f64 sample rate, u32 count, then count x u32 fiducial.
  RR intervals are recomputed from the fiducials on decode.
* ``gzip`` / ``raw``: opaque bytes.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from ..clip import FeatureRecord
from ..dtw import MatchEvent
from ..errors import ArtifactFormatError
from ..qrs import QrsAnnotationSet, RrSeries, rr_intervals

MAGIC = b"EDRA"
VERSION = 1
KIND_CODES = {"feature_record": 1, "match_events": 2, "qrs_events": 3, "gzip": 4, "raw": 5}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
LOSSY_KINDS = frozenset({"feature_record", "match_events", "qrs_events"})

_HEAD = struct.Struct("<4sBBBBqH")
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _to_us(ts: datetime) -> int:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    delta = ts - _EPOCH
    return (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds


def _from_us(us: int) -> datetime:
    return _EPOCH + timedelta(microseconds=us)


@dataclass(frozen=True)
class ReductionArtifact:
    payload: bytes
    content_kind: str
    source_id: str
    lossy: bool
    created_at: datetime

    def __post_init__(self):
        if self.content_kind not in KIND_CODES:
            raise ValueError(f"unknown content kind {self.content_kind!r}")
        if self.lossy != (self.content_kind in LOSSY_KINDS):
            raise ValueError("lossy flag does not match content kind")


def make_artifact(content_kind: str, payload: bytes, source_id: str, created_at: datetime | None = None) -> ReductionArtifact:
    created = created_at or utc_now()
    # the wire format keeps microseconds; drop anything finer up front
    created = _from_us(_to_us(created))
    return ReductionArtifact(bytes(payload), content_kind, source_id, content_kind in LOSSY_KINDS, created)


def serialize_artifact(artifact: ReductionArtifact) -> bytes:
    sid = artifact.source_id.encode("utf-8")
    if len(sid) > 0xFFFF:
        raise ValueError("source_id too long")
    head = _HEAD.pack(MAGIC, VERSION, KIND_CODES[artifact.content_kind], int(artifact.lossy), 0,
                      _to_us(artifact.created_at), len(sid))
    return head + sid + artifact.payload


def deserialize_artifact(data: bytes) -> ReductionArtifact:
    if len(data) < _HEAD.size:
        raise ArtifactFormatError("truncated artifact header")
    magic, version, code, flags, _, created, id_len = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ArtifactFormatError("bad magic")
    if version != VERSION or code not in KIND_NAMES:
        raise ArtifactFormatError("unsupported artifact version/kind")
    start = _HEAD.size
    if len(data) < start + id_len:
        raise ArtifactFormatError("truncated source id")
    sid = data[start : start + id_len].decode("utf-8")
    kind = KIND_NAMES[code]
    if bool(flags & 1) != (kind in LOSSY_KINDS):
        raise ArtifactFormatError("lossy flag does not match content kind")
    return ReductionArtifact(data[start + id_len :], kind, sid, bool(flags & 1), _from_us(created))


# ------------------------------------------------------------------ bodies

_FEATURE = struct.Struct("<BddIIqq")


def encode_feature_record(rec: FeatureRecord) -> bytes:
    flags = (rec.avg_f0_hz is not None) | (rec.start_time is not None) << 1 | (rec.end_time is not None) << 2
    return _FEATURE.pack(
        flags,
        rec.avg_loudness,
        rec.avg_f0_hz if rec.avg_f0_hz is not None else 0.0,
        rec.n_frames,
        rec.n_voiced,
        _to_us(rec.start_time) if rec.start_time is not None else 0,
        _to_us(rec.end_time) if rec.end_time is not None else 0,
    )


def decode_feature_record(body: bytes, source_id: str = "") -> FeatureRecord:
    if len(body) != _FEATURE.size:
        raise ArtifactFormatError("bad feature record body")
    flags, loud, f0, n_frames, n_voiced, start, end = _FEATURE.unpack(body)
    return FeatureRecord(
        loud,
        f0 if flags & 1 else None,
        n_frames,
        n_voiced,
        source_id,
        _from_us(start) if flags & 2 else None,
        _from_us(end) if flags & 4 else None,
    )


_MATCH = np.dtype([("offset", "<u4"), ("distance", "<f8")])


def encode_match_events(events: list[MatchEvent], query_len: int, query_id: str = "") -> bytes:
    qid = query_id.encode("utf-8")
    rec = np.empty(len(events), dtype=_MATCH)
    rec["offset"] = [e.offset for e in events]
    rec["distance"] = [e.distance for e in events]
    return struct.pack("<IH", query_len, len(qid)) + qid + struct.pack("<I", len(events)) + rec.tobytes()


def decode_match_events(body: bytes) -> list[MatchEvent]:
    try:
        qlen, id_len = struct.unpack_from("<IH", body)
        pos = 6
        qid = body[pos : pos + id_len].decode("utf-8")
        pos += id_len
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
    except struct.error:
        raise ArtifactFormatError("truncated match list") from None
    if len(body) - pos != count * _MATCH.itemsize:
        raise ArtifactFormatError("match list length mismatch")
    rec = np.frombuffer(body, dtype=_MATCH, count=count, offset=pos)
    return [MatchEvent(int(o), qlen, float(d), qid) for o, d in zip(rec["offset"], rec["distance"])]


def encode_qrs(qrs: QrsAnnotationSet) -> bytes:
    fid = np.asarray(qrs.fiducials, dtype="<u4")
    return struct.pack("<dI", qrs.sample_rate_hz, fid.size) + fid.tobytes()


def decode_qrs(body: bytes, source_id: str = "") -> tuple[QrsAnnotationSet, RrSeries | None]:
    try:
        rate, count = struct.unpack_from("<dI", body)
    except struct.error:
        raise ArtifactFormatError("truncated qrs body") from None
    if len(body) != 12 + 4 * count:
        raise ArtifactFormatError("qrs body length mismatch")
    fid = np.frombuffer(body, dtype="<u4", count=count, offset=12).astype(np.int64)
    qrs = QrsAnnotationSet(fid, rate, source_id)
    return qrs, (rr_intervals(qrs) if count >= 2 else None)
