"""One reduction session: ingest, reduce, log, stage, upload, clean up.

The staged copy of an artifact is removed only once the sink has returned a
receipt; a failed delivery leaves it in the staging directory for a later
retry. Upload log lines carry the delivered byte count in ``bytes_out``;
reduce lines leave it empty so that summing ``bytes_out`` over a log gives
exactly the bytes that reached the sink.
"""
from __future__ import annotations

import os
import uuid
from dataclasses import dataclass
from pathlib import Path

from ..errors import DeliveryError, EdgeReduceError
from ..ingest import SourceDescriptor, source_size
from .reduce import ReductionReport, ReductionStrategy, reduce_source
from .session_log import SessionLog, read_battery_percent
from .uplink import DeliveryReceipt


class SessionError(EdgeReduceError):
    """A processing failure, annotated with the session and source it happened in."""

    def __init__(self, message, session_id, source_id):
        super().__init__(f"session {session_id}, source {source_id}: {message}")
        self.session_id = session_id
        self.source_id = source_id


@dataclass(frozen=True)
class SessionOutcome:
    report: ReductionReport
    receipt: DeliveryReceipt


def new_session_id() -> str:
    return uuid.uuid4().hex[:16]


class Session:
    def __init__(self, sink, log_dir, staging_dir, session_id: str | None = None, battery=read_battery_percent):
        self.session_id = session_id or new_session_id()
        self.sink = sink
        self.staging = Path(staging_dir)
        self.log = SessionLog(log_dir, self.session_id, battery)

    def stage(self, wire: bytes) -> Path:
        self.staging.mkdir(parents=True, exist_ok=True)
        path = self.staging / f"{self.session_id}-{uuid.uuid4().hex}.edra"
        with open(path, "xb") as f:  # unique name; never overwrite
            f.write(wire)
        return path

    def process(self, source: SourceDescriptor, strategy: ReductionStrategy) -> SessionOutcome:
        sid = source.source_id
        try:
            size = source_size(source)
            self.log.write("ingest", sid, bytes_in=size, detail=source.kind)
            result = reduce_source(source, strategy)
        except Exception as exc:
            self.log.write("error", sid, detail=f"reduce: {exc}")
            raise SessionError(str(exc), self.session_id, sid) from exc
        rep = result.report
        self.log.write("reduce", sid, bytes_in=rep.original_bytes,
                       detail=f"{rep.strategy} reduced_bytes={rep.reduced_bytes} "
                              f"reduction={rep.reduction_percent:.3f}% t={rep.processing_seconds:.4f}s")
        staged = self.stage(result.wire)
        try:
            receipt = self.sink.deliver(result.wire, result.artifact.content_kind, sid)
        except DeliveryError as exc:
            self.log.write("error", sid, detail=f"upload: {exc}; staged at {staged.name}")
            raise
        self.log.write("upload", sid, bytes_out=receipt.bytes_sent,
                       detail=f"{receipt.location} attempts={receipt.attempts}")
        os.unlink(staged)
        return SessionOutcome(rep, receipt)
