"""Delivery of serialized artifacts to a cloud sink.

Two sinks exist: a content-addressed directory and an HTTP endpoint. The
HTTP sink retries timeouts, connection errors and 5xx responses with
exponential backoff; 4xx responses are final. Each request carries an
``Idempotency-Key`` (SHA-256 of the body) so a receiver can drop duplicate
deliveries.
"""
from __future__ import annotations

import hashlib
import os
import queue
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

import httpx

from ..errors import DeliveryError, RejectedBySink

IDEMPOTENCY_HEADER = "Idempotency-Key"
KIND_HEADER = "X-Content-Kind"
SOURCE_HEADER = "X-Source-Id"


def payload_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class DeliveryReceipt:
    sink: str
    location: str
    idempotency_key: str
    bytes_sent: int
    attempts: int = 1
    status: int | None = None
    trace: tuple[str, ...] = ()


class FilesystemSink:
    """Writes each payload to ``<root>/<digest[:2]>/<digest>.edra``."""

    def __init__(self, root):
        self.root = Path(root)

    def __str__(self):
        return f"file://{self.root}"

    def deliver(self, data: bytes, content_kind: str = "", source_id: str = "") -> DeliveryReceipt:
        key = payload_digest(data)
        target = self.root / key[:2] / f"{key}.edra"
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return DeliveryReceipt(str(self), str(target), key, len(data))


class HttpSink:
    def __init__(self, url: str, timeout_s: float = 10.0, max_attempts: int = 5, backoff_base_s: float = 1.0,
                 backoff_factor: float = 2.0, sleep=time.sleep, client: httpx.Client | None = None):
        self.url = url
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.backoff_factor = backoff_factor
        self.sleep = sleep
        self._client = client

    def __str__(self):
        return self.url

    def backoff_delays(self) -> list[float]:
        return [self.backoff_base_s * self.backoff_factor**k for k in range(self.max_attempts - 1)]

    def deliver(self, data: bytes, content_kind: str = "", source_id: str = "") -> DeliveryReceipt:
        key = payload_digest(data)
        headers = {
            "Content-Type": "application/octet-stream",
            IDEMPOTENCY_HEADER: key,
            KIND_HEADER: content_kind,
            SOURCE_HEADER: source_id,
        }
        trace: list[str] = []
        delays = self.backoff_delays()
        client = self._client or httpx.Client(timeout=self.timeout_s)
        try:
            for attempt in range(1, self.max_attempts + 1):
                try:
                    resp = client.post(self.url, content=data, headers=headers)
                except (httpx.TimeoutException, httpx.TransportError) as exc:
                    trace.append(f"attempt {attempt}: {type(exc).__name__}")
                else:
                    trace.append(f"attempt {attempt}: HTTP {resp.status_code}")
                    if 200 <= resp.status_code < 300:
                        echoed = resp.headers.get(IDEMPOTENCY_HEADER, key)
                        return DeliveryReceipt(self.url, self.url, echoed, len(data), attempt,
                                               resp.status_code, tuple(trace))
                    if 400 <= resp.status_code < 500:
                        raise RejectedBySink(f"rejected by sink: HTTP {resp.status_code}", trace)
                if attempt < self.max_attempts:
                    self.sleep(delays[attempt - 1])
        finally:
            if self._client is None:
                client.close()
        raise DeliveryError("delivery failed: " + "; ".join(trace), trace)


def open_sink(uri: str, **kwargs):
    """``file:///path``, a bare path, or an ``http(s)://`` URL."""
    parsed = urlparse(uri)
    if parsed.scheme in ("http", "https"):
        return HttpSink(uri, **kwargs)
    if parsed.scheme == "file":
        return FilesystemSink(parsed.path)
    if parsed.scheme == "":
        return FilesystemSink(uri)
    raise ValueError(f"unsupported sink {uri!r}")


@dataclass
class _Job:
    data: bytes
    content_kind: str
    source_id: str
    on_done: object = None


@dataclass
class UploadQueue:
    """Bounded hand-off between reduction and upload.

    ``submit`` blocks while ``capacity`` jobs are pending. Results (receipt
    or exception) arrive through each job's ``on_done`` callback on the
    worker thread.
    """

    sink: object
    capacity: int = 8
    _queue: queue.Queue = field(init=False)
    _worker: threading.Thread = field(init=False)

    def __post_init__(self):
        self._queue = queue.Queue(maxsize=self.capacity)
        self._worker = threading.Thread(target=self._run, name="uplink", daemon=True)
        self._worker.start()

    def submit(self, data: bytes, content_kind: str, source_id: str, on_done=None):
        self._queue.put(_Job(data, content_kind, source_id, on_done))

    def _run(self):
        while True:
            job = self._queue.get()
            if job is None:
                self._queue.task_done()
                return
            try:
                result = self.sink.deliver(job.data, job.content_kind, job.source_id)
            except Exception as exc:  # handed to the callback
                result = exc
            if job.on_done is not None:
                job.on_done(result)
            self._queue.task_done()

    def close(self):
        self._queue.put(None)
        self._worker.join()
