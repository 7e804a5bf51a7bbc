"""Per-session TSV logs.

One file per session, ``<session-id>.log.tsv``, opened in append mode. The
first line of a new file is a column header so the file opens cleanly in a
spreadsheet. Write failures are logged and counted but never raised: losing
a log line must not abort a reduction.
"""
from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

log = logging.getLogger(__name__)

COLUMNS = ("timestamp", "event", "source_id", "bytes_in", "bytes_out", "battery_percent", "detail")
EVENTS = ("ingest", "reduce", "upload", "error")
BATTERY_ENV = "EDGEREDUCE_BATTERY_PERCENT"


@dataclass(frozen=True)
class SessionLogEntry:
    timestamp: datetime
    event: str
    source_id: str
    bytes_in: int | None = None
    bytes_out: int | None = None
    battery_percent: int | None = None
    detail: str = ""

    def __post_init__(self):
        if self.event not in EVENTS:
            raise ValueError(f"unknown log event {self.event!r}")
        if self.battery_percent is not None and not 0 <= self.battery_percent <= 100:
            raise ValueError("battery_percent must be within 0..100")

    def to_line(self) -> str:
        def cell(v):
            return "" if v is None else str(v).replace("\t", " ").replace("\n", " ")

        fields = [self.timestamp.isoformat(), self.event, self.source_id, self.bytes_in,
                  self.bytes_out, self.battery_percent, self.detail]
        return "\t".join(cell(f) for f in fields) + "\n"

    @classmethod
    def from_line(cls, line: str) -> "SessionLogEntry":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(COLUMNS):
            raise ValueError("wrong number of fields")
        opt_int = lambda s: int(s) if s else None
        return cls(datetime.fromisoformat(parts[0]), parts[1], parts[2], opt_int(parts[3]),
                   opt_int(parts[4]), opt_int(parts[5]), parts[6])


def read_battery_percent() -> int | None:
    """Battery level from ``$EDGEREDUCE_BATTERY_PERCENT`` or the first ``/sys`` battery, else ``None``."""
    raw = os.environ.get(BATTERY_ENV)
    if raw is None:
        for cap in sorted(Path("/sys/class/power_supply").glob("BAT*/capacity")):
            try:
                raw = cap.read_text().strip()
            except OSError:
                continue
            break
    try:
        value = int(raw) if raw is not None else None
    except ValueError:
        return None
    return value if value is not None and 0 <= value <= 100 else None


class SessionLog:
    def __init__(self, log_dir, session_id: str, battery=read_battery_percent):
        self.path = Path(log_dir) / f"{session_id}.log.tsv"
        self.session_id = session_id
        self.battery = battery
        self.failures = 0
        self._last: datetime | None = None
        self._lock = threading.Lock()

    def write(self, event: str, source_id: str, bytes_in=None, bytes_out=None, detail: str = "") -> SessionLogEntry:
        with self._lock:
            now = datetime.now(timezone.utc)
            if self._last is not None and now < self._last:
                now = self._last
            self._last = now
            entry = SessionLogEntry(now, event, source_id, bytes_in, bytes_out, self.battery(), detail)
            self.append(entry)
            return entry

    def append(self, entry: SessionLogEntry) -> bool:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new = not self.path.exists()
            with open(self.path, "a", encoding="utf-8") as f:
                if new:
                    f.write("\t".join(COLUMNS) + "\n")
                f.write(entry.to_line())
        except OSError as exc:
            self.failures += 1
            log.warning("log I/O failure for %s: %s", self.path, exc)
            return False
        return True


def read_log(path) -> list[SessionLogEntry]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [SessionLogEntry.from_line(ln) for ln in lines if ln and not ln.startswith("timestamp\t")]
