"""Decoders for the gateway's input formats.

Everything is decoded explicitly little-endian so the same file gives the
same samples on any host. Each reader records the on-disk byte count of the
source in ``TimeSeries.source_bytes``.
"""
from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DecodeError
from .timeseries import TimeSeries

KINDS = ("wav", "csv", "mitbih212", "raw-pcm16")
_SUFFIX_KIND = {".wav": "wav", ".csv": "csv", ".txt": "csv", ".dat": "mitbih212", ".hea": "mitbih212",
                ".pcm": "raw-pcm16", ".raw": "raw-pcm16"}


@dataclass(frozen=True)
class SourceDescriptor:
    """Where a signal comes from and how to decode it.

    ``path`` for ``mitbih212`` may name the record's ``.hea``/``.dat`` file or
    the bare record path. ``column`` selects the CSV column; ``channel`` the
    WAV/raw/212 channel.
    """

    kind: str
    path: Path
    sample_rate_hz: float | None = None
    channel: int = 0
    column: int = 0
    header: bool | None = None  # csv: None = auto-detect
    n_channels: int = 1  # raw-pcm16 only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        object.__setattr__(self, "path", Path(self.path))
        if self.kind in ("csv", "raw-pcm16"):
            if self.sample_rate_hz is None or not self.sample_rate_hz > 0:
                raise ValueError(f"{self.kind} sources need a positive sample_rate_hz")

    @classmethod
    def from_path(cls, path, **kwargs) -> "SourceDescriptor":
        kind = kwargs.pop("kind", None) or _SUFFIX_KIND.get(Path(path).suffix.lower())
        if kind is None:
            raise ValueError(f"cannot infer source kind for {path}")
        return cls(kind, Path(path), **kwargs)

    @property
    def source_id(self) -> str:
        return self.path.stem


@dataclass(frozen=True)
class Chunk:
    offset: int
    series: TimeSeries


# ---------------------------------------------------------------- WAV


@dataclass(frozen=True)
class WavInfo:
    sample_rate: int
    n_channels: int
    bits_per_sample: int
    data_offset: int
    data_bytes: int
    file_bytes: int


def _wav_info(f, file_bytes) -> WavInfo:
    head = f.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise DecodeError("corrupt container")
    fmt = None
    pos = 12
    while True:
        hdr = f.read(8)
        if len(hdr) < 8:
            raise DecodeError("corrupt container")
        cid, size = hdr[:4], struct.unpack("<I", hdr[4:])[0]
        pos += 8
        if cid == b"fmt ":
            body = f.read(size)
            if len(body) < 16:
                raise DecodeError("corrupt container")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if size % 2:
                f.read(1)
        elif cid == b"data":
            if fmt is None:
                raise DecodeError("corrupt container")
            audio_format, n_ch, rate, _, _, bits = fmt
            if audio_format != 1 or bits != 16:
                raise DecodeError("unsupported encoding")
            if pos + size > file_bytes:
                raise DecodeError("corrupt container")
            return WavInfo(rate, n_ch, bits, pos, size, file_bytes)
        else:
            f.seek(size + (size % 2), io.SEEK_CUR)
        pos += size + (size % 2)


def _pcm16_to_float(raw: bytes, n_channels: int, channel: int) -> np.ndarray:
    frame_bytes = 2 * n_channels
    usable = len(raw) - len(raw) % frame_bytes
    ints = np.frombuffer(raw[:usable], dtype="<i2").reshape(-1, n_channels)
    if not 0 <= channel < n_channels:
        raise ValueError(f"channel {channel} out of range")
    return ints[:, channel].astype(np.float64) / 32768.0


def read_wav(descriptor: SourceDescriptor) -> TimeSeries:
    path = descriptor.path
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        info = _wav_info(f, size)
        f.seek(info.data_offset)
        raw = f.read(info.data_bytes)
    samples = _pcm16_to_float(raw, info.n_channels, descriptor.channel)
    return TimeSeries(samples, float(info.sample_rate), descriptor.source_id, source_bytes=size)


def read_wav_pcm(path) -> tuple[bytes, WavInfo]:
    """Raw PCM payload and header info of a 16-bit PCM WAV file."""
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        info = _wav_info(f, size)
        f.seek(info.data_offset)
        return f.read(info.data_bytes), info


def write_wav(path, series_or_pcm, sample_rate: int | None = None, n_channels: int = 1) -> int:
    """Write a canonical 44-byte-header PCM16 WAV file and return its size.

    Accepts either a ``TimeSeries`` (values clipped to [-1, 1) and scaled by
    32768) or raw little-endian PCM bytes.
    """
    if isinstance(series_or_pcm, (bytes, bytearray)):
        pcm = bytes(series_or_pcm)
        if sample_rate is None:
            raise ValueError("sample_rate required for raw PCM")
    else:
        sample_rate = int(round(series_or_pcm.sample_rate_hz)) if sample_rate is None else sample_rate
        ints = np.clip(np.round(series_or_pcm.samples * 32768.0), -32768, 32767).astype("<i2")
        pcm = ints.tobytes()
    block = 2 * n_channels
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, n_channels, sample_rate, sample_rate * block, block, 16)
    header += b"data" + struct.pack("<I", len(pcm))
    data = header + pcm
    Path(path).write_bytes(data)
    return len(data)


# ---------------------------------------------------------------- CSV


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _csv_rows(text_lines, column, header):
    reader = csv.reader(text_lines)
    for line_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if column >= len(row):
            raise DecodeError(f"parse error at line {line_no}: missing column {column}")
        cell = row[column].strip()
        if line_no == 1 and (header is True or (header is None and not _looks_numeric(cell))):
            continue
        try:
            value = float(cell)
        except ValueError:
            raise DecodeError(f"parse error at line {line_no}: {cell!r}") from None
        if not np.isfinite(value):
            raise DecodeError(f"parse error at line {line_no}: non-finite value")
        yield line_no, value


def read_csv(descriptor: SourceDescriptor) -> TimeSeries:
    path = descriptor.path
    with open(path, newline="", encoding="utf-8") as f:
        values = [v for _, v in _csv_rows(f, descriptor.column, descriptor.header)]
    if not values:
        raise DecodeError("no samples")
    return TimeSeries(np.array(values), float(descriptor.sample_rate_hz), descriptor.source_id,
                      source_bytes=os.path.getsize(path))


def write_csv(path, series: TimeSeries, fmt: str = "%.3f") -> int:
    """One value per line, no header. Returns the file size."""
    text = "".join(f"{fmt % v}\n" for v in series.samples)
    Path(path).write_text(text, encoding="utf-8")
    return len(text.encode("utf-8"))


# ---------------------------------------------------------------- MIT-BIH format 212


@dataclass(frozen=True)
class MitSignalSpec:
    file_name: str
    fmt: str
    gain: float
    baseline: int
    adc_zero: int
    initial_value: int | None
    description: str = ""


@dataclass(frozen=True)
class MitHeader:
    record_name: str
    n_signals: int
    sample_rate_hz: float
    n_samples: int | None
    signals: list[MitSignalSpec] = field(default_factory=list)


def _record_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    base = path.with_suffix("") if path.suffix.lower() in (".hea", ".dat", ".atr") else path
    return base.with_suffix(".hea"), base.with_suffix(".dat")


def parse_mit_header(text: str) -> MitHeader:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DecodeError("empty header")
    rec = lines[0].split()
    if len(rec) < 2:
        raise DecodeError("malformed record line")
    name = rec[0].split("/")[0]
    n_sig = int(rec[1])
    rate = float(rec[2].split("/")[0].split("(")[0]) if len(rec) > 2 else 250.0
    n_samples = int(rec[3]) if len(rec) > 3 else None
    specs = []
    for ln in lines[1 : 1 + n_sig]:
        parts = ln.split()
        fmt = parts[1].split("x")[0].split(":")[0].split("+")[0]
        gain, baseline, adc_zero = 200.0, None, 0
        if len(parts) > 2:
            g = parts[2].split("/")[0]
            if "(" in g:
                g, b = g.split("(")
                baseline = int(b.rstrip(")"))
            gain = float(g) or 200.0
        if len(parts) > 4:
            adc_zero = int(parts[4])
        initial = int(parts[5]) if len(parts) > 5 else None
        desc = " ".join(parts[8:]) if len(parts) > 8 else ""
        specs.append(MitSignalSpec(parts[0], fmt, gain, adc_zero if baseline is None else baseline,
                                   adc_zero, initial, desc))
    if len(specs) != n_sig:
        raise DecodeError("header lists fewer signals than declared")
    return MitHeader(name, n_sig, rate, n_samples, specs)


def decode_212(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Unpack format-212 bytes into two int arrays (12-bit two's complement)."""
    if len(data) % 3:
        raise DecodeError("truncated record")
    b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    s1 = ((b[:, 1] & 0x0F) << 8) | b[:, 0]
    s2 = ((b[:, 1] >> 4) << 8) | b[:, 2]
    s1 = np.where(s1 >= 0x800, s1 - 0x1000, s1)
    s2 = np.where(s2 >= 0x800, s2 - 0x1000, s2)
    return s1, s2


def encode_212(ch0, ch1) -> bytes:
    """Pack two equal-length int sequences (each within [-2048, 2047]) as format 212."""
    a = np.array(ch0, dtype=np.int64)  # copies; masked in place below
    c = np.array(ch1, dtype=np.int64)
    if a.shape != c.shape:
        raise ValueError("channels must have equal length")
    if a.size and (min(a.min(), c.min()) < -2048 or max(a.max(), c.max()) > 2047):
        raise ValueError("sample out of 12-bit range")
    a &= 0xFFF
    c &= 0xFFF
    out = np.empty((a.size, 3), dtype=np.uint8)
    out[:, 0] = a & 0xFF
    out[:, 1] = ((a >> 8) & 0x0F) | (((c >> 8) & 0x0F) << 4)
    out[:, 2] = c & 0xFF
    return out.tobytes()


def read_mitbih_212(descriptor: SourceDescriptor) -> tuple[TimeSeries, TimeSeries]:
    """Both channels of a two-signal format-212 record, in millivolts."""
    hea, dat = _record_paths(descriptor.path)
    header = parse_mit_header(hea.read_text(encoding="latin-1"))
    if header.n_signals != 2 or any(s.fmt != "212" for s in header.signals):
        raise DecodeError("unsupported encoding: only two-signal format 212 records")
    data = dat.read_bytes()
    raw = decode_212(data)
    size = len(data)
    out = []
    for k, spec in enumerate(header.signals):
        mv = (raw[k] - spec.baseline) / spec.gain
        out.append(TimeSeries(mv, header.sample_rate_hz, spec.description or f"{header.record_name}:{k}",
                              source_bytes=size))
    return out[0], out[1]


def read_mitbih_raw(path) -> tuple[MitHeader, np.ndarray, np.ndarray]:
    hea, dat = _record_paths(path)
    header = parse_mit_header(hea.read_text(encoding="latin-1"))
    s1, s2 = decode_212(dat.read_bytes())
    return header, s1, s2


# MIT annotation codes that mark a beat
BEAT_CODES = frozenset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 25, 30, 34, 35, 38})


def read_mit_annotations(path) -> list[tuple[int, int]]:
    """``(sample, code)`` pairs from a MIT-format annotation file (e.g. ``100.atr``)."""
    data = Path(path).read_bytes()
    out = []
    t = 0
    i = 0
    while i + 1 < len(data):
        word = data[i] | (data[i + 1] << 8)
        i += 2
        code, inc = word >> 10, word & 0x3FF
        if code == 0 and inc == 0:
            break
        if code == 59:  # SKIP: 32-bit interval, high 16-bit word first
            if i + 4 > len(data):
                raise DecodeError("truncated annotation file")
            hi = data[i] | (data[i + 1] << 8)
            lo = data[i + 2] | (data[i + 3] << 8)
            skip = (hi << 16) | lo
            if skip >= 1 << 31:
                skip -= 1 << 32
            t += skip
            i += 4
        elif code == 63:  # AUX: inc bytes follow, padded to even
            i += inc + (inc & 1)
        elif code in (60, 61, 62):  # NUM, SUB, CHN
            pass
        else:
            t += inc
            out.append((t, code))
    return out


def beat_annotations(path) -> np.ndarray:
    return np.array([s for s, c in read_mit_annotations(path) if c in BEAT_CODES], dtype=np.int64)


# ---------------------------------------------------------------- raw PCM


def read_raw_pcm16(descriptor: SourceDescriptor) -> TimeSeries:
    raw = descriptor.path.read_bytes()
    if len(raw) % (2 * descriptor.n_channels):
        raise DecodeError("truncated record")
    samples = _pcm16_to_float(raw, descriptor.n_channels, descriptor.channel)
    return TimeSeries(samples, float(descriptor.sample_rate_hz), descriptor.source_id, source_bytes=len(raw))


# ---------------------------------------------------------------- dispatch


def read(descriptor: SourceDescriptor) -> TimeSeries:
    """Decode the selected channel/column of any supported source."""
    if descriptor.kind == "wav":
        return read_wav(descriptor)
    if descriptor.kind == "csv":
        return read_csv(descriptor)
    if descriptor.kind == "raw-pcm16":
        return read_raw_pcm16(descriptor)
    ch = read_mitbih_212(descriptor)
    if descriptor.channel not in (0, 1):
        raise ValueError(f"channel {descriptor.channel} out of range")
    return ch[descriptor.channel]


def source_size(descriptor: SourceDescriptor) -> int:
    if descriptor.kind == "mitbih212":
        return os.path.getsize(_record_paths(descriptor.path)[1])
    return os.path.getsize(descriptor.path)


def chunk_stream(descriptor: SourceDescriptor, chunk_samples: int) -> Iterator[Chunk]:
    """Pull-based reader yielding ``Chunk(offset, series)`` pieces in order.

    Files are read incrementally; a decode failure raises ``DecodeError``
    carrying the offset of the chunk being assembled.
    """
    if chunk_samples < 1:
        raise ValueError("chunk_samples must be >= 1")
    label = descriptor.source_id
    if descriptor.kind == "csv":
        yield from _csv_chunks(descriptor, chunk_samples)
        return
    if descriptor.kind == "mitbih212":
        hea, dat = _record_paths(descriptor.path)
        header = parse_mit_header(hea.read_text(encoding="latin-1"))
        spec = header.signals[descriptor.channel]
        step, unpack = 3 * chunk_samples, lambda raw: decode_212(raw)[descriptor.channel]
        path, rate, start_byte, total = dat, header.sample_rate_hz, 0, os.path.getsize(dat)
        scale = lambda ints: (ints - spec.baseline) / spec.gain
    else:
        if descriptor.kind == "wav":
            size = os.path.getsize(descriptor.path)
            with open(descriptor.path, "rb") as f:
                info = _wav_info(f, size)
            n_ch, rate, start_byte, total = info.n_channels, float(info.sample_rate), info.data_offset, info.data_bytes
        else:
            n_ch, rate = descriptor.n_channels, float(descriptor.sample_rate_hz)
            start_byte, total = 0, os.path.getsize(descriptor.path)
        frame_bytes = 2 * n_ch
        step = frame_bytes * chunk_samples
        path = descriptor.path

        def unpack(raw):
            if len(raw) % frame_bytes:
                raise DecodeError("truncated record")
            return _pcm16_to_float(raw, n_ch, descriptor.channel)

        scale = lambda x: x
    offset = 0
    with open(path, "rb") as f:
        f.seek(start_byte)
        remaining = total
        while remaining > 0:
            raw = f.read(min(step, remaining))
            if not raw:
                raise DecodeError("corrupt container", offset)
            remaining -= len(raw)
            try:
                values = scale(unpack(raw))
            except DecodeError as exc:
                raise DecodeError(str(exc), offset) from None
            yield Chunk(offset, TimeSeries(values, rate, label))
            offset += len(values)


def _csv_chunks(descriptor, chunk_samples):
    label = descriptor.source_id
    rate = float(descriptor.sample_rate_hz)
    buf: list[float] = []
    offset = 0
    with open(descriptor.path, newline="", encoding="utf-8") as f:
        rows = _csv_rows(f, descriptor.column, descriptor.header)
        while True:
            try:
                _, value = next(rows)
            except StopIteration:
                break
            except DecodeError as exc:
                raise DecodeError(str(exc), offset) from None
            buf.append(value)
            if len(buf) == chunk_samples:
                yield Chunk(offset, TimeSeries(np.array(buf), rate, label))
                offset += len(buf)
                buf = []
    if buf:
        yield Chunk(offset, TimeSeries(np.array(buf), rate, label))
    elif offset == 0:
        raise DecodeError("no samples")
