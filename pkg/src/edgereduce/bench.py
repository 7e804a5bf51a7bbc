"""Benchmark harness: every strategy on every corpus file.

Outputs three CSV files in the output directory:

``rows.csv``
    one row per (file, strategy) in corpus order, then strategy order.
    ``reduction_percent`` is written with full float precision so that it
    recomputes exactly from ``original_bytes`` and ``reduced_bytes``.
``summary.csv``
    one row per strategy: file count, byte totals (the bytes-transmitted
    column is the bandwidth proxy), mean/min/max reduction.
``timing.csv``
    per-file source byte counts and processing seconds.

Rows are deterministic for a fixed corpus and config except for the timing
columns.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import GatewayConfig
from .errors import EdgeReduceError
from .gateway.reduce import reduce_source
from .ingest import SourceDescriptor, write_csv
from .timeseries import TimeSeries

CORPUS_SUFFIXES = {".wav": "wav", ".csv": "csv", ".txt": "csv", ".hea": "mitbih212", ".pcm": "raw-pcm16",
                   ".raw": "raw-pcm16"}
ROW_FIELDS = ("file", "source_id", "strategy", "status", "original_bytes", "reduced_bytes",
              "reduction_percent", "processing_seconds", "lossy", "detail")
SUMMARY_FIELDS = ("strategy", "n_files", "n_failed", "original_bytes_total", "bytes_transmitted_total",
                  "aggregate_reduction_percent", "mean_reduction_percent", "min_reduction_percent",
                  "max_reduction_percent", "processing_seconds_total")
TIMING_FIELDS = ("file", "strategy", "original_bytes", "processing_seconds")
CSV_LAYOUTS = {"plain": "%.3f", "numpy": "%.18e"}


@dataclass(frozen=True)
class BenchRow:
    file: str
    source_id: str
    strategy: str
    status: str
    original_bytes: int | None = None
    reduced_bytes: int | None = None
    reduction_percent: float | None = None
    processing_seconds: float | None = None
    lossy: bool | None = None
    detail: str = ""

    def as_csv(self) -> dict:
        out = {}
        for k in ROW_FIELDS:
            v = getattr(self, k)
            out[k] = "" if v is None else repr(v) if isinstance(v, float) else v
        return out


def corpus_files(corpus_dir) -> list[Path]:
    """Supported source files directly inside ``corpus_dir``, sorted by name."""
    return sorted(p for p in Path(corpus_dir).iterdir() if p.is_file() and p.suffix.lower() in CORPUS_SUFFIXES)


def descriptor_for(path: Path, config: GatewayConfig) -> SourceDescriptor:
    kind = CORPUS_SUFFIXES[path.suffix.lower()]
    kwargs = {}
    if kind in ("csv", "raw-pcm16"):
        kwargs["sample_rate_hz"] = config.csv_sample_rate_hz
    if kind == "csv":
        kwargs["column"] = config.csv_column
    return SourceDescriptor(kind, path, **kwargs)


def _run_file(path: Path, strategies, config: GatewayConfig) -> list[BenchRow]:
    rows = []
    for kind in strategies:
        try:
            desc = descriptor_for(path, config)
            rep = reduce_source(desc, config.strategy(kind)).report
        except (EdgeReduceError, ValueError, OSError) as exc:
            rows.append(BenchRow(path.name, path.stem, kind, "error", detail=str(exc)))
            continue
        detail = " ".join(f"{k}={v}" for k, v in rep.details.items())
        rows.append(BenchRow(path.name, rep.source_id, kind, "ok", rep.original_bytes, rep.reduced_bytes,
                             rep.reduction_percent, rep.processing_seconds, rep.lossy, detail))
    return rows


def warm_up():
    """Load lazily imported modules and compiled kernels so timings measure steady state."""
    from .dtw import DtwConfig, subsequence_search
    from .timeseries import lowpass

    x = np.sin(np.arange(64) / 3.0)
    subsequence_search(x[:8], x, DtwConfig(), 1.0)
    lowpass(TimeSeries(x, 8000.0), 900.0)


def run_bench(corpus_dir, strategies, config: GatewayConfig | None = None, jobs: int = 1) -> list[BenchRow]:
    config = config or GatewayConfig()
    files = corpus_files(corpus_dir)
    warm_up()
    if jobs <= 1:
        per_file = [_run_file(p, strategies, config) for p in files]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_file = list(pool.map(lambda p: _run_file(p, strategies, config), files))
    return [row for rows in per_file for row in rows]


def summarize(rows: list[BenchRow], strategies) -> list[dict]:
    out = []
    for kind in strategies:
        ok = [r for r in rows if r.strategy == kind and r.status == "ok"]
        failed = sum(1 for r in rows if r.strategy == kind and r.status != "ok")
        if not ok:
            out.append({"strategy": kind, "n_files": 0, "n_failed": failed})
            continue
        orig = sum(r.original_bytes for r in ok)
        red = sum(r.reduced_bytes for r in ok)
        pct = np.array([r.reduction_percent for r in ok])
        out.append({
            "strategy": kind,
            "n_files": len(ok),
            "n_failed": failed,
            "original_bytes_total": orig,
            "bytes_transmitted_total": red,
            "aggregate_reduction_percent": round(100.0 * (1.0 - red / orig), 4),
            "mean_reduction_percent": round(float(pct.mean()), 4),
            "min_reduction_percent": round(float(pct.min()), 4),
            "max_reduction_percent": round(float(pct.max()), 4),
            "processing_seconds_total": round(sum(r.processing_seconds for r in ok), 4),
        })
    return out


def write_bench(rows: list[BenchRow], strategies, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / f"{name}.csv" for name in ("rows", "summary", "timing")}
    with open(paths["rows"], "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, ROW_FIELDS)
        w.writeheader()
        w.writerows(r.as_csv() for r in rows)
    with open(paths["summary"], "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, SUMMARY_FIELDS, restval="")
        w.writeheader()
        w.writerows(summarize(rows, strategies))
    with open(paths["timing"], "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, TIMING_FIELDS)
        w.writeheader()
        for r in rows:
            if r.status == "ok":
                w.writerow({"file": r.file, "strategy": r.strategy, "original_bytes": r.original_bytes,
                            "processing_seconds": repr(r.processing_seconds)})
    return paths


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_ecg_excerpts(series: TimeSeries, out_dir, starts, length: int, layout: str = "numpy",
                       prefix: str = "ecg") -> list[Path]:
    """Cut ``length``-sample excerpts at each of ``starts`` and write them as one-column CSV.

    ``layout`` is ``"plain"`` (three decimals) or ``"numpy"`` (``%.18e``,
    the layout of ``numpy.savetxt`` with default arguments).
    """
    if layout not in CSV_LAYOUTS:
        raise ValueError(f"unknown csv layout {layout!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for start in starts:
        if start < 0 or start + length > len(series):
            raise ValueError(f"excerpt [{start}, {start + length}) outside the record")
        path = out_dir / f"{prefix}_{start:07d}_{length}.csv"
        write_csv(path, series.slice(start, start + length), CSV_LAYOUTS[layout])
        paths.append(path)
    return paths
