"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 processing error, 3 delivery failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from .errors import DeliveryError, EdgeReduceError

# Heavier modules (numba kernels, scipy, httpx) are imported by the
# subcommands that need them so that quick commands start fast.
# Mirrors gateway.reduce.STRATEGY_KINDS (checked by the tests).
STRATEGY_KINDS = ("clip", "dtw_index", "qrs_events", "gzip", "passthrough")

EXIT_OK, EXIT_USAGE, EXIT_PROCESSING, EXIT_DELIVERY = 0, 1, 2, 3
log = logging.getLogger("edgereduce")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args):
    from .config import load_config

    return load_config(args.config)


def _descriptor(args, config=None):
    from .ingest import SourceDescriptor

    rate = getattr(args, "rate", None) or (config.csv_sample_rate_hz if config else None)
    desc = SourceDescriptor.from_path(Path(args.input), sample_rate_hz=rate, channel=getattr(args, "channel", 0))
    if desc.kind == "csv" and config is not None:
        desc = dataclasses.replace(desc, column=config.csv_column)
    return desc


def _sink(uri: str, config):
    from .gateway.uplink import open_sink

    u = config.uplink
    if uri.startswith(("http://", "https://")):
        return open_sink(uri, timeout_s=u.timeout_s, max_attempts=u.max_attempts,
                         backoff_base_s=u.backoff_base_s, backoff_factor=u.backoff_factor)
    return open_sink(uri)


def _session(args, config):
    from .gateway.session import Session

    battery = (lambda: config.battery_percent) if config.battery_percent is not None else None
    kwargs = {"battery": battery} if battery else {}
    return Session(_sink(args.sink, config), args.log_dir or config.log_dir,
                   args.staging_dir or config.staging_dir, args.session_id, **kwargs)


# ---------------------------------------------------------------- subcommands


def cmd_reduce(args):
    config = _config(args)
    session = _session(args, config)
    outcome = session.process(_descriptor(args, config), config.strategy(args.strategy))
    print(outcome.report.to_json())
    return EXIT_OK


def cmd_bench(args):
    from .bench import run_bench, summarize, write_bench
    config = _config(args)
    if args.rate:
        config = dataclasses.replace(config, csv_sample_rate_hz=args.rate)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in STRATEGY_KINDS]
    if bad:
        raise UsageError(f"unknown strategy: {', '.join(bad)}")
    rows = run_bench(args.corpus, strategies, config, jobs=args.jobs)
    paths = write_bench(rows, strategies, args.out)
    w = sys.stdout
    w.write("strategy,n_files,aggregate_reduction_percent,bytes_transmitted_total,processing_seconds_total\n")
    for s in summarize(rows, strategies):
        w.write(",".join(str(s.get(k, "")) for k in ("strategy", "n_files", "aggregate_reduction_percent",
                                                    "bytes_transmitted_total", "processing_seconds_total")) + "\n")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"{r.file} {r.strategy}: {r.detail}", file=sys.stderr)
    return EXIT_OK


def _load_series(args, config):
    from .ingest import read

    series = read(_descriptor(args, config))
    start = args.start or 0
    stop = None if args.length is None else start + args.length
    if start < 0 or start >= len(series) or (stop is not None and stop > len(series)):
        raise ValueError("excerpt outside the record")
    return series.slice(start, stop), start


def cmd_qrs(args):
    from .qrs import pan_tompkins, rr_intervals

    series, start = _load_series(args, _config(args) if args.config else None)
    qrs = pan_tompkins(series, source_id=Path(args.input).stem)
    rr = rr_intervals(qrs).intervals_ms if len(qrs) >= 2 else []
    out = sys.stdout
    out.write("beat,sample,time_s,rr_ms\n")
    for k, f in enumerate(qrs.fiducials):
        rr_ms = f"{rr[k - 1]:.3f}" if k >= 1 else ""
        out.write(f"{k},{int(f) + start},{(int(f) + start) / series.sample_rate_hz:.4f},{rr_ms}\n")
    return EXIT_OK


def cmd_clip(args):
    from .clip import clip_process
    from .ingest import read

    config = _config(args)
    series = read(_descriptor(args, config))
    rec = clip_process(series, config.pitch, source_id=Path(args.input).stem)
    d = dataclasses.asdict(rec)
    d["loudness_definition"] = "mean per-frame RMS of the unfiltered signal"
    print(json.dumps(d, default=str))
    return EXIT_OK


def cmd_dtw_search(args):
    import numpy as np

    from .dtw import subsequence_search, window_dedup
    from .ingest import read

    config = _config(args)
    series = read(_descriptor(args, config))
    if args.query:
        query = np.loadtxt(args.query, ndmin=1, dtype=np.float64)
        query_id = Path(args.query).stem
    else:
        if args.query_start is None or args.query_length is None:
            raise UsageError("give --query FILE or both --query-start and --query-length")
        query = series.samples[args.query_start : args.query_start + args.query_length]
        query_id = f"{Path(args.input).stem}@{args.query_start}"
    cfg = config.dtw.config
    if args.band_radius is not None:
        cfg = dataclasses.replace(cfg, band_radius=args.band_radius)
    matches = subsequence_search(query, series, cfg, args.threshold, query_id=query_id, jobs=args.jobs)
    if not args.no_dedup:
        matches = window_dedup(matches, args.window or len(query))
    print("offset,distance")
    for m in matches:
        print(f"{m.offset},{m.distance!r}")
    return EXIT_OK


def cmd_serve(args):
    from .bench import corpus_files, descriptor_for

    config = _config(args)
    watch = Path(args.watch)
    if not watch.is_dir():
        raise UsageError(f"not a directory: {watch}")
    session = _session(args, config)
    seen: dict[Path, tuple[int, int]] = {}
    pending: dict[Path, tuple[int, int]] = {}
    processed = 0
    status = EXIT_OK
    log.info("session %s watching %s", session.session_id, watch)
    try:
        while True:
            for path in corpus_files(watch):
                st = path.stat()
                sig = (st.st_size, st.st_mtime_ns)
                if seen.get(path) == sig:
                    continue
                # a file is taken once its size and mtime hold still for one poll
                if pending.get(path) != sig:
                    pending[path] = sig
                    continue
                pending.pop(path)
                seen[path] = sig
                kind = args.strategy
                if kind == "auto":
                    kind = "clip" if path.suffix.lower() == ".wav" else "qrs_events"
                try:
                    outcome = session.process(descriptor_for(path, config), config.strategy(kind))
                    print(outcome.report.to_json(), flush=True)
                except DeliveryError as exc:
                    print(f"{path.name}: {exc}", file=sys.stderr)
                    status = EXIT_DELIVERY
                except (EdgeReduceError, ValueError, OSError) as exc:
                    print(f"{path.name}: {exc}", file=sys.stderr)
                processed += 1
                if args.max_files and processed >= args.max_files:
                    return status
            time.sleep(args.poll_interval)
    except KeyboardInterrupt:
        log.info("interrupted; stopping")
    return status


def cmd_synth(args):
    from .synth import write_speech_corpus

    for p in write_speech_corpus(args.out, args.n_files, args.duration, args.rate, args.seed):
        print(p)
    return EXIT_OK


def cmd_excerpt(args):
    from .bench import write_ecg_excerpts
    from .ingest import read

    series = read(_descriptor(args, _config(args) if args.config else None))
    starts = [int(s) for s in args.starts.split(",")]
    for p in write_ecg_excerpts(series, args.out, starts, args.length, args.layout, Path(args.input).stem):
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgereduce", description="Gateway-side reduction of speech and ECG recordings.")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def source_args(sp, rate=True):
        sp.add_argument("--input", required=True, help="source file (.wav, .csv, .hea/.dat, .pcm)")
        if rate:
            sp.add_argument("--rate", type=float, help="sample rate for CSV/raw sources")
        sp.add_argument("--channel", type=int, default=0)

    def session_args(sp):
        sp.add_argument("--sink", required=True, help="directory, file:///dir or http(s):// URL")
        sp.add_argument("--log-dir")
        sp.add_argument("--staging-dir")
        sp.add_argument("--session-id")

    sp = sub.add_parser("reduce", help="run one reduction session")
    source_args(sp)
    sp.add_argument("--strategy", required=True, choices=STRATEGY_KINDS)
    session_args(sp)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("bench", help="every strategy on every corpus file")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--strategies", default="clip,dtw_index,gzip")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--rate", type=float, help="sample rate for CSV/raw corpus files")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("qrs", help="QRS fiducials and RR intervals as CSV")
    source_args(sp)
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--length", type=int)
    sp.set_defaults(func=cmd_qrs)

    sp = sub.add_parser("clip", help="average loudness and F0 as JSON")
    source_args(sp)
    sp.set_defaults(func=cmd_clip)

    sp = sub.add_parser("dtw-search", help="DTW subsequence search")
    source_args(sp)
    sp.add_argument("--query", help="text file with one query value per line")
    sp.add_argument("--query-start", type=int)
    sp.add_argument("--query-length", type=int)
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--band-radius", type=int)
    sp.add_argument("--window", type=int, help="dedup window (default: query length)")
    sp.add_argument("--no-dedup", action="store_true")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_dtw_search)

    sp = sub.add_parser("serve", help="reduce files as they appear in a directory")
    sp.add_argument("--watch", required=True)
    session_args(sp)
    sp.add_argument("--strategy", default="auto", choices=("auto",) + STRATEGY_KINDS,
                    help="auto: clip for WAV, qrs_events otherwise")
    sp.add_argument("--poll-interval", type=float, default=1.0)
    sp.add_argument("--max-files", type=int, default=0, help="stop after this many files (0 = run until interrupted)")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("synth", help="write a synthetic speech corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-files", type=int, default=10)
    sp.add_argument("--duration", type=float, default=4.0)
    sp.add_argument("--rate", type=int, default=8000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("excerpt", help="cut ECG excerpts to CSV")
    source_args(sp)
    sp.add_argument("--starts", required=True, help="comma-separated start samples")
    sp.add_argument("--length", type=int, required=True)
    sp.add_argument("--layout", choices=("plain", "numpy"), default="numpy")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_excerpt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"edgereduce: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DeliveryError as exc:
        print(f"edgereduce: {exc}", file=sys.stderr)
        return EXIT_DELIVERY
    except (EdgeReduceError, ValueError, OSError) as exc:
        print(f"edgereduce: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
