"""TOML configuration for strategies, sources, uplink and sessions.

Every section and key is optional; missing keys keep the library defaults.
Example::

    [source]
    csv_sample_rate_hz = 360.0      # CSV and raw PCM files carry no rate
    csv_column = 0

    [clip]
    f0_min_hz = 60.0
    f0_max_hz = 400.0
    frame_ms = 40.0
    hop_ms = 20.0
    lowpass_cutoff_hz = 900.0
    median_window = 5
    voicing_ratio = 0.35
    dip_tolerance = 0.25

    [dtw]
    band_fraction = 0.05            # or band_radius = 8, or unconstrained = true
    normalize = true
    query_ms = 40.0                 # omit for the per-domain default
    threshold_factor = 2.0          # or threshold = 1.5
    window_len = 320                # omit for one query length
    jobs = 1

    [gzip]
    level = 6

    [uplink]
    timeout_s = 10.0
    max_attempts = 5
    backoff_base_s = 1.0
    backoff_factor = 2.0
    queue_capacity = 8

    [session]
    log_dir = "logs"
    staging_dir = "staging"
    battery_percent = 80            # omit to read the environment/system
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .clip import PitchConfig
from .dtw import DtwConfig
from .gateway.reduce import DtwQuerySpec, ReductionStrategy


@dataclass(frozen=True)
class UplinkSettings:
    timeout_s: float = 10.0
    max_attempts: int = 5
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0
    queue_capacity: int = 8


@dataclass(frozen=True)
class GatewayConfig:
    pitch: PitchConfig = field(default_factory=PitchConfig)
    dtw: DtwQuerySpec = field(default_factory=DtwQuerySpec)
    gzip_level: int = 6
    csv_sample_rate_hz: float | None = None
    csv_column: int = 0
    uplink: UplinkSettings = field(default_factory=UplinkSettings)
    log_dir: Path = Path("logs")
    staging_dir: Path = Path("staging")
    battery_percent: int | None = None

    def strategy(self, kind: str) -> ReductionStrategy:
        if kind == "clip":
            return ReductionStrategy(kind, pitch=self.pitch)
        if kind == "dtw_index":
            return ReductionStrategy(kind, dtw=self.dtw)
        return ReductionStrategy(kind, gzip_level=self.gzip_level)


def _pick(cls, table: dict, section: str, extra=()):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names - set(extra)
    if unknown:
        raise ValueError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return {k: v for k, v in table.items() if k in names}


def parse_config(data: dict) -> GatewayConfig:
    known = {"source", "clip", "dtw", "gzip", "uplink", "session"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown section(s): {', '.join(sorted(unknown))}")
    pitch = PitchConfig(**_pick(PitchConfig, data.get("clip", {}), "clip"))

    d = dict(data.get("dtw", {}))
    spec_keys = ("query_ms", "threshold", "threshold_factor", "window_len", "jobs")
    cfg_extra = ("unconstrained",) + spec_keys
    if d.pop("unconstrained", False):
        d["band_radius"] = None
        d["band_fraction"] = None
    dtw_cfg = DtwConfig(**_pick(DtwConfig, d, "dtw", cfg_extra))
    dtw = DtwQuerySpec(config=dtw_cfg, **{k: d[k] for k in spec_keys if k in d})

    src = data.get("source", {})
    bad = set(src) - {"csv_sample_rate_hz", "csv_column"}
    if bad:
        raise ValueError(f"unknown key(s) in [source]: {', '.join(sorted(bad))}")
    gz = data.get("gzip", {})
    if set(gz) - {"level"}:
        raise ValueError("unknown key(s) in [gzip]")
    sess = data.get("session", {})
    if set(sess) - {"log_dir", "staging_dir", "battery_percent"}:
        raise ValueError("unknown key(s) in [session]")
    return GatewayConfig(
        pitch=pitch,
        dtw=dtw,
        gzip_level=int(gz.get("level", 6)),
        csv_sample_rate_hz=src.get("csv_sample_rate_hz"),
        csv_column=int(src.get("csv_column", 0)),
        uplink=UplinkSettings(**_pick(UplinkSettings, data.get("uplink", {}), "uplink")),
        log_dir=Path(sess.get("log_dir", "logs")),
        staging_dir=Path(sess.get("staging_dir", "staging")),
        battery_percent=sess.get("battery_percent"),
    )


def load_config(path=None) -> GatewayConfig:
    if path is None:
        return GatewayConfig()
    with open(path, "rb") as f:
        return parse_config(tomllib.load(f))
