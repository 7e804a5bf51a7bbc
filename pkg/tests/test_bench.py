import numpy as np
import pytest

from edgereduce.bench import read_rows, run_bench, write_bench, write_ecg_excerpts
from edgereduce.config import GatewayConfig
from edgereduce.ingest import SourceDescriptor, read_csv

SPEECH = ["clip", "dtw_index", "gzip"]


def test_speech_bench_rows_and_recompute(speech_corpus, tmp_path):
    rows = run_bench(speech_corpus, SPEECH)
    assert len(rows) == 30
    assert [r.strategy for r in rows[:3]] == SPEECH
    paths = write_bench(rows, SPEECH, tmp_path)
    table = read_rows(paths["rows"])
    assert len(table) == 30
    for r in table:
        o, d = int(r["original_bytes"]), int(r["reduced_bytes"])
        assert float(r["reduction_percent"]) == 100.0 * (1.0 - d / o)
    summary = {r["strategy"]: r for r in read_rows(paths["summary"])}
    assert int(summary["gzip"]["bytes_transmitted_total"]) == sum(
        int(r["reduced_bytes"]) for r in table if r["strategy"] == "gzip")
    assert len(read_rows(paths["timing"])) == 30


def test_bench_deterministic_across_jobs(speech_corpus):
    strip = lambda rows: [(r.file, r.strategy, r.original_bytes, r.reduced_bytes, r.reduction_percent, r.detail)
                          for r in rows]
    assert strip(run_bench(speech_corpus, SPEECH, jobs=1)) == strip(run_bench(speech_corpus, SPEECH, jobs=3))


def test_bench_records_mismatch_rows(ecg_corpus):
    rows = run_bench(ecg_corpus, ["clip", "gzip"], GatewayConfig(csv_sample_rate_hz=360.0))
    clip_rows = [r for r in rows if r.strategy == "clip"]
    assert all(r.status == "error" and "mismatch" in r.detail for r in clip_rows)
    assert all(r.status == "ok" for r in rows if r.strategy == "gzip")


@pytest.mark.parametrize("layout, fmt", [("plain", "%.3f"), ("numpy", "%.18e")])
def test_excerpt_layouts(tmp_path, ecg208, layout, fmt):
    (p,) = write_ecg_excerpts(ecg208, tmp_path, [1000], 720, layout)
    ref = tmp_path / "ref.csv"
    np.savetxt(ref, ecg208.samples[1000:1720], fmt=fmt)
    assert p.read_bytes() == ref.read_bytes()
    back = read_csv(SourceDescriptor("csv", p, 360.0)).samples
    np.testing.assert_allclose(back, ecg208.samples[1000:1720], atol=5e-4)
    with pytest.raises(ValueError):
        write_ecg_excerpts(ecg208, tmp_path, [len(ecg208) - 10], 720)
