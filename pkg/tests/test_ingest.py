import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgereduce.errors import DecodeError
from edgereduce.ingest import (SourceDescriptor, beat_annotations, chunk_stream, decode_212, encode_212,
                               parse_mit_header, read, read_csv, read_mit_annotations, read_mitbih_212,
                               read_wav, read_wav_pcm, source_size, write_csv, write_wav)
from edgereduce.timeseries import TimeSeries
from oracles import unpack_212


def wav_bytes(pcm: bytes, rate=8000, fmt=1, bits=16, n_ch=1, declared=None):
    block = n_ch * bits // 8
    return (b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE" + b"fmt "
            + struct.pack("<IHHIIHH", 16, fmt, n_ch, rate, rate * block, block, bits)
            + b"data" + struct.pack("<I", len(pcm) if declared is None else declared) + pcm)


def write_record(base, ch0, ch1, rate=360, gain=200, baseline=1024):
    base.with_suffix(".dat").write_bytes(encode_212(ch0, ch1))
    base.with_suffix(".hea").write_text(
        f"{base.name} 2 {rate} {len(ch0)}\n"
        f"{base.name}.dat 212 {gain} 11 {baseline} {ch0[0]} 0 0 MLII\n"
        f"{base.name}.dat 212 {gain} 11 {baseline} {ch1[0]} 0 0 V5\n"
    )


def test_wav_canonical(tmp_path):
    p = tmp_path / "a.wav"
    p.write_bytes(wav_bytes(b"\x00\x00\x00\x40"))
    ts = read_wav(SourceDescriptor("wav", p))
    assert list(ts.samples) == [0.0, 0.5]
    assert ts.sample_rate_hz == 8000 and ts.source_bytes == 48


def test_wav_errors(tmp_path):
    p = tmp_path / "a.wav"
    p.write_bytes(wav_bytes(b"\x00\x00" * 4, declared=100))
    with pytest.raises(DecodeError, match="corrupt container"):
        read_wav(SourceDescriptor("wav", p))
    p.write_bytes(wav_bytes(b"\x00\x00\x00\x00", fmt=3, bits=32))
    with pytest.raises(DecodeError, match="unsupported encoding"):
        read_wav(SourceDescriptor("wav", p))
    p.write_bytes(wav_bytes(b"\x00" * 6, bits=24))
    with pytest.raises(DecodeError, match="unsupported encoding"):
        read_wav(SourceDescriptor("wav", p))
    p.write_bytes(b"RIFX....")
    with pytest.raises(DecodeError, match="corrupt container"):
        read_wav(SourceDescriptor("wav", p))


def test_wav_round_trip_pcm(tmp_path):
    pcm = np.random.default_rng(0).integers(-32768, 32768, 1001).astype("<i2").tobytes()
    src = tmp_path / "src.wav"
    src.write_bytes(wav_bytes(pcm, rate=16000))
    dst = tmp_path / "dst.wav"
    write_wav(dst, read_wav(SourceDescriptor("wav", src)))
    assert read_wav_pcm(dst)[0] == pcm
    assert dst.read_bytes() == src.read_bytes()


def test_wav_stereo_channel(tmp_path):
    p = tmp_path / "s.wav"
    pcm = np.array([[1, -1], [2, -2], [3, -3]], dtype="<i2").tobytes()
    p.write_bytes(wav_bytes(pcm, n_ch=2))
    ts = read_wav(SourceDescriptor("wav", p, channel=1))
    np.testing.assert_array_equal(ts.samples * 32768, [-1, -2, -3])


def test_csv_examples(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1.0\n2.0\n3.0\n")
    assert list(read_csv(SourceDescriptor("csv", p, 100.0)).samples) == [1, 2, 3]
    p.write_text("time,ecg\n0,0.5\n1,0.25\n")
    assert list(read_csv(SourceDescriptor("csv", p, 100.0, column=1)).samples) == [0.5, 0.25]
    p.write_text("")
    with pytest.raises(DecodeError, match="no samples"):
        read_csv(SourceDescriptor("csv", p, 100.0))
    p.write_text("1\n2\nabc\n")
    with pytest.raises(DecodeError, match="parse error at line 3"):
        read_csv(SourceDescriptor("csv", p, 100.0))
    with pytest.raises(ValueError):
        SourceDescriptor("csv", p)


def test_212_examples():
    s1, s2 = decode_212(bytes([0x01, 0x00, 0x02]))
    assert (s1[0], s2[0]) == (1, 2)
    s1, s2 = decode_212(bytes([0xFF, 0x0F, 0x00]))
    assert (s1[0], s2[0]) == (-1, 0)
    with pytest.raises(DecodeError, match="truncated record"):
        decode_212(b"\x00\x01")


@settings(max_examples=50)
@given(st.binary(min_size=0, max_size=300).map(lambda b: b[: len(b) - len(b) % 3]))
def test_212_matches_bytewise_oracle_and_round_trips(data):
    s1, s2 = decode_212(data)
    o1, o2 = unpack_212(data)
    assert s1.tolist() == o1 and s2.tolist() == o2
    assert encode_212(s1, s2) == data


def test_mit_header_parse():
    h = parse_mit_header("100 2 360 650000\n100.dat 212 200 11 1024 995 -22131 0 MLII\n"
                         "100.dat 212 200 11 1024 1011 20052 0 V5\n# comment\n")
    assert h.record_name == "100" and h.n_signals == 2 and h.sample_rate_hz == 360 and h.n_samples == 650000
    assert h.signals[0].gain == 200 and h.signals[0].baseline == 1024 and h.signals[0].initial_value == 995
    assert h.signals[1].description == "V5"


def test_mitbih_record_and_csv_consistency(tmp_path, ecg208):
    adc = np.round(ecg208.samples[:5000] * 200 + 1024).astype(int) - 1024
    other = np.roll(adc, 7)
    base = tmp_path / "208"
    write_record(base, adc, other, baseline=0)
    ch0, ch1 = read_mitbih_212(SourceDescriptor("mitbih212", base.with_suffix(".hea")))
    np.testing.assert_allclose(ch0.samples, adc / 200.0)
    np.testing.assert_allclose(ch1.samples, other / 200.0)
    assert ch0.sample_rate_hz == 360 and ch0.source_bytes == 3 * 5000
    # text export of the same segment decodes to the same values
    csv_path = tmp_path / "208.csv"
    write_csv(csv_path, ch0, "%.3f")
    from_csv = read_csv(SourceDescriptor("csv", csv_path, 360.0))
    np.testing.assert_array_equal(from_csv.samples, ch0.samples)


def _ann_word(code, inc):
    return struct.pack("<H", (code << 10) | inc)


def test_annotation_parser(tmp_path):
    data = (_ann_word(1, 18) + _ann_word(63, 3) + b"(N\x00\x00" + _ann_word(5, 300)
            + _ann_word(59, 0) + struct.pack("<HH", 0x0001, 0x0000) + _ann_word(1, 10)
            + _ann_word(28, 5) + _ann_word(0, 0))
    p = tmp_path / "r.atr"
    p.write_bytes(data)
    assert read_mit_annotations(p) == [(18, 1), (318, 5), (318 + 65536 + 10, 1), (318 + 65536 + 15, 28)]
    assert beat_annotations(p).tolist() == [18, 318, 318 + 65536 + 10]


def test_chunk_lengths(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("".join(f"{k}\n" for k in range(10)))
    chunks = list(chunk_stream(SourceDescriptor("csv", p, 10.0), 4))
    assert [len(c.series) for c in chunks] == [4, 4, 2]
    assert [c.offset for c in chunks] == [0, 4, 8]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 600))
def test_chunks_concatenate_to_whole(tmp_path_factory, chunk):
    d = tmp_path_factory.mktemp("c")
    x = TimeSeries(np.sin(np.arange(1234) / 7.0) * 0.9, 8000.0)
    write_wav(d / "a.wav", x)
    adc = (np.arange(1234) % 2000) - 1000
    write_record(d / "r", adc, -adc)
    (d / "a.csv").write_text("".join(f"{v:.4f}\n" for v in x.samples))
    for desc in (SourceDescriptor("wav", d / "a.wav"), SourceDescriptor("mitbih212", d / "r"),
                 SourceDescriptor("csv", d / "a.csv", 8000.0)):
        parts = [c.series.samples for c in chunk_stream(desc, chunk)]
        np.testing.assert_array_equal(np.concatenate(parts), read(desc).samples)


def test_mid_file_corruption_names_chunk(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("".join(f"{k}\n" for k in range(25)) + "oops\n1\n")
    with pytest.raises(DecodeError, match="offset 20"):
        list(chunk_stream(SourceDescriptor("csv", p, 10.0), 10))
    w = tmp_path / "t.wav"
    w.write_bytes(wav_bytes(b"\x00\x00" * 30)[:-5])  # header claims more than is present
    with pytest.raises(DecodeError, match="corrupt container"):
        list(chunk_stream(SourceDescriptor("wav", w), 4))


def test_source_size_and_from_path(tmp_path):
    p = tmp_path / "rec.wav"
    n = write_wav(p, TimeSeries(np.zeros(100), 8000.0))
    d = SourceDescriptor.from_path(p)
    assert d.kind == "wav" and d.source_id == "rec" and source_size(d) == n == 244
