import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edgereduce.timeseries import TimeSeries  # noqa: E402

DATA = Path(__file__).parent / "data"
MITDB_ENV = "EDGEREDUCE_MITDB"


def mitdb_record(name: str) -> Path | None:
    """Path (without suffix) of a MIT-BIH record, if a local copy exists.

    Looked up in ``$EDGEREDUCE_MITDB`` and then ``tests/data/mitdb``.
    """
    roots = [Path(os.environ[MITDB_ENV])] if os.environ.get(MITDB_ENV) else []
    roots.append(DATA / "mitdb")
    for root in roots:
        base = root / name
        if base.with_suffix(".hea").exists() and base.with_suffix(".dat").exists():
            return base
    return None


def record208() -> TimeSeries:
    """Five minutes of MIT-BIH record 208, MLII lead, 360 Hz, in mV."""
    adc = np.load(DATA / "mitdb208_excerpt.npz")["ecg"].astype(np.float64)
    return TimeSeries((adc - 1024.0) / 200.0, 360.0, "208")


@pytest.fixture(scope="session")
def ecg208():
    return record208()


@pytest.fixture(scope="session")
def speech_corpus(tmp_path_factory):
    from edgereduce.synth import write_speech_corpus

    d = tmp_path_factory.mktemp("speech")
    write_speech_corpus(d, n_files=10, duration_s=4.0, sample_rate=8000, seed=0)
    return d


ECG_EXCERPT_LENGTHS = (750, 900, 1000, 1200, 1400)


@pytest.fixture(scope="session")
def ecg_corpus(tmp_path_factory, ecg208):
    from edgereduce.bench import write_ecg_excerpts

    d = tmp_path_factory.mktemp("ecg")
    rng = np.random.default_rng(1)
    for length in ECG_EXCERPT_LENGTHS:
        start = int(rng.integers(0, len(ecg208) - length))
        write_ecg_excerpts(ecg208, d, [start], length, layout="numpy", prefix="mitdb208")
    return d


# ------------------------------------------------------------ acceptance lines

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())
