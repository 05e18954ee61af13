import json
import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from melseg.corpus import Melody, NoteEvent  # noqa: E402
from melseg.rbm import RbmModel  # noqa: E402


@pytest.fixture(scope="session")
def rbm6x4_fixture():
    return json.loads((HERE / "data" / "rbm_6x4.json").read_text())


@pytest.fixture(scope="session")
def rbm6x4(rbm6x4_fixture):
    d = rbm6x4_fixture
    return RbmModel(np.array(d["W"]), np.array(d["a"]), np.array(d["b"]))


def make_melody(rows, melody_id="m"):
    """Melody from (onset, duration, pitch, phrase_start) tuples."""
    return Melody(melody_id, tuple(NoteEvent(o, d, p, bool(s)) for o, d, p, s in rows))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
