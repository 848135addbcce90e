from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).resolve().parents[1] / "src" / "emspec" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
