from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))

SYNTHETIC_CORPUS = TESTS_DIR / "data" / "synthetic_corpus.jsonl"
SMOKE_DIR = TESTS_DIR / "data" / "smoke"

# Benchmark corpora live outside the repo; reproduction tests skip cleanly
# when they have not been fetched (see README / `editkit fetch-data`).
BENCH_DATA_ROOT = Path(__file__).parent.parent / "data"


@pytest.fixture(scope="session")
def synthetic_corpus() -> Path:
    assert SYNTHETIC_CORPUS.exists(), "run tests/data/make_synthetic.py"
    return SYNTHETIC_CORPUS


@pytest.fixture(scope="session")
def smoke_dir() -> Path:
    assert SMOKE_DIR.exists(), "run tests/data/make_synthetic.py"
    return SMOKE_DIR


@pytest.fixture(scope="session")
def bank():
    from editkit.verbalizer import default_bank

    return default_bank()
