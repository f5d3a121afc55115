import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rotrnn.toydata import write_task_dir  # noqa: E402


# (criterion, passed, detail) rows filled in by test_acceptance.py
_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "long: multi-hour desk-scale reproduction, opt in with -m long")
    config.stash[_ACCEPTANCE] = []


def pytest_deselected(items):
    for item in items:
        if item.get_closest_marker("long") and item.name.startswith("test_criterion_"):
            cid = item.name.split("_")[2]
            item.config.stash[_ACCEPTANCE].append((cid, None, "not run (marked long; use pytest -m long)"))


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(rows, key=lambda r: str(r[0])):
        verdict = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{verdict}  criterion {criterion}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """Small generated task-1-style corpus in the bAbI file layout."""
    return write_task_dir(tmp_path_factory.mktemp("toy"), task_id=1, n_train=120, n_test=60, seed=3)


@pytest.fixture(scope="session")
def babi_dir():
    """Official corpus location from ``ROTRNN_DATA``, or None."""
    path = os.environ.get("ROTRNN_DATA")
    return Path(path) if path and Path(path).exists() else None


@pytest.fixture
def criterion(request, capsys):
    """``criterion(id, passed, detail)`` records a verdict line and fails the test when not passed."""

    def record(cid, passed, detail):
        request.config.stash[_ACCEPTANCE].append((cid, bool(passed), detail))
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'}  criterion {cid}: {detail}")
        assert passed, f"criterion {cid}: {detail}"

    return record
