import time

import numpy as np
import pytest

from irisrec.pipeline import load_config, run_pipeline

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def record(cid, title, passed, detail=""):
    ACCEPTANCE[cid] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid:>2} {title}: {detail}")


def _timed_run(out):
    t0 = time.perf_counter()
    res = run_pipeline(load_config(), out)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """Default-config run on the synthetic suite, shared by every end-to-end test."""
    return _timed_run(tmp_path_factory.mktemp("run_a"))


@pytest.fixture(scope="session")
def pipeline_rerun(tmp_path_factory):
    return _timed_run(tmp_path_factory.mktemp("run_b"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
