import numpy as np
import pytest

from pmuid import datagen, monitor


def orthonormal(rng, n, k):
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return Q


def low_rank(rng, n, t, r):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, t))


@pytest.fixture(scope="session")
def golden():
    return datagen.golden_batch()


@pytest.fixture(scope="session")
def golden_model(golden):
    return monitor.train_pilots(golden.training, 0.05)


#: (number, title, passed, seconds, detail) rows filled by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, secs, detail in sorted(ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {n}. {title} ({secs:.2f} s) {detail}")
