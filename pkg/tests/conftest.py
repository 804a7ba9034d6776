import logging

import numpy as np
import pytest

from sagd.core_math import RngStream


@pytest.fixture(autouse=True)
def _quiet_delta_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="sagd.langevin")


@pytest.fixture
def rng():
    return RngStream(20240601)


@pytest.fixture
def np_rng():
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
