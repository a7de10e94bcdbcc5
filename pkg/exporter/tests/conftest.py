import os

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")

import pytest

from exporter_support import EXPORTER_ACCEPTANCE


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if EXPORTER_ACCEPTANCE:
        terminalreporter.write_sep("=", "exporter acceptance")
        for line in EXPORTER_ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def keras():
    import keras as _keras

    _keras.utils.set_random_seed(20240818)
    return _keras
