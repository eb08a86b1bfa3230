import numpy as np
import pytest


def cm1_masks():
    """20-pixel masks with tp=8, fp=2, fn=1, tn=9, laid out row-major as 4x5."""
    pred = np.array([1] * 8 + [1] * 2 + [0] * 1 + [0] * 9, dtype=bool).reshape(4, 5)
    gt = np.array([1] * 8 + [0] * 2 + [1] * 1 + [0] * 9, dtype=bool).reshape(4, 5)
    return pred, gt


@pytest.fixture
def cm1():
    return cm1_masks()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_phantoms(tmp_path_factory):
    from duskfcm.phantom import write_phantom_dataset

    return write_phantom_dataset(tmp_path_factory.mktemp("phantoms"), count=3, size=48, seed=1)


SMALL_FEATURES = "mean_R,mean_B,autocorrelation,cluster_shade,sum_average"


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
