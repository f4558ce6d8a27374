import numpy as np
import pytest

from drcc.samples import RiskBounds, RiskCost, SampleSet

TOY = [10.0, 8.0, 6.0, 4.0, 2.0]


@pytest.fixture
def toy():
    return SampleSet(TOY, 0.4)


def random_samples(rng, n_max=50, lo=0.0, hi=100.0):
    n = int(rng.integers(1, n_max + 1))
    vals = rng.uniform(lo, hi, n)
    if rng.random() < 0.2 and n > 2:
        # force ties
        vals[: n // 2] = vals[0]
    eps = float(rng.uniform(0.01, 5.0))
    return SampleSet(vals, eps)


def toy_instance(p=1.0, upper=12.0, alpha_bar=0.9, eps=0.4, values=TOY):
    from drcc.reformulate import single_box_instance

    return single_box_instance(SampleSet(values, eps), RiskBounds(alpha_bar), RiskCost("linear", p), upper=upper)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance gates that take minutes")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
