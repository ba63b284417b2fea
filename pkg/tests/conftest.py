import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vsmooth import synth

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def standard_run():
    """Standard synthetic splits for seed 0 and a model trained on them."""
    spec = synth.SynthDatasetSpec(seed=0)
    splits = {k: synth.stack(v) for k, v in synth.generate_splits(spec).items()}
    clf = synth.train(synth.init_classifier(spec.K, spec.d, 0), splits["train"], 20, 0.1, 0)
    return spec, splits, clf


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
