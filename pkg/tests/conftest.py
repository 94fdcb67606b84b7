import numpy as np
import pytest

from handlers.synth import SynthConfig, gen_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="executa também os testes marcados como slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="precisa de --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(participants=1, trials=6, duration=40.0, g_att=1.0, g_ign=0.3, snr_db=0.0, seed=7)


@pytest.fixture(scope="session")
def small_participant(small_config):
    participants, _ = gen_dataset(small_config, n_jobs=1)
    return participants[0]


@pytest.fixture(scope="session")
def small_dataset():
    config = SynthConfig(participants=3, trials=4, duration=30.0, g_att=1.0, g_ign=0.3, snr_db=0.0, seed=11)
    return gen_dataset(config, n_jobs=1)
