import pytest

from twinsync import load_config
from twinsync.twin import Scenario


@pytest.fixture
def cfg():
    """Fresh default config dict; safe for tests to mutate."""
    return load_config()


@pytest.fixture(scope="session")
def default_scenario():
    """Default scenario with the model identified once for the session."""
    sc = Scenario.from_config(load_config())
    sc.identify()
    return sc


@pytest.fixture(scope="session")
def default_model(default_scenario):
    return default_scenario.model
