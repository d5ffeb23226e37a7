import numpy as np
import pytest


ORLS_ENV_VARS = [
    "ORLS_LAMBDA",
    "ORLS_DELTA",
    "ORLS_CG_EPS",
    "ORLS_THREADS",
    "ORLS_LOG_LEVEL",
    "ORLS_PATCH_SIDE",
]


@pytest.fixture(autouse=True)
def setup_test_environment(monkeypatch):
    """Clear ORLS_* variables so tests see the built-in defaults."""
    for name in ORLS_ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    """Seeded generator for test data (not the simulation streams)."""
    return np.random.default_rng(20240611)
