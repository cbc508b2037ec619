import numpy as np
import pytest

from mogpal.verify import random_hyperparams, random_instance  # noqa: F401

# shared across test modules: seeded instance builders live in the library
# (mogpal.verify) so the verification sweep and the tests use one family


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
