import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

EX1_X = np.array([[-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def ex1_X():
    return EX1_X.copy()
