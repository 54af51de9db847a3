from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slowfast.core import SlowFastSystem
from slowfast.models.futile import BISTABLE, FutileCycleParams

settings.register_profile("slowfast", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("slowfast")


@pytest.fixture(scope="session")
def ones() -> FutileCycleParams:
    return FutileCycleParams()


@pytest.fixture(scope="session")
def bistable() -> FutileCycleParams:
    return BISTABLE


@pytest.fixture
def linear_sys() -> SlowFastSystem:
    """f0 = y, g0 = -y with m0 = 0."""
    return SlowFastSystem(
        n=1, m=1,
        f0=lambda x, y, eps: np.array([y[0]]),
        g0=lambda x, y, eps: np.array([-y[0]]),
        m0=lambda x: np.zeros(1),
        name="linear",
    )
