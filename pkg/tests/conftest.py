from __future__ import annotations

import pytest

from tims.phantom import default_phantom
from tims.session import build_guide


@pytest.fixture
def phantom():
    # fresh per test: insertion attempts mutate clot puncture state
    return default_phantom()


@pytest.fixture(scope="session")
def shared_guide():
    """One fitted guide path reused by read-only tests (fitting is slow)."""
    return build_guide(default_phantom(), standoff_um=200.0,
                       resample_count=200, expert_seed=7)
