import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridclust.functional import IntegrationContext


@pytest.fixture(scope="session")
def qctx() -> IntegrationContext:
    """Default deterministic quadrature context."""
    return IntegrationContext()


@pytest.fixture(scope="session")
def isctx() -> IntegrationContext:
    """Importance-sampling context sized for test runtime."""
    return IntegrationContext(mode="importance", is_samples=20_000, seed=0)
