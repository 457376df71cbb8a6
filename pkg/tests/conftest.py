import pytest
from hypothesis import HealthCheck, settings

from gridlore.catalog import EntityCatalog

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def catalog() -> EntityCatalog:
    return EntityCatalog()
