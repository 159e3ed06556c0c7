import os

import pytest
from hypothesis import settings

from crdme.tables import build_gamma_table, build_phi_table


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CRDME_FULL_SCALE") == "1":
        return
    skip = pytest.mark.skip(reason="full-size replication; set CRDME_FULL_SCALE=1")
    for item in items:
        if "full_scale" in item.keywords:
            item.add_marker(skip)


# first calls compile numba kernels
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_PHI = {}
_GAMMA = {}


def phi_table(rho):
    if rho not in _PHI:
        _PHI[rho] = build_phi_table(rho)
    return _PHI[rho]


def gamma_table(rho):
    if rho not in _GAMMA:
        _GAMMA[rho] = build_gamma_table(phi_table(rho))
    return _GAMMA[rho]


@pytest.fixture(scope="session")
def tables():
    """Session-wide table builder; tables are expensive, build each rho once."""

    class _T:
        phi = staticmethod(phi_table)
        gamma = staticmethod(gamma_table)

    return _T
