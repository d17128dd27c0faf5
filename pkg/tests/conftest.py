# tests/conftest.py - Shared configs and constructed equilibria.

import math

import pytest

from engine.equilibrium import (GroupSpec, construct_extended_NE, construct_original_NE,
                                construct_unique_smallest_NE)
from market.schema import MarketConfig

LN2 = math.log(2.0)


@pytest.fixture(scope="session")
def three_config():
    """Three single-store sellers, a quarter of buyers are shoppers."""
    return MarketConfig((1, 1, 1), 0.25, 1.0, 100.0)


@pytest.fixture(scope="session")
def three_eq(three_config):
    # seller 0 posts P_M, sellers 1 and 2 mix over [P_M/2, P_M]
    return construct_original_NE(three_config, GroupSpec(full_mixers=(1, 2), pure_reserve=(0,)))


@pytest.fixture(scope="session")
def chain_config():
    """One chain of three stores against two single stores."""
    return MarketConfig((3, 1, 1), 1.0 / 6.0, 1.0, 100.0)


@pytest.fixture(scope="session")
def chain_eq(chain_config):
    return construct_extended_NE(chain_config)


@pytest.fixture(scope="session")
def unique_config():
    return MarketConfig((1, 2, 2), 0.2, 1.0, 100.0)


@pytest.fixture(scope="session")
def unique_eq(unique_config):
    return construct_unique_smallest_NE(unique_config)
