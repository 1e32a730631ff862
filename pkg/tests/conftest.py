"""Shared fixtures: the default scenario plus derived gain tables.

Session-scoped so the expensive pieces (initial plan, slot gains) are
computed once for the whole run.
"""

import pytest

from covertuav import channel, scenario, trajectory


@pytest.fixture(scope="session")
def cfg():
    return scenario.bundled_scenario()


@pytest.fixture(scope="session")
def plan0(cfg):
    return trajectory.initial_plan(cfg)


@pytest.fixture(scope="session")
def gains0(cfg, plan0):
    return channel.gains_for_positions(cfg, plan0.comm_positions)
