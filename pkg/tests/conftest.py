from __future__ import annotations

import numpy as np
import pytest

from ddq import domain


@pytest.fixture(scope="session")
def kb():
    return domain.generate_kb(np.random.default_rng(1234), n_rows=100)


@pytest.fixture(scope="session")
def goal_db(kb):
    return domain.build_goal_database(kb, domain.GoalDbConfig(), np.random.default_rng(99))


@pytest.fixture(scope="session")
def agent_actions():
    return domain.enumerate_agent_actions()


@pytest.fixture(scope="session")
def user_actions():
    return domain.enumerate_user_actions()
