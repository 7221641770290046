import numpy as np
import pytest

from canyonsim.distributions import ModelParams
from canyonsim.scenario import ScenarioConfig

from oracle import default_params_dict, straight_scenario_dict, turn_scenario_dict


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return ModelParams.from_dict(default_params_dict())


@pytest.fixture
def straight_cfg():
    return ScenarioConfig.from_dict(straight_scenario_dict())


@pytest.fixture
def turn_cfg():
    return ScenarioConfig.from_dict(turn_scenario_dict())
