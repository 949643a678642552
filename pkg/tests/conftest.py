# -*- coding: utf-8 -*-
import json

import pytest

from driftlab.services.chain_core import make_biased_walk, make_decrement_chain, make_two_state_chain
from driftlab.services.fitness_lib import HotMonotoneConfig
from driftlab.services.random_decline import make_random_decline


@pytest.fixture
def decrement_chain():
    return make_decrement_chain()


@pytest.fixture
def two_state_chain():
    return make_two_state_chain(0.25)


@pytest.fixture
def capped_walk():
    """Marche descendante p_down = 0.75, plafond réfléchissant loin du départ"""
    return make_biased_walk(0.75, cap=300)


@pytest.fixture
def decline_one():
    return make_random_decline(1)


@pytest.fixture
def small_hot_config():
    return HotMonotoneConfig(n=10, c=2.5, alpha=0.4, beta=0.2, epsilon=0.5, level_cap=5, seed=3)


@pytest.fixture
def decline_spec():
    return {
        'kind': 'DECLINE_SCAN',
        'grid': {'a': [0.5, 2.0], 'n': [100, 1000]},
        'replications': 40,
        'budget': '100*n',
        'master_seed': 7,
    }


@pytest.fixture
def write_spec(tmp_path):
    def _write(spec, name='spec.json'):
        path = tmp_path / name
        path.write_text(json.dumps(spec), encoding='utf-8')
        return path
    return _write
