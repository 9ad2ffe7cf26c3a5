"""
Shared fixtures: the reference domains and the small problems every test
module builds on. Path counts stay small; long runs are marked slow.
"""

import sys
from pathlib import Path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import pytest

from src.core.drift import make_field
from src.core.geometry import Box, Disk, Interval
from src.solver.data import constant_data, make_data
from src.solver.problem import TransportProblem


@pytest.fixture
def disk():
    return Disk()


@pytest.fixture
def box():
    return Box()


@pytest.fixture
def interval():
    return Interval()


@pytest.fixture
def constant_problem(disk):
    """u0 = u_b = 0.7 under a strain with noise on."""
    return TransportProblem(disk, make_field('strain', 2), 0.5, constant_data(0.7), constant_data(0.7))


@pytest.fixture
def killed_problem(disk):
    """b = 0, u0 = 0, u_b = 1: E u is the exit probability of Brownian motion."""
    return TransportProblem(disk, make_field('zero', 2), 0.2, constant_data(0.0), constant_data(1.0))


@pytest.fixture
def bump_problem(disk):
    """b = 0, smooth bump initial datum, homogeneous boundary datum."""
    return TransportProblem(disk, make_field('zero', 2), 0.2, make_data('smooth_bump', {'radius': 0.6}),
                            constant_data(0.0))


@pytest.fixture
def translation_problem(box):
    """Noise-off translation b = (1, 0) of a linear profile on the unit square."""
    return TransportProblem(box, make_field('constant', 2, {'vector': [1.0, 0.0]}), 0.5,
                            make_data('linear', {'coefficients': [1.0, 0.0]}), constant_data(0.0), noise=False)


@pytest.fixture
def lab_document():
    """Smallest complete experiment document."""
    return {
        'schema': 'stochlab/1',
        'kind': 'solve',
        'problem': {
            'domain': {'kind': 'disk', 'center': [0.0, 0.0], 'radius': 1.0},
            'drift': {'name': 'zero'},
            'initial': {'name': 'constant', 'parameters': {'value': 0.7}},
            'boundary': {'name': 'constant', 'parameters': {'value': 0.7}},
            'horizon': 0.2,
        },
        'numerics': {'dt': 0.05, 'n_paths': 8, 'seed': 1},
        'experiment': {'resolution': 6},
    }
