import numpy as np
import pytest

from src.analysis.parabolic_oracle import oracle_for, parabolic_oracle
from src.core.drift import make_field
from src.core.exceptions import ArgumentError, UnsupportedDomainError
from src.core.geometry import Ball
from src.solver.data import constant_data, make_data
from src.solver.representation import mc_expectation


class TestOracle:

    def test_constant_data_stay_constant(self, disk):
        oracle = parabolic_oracle(make_field('constant', 2, {'vector': [1.0, 0.0]}), disk, constant_data(0.7),
                                  constant_data(0.7), resolution=16, dt_grid=0.05, times=[0.1, 0.2])
        values = oracle.evaluate(0.2, np.array([[0.0, 0.0], [0.5, 0.3]]))
        assert np.allclose(values, 0.7, atol=1e-10)

    def test_heat_equation_on_the_interval(self, interval):
        # w = exp(-pi^2 t / 2) sin(pi x)
        oracle = parabolic_oracle(make_field('zero', 1), interval, make_data('sine_product'), constant_data(0.0),
                                  resolution=64, dt_grid=0.005, times=[0.1])
        assert oracle(0.1, [[0.5]])[0] == pytest.approx(np.exp(-np.pi ** 2 * 0.05), abs=2e-3)

    def test_problem_wrapper(self, constant_problem):
        oracle = oracle_for(constant_problem, 16, 0.05, [0.5])
        assert np.allclose(oracle.evaluate(0.5, [[0.1, -0.2]]), 0.7, atol=1e-10)
        assert oracle.parameters['drift'] == 'strain'

    def test_three_dimensions_unsupported(self):
        ball = Ball(center=(0.0, 0.0, 0.0))
        with pytest.raises(UnsupportedDomainError):
            parabolic_oracle(make_field('zero', 3), ball, constant_data(0.0), constant_data(1.0), 8, 0.1, [0.1])

    def test_resolution_checked(self, disk):
        with pytest.raises(ArgumentError):
            parabolic_oracle(make_field('zero', 2), disk, constant_data(0.0), constant_data(1.0), 3, 0.1, [0.1])

    def test_times_on_the_grid(self, disk):
        with pytest.raises(ArgumentError):
            parabolic_oracle(make_field('zero', 2), disk, constant_data(0.0), constant_data(1.0), 8, 0.05, [0.07])

    def test_missing_snapshot(self, disk):
        oracle = parabolic_oracle(make_field('zero', 2), disk, constant_data(0.0), constant_data(1.0), 8, 0.05,
                                  [0.1])
        with pytest.raises(ArgumentError):
            oracle.evaluate(0.05, [[0.0, 0.0]])


@pytest.mark.slow
class TestOracleAgainstMonteCarlo:

    def test_exit_probability(self, killed_problem):
        pts = [[0.0, 0.0], [0.6, 0.0]]
        oracle = oracle_for(killed_problem, 64, 0.005, [0.2])
        estimates = mc_expectation(killed_problem, 0.2, pts, n_paths=2000, dt=0.0025, seed=13)
        exact = oracle.evaluate(0.2, np.asarray(pts))
        for estimate, value in zip(estimates, exact):
            assert abs(estimate.mean - value) <= 3.0 * estimate.se + 0.03
