import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.core.stochastic_calculus import (AdaptedSamplePath, BrownianPath, covariation, grid_steps,
                                          ito_integral, running_covariation, running_ito,
                                          running_stratonovich, sample_path, stratonovich_integral)


@pytest.fixture
def path():
    return sample_path(11, 0, 1.0, 1e-3, 1)


class TestPaths:

    def test_same_seed_and_index_reproduce(self):
        a = sample_path(7, 3, 1.0, 0.01, 2)
        b = sample_path(7, 3, 1.0, 0.01, 2)
        assert np.array_equal(a.increments, b.increments)

    def test_indices_are_independent_streams(self):
        a = sample_path(7, 0, 1.0, 0.01, 2)
        b = sample_path(7, 1, 1.0, 0.01, 2)
        assert not np.array_equal(a.increments, b.increments)

    def test_starts_at_origin(self):
        p = sample_path(1, 0, 0.5, 0.1, 3)
        assert p.values.shape == (6, 3)
        assert np.all(p.values[0] == 0.0)

    def test_grid_steps(self):
        assert grid_steps(1.0, 0.25) == 4
        assert grid_steps(0.5, 0.05) == 10

    def test_dt_must_divide_horizon(self):
        with pytest.raises(ArgumentError):
            grid_steps(1.0, 0.3)
        with pytest.raises(ArgumentError):
            grid_steps(1.0, 0.0)

    def test_coarsen_observes_same_path(self):
        fine = sample_path(5, 2, 1.0, 0.01, 2)
        coarse = fine.coarsen(4)
        assert coarse.dt == pytest.approx(0.04)
        assert np.allclose(coarse.values, fine.values[::4])

    def test_coarsen_factor_must_divide(self):
        with pytest.raises(ArgumentError):
            sample_path(5, 0, 1.0, 0.25, 1).coarsen(3)

    def test_silenced(self):
        p = sample_path(5, 0, 1.0, 0.1, 2).silenced()
        assert p.is_silent
        assert p.steps == 10
        assert BrownianPath.silent(1.0, 0.1, 2).is_silent

    def test_index_of(self):
        p = BrownianPath.silent(1.0, 0.1, 1)
        assert p.index_of(0.3) == 3
        with pytest.raises(ArgumentError):
            p.index_of(0.35)

    def test_value_at_interpolates(self):
        p = sample_path(2, 0, 1.0, 0.1, 1)
        mid = p.value_at(0.05)
        assert np.allclose(mid, 0.5 * p.values[1])


class TestIntegrals:

    def test_quadratic_variation(self):
        B = sample_path(3, 0, 1.0, 1e-4, 1).component(0)
        assert covariation(B, B, 1.0) == pytest.approx(1.0, rel=0.05)

    def test_ito_of_brownian_motion(self, path):
        B = path.component(0)
        b_t = path.values[-1, 0]
        expected = 0.5 * (b_t ** 2 - covariation(B, B, 1.0))
        assert ito_integral(B, path, 1.0) == pytest.approx(expected, abs=1e-10)

    def test_stratonovich_of_brownian_motion(self, path):
        b_t = path.values[-1, 0]
        assert stratonovich_integral(path.component(0), path, 1.0) == pytest.approx(0.5 * b_t ** 2, abs=1e-10)

    @pytest.mark.parametrize("t", [1.0, 0.4, 0.4005])
    def test_ito_stratonovich_correction(self, path, t):
        X = AdaptedSamplePath(np.sin(path.values[:, 0]), path.dt)
        B = path.component(0)
        gap = stratonovich_integral(X, path, t) - ito_integral(X, path, t)
        assert gap == pytest.approx(0.5 * covariation(X, B, t), abs=1e-12)

    def test_ito_of_one_is_the_path(self, path):
        ones = AdaptedSamplePath(np.ones(path.steps + 1), path.dt)
        assert ito_integral(ones, path, 0.5) == pytest.approx(path.values[500, 0], abs=1e-12)

    def test_returns_scalar_for_one_dimensional_path(self, path):
        assert isinstance(ito_integral(path.component(0), path, 1.0), float)

    def test_misaligned_grids(self, path):
        X = AdaptedSamplePath(np.zeros(11), 0.1)
        with pytest.raises(ArgumentError):
            ito_integral(X, path, 1.0)

    def test_time_outside_path(self, path):
        with pytest.raises(ArgumentError):
            ito_integral(path.component(0), path, 1.5)

    def test_running_sums_end_at_integrals(self):
        p = sample_path(9, 0, 1.0, 0.01, 2)
        integrand = np.cos(p.values)
        ito = running_ito(integrand, p.increments)
        strat = running_stratonovich(integrand, p.increments)
        cov = running_covariation(integrand, p.increments)
        assert ito[0] == 0.0
        assert np.allclose(strat - ito, 0.5 * cov, atol=1e-12)
