import numpy as np
import pytest

from src.core.drift import make_field
from src.core.exceptions import ArgumentError, UsageError
from src.core.geometry import Box
from src.solver.data import constant_data, get_available_data, make_data
from src.solver.parallel import WORKERS_ENV, map_paths, mean_and_se, pairwise_sum, worker_count
from src.solver.problem import TransportProblem
from src.solver.representation import (deterministic_solution, evaluate_pathwise, mc_expectation, mc_field,
                                       path_for, pathwise_samples)


class TestData:

    def test_smooth_bump_peak_and_support(self):
        bump = make_data('smooth_bump', {'radius': 0.5, 'amplitude': 2.0})
        values = bump(0.0, np.array([[0.0, 0.0], [0.6, 0.0]]))
        assert values.tolist() == [2.0, 0.0]

    def test_indicator(self):
        ind = make_data('indicator_halfspace', {'axis': 1, 'threshold': 0.0})
        assert ind(0.0, np.array([[0.0, 0.5], [0.0, -0.5]])).tolist() == [1.0, 0.0]

    def test_linear_bound_on_box(self):
        lin = make_data('linear', {'coefficients': [1.0, -2.0], 'offset': 0.5})
        assert lin.bound(Box(), 1.0) == pytest.approx(3.5)

    def test_time_ramp_uses_time(self):
        ramp = make_data('time_ramp', {'rate': 2.0})
        assert ramp(0.25, np.zeros((3, 2))).tolist() == [0.5, 0.5, 0.5]
        assert ramp.bound(Box(), 1.0) == pytest.approx(2.0)

    def test_constant_value_recorded(self):
        assert constant_data(0.3).constant_value == 0.3
        assert make_data('linear').constant_value is None

    def test_unknown_datum(self):
        with pytest.raises(ArgumentError):
            make_data('gaussian')

    def test_registry_listing(self):
        assert 'smooth_bump' in get_available_data()


class TestProblem:

    def test_data_bound(self, constant_problem):
        assert constant_problem.data_bound == pytest.approx(0.7)
        assert constant_problem.constant_value == 0.7

    def test_data_bound_override(self, disk):
        problem = TransportProblem(disk, make_field('zero', 2), 1.0, constant_data(0.2), constant_data(0.1),
                                   data_bound_override=5.0)
        assert problem.data_bound == 5.0
        assert problem.constant_value is None

    def test_compatibility_on_influx_face(self, translation_problem):
        assert translation_problem.compatibility_defect() == pytest.approx(0.0)

    def test_incompatible_data_detected(self, box):
        problem = TransportProblem(box, make_field('constant', 2, {'vector': [1.0, 0.0]}), 1.0,
                                   constant_data(1.0), constant_data(0.0))
        assert problem.compatibility_defect() == pytest.approx(1.0)

    def test_bound_violations(self, disk):
        problem = TransportProblem(disk, make_field('zero', 2), 1.0, make_data('linear'), constant_data(0.0),
                                   data_bound_override=0.1)
        assert problem.data_bound_violations()

    def test_dimension_mismatch(self, disk):
        with pytest.raises(ArgumentError):
            TransportProblem(disk, make_field('zero', 3), 1.0, constant_data(0.0), constant_data(0.0))

    def test_nonpositive_horizon(self, disk):
        with pytest.raises(ArgumentError):
            TransportProblem(disk, make_field('zero', 2), 0.0, constant_data(0.0), constant_data(0.0))

    def test_boundary_datum_per_point_times(self, disk):
        problem = TransportProblem(disk, make_field('zero', 2), 1.0, constant_data(0.0),
                                   make_data('time_ramp', {'rate': 1.0}))
        values = problem.ub(np.array([0.1, 0.2, 0.1]), np.zeros((3, 2)))
        assert np.allclose(values, [0.1, 0.2, 0.1])

    def test_from_descriptor(self, lab_document):
        problem = TransportProblem.from_descriptor(lab_document['problem'])
        assert problem.horizon == 0.2
        assert problem.noise
        assert problem.describe()['domain']['kind'] == 'disk'

    def test_with_noise_returns_copy(self, constant_problem):
        quiet = constant_problem.with_noise(False)
        assert not quiet.noise
        assert constant_problem.noise


class TestParallel:

    def test_map_preserves_order(self):
        assert map_paths(lambda i: i * i, range(20), workers=4) == [i * i for i in range(20)]

    def test_pairwise_sum(self):
        stack = np.arange(15, dtype=float).reshape(5, 3)
        assert np.allclose(pairwise_sum(stack), stack.sum(axis=0))

    def test_mean_and_se(self):
        mean, se = mean_and_se(np.array([[1.0], [3.0]]))
        assert mean[0] == 2.0
        assert se[0] == pytest.approx(1.0)

    def test_agreeing_columns_are_exact(self):
        mean, se = mean_and_se(np.array([[0.7, 1.0], [0.7, 2.0], [0.7, 3.0]]))
        assert mean[0] == 0.7
        assert se[0] == 0.0
        assert se[1] > 0

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            mean_and_se(np.empty((0, 2)))

    def test_worker_count_from_environment(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, '3')
        assert worker_count() == 3
        monkeypatch.setenv(WORKERS_ENV, 'many')
        assert worker_count(default=2) == 2


class TestRepresentation:

    def test_constant_data_is_preserved(self, constant_problem):
        snap = mc_field(constant_problem, 0.5, 6, n_paths=4, dt=0.05, seed=1)
        assert np.all(snap.mean == 0.7)
        assert np.all(snap.se == 0.0)

    def test_snapshot_rows(self, constant_problem):
        snap = mc_field(constant_problem, 0.5, 6, n_paths=2, dt=0.05, seed=1)
        row = snap.rows()[0]
        assert set(row) == {'t', 'x1', 'x2', 'mean', 'se', 'n_paths', 'dt', 'seed'}

    def test_time_zero_is_initial_datum(self, bump_problem):
        path = path_for(bump_problem, 0, 0, 0.01)
        assert evaluate_pathwise(bump_problem, path, 0.0, [0.0, 0.0]) == pytest.approx(1.0)

    def test_exit_probability_grows_towards_boundary(self, killed_problem):
        centre, edge = mc_expectation(killed_problem, 0.2, [[0.0, 0.0], [0.9, 0.0]], n_paths=64, dt=0.01,
                                      seed=5)
        assert 0.0 <= centre.mean <= 1.0
        assert edge.mean > centre.mean

    def test_pathwise_values_are_bounded(self, killed_problem):
        stack = pathwise_samples(killed_problem, 0.2, [[0.5, 0.0]], n_paths=16, dt=0.01, seed=2)
        assert set(np.unique(stack)) <= {0.0, 1.0}

    def test_reproducible_across_worker_counts(self, bump_problem):
        pts = [[0.1, 0.0], [0.0, -0.3]]
        one = mc_expectation(bump_problem, 0.2, pts, n_paths=12, dt=0.02, seed=9, workers=1)
        many = mc_expectation(bump_problem, 0.2, pts, n_paths=12, dt=0.02, seed=9, workers=4)
        assert [e.mean for e in one] == [e.mean for e in many]
        assert [e.se for e in one] == [e.se for e in many]

    def test_noise_off_repeats_one_path(self, translation_problem):
        stack = pathwise_samples(translation_problem, 0.3, [[0.8, 0.5], [0.5, 0.5]], n_paths=3, dt=0.05, seed=0)
        assert np.all(stack == stack[0])

    def test_functional_applied_pathwise(self, bump_problem):
        plain = pathwise_samples(bump_problem, 0.2, [[0.0, 0.0]], n_paths=4, dt=0.02, seed=1)
        squared = pathwise_samples(bump_problem, 0.2, [[0.0, 0.0]], n_paths=4, dt=0.02, seed=1,
                                   functional=np.square)
        assert np.allclose(squared, plain ** 2)

    def test_rejects_exterior_points(self, bump_problem):
        with pytest.raises(ArgumentError):
            mc_expectation(bump_problem, 0.2, [[2.0, 0.0]], n_paths=2, dt=0.02, seed=0)

    def test_rejects_empty_sample(self, bump_problem):
        with pytest.raises(ArgumentError):
            mc_expectation(bump_problem, 0.2, [[0.0, 0.0]], n_paths=0, dt=0.02, seed=0)

    def test_time_outside_horizon(self, bump_problem):
        path = path_for(bump_problem, 0, 0, 0.01)
        with pytest.raises(ArgumentError):
            evaluate_pathwise(bump_problem, path, 0.5, [0.0, 0.0])


class TestDeterministicSolution:

    def test_translation_of_linear_profile(self, translation_problem):
        assert deterministic_solution(translation_problem, 0.3, [0.8, 0.5]) == pytest.approx(0.5, abs=1e-9)

    def test_inflow_boundary_value(self, translation_problem):
        assert deterministic_solution(translation_problem, 0.3, [0.2, 0.5]) == 0.0

    def test_requires_noise_off(self, bump_problem):
        with pytest.raises(UsageError):
            deterministic_solution(bump_problem, 0.1, [0.0, 0.0])
