import numpy as np
import pytest

from src.analysis.uniqueness import (comparison_check, hypothesis_report, mollified_problem, mollifier_independence,
                                     mollify_data)
from src.core.drift import make_field
from src.core.exceptions import ArgumentError
from src.solver.data import constant_data, make_data
from src.solver.problem import TransportProblem


def bump(disk, amplitude):
    return TransportProblem(disk, make_field('zero', 2), 0.2, make_data('smooth_bump', {'radius': 0.6,
                                                                                       'amplitude': amplitude}),
                            constant_data(0.0))


class TestHypothesisReport:

    def test_smooth_problem_passes(self, constant_problem):
        report = hypothesis_report(constant_problem, resolution=32, n_times=4)
        assert report.passed
        assert report.warnings == []
        assert report.influx_mass > 0

    def test_unit_radial_field_warns(self, disk):
        problem = TransportProblem(disk, make_field('unit_radial', 2), 0.5, constant_data(0.0), constant_data(0.0))
        report = hypothesis_report(problem, resolution=32, n_times=4)
        assert report.status_of('bv_regularity') == 'warn'
        assert 'bv_regularity' in report.warnings

    def test_incompatible_data_warn(self, box):
        problem = TransportProblem(box, make_field('constant', 2, {'vector': [1.0, 0.0]}), 0.5,
                                   constant_data(1.0), constant_data(0.0))
        report = hypothesis_report(problem, resolution=16, n_times=4)
        assert report.status_of('compatibility') == 'warn'
        assert report.influx_mass == pytest.approx(0.5)

    def test_data_bound_violation_fails(self, disk):
        problem = TransportProblem(disk, make_field('zero', 2), 0.5, make_data('linear'), constant_data(0.0),
                                   data_bound_override=0.1)
        report = hypothesis_report(problem, resolution=16, n_times=4)
        assert report.status_of('data_bound') == 'fail'
        assert not report.passed

    def test_unknown_check(self, constant_problem):
        with pytest.raises(KeyError):
            hypothesis_report(constant_problem, resolution=16, n_times=2).status_of('lipschitz')


class TestMollification:

    def test_constants_are_returned_unchanged(self):
        data = constant_data(0.3)
        assert mollify_data(data, 0.1, 2) is data

    def test_linear_datum_is_reproduced(self):
        smoothed = mollify_data(make_data('linear', {'coefficients': [1.0, 2.0]}), 0.1, 2)
        pts = np.array([[0.1, 0.2], [-0.3, 0.4]])
        assert np.allclose(smoothed(0.0, pts), [0.5, 0.5], atol=1e-12)
        assert smoothed.parameters['mollified_epsilon'] == 0.1

    def test_problem_keeps_its_data_bound(self, bump_problem):
        smoothed = mollified_problem(bump_problem, 0.1)
        assert smoothed.data_bound == bump_problem.data_bound


class TestMollifierIndependence:

    def test_constant_data_do_not_depend_on_the_schedule(self, constant_problem):
        table = mollifier_independence(constant_problem, [0.2, 0.1], t=0.5, resolution=6, n_paths=4, dt=0.05,
                                       seed=1, workers=1)
        assert np.all(table.sup == 0.0)
        assert table.monotone
        assert table.final_within_se
        assert [row['eps_b'] for row in table.rows()] == [0.1, 0.05]

    def test_schedule_must_decrease(self, constant_problem):
        with pytest.raises(ArgumentError):
            mollifier_independence(constant_problem, [0.1, 0.2], n_paths=2, dt=0.05)

    def test_schedules_must_match(self, constant_problem):
        with pytest.raises(ArgumentError):
            mollifier_independence(constant_problem, [0.2, 0.1], [0.1], n_paths=2, dt=0.05)


class TestComparison:

    def test_ordered_data_stay_ordered(self, disk):
        report = comparison_check(bump(disk, 1.0), bump(disk, 2.0), 0.2, resolution=8, n_paths=8, dt=0.02, seed=3)
        assert report.passed
        assert report.checked > 0

    def test_reversed_order(self, disk):
        with pytest.raises(ArgumentError):
            comparison_check(bump(disk, 2.0), bump(disk, 1.0), 0.2, resolution=8, n_paths=2, dt=0.02)

    def test_drift_must_match(self, disk):
        upper = TransportProblem(disk, make_field('rotation', 2), 0.2, constant_data(1.0), constant_data(1.0))
        with pytest.raises(ArgumentError):
            comparison_check(bump(disk, 1.0), upper, 0.2, resolution=8, n_paths=2, dt=0.02)

    def test_domain_must_match(self, disk, box):
        lower = TransportProblem(box, make_field('zero', 2), 0.2, constant_data(0.0), constant_data(0.0))
        with pytest.raises(ArgumentError):
            comparison_check(lower, bump(disk, 1.0), 0.2, resolution=8, n_paths=2, dt=0.02)
