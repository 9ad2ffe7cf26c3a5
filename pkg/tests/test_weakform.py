import numpy as np
import pytest
from scipy import integrate

from src.core.drift import make_field
from src.core.exceptions import ArgumentError, DependencyError
from src.core.geometry import Disk
from src.solver.data import constant_data
from src.solver.problem import TransportProblem
from src.verification.test_functions import make_test_function
from src.verification.trace import DeformationTrace, default_tau_schedule
from src.verification.weakform import (BoundaryTrace, boundary_weakform_residual, check_times,
                                       closed_form_ito_boundary_check, closed_form_ito_boundary_residual,
                                       coarea_boundary_limit, collar_profile, conversion_corrections,
                                       default_mu_schedule, ito_boundary_residual, ito_residual, loglog_slope,
                                       richardson_limit, stratonovich_residual)


@pytest.fixture
def phi():
    return make_test_function('bump', {'radius': 0.3})


@pytest.fixture
def constant_disk_problem():
    """u = 0.7 everywhere on a disk of radius 0.5, b = 0."""
    return TransportProblem(Disk(radius=0.5), make_field('zero', 2), 0.2, constant_data(0.7), constant_data(0.7))


class FrozenTrace:
    """gamma u = 0.7 with no normal slope."""

    def boundary_trace(self, problem, path, path_index, times, quad):
        return BoundaryTrace(np.full((len(times), len(quad)), 0.7))


SMALL = dict(n_paths=4, dt=0.005, times=[0.02, 0.04], seed=3, interior_resolution=24)


class TestCheckTimes:

    def test_grid_indices(self):
        assert check_times(0.2, 0.01, [0.1, 0.2]).tolist() == [10, 20]

    def test_off_grid(self):
        with pytest.raises(ArgumentError):
            check_times(0.2, 0.01, [0.105])

    def test_beyond_horizon(self):
        with pytest.raises(ArgumentError):
            check_times(0.2, 0.01, [0.3])

    def test_empty(self):
        with pytest.raises(ArgumentError):
            check_times(0.2, 0.01, [])


class TestInteriorIdentities:

    def test_ito_and_stratonovich_differ_by_the_corrections(self, bump_problem, phi):
        strat = stratonovich_residual(bump_problem, phi, **SMALL)
        ito = ito_residual(bump_problem, phi, **SMALL)
        gap = ito.per_path - strat.per_path
        expected = ito.diagnostics['half_covariation'] - ito.terms['half_laplacian']
        assert np.allclose(gap, expected, atol=1e-12)

    def test_stratonovich_residual_is_small(self, bump_problem, phi):
        report = stratonovich_residual(bump_problem, phi, **SMALL)
        scale = np.max(np.abs(report.terms['lhs']))
        assert report.max_abs_mean() < 0.2 * scale

    def test_report_rows_cover_every_term(self, bump_problem, phi):
        report = ito_residual(bump_problem, phi, **SMALL)
        names = {row['term_name'] for row in report.rows()}
        assert {'lhs', 'initial', 'transport', 'martingale', 'half_laplacian', 'half_covariation',
                'residual'} <= names
        assert len(report.rows()) == len(names) * 2
        assert report.summary()['identity'] == 'ito'

    def test_needs_compact_phi(self, bump_problem):
        with pytest.raises(ArgumentError):
            stratonovich_residual(bump_problem, make_test_function('constant'), **SMALL)

    def test_support_must_stay_inside(self, bump_problem):
        with pytest.raises(ArgumentError):
            ito_residual(bump_problem, make_test_function('bump', {'radius': 2.0}), **SMALL)

    def test_noise_off_repeats_one_path(self, translation_problem):
        phi = make_test_function('bump', {'center': [0.5, 0.5], 'radius': 0.3})
        report = stratonovich_residual(translation_problem, phi, n_paths=3, dt=0.05, times=[0.1], seed=0,
                                       interior_resolution=16)
        assert np.all(report.per_path == report.per_path[0])
        assert np.all(report.se == 0.0)


class TestBoundaryIdentities:

    def test_trace_source_required(self, bump_problem):
        coordinate = make_test_function('coordinate', {'component': 0})
        with pytest.raises(DependencyError):
            boundary_weakform_residual(bump_problem, coordinate, None, **SMALL)
        with pytest.raises(DependencyError):
            ito_boundary_residual(bump_problem, coordinate, None, **SMALL)

    def test_compact_phi_has_no_boundary_correction(self, bump_problem, phi):
        corrections = conversion_corrections(bump_problem, phi, None, **SMALL)
        assert np.all(corrections.i2_measured == 0.0)
        assert np.all(corrections.i2_closed == 0.0)
        assert set(corrections.stats()) == {'i1_measured', 'i1_closed', 'i2_measured', 'i2_closed'}


class TestItoBoundaryCorrections:

    ARGS = dict(n_paths=3, dt=0.05, times=[0.1, 0.2], seed=2, interior_resolution=16, boundary_resolution=48)

    def _report(self, problem, source=None):
        source = source or DeformationTrace(default_tau_schedule(problem.domain))
        return ito_boundary_residual(problem, make_test_function('constant'), source, **self.ARGS)

    def test_curvature_term_on_a_disk(self, constant_disk_problem):
        report = self._report(constant_disk_problem)
        c, d = constant_disk_problem.domain.radius, 2
        expected = 0.7 * 0.5 * (d - 1) * (1.0 / c) * 2.0 * np.pi * c * np.array([0.1, 0.2])
        np.testing.assert_allclose(report.term_mean('curvature'), expected, rtol=1e-2)

    def test_closed_form_residual_vanishes_for_constant_data(self, constant_disk_problem):
        report = self._report(constant_disk_problem)
        closed = closed_form_ito_boundary_residual(report)
        assert closed.shape == (3, 2)
        assert np.max(np.abs(closed)) < 1e-10
        assert report.max_abs_mean() < 1e-10

    def test_literal_residual_keeps_the_curvature_term(self, constant_disk_problem):
        report = self._report(constant_disk_problem)
        np.testing.assert_allclose(report.term_mean('literal_residual'), -report.term_mean('curvature'),
                                   atol=1e-10)

    def test_check_reports_the_band(self, constant_disk_problem):
        check = closed_form_ito_boundary_check(self._report(constant_disk_problem), n_se=3.0, band=1e-9)
        assert check['within_band']
        assert check['curvature_mean'][1] == pytest.approx(0.7 * 0.2 * np.pi, rel=1e-2)

    def test_check_fails_outside_the_band(self, constant_disk_problem):
        report = self._report(constant_disk_problem)
        report.diagnostics['closed_form_residual'] = report.diagnostics['closed_form_residual'] + 0.1
        assert not closed_form_ito_boundary_check(report, n_se=3.0, band=1e-9)['within_band']

    def test_closed_form_needs_a_normal_slope(self, constant_disk_problem):
        report = self._report(constant_disk_problem, FrozenTrace())
        assert 'closed_form_residual' not in report.diagnostics
        with pytest.raises(DependencyError):
            closed_form_ito_boundary_residual(report)


class TestCollarProfile:

    def test_unit_mass_on_the_collar(self):
        mu = 0.2
        tau = np.linspace(0.0, mu, 4001)
        first, _ = collar_profile(mu, tau)
        assert integrate.trapezoid(first, tau) == pytest.approx(1.0, rel=1e-3)

    def test_vanishes_at_the_boundary(self):
        first, second = collar_profile(0.2, np.array([0.0, 0.25]))
        assert first.tolist() == [0.0, 0.0]
        assert second.tolist() == [0.0, 0.0]


class TestExtrapolation:

    def test_richardson_recovers_a_line(self):
        h = np.array([0.4, 0.2, 0.1])
        intercept, residual = richardson_limit(h, 2.0 + 3.0 * h)
        assert intercept == pytest.approx(2.0)
        assert residual < 1e-12

    def test_loglog_slope(self):
        h = np.array([0.4, 0.2, 0.1])
        assert loglog_slope(h, h ** 2) == pytest.approx(2.0)

    def test_loglog_slope_needs_two_nonzero_errors(self):
        assert np.isnan(loglog_slope([0.2, 0.1], [0.0, 0.0]))


class TestCoareaLimit:

    def test_disk_limit_matches_boundary_integral(self, disk):
        table = coarea_boundary_limit(lambda p: np.ones(len(p)), make_test_function('coordinate'), disk,
                                      component=0, resolution=128)
        assert table.direct == pytest.approx(-np.pi, rel=1e-10)
        assert table.limit == pytest.approx(table.direct, abs=5e-3)
        assert table.monotone
        assert 0.8 <= table.slope <= 1.2

    def test_default_schedule_is_in_the_collar(self, disk):
        mus = default_mu_schedule(disk)
        assert mus[0] <= disk.delta_star
        assert np.all(np.diff(mus) < 0)

    def test_schedule_beyond_collar(self, disk):
        with pytest.raises(ArgumentError):
            coarea_boundary_limit(lambda p: np.ones(len(p)), make_test_function('coordinate'), disk,
                                  mu=[2.0 * disk.delta_star, 0.1])

    def test_schedule_must_decrease(self, disk):
        with pytest.raises(ArgumentError):
            coarea_boundary_limit(lambda p: np.ones(len(p)), make_test_function('coordinate'), disk,
                                  mu=[0.1, 0.2])

    def test_component_range(self, disk):
        with pytest.raises(ArgumentError):
            coarea_boundary_limit(lambda p: np.ones(len(p)), make_test_function('coordinate'), disk, component=2)
