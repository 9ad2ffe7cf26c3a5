import numpy as np
import pytest

from src.core.exceptions import ArgumentError, DomainError, UnsupportedDomainError
from src.core.geometry import Annulus, Ball, Box, Disk, DomainFactory, Interval, LevelSetDomain, PointClass


def ellipse():
    return LevelSetDomain.from_parameters(
        [{'powers': [2, 0], 'coef': 1.0}, {'powers': [0, 2], 'coef': 4.0}, {'powers': [0, 0], 'coef': -1.0}],
        center=[0.0, 0.0], half_width=1.5)


class TestClassification:

    def test_disk_points(self, disk):
        assert disk.contains([0.0, 0.0]) == PointClass.INTERIOR
        assert disk.contains([1.0, 0.0]) == PointClass.BOUNDARY
        assert disk.contains([2.0, 0.0]) == PointClass.EXTERIOR

    def test_non_finite_point_rejected(self, disk):
        with pytest.raises(ArgumentError):
            disk.contains([np.nan, 0.0])

    def test_wrong_dimension_rejected(self, disk):
        with pytest.raises(ArgumentError):
            disk.contains([0.0, 0.0, 0.0])

    def test_batch_classification(self, box):
        codes = box.classify(np.array([[0.5, 0.5], [0.0, 0.5], [1.5, 0.5]]))
        assert codes.tolist() == [-1, 0, 1]


class TestDistanceAndProjection:

    def test_disk_distance(self, disk):
        assert disk.distance_to_boundary([0.5, 0.0]) == pytest.approx(0.5)
        assert disk.distance_to_boundary([1.0, 0.0]) == 0.0

    def test_exterior_distance_raises(self, disk):
        with pytest.raises(DomainError):
            disk.distance_to_boundary([1.5, 0.0])

    def test_box_projection_picks_nearest_face(self, box):
        r = box.boundary_project([0.9, 0.4])
        assert np.allclose(r.position, [1.0, 0.4])
        assert np.allclose(r.normal, [1.0, 0.0])

    def test_ellipse_projection_lands_on_level_set(self):
        dom = ellipse()
        r = dom.boundary_project([0.3, 0.1])
        assert abs(dom.level(r.position.reshape(1, -1))[0]) < 1e-8
        assert np.linalg.norm(r.normal) == pytest.approx(1.0)


class TestCurvature:

    def test_disk_curvature(self):
        assert Disk(radius=2.0).mean_curvature([2.0, 0.0]).value == pytest.approx(0.5)

    def test_interval_curvature_is_degenerate(self, interval):
        assert interval.mean_curvature([1.0]).degenerate

    def test_annulus_inner_circle_is_concave(self):
        dom = Annulus(inner=0.5, outer=1.0)
        quad = dom.boundary_quadrature(16)
        assert np.all(quad.curvatures[:16] > 0)
        assert np.all(quad.curvatures[16:] < 0)

    def test_ellipse_curvature_at_vertex(self):
        # x^2 + 4y^2 = 1: at (1, 0) the curvature is a / b^2 = 4
        assert ellipse().mean_curvature([1.0, 0.0]).value == pytest.approx(4.0, rel=1e-6)


class TestQuadrature:

    def test_disk_perimeter(self, disk):
        assert disk.boundary_quadrature(64).total_measure == pytest.approx(2 * np.pi, rel=1e-12)

    def test_box_perimeter(self, box):
        assert box.boundary_quadrature(16).total_measure == pytest.approx(4.0)

    def test_sphere_area(self):
        ball = Ball(center=(0.0, 0.0, 0.0), radius=1.0)
        assert ball.boundary_quadrature(12).total_measure == pytest.approx(4 * np.pi, rel=1e-10)

    def test_ellipse_perimeter(self):
        # Ramanujan's approximation for semi-axes 1 and 1/2
        a, b = 1.0, 0.5
        h = ((a - b) / (a + b)) ** 2
        perimeter = np.pi * (a + b) * (1 + 3 * h / (10 + np.sqrt(4 - 3 * h)))
        assert ellipse().boundary_quadrature(512).total_measure == pytest.approx(perimeter, rel=1e-4)

    def test_boundary_weights_positive(self, disk, box):
        for dom in (disk, box, ellipse()):
            assert np.all(dom.boundary_quadrature(32).weights > 0)

    def test_interior_measure_of_disk(self, disk):
        assert disk.interior_quadrature(64).total_measure == pytest.approx(np.pi, abs=0.1)

    def test_interior_nodes_are_interior(self, disk):
        quad = disk.interior_quadrature(20)
        assert np.all(disk.interior_mask(quad.points))

    def test_levelset_sphere_quadrature_unsupported(self):
        sphere = LevelSetDomain.from_parameters(
            [{'powers': [2, 0, 0], 'coef': 1.0}, {'powers': [0, 2, 0], 'coef': 1.0},
             {'powers': [0, 0, 2], 'coef': 1.0}, {'powers': [0, 0, 0], 'coef': -1.0}],
            center=[0.0, 0.0, 0.0], half_width=1.5)
        with pytest.raises(UnsupportedDomainError):
            sphere.boundary_quadrature(16)


class TestDeformation:

    def test_psi_moves_inward(self, disk):
        r = disk.boundary_project([1.0, 0.0])
        assert np.allclose(disk.deformation_psi(r, 0.1), [0.9, 0.0])

    def test_jacobian_on_disk(self, disk):
        r = disk.boundary_project([0.0, 1.0])
        assert disk.jacobian_psi(r, 0.1) == pytest.approx(0.9)

    def test_tau_beyond_collar_raises(self, disk):
        r = disk.boundary_project([1.0, 0.0])
        with pytest.raises(ArgumentError):
            disk.deformation_psi(r, 2.0 * disk.delta_star)

    def test_level_function_h(self, disk):
        h, grad = disk.level_h([0.0, 0.0])
        assert h == pytest.approx(1.0)
        assert np.allclose(grad, 0.0)
        h, grad = disk.level_h([0.9, 0.0])
        assert h == pytest.approx(0.1 / disk.delta_star)
        assert np.allclose(grad, [-1.0 / disk.delta_star, 0.0])


class TestDomainFactory:

    def test_create_box(self):
        dom = DomainFactory.create({'kind': 'box', 'lo': [0.0, 0.0], 'hi': [2.0, 1.0]})
        assert isinstance(dom, Box)
        assert dom.inradius == pytest.approx(0.5)

    def test_create_interval(self):
        assert isinstance(DomainFactory.create({'kind': 'interval', 'lo': -1.0, 'hi': 1.0}), Interval)

    def test_unknown_kind(self):
        with pytest.raises(ArgumentError):
            DomainFactory.create({'kind': 'torus'})

    def test_describe_roundtrip(self, disk):
        assert DomainFactory.create(disk.describe()).describe() == disk.describe()

    def test_available_kinds(self):
        assert {'interval', 'disk', 'ball', 'annulus', 'box', 'levelset'} <= set(DomainFactory.get_available_kinds())

    def test_sanity_check_passes_for_builtins(self, disk, box):
        assert disk.sanity_check() == []
        assert box.sanity_check() == []
