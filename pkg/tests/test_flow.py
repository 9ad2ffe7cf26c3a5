import numpy as np
import pytest

from src.core.drift import make_field
from src.core.exceptions import ArgumentError
from src.core.flow import backward_flow, forward_flow, stopped_backward
from src.core.stochastic_calculus import BrownianPath, sample_path


@pytest.fixture
def push():
    return make_field('constant', 2, {'vector': [1.0, 0.0]})


class TestForwardBackward:

    def test_forward_translation(self, push):
        traj = forward_flow(push, BrownianPath.silent(1.0, 0.1, 2), 0.0, 0.5, [0.0, 0.0])
        assert np.allclose(traj.end, [[0.5, 0.0]])
        assert traj.positions.shape == (6, 1, 2)

    def test_backward_inverts_forward_for_constant_drift(self, push):
        path = sample_path(3, 0, 1.0, 0.01, 2)
        start = np.array([[0.1, 0.2], [0.3, -0.4]])
        end = forward_flow(push, path, 0.2, 0.8, start).end
        back = backward_flow(push, path, 0.2, 0.8, end)
        assert np.allclose(back.end, start, atol=1e-12)

    def test_forward_with_noise_adds_increments(self):
        path = sample_path(4, 0, 1.0, 0.1, 2)
        traj = forward_flow(make_field('zero', 2), path, 0.0, 1.0, [0.0, 0.0])
        assert np.allclose(traj.end[0], path.values[-1])

    def test_s_after_t(self, push):
        with pytest.raises(ArgumentError):
            forward_flow(push, BrownianPath.silent(1.0, 0.1, 2), 0.6, 0.5, [0.0, 0.0])

    def test_dt_mismatch(self, push):
        with pytest.raises(ArgumentError):
            backward_flow(push, BrownianPath.silent(1.0, 0.1, 2), 0.0, 0.5, [0.0, 0.0], dt=0.05)

    def test_off_grid_time(self, push):
        with pytest.raises(ArgumentError):
            forward_flow(push, BrownianPath.silent(1.0, 0.1, 2), 0.0, 0.55, [0.0, 0.0])


class TestStoppedBackward:

    def test_exit_through_left_face(self, push, box):
        char = stopped_backward(push, box, BrownianPath.silent(1.0, 0.1, 2), 0.5, [0.2, 0.5])
        assert char.exited[0]
        assert char.tau[0] == pytest.approx(0.3, abs=1e-8)
        assert np.allclose(char.terminal[0], [0.0, 0.5], atol=1e-8)
        assert char.residual[0] <= 2 * box.tol

    def test_no_exit(self, push, box):
        char = stopped_backward(push, box, BrownianPath.silent(1.0, 0.1, 2), 0.5, [0.8, 0.5])
        assert not char.exited[0]
        assert char.tau[0] == 0.0
        assert np.allclose(char.terminal[0], [0.3, 0.5])

    def test_batch_mixes_outcomes(self, push, box):
        char = stopped_backward(push, box, BrownianPath.silent(1.0, 0.1, 2), 0.5,
                                [[0.2, 0.5], [0.8, 0.5], [0.55, 0.1]])
        assert char.exited.tolist() == [True, False, False]
        assert char.exit_fraction == pytest.approx(1 / 3)

    def test_terminal_stays_in_closure(self, disk):
        path = sample_path(21, 0, 1.0, 0.01, 2)
        pts = disk.interior_quadrature(10).points
        char = stopped_backward(make_field('strain', 2), disk, path, 1.0, pts)
        assert np.all(disk.classify(char.terminal) <= 0)
        assert np.all(char.tau[~char.exited] == 0.0)
        assert np.all((char.tau >= 0.0) & (char.tau <= 1.0))

    def test_rejects_non_interior_points(self, push, box):
        with pytest.raises(ArgumentError):
            stopped_backward(push, box, BrownianPath.silent(1.0, 0.1, 2), 0.5, [1.0, 0.5])
