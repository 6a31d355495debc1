import numpy as np
import pytest
from numpy.testing import assert_allclose

from bubbletower.domain import (BallDomain, find_robin_min, green_ball,
                                robin_ball, robin_grad_ball)
from bubbletower.errors import DomainError, SingularityError
from bubbletower.profiles import Dimension

B3 = BallDomain(Dimension(3))
B4 = BallDomain(Dimension(4))


class TestGreen:
    def test_center_value_n3(self):
        # G(0, y) = (1/4pi)(1/r - 1) on the unit ball
        for r in (0.2, 0.5, 0.9):
            y = np.array([r, 0.0, 0.0])
            assert_allclose(green_ball(B3, np.zeros(3), y),
                            (1.0 / r - 1.0) / (4 * np.pi), rtol=1e-13)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x = rng.uniform(-0.55, 0.55, 3)
            y = rng.uniform(-0.55, 0.55, 3)
            if np.allclose(x, y):
                continue
            assert_allclose(green_ball(B3, x, y), green_ball(B3, y, x), rtol=1e-12)

    def test_boundary_value(self):
        x = np.array([0.3, -0.1, 0.2])
        y = np.array([0.6, 0.8, 0.0])  # |y| = 1
        assert abs(green_ball(B3, x, y)) < 1e-12

    def test_nonnegative_inside(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.uniform(-0.5, 0.5, 3)
            y = rng.uniform(-0.5, 0.5, 3)
            if np.linalg.norm(x - y) < 1e-3:
                continue
            assert green_ball(B3, x, y) >= 0.0

    def test_singularity_and_domain_errors(self):
        with pytest.raises(SingularityError):
            green_ball(B3, np.zeros(3), np.zeros(3))
        with pytest.raises(DomainError):
            green_ball(B3, np.array([1.5, 0, 0]), np.zeros(3))


class TestRobin:
    def test_center_values(self):
        assert_allclose(robin_ball(B3, np.zeros(3)), 1.0 / (4 * np.pi), rtol=1e-14)
        assert_allclose(robin_ball(B3, np.zeros(3)), 0.07957747154594767)
        assert_allclose(robin_ball(B4, np.zeros(4)), 1.0 / (4 * np.pi**2), rtol=1e-14)
        assert_allclose(robin_ball(B4, np.zeros(4)), 0.02533029591058444)

    def test_half_radius_n3(self):
        x = np.array([0.5, 0.0, 0.0])
        assert_allclose(robin_ball(B3, x), 1.0 / (4 * np.pi * 0.75), rtol=1e-14)
        assert_allclose(robin_ball(B3, x), 0.10610329539459689)

    def test_regular_part_diagonal(self):
        x = np.array([0.3, 0.2, -0.4])
        assert_allclose(B3.regular_part(x, x), robin_ball(B3, x), rtol=1e-14)

    def test_radially_nondecreasing(self):
        r = np.linspace(0.0, 0.95, 40)
        vals = [robin_ball(B3, np.array([ri, 0, 0])) for ri in r]
        assert np.all(np.diff(vals) >= 0)

    def test_blows_up_at_boundary(self):
        vals = [robin_ball(B3, np.array([ri, 0, 0])) for ri in (0.9, 0.99, 0.9999)]
        assert vals[0] < vals[1] < vals[2]
        assert vals[2] > 100 * vals[0]

    def test_exterior_rejected(self):
        with pytest.raises(DomainError):
            robin_ball(B3, np.array([1.0, 0.0, 0.0]))


class TestRobinGrad:
    def test_zero_at_center(self):
        assert_allclose(robin_grad_ball(B3, np.zeros(3)), np.zeros(3))

    def test_half_radius_magnitude(self):
        g = robin_grad_ball(B3, np.array([0.5, 0.0, 0.0]))
        assert_allclose(g, [0.14147106052612918, 0.0, 0.0], rtol=1e-12)
        assert_allclose(np.linalg.norm(g),
                        (1.0 / (4 * np.pi)) * (2 * 0.5) / 0.75**2, rtol=1e-13)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        h = 1e-6
        for _ in range(10):
            x = rng.uniform(-0.5, 0.5, 3)
            g = robin_grad_ball(B3, x)
            fd = np.empty(3)
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                fd[i] = (robin_ball(B3, x + e) - robin_ball(B3, x - e)) / (2 * h)
            assert_allclose(g, fd, rtol=1e-7)

    def test_gradients_match_regular_part_derivative(self):
        # grad2 of the regular part at a random pair agrees with differences
        rng = np.random.default_rng(9)
        x = rng.uniform(-0.4, 0.4, 3)
        y = rng.uniform(-0.4, 0.4, 3)
        h = 1e-6
        g = B3.regular_part_grad2(x, y)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (B3.regular_part(x, y + e) - B3.regular_part(x, y - e)) / (2 * h)
            assert_allclose(g[i], fd, rtol=2e-7, atol=1e-12)


class QuadraticBowlProvider:
    """Minimal plug-in domain: synthetic Robin data with a known minimiser."""

    def __init__(self, argmin):
        from bubbletower.profiles import Dimension
        self.dim = Dimension(3)
        self.argmin = np.asarray(argmin, dtype=float)

    def green(self, x, y):
        raise NotImplementedError

    def regular_part(self, x, y):
        raise NotImplementedError

    def robin(self, x):
        z = np.asarray(x) - self.argmin
        return 0.25 + float(z @ z) + float((z @ z) ** 2)

    def robin_grad(self, x):
        z = np.asarray(x) - self.argmin
        return 2.0 * z + 4.0 * float(z @ z) * z


class TestRobinMin:
    def test_plugin_provider(self):
        target = np.array([0.12, -0.2, 0.05])
        prov = QuadraticBowlProvider(target)
        box = (np.full(3, -0.5), np.full(3, 0.5))
        x = find_robin_min(prov, box)
        assert np.linalg.norm(x - target) < 1e-8

    def test_unit_ball_center(self):
        box = (np.full(3, -0.6), np.full(3, 0.6))
        x = find_robin_min(B3, box)
        assert np.linalg.norm(x) < 1e-6

    def test_translated_ball(self):
        c = np.array([0.2, -0.3, 0.1])
        dom = BallDomain(Dimension(3), center=c, radius=1.0)
        box = (c - 0.6, c + 0.6)
        x = find_robin_min(dom, box)
        assert np.linalg.norm(x - c) < 1e-6

    def test_min_value_n4(self):
        box = (np.full(4, -0.5), np.full(4, 0.5))
        x = find_robin_min(B4, box)
        assert_allclose(robin_ball(B4, x), 1.0 / (4 * np.pi**2), rtol=1e-10)

    def test_gradient_driven_to_machine_level(self):
        box = (np.full(3, -0.6), np.full(3, 0.6))
        x = find_robin_min(B3, box)
        assert np.linalg.norm(robin_grad_ball(B3, x)) < 1e-12
