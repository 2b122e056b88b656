import numpy as np
import pytest

from fiberpack.geometry import (RngState, Window, periodic_delta,
                                periodic_direction, periodic_distance, wrap)

W10 = Window.cube(10.0)


def v(*c):
    return np.array(c, dtype=np.float64)


class TestPeriodicDelta:
    def test_wraparound_branch(self):
        np.testing.assert_allclose(periodic_delta(v(1, 1, 1), v(9, 9, 9), W10),
                                   v(-2, -2, -2))

    def test_interior_branch(self):
        np.testing.assert_allclose(periodic_delta(v(2, 2, 2), v(5, 2, 2), W10),
                                   v(3, 0, 0))

    def test_half_window_tie_takes_subtract_branch(self):
        np.testing.assert_allclose(periodic_delta(v(0, 0, 0), v(5, 0, 0), W10),
                                   v(-5, 0, 0))

    def test_components_in_half_open_range(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = rng.uniform(0, 10, 3)
            b = rng.uniform(0, 10, 3)
            d = periodic_delta(a, b, W10)
            assert np.all(d >= -5.0) and np.all(d < 5.0)


class TestPeriodicDistance:
    def test_identity(self):
        assert periodic_distance(v(3, 3, 3), v(3, 3, 3), W10) == 0.0

    def test_corner_distance(self):
        assert periodic_distance(v(1, 1, 1), v(9, 9, 9), W10) == pytest.approx(2 * np.sqrt(3))

    def test_minimum_image_against_27_image_brute_force(self):
        rng = np.random.default_rng(1)
        w = Window(7.0, 11.0, 5.0)
        shifts = np.array([[i, j, k] for i in (-1, 0, 1) for j in (-1, 0, 1)
                           for k in (-1, 0, 1)], dtype=np.float64) * w.arr
        for _ in range(1000):
            a = rng.uniform(0, 1, 3) * w.arr
            b = rng.uniform(0, 1, 3) * w.arr
            direct = np.linalg.norm(b + shifts - a, axis=1).min()
            assert periodic_distance(a, b, w) == pytest.approx(direct, abs=1e-12)
            assert periodic_distance(a, b, w) <= np.linalg.norm(b - a) + 1e-12

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            a, b, c = (rng.uniform(0, 10, 3) for _ in range(3))
            dab = periodic_distance(a, b, W10)
            assert dab == pytest.approx(periodic_distance(b, a, W10), abs=1e-12)
            assert dab <= periodic_distance(a, c, W10) + periodic_distance(c, b, W10) + 1e-12


class TestPeriodicDirection:
    def test_axis_direction(self):
        np.testing.assert_allclose(periodic_direction(v(2, 2, 2), v(5, 2, 2), W10),
                                   v(1, 0, 0))

    def test_wrapped_diagonal(self):
        np.testing.assert_allclose(periodic_direction(v(1, 1, 1), v(9, 9, 9), W10),
                                   v(-1, -1, -1) / np.sqrt(3))

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = rng.uniform(0, 10, 3)
            b = rng.uniform(0, 10, 3)
            np.testing.assert_allclose(periodic_direction(a, b, W10),
                                       -periodic_direction(b, a, W10), atol=1e-15)

    def test_coincident_points_error(self):
        with pytest.raises(ValueError):
            periodic_direction(v(1, 2, 3), v(1, 2, 3), W10)


class TestWrap:
    def test_outside_components(self):
        np.testing.assert_allclose(wrap(v(11, -1, 5), W10), v(1, 9, 5))

    def test_interior_unchanged(self):
        np.testing.assert_allclose(wrap(v(3.5, 0.0, 9.99), W10), v(3.5, 0.0, 9.99))

    def test_right_edge_maps_to_zero(self):
        np.testing.assert_allclose(wrap(v(10, 10, 10), W10), v(0, 0, 0))

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            x = rng.uniform(-30, 30, 3)
            once = wrap(x, W10)
            np.testing.assert_array_equal(wrap(once, W10), once)


class TestWindow:
    def test_rejects_nonpositive_edges(self):
        with pytest.raises(ValueError):
            Window(0.0, 1.0, 1.0)

    def test_volume(self):
        assert Window(2.0, 3.0, 4.0).volume == 24.0


class TestRngState:
    def test_same_seed_identical_streams(self):
        a = RngState(42).generator.uniform(size=1000)
        b = RngState(42).generator.uniform(size=1000)
        np.testing.assert_array_equal(a, b)

    def test_children_independent_of_parent_consumption(self):
        r1 = RngState(7)
        r1.generator.uniform(size=10)
        c1 = r1.child(3).generator.uniform(size=5)
        c2 = RngState(7).child(3).generator.uniform(size=5)
        np.testing.assert_array_equal(c1, c2)

    def test_distinct_children_differ(self):
        a = RngState(7).child(0).generator.uniform(size=5)
        b = RngState(7).child(1).generator.uniform(size=5)
        assert not np.array_equal(a, b)
