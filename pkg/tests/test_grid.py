import numpy as np
import pytest

from fiberpack.geometry import Window
from fiberpack.grid import Grid, build_grid, candidate_pairs, min_cell_edge

from conftest import brute_force_pairs


def random_positions(n, window, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, size=(n, 3)) * window.arr


class TestBuildGrid:
    def test_minimum_edge_formula(self):
        assert min_cell_edge(2.0, 1.0) == 6.0
        assert min_cell_edge(2.0, 0.0) == 5.0   # 2.5 r dominates
        w = Window.cube(384.0)
        g = build_grid(random_positions(10, w, 0), w, 2.0, eps_max=1.0)
        np.testing.assert_array_equal(g.cell_counts, [64, 64, 64])

    def test_window_smaller_than_cell_degenerates(self):
        w = Window.cube(4.0)
        x = random_positions(20, w, 1)
        g = build_grid(x, w, 2.0)
        assert g.n_cells == 1
        np.testing.assert_array_equal(np.sort(g.cell_list(0)), np.arange(20))

    def test_periodic_neighbor_membership(self):
        w = Window.cube(30.0)
        x = np.array([[0.1, 0.1, 0.1]])
        g = build_grid(x, w, 2.0)   # 6 cells per axis, edge 5
        nc = g.cell_counts
        corner_far = ((nc[0] - 1) * nc[1] + (nc[1] - 1)) * nc[2] + (nc[2] - 1)
        assert 0 in g.cell_list(corner_far)

    def test_rebuild_idempotent(self):
        w = Window.cube(50.0)
        x = random_positions(300, w, 2)
        g1 = build_grid(x, w, 2.0)
        g2 = build_grid(x, w, 2.0)
        np.testing.assert_array_equal(g1.order, g2.order)
        np.testing.assert_array_equal(g1.cell_start, g2.cell_start)
        np.testing.assert_array_equal(g1.cells, g2.cells)

    def test_min_cutoff_enlarges_cells(self):
        w = Window.cube(30.0)
        x = random_positions(10, w, 3)
        g = build_grid(x, w, 0.5, eps_max=1.0, min_cutoff=3.0)
        assert g.min_edge >= 3.0


class TestCandidatePairs:
    def test_adjacent_cells_pair_emitted(self):
        w = Window.cube(30.0)
        x = np.array([[4.9, 5.0, 5.0], [5.1, 5.0, 5.0]])   # cells differ
        g = build_grid(x, w, 2.0)
        i, j, d = candidate_pairs(x, g, 4.0)
        assert list(zip(i, j)) == [(0, 1)]
        assert d[0] == pytest.approx(0.2)

    def test_far_pair_not_emitted(self):
        w = Window.cube(30.0)
        x = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 15.0]])
        g = build_grid(x, w, 2.0)
        i, j, d = candidate_pairs(x, g, 4.0)
        assert i.size == 0

    @pytest.mark.parametrize("cutoff", [4.0, 4.5])
    def test_brute_force_equality_500_balls(self, cutoff):
        w = Window(40.0, 33.0, 27.0)
        x = random_positions(500, w, 4)
        g = build_grid(x, w, 2.0, eps_max=0.5)
        i, j, d = candidate_pairs(x, g, cutoff)
        bi, bj, bd = brute_force_pairs(x, w.arr, cutoff)
        got = set(zip(i.tolist(), j.tolist()))
        want = set(zip(bi.tolist(), bj.tolist()))
        assert got == want
        order = np.lexsort((j, i))
        border = np.lexsort((bj, bi))
        np.testing.assert_allclose(d[order], bd[border], atol=1e-12)

    def test_cutoff_beyond_cell_edge_rejected(self):
        w = Window.cube(60.0)
        x = random_positions(50, w, 5)
        g = build_grid(x, w, 2.0)
        with pytest.raises(ValueError):
            candidate_pairs(x, g, 10.0)

    def test_large_cutoff_fine_on_degenerate_grid(self):
        w = Window.cube(6.0)
        x = random_positions(30, w, 6)
        g = build_grid(x, w, 2.0)           # single cell per axis
        i, j, d = candidate_pairs(x, g, 5.0)
        bi, bj, _ = brute_force_pairs(x, w.arr, 5.0)
        assert set(zip(i.tolist(), j.tolist())) == set(zip(bi.tolist(), bj.tolist()))

    def test_two_cells_per_axis(self):
        w = Window.cube(11.0)
        x = random_positions(60, w, 7)
        g = build_grid(x, w, 2.0)           # 2 cells per axis (edge 5.5)
        i, j, d = candidate_pairs(x, g, 4.0)
        bi, bj, _ = brute_force_pairs(x, w.arr, 4.0)
        assert set(zip(i.tolist(), j.tolist())) == set(zip(bi.tolist(), bj.tolist()))
