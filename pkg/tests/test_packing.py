import numpy as np
import pytest

import fiberpack as fp
from fiberpack.analysis import analyze
from fiberpack.generation import FiberSystem
from fiberpack.geometry import RngState, Window, periodic_distance
from fiberpack.grid import build_grid
from fiberpack.packing import (IterationStats, PackingParams, Shortlist,
                               find_candidates, pack_aj, pack_contact,
                               prune_conflicting, shortlist, step,
                               stop_criterion)

from conftest import make_system

EZ = np.array([0.0, 0.0, 1.0])


def free_balls(positions, window=Window.cube(40.0), r=2.0):
    """Independent single-ball fibers (no chain forces)."""
    x = np.asarray(positions, dtype=np.float64)
    n = x.shape[0]
    return FiberSystem(window=window, r=r, l=1, x=x, mu=np.tile(EZ, (n, 1)),
                       fiber_id=np.arange(n, dtype=np.int32),
                       chain_idx=np.zeros(n, dtype=np.int32),
                       ref_angle=np.full(n, np.pi))


def stats_seq(sums):
    return [IterationStats(iteration=k + 1, force_vec_sum=0.0,
                           force_mag_sum=s, max_force=0.0, overlap_count=0,
                           max_overlap=0.0, max_overlap_hard=0.0,
                           wall_time=0.0) for k, s in enumerate(sums)]


class TestStep:
    def test_zero_force_fixed_point(self):
        sys = free_balls([(5.0, 5, 5), (20.0, 20, 20)])
        before = sys.x.copy()
        sys, st, _ = step(sys, PackingParams())
        np.testing.assert_array_equal(sys.x, before)
        assert st.force_mag_sum == 0.0

    def test_overlapping_pair_separates_to_contact(self):
        sys = free_balls([(10.0, 10, 10), (13.0, 10, 10)])
        sys, st, _ = step(sys, PackingParams())
        assert periodic_distance(sys.x[0], sys.x[1], sys.window) == \
            pytest.approx(4.0, abs=1e-12)

    def test_positions_rewrapped(self):
        sys = free_balls([(0.5, 10, 10), (3.0, 10, 10)])
        sys, st, _ = step(sys, PackingParams())
        assert np.all(sys.x >= 0) and np.all(sys.x < 40.0)

    def test_deterministic_replay_50_steps(self):
        a = make_system(size=48.0, vv=0.15, fiber_len=20.0, seed=31)
        b = a.copy()
        p = PackingParams()
        for _ in range(50):
            a, _, _ = step(a, p)
        for _ in range(50):
            b, _, _ = step(b, p)
        np.testing.assert_array_equal(a.x, b.x)

    def test_synchronous_update_order_independent(self):
        # permuting ball storage order must not change the physics:
        # compare displacement fields ball-by-ball under a relabeling of
        # two independent free balls (no chain coupling)
        sys1 = free_balls([(10.0, 10, 10), (13.0, 10, 10), (25.0, 25, 25)])
        sys2 = free_balls([(13.0, 10, 10), (10.0, 10, 10), (25.0, 25, 25)])
        p = PackingParams()
        sys1, _, _ = step(sys1, p)
        sys2, _, _ = step(sys2, p)
        np.testing.assert_allclose(sys1.x[0], sys2.x[1], atol=1e-15)
        np.testing.assert_allclose(sys1.x[1], sys2.x[0], atol=1e-15)


class TestStopCriterion:
    def test_tiny_decrease_stops(self):
        assert stop_criterion(stats_seq([100.0, 99.9995]), PackingParams())

    def test_large_decrease_continues(self):
        assert not stop_criterion(stats_seq([100.0, 90.0]), PackingParams())

    def test_iteration_cap_stops(self):
        seq = stats_seq(np.linspace(100, 50, 1000))
        assert stop_criterion(seq, PackingParams())

    def test_zero_force_stops(self):
        assert stop_criterion(stats_seq([0.0]), PackingParams())

    def test_transient_increase_continues(self):
        assert not stop_criterion(stats_seq([100.0, 101.0]), PackingParams())


class TestPackAj:
    def test_non_overlapping_input_unchanged(self):
        sys = free_balls([(5.0, 5, 5), (20.0, 20, 20)])
        before = sys.x.copy()
        sys, hist = pack_aj(sys, PackingParams())
        assert len(hist) == 1
        np.testing.assert_array_equal(sys.x, before)

    def test_iteration_cap_respected(self):
        sys = make_system(size=40.0, vv=0.3, fiber_len=20.0, seed=37, trials=1)
        sys, hist = pack_aj(sys, PackingParams(max_iterations=25))
        assert len(hist) <= 25

    def test_small_run_removes_hardcore_overlap(self):
        sys = make_system(size=48.0, vv=0.10, fiber_len=40.0, seed=41)
        sys, hist = pack_aj(sys, PackingParams(max_iterations=600))
        from fiberpack.grid import candidate_pairs
        g = build_grid(sys.x, sys.window, sys.r)
        i, j, d = candidate_pairs(sys.x, g, 2 * sys.r)
        same = sys.fiber_id[i] == sys.fiber_id[j]
        gap = np.abs(sys.chain_idx[i] - sys.chain_idx[j])
        act = ~(same & (gap <= 5))
        max_i0 = np.maximum(0, 2 * sys.r - d[act]).max() if act.any() else 0.0
        assert max_i0 <= 0.01 * sys.r

    def test_overlap_tail_non_increasing(self):
        sys = make_system(size=40.0, vv=0.15, fiber_len=20.0, seed=43)
        sys, hist = pack_aj(sys, PackingParams(max_iterations=300))
        tail = [h.max_overlap for h in hist[int(0.9 * len(hist)):]]
        assert all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))


class TestFindCandidates:
    def test_boundary_pair_included(self):
        sys = free_balls([(10.0, 10, 10), (15.0, 10, 10)])
        g = build_grid(sys.x, sys.window, sys.r, eps_max=1.0)
        i, j, d = find_candidates(sys, 1.0, g)
        assert list(zip(i, j)) == [(0, 1)]

    def test_same_fiber_pair_excluded(self):
        l = 2
        sys = FiberSystem(window=Window.cube(40.0), r=2.0, l=l,
                          x=np.array([[10.0, 10, 10], [14.0, 10, 10]]),
                          mu=np.tile(EZ, (2, 1)),
                          fiber_id=np.zeros(2, dtype=np.int32),
                          chain_idx=np.arange(2, dtype=np.int32),
                          ref_angle=np.full(2, np.pi))
        g = build_grid(sys.x, sys.window, sys.r, eps_max=1.0)
        i, j, d = find_candidates(sys, 1.0, g)
        assert i.size == 0

    def test_matches_brute_force(self):
        sys = make_system(size=40.0, vv=0.2, fiber_len=20.0, seed=47)
        eps = 0.7
        g = build_grid(sys.x, sys.window, sys.r, eps_max=eps,
                       min_cutoff=2 * sys.r + eps)
        i, j, d = find_candidates(sys, eps, g)
        from conftest import brute_force_pairs
        bi, bj, bd = brute_force_pairs(sys.x, sys.window.arr, 2 * sys.r + eps)
        keep = sys.fiber_id[bi] != sys.fiber_id[bj]
        assert set(zip(i.tolist(), j.tolist())) == \
            set(zip(bi[keep].tolist(), bj[keep].tolist()))

    def test_contact_distance_extends_cutoff(self):
        sys = free_balls([(10.0, 10, 10), (15.3, 10, 10)])
        g = build_grid(sys.x, sys.window, sys.r, eps_max=2.0)
        assert find_candidates(sys, 1.0, g, d_c=0.0)[0].size == 0
        assert find_candidates(sys, 1.0, g, d_c=0.5)[0].size == 1


class TestShortlist:
    def _sys_for_edges(self):
        # fibers a (balls 0, 1) and b (balls 2, 3) of two balls each
        return FiberSystem(window=Window.cube(40.0), r=2.0, l=2,
                           x=np.zeros((4, 3)), mu=np.tile(EZ, (4, 1)),
                           fiber_id=np.array([0, 0, 1, 1], dtype=np.int32),
                           chain_idx=np.array([0, 1, 0, 1], dtype=np.int32),
                           ref_angle=np.full(4, np.pi))

    def test_argmin_rule_three_edges(self):
        sys = self._sys_for_edges()
        # edges {a1,b1}: 0.2, {a1,b2}: 0.3, {a2,b2}: 0.1
        E = (np.array([0, 0, 1]), np.array([2, 3, 3]),
             np.array([0.2, 0.3, 0.1]))
        sl = shortlist(E, sys)
        got = set(zip(sl.b.tolist(), sl.c.tolist()))
        assert got == {(0, 2), (1, 3)}

    def test_single_edge_kept(self):
        sys = self._sys_for_edges()
        sl = shortlist((np.array([0]), np.array([2]), np.array([0.4])), sys)
        assert len(sl) == 1

    def test_tie_break_keeps_lower_ids(self):
        sys = self._sys_for_edges()
        E = (np.array([0, 0]), np.array([2, 3]), np.array([0.2, 0.2]))
        sl = shortlist(E, sys)
        got = set(zip(sl.b.tolist(), sl.c.tolist()))
        assert got == {(0, 2)}

    def test_one_pair_per_ball_per_fiber_pair(self, packed_system):
        sys = packed_system
        eps = 1.0
        g = build_grid(sys.x, sys.window, sys.r, eps_max=eps,
                       min_cutoff=2 * sys.r + eps)
        sl = shortlist(find_candidates(sys, eps, g), sys)
        seen = set()
        for b, c in zip(sl.b, sl.c):
            fpair = (min(sys.fiber_id[b], sys.fiber_id[c]),
                     max(sys.fiber_id[b], sys.fiber_id[c]))
            for ball in (b, c):
                key = (int(ball), fpair)
                assert key not in seen
                seen.add(key)

    def test_ball_may_contact_two_fibers(self):
        # three single-ball fibers: middle ball pairs with both outer ones
        sys = free_balls([(10.0, 10, 10), (14.5, 10, 10), (5.5, 10, 10)])
        E = (np.array([0, 0]), np.array([1, 2]), np.array([0.5, 0.5]))
        sl = shortlist(E, sys)
        assert len(sl) == 2


class TestPruneConflicting:
    def test_low_force_shortlist_unchanged(self):
        sys = free_balls([(10.0, 10, 10), (14.2, 10, 10)])
        sl = Shortlist(b=np.array([0]), c=np.array([1]), dist=np.array([4.2]))
        pruned, removed = prune_conflicting(sl, sys, PackingParams())
        assert removed == 0 and len(pruned) == 1

    def test_high_force_entry_removed(self):
        # deep overlap with a third ball drives the force above t = 0.1
        sys = free_balls([(10.0, 10, 10), (14.2, 10, 10), (7.5, 10, 10)])
        sl = Shortlist(b=np.array([0]), c=np.array([1]), dist=np.array([4.2]))
        pruned, removed = prune_conflicting(sl, sys, PackingParams())
        assert removed == 1 and len(pruned) == 0

    def test_empty_shortlist_passthrough(self):
        sys = free_balls([(10.0, 10, 10)])
        sl = Shortlist.empty()
        pruned, removed = prune_conflicting(sl, sys, PackingParams())
        assert removed == 0 and len(pruned) == 0


class TestPackContact:
    def test_sparse_system_empty_shortlist_unchanged(self):
        sys = free_balls([(5.0, 5, 5), (25.0, 25, 25)])
        before = sys.x.copy()
        sys, hist, sls = pack_contact(sys, PackingParams(epsilon=0.5))
        assert all(len(s) == 0 for s in sls)
        np.testing.assert_array_equal(sys.x, before)

    def test_parallel_fibers_reach_perfect_contact(self):
        r, l = 2.0, 12
        w = Window.cube(40.0)
        x = np.zeros((2 * l, 3))
        for i in range(l):
            x[i] = (10.0 + 0.5 * i, 10.0, 10.0)
            x[l + i] = (10.0 + 0.5 * i, 10.0 + 2 * r + 0.5, 10.0)
        sys = FiberSystem(window=w, r=r, l=l, x=x, mu=np.tile(EZ, (2 * l, 1)),
                          fiber_id=np.repeat(np.arange(2, dtype=np.int32), l),
                          chain_idx=np.tile(np.arange(l, dtype=np.int32), 2),
                          ref_angle=np.full(2 * l, np.pi))
        sys, hist, sls = pack_contact(sys, PackingParams(epsilon=1.0))
        dmin = min(periodic_distance(sys.x[i], sys.x[l + j], w)
                   for i in range(l) for j in range(l))
        assert 2 * r - 1e-9 <= dmin <= 2 * r + 1e-3 * r

    def test_contact_count_increases_on_packed_system(self, packed_system):
        d_meas = 0.02
        before = analyze(packed_system, d_meas, "pairwise").n_contacts
        sys = packed_system.copy()
        sys, hist, sls = pack_contact(sys, PackingParams(epsilon=0.5,
                                                         max_iterations=400))
        after = analyze(sys, d_meas, "pairwise").n_contacts
        assert after >= before
        assert after > before   # strict increase at this density

    def test_epsilon_schedule_runs_all_phases(self):
        sys = free_balls([(10.0, 10, 10), (15.0, 10, 10)])
        p = PackingParams(epsilon_schedule=[0.5, 1.0], max_iterations=50)
        sys, hist, sls = pack_contact(sys, p)
        eps_seen = {h.epsilon for h in hist}
        assert eps_seen == {0.5, 1.0}

    def test_per_phase_iteration_cap(self):
        sys = make_system(size=40.0, vv=0.25, fiber_len=20.0, seed=53, trials=1)
        p = PackingParams(epsilon=0.5, max_iterations=30)
        sys, hist, sls = pack_contact(sys, p)
        from itertools import groupby
        for phase, grp in groupby(hist, key=lambda h: h.phase):
            assert sum(1 for _ in grp) <= 30


class TestShortlistValidityAfterPrune:
    def test_one_pair_constraint_still_holds(self, packed_system):
        sys = packed_system.copy()
        eps = 1.0
        g = build_grid(sys.x, sys.window, sys.r, eps_max=eps,
                       min_cutoff=2 * sys.r + eps)
        sl = shortlist(find_candidates(sys, eps, g), sys)
        pruned, _ = prune_conflicting(sl, sys, PackingParams(
            conflict_threshold=0.01))
        seen = set()
        for b, c in zip(pruned.b, pruned.c):
            fpair = (min(sys.fiber_id[b], sys.fiber_id[c]),
                     max(sys.fiber_id[b], sys.fiber_id[c]))
            for ball in (b, c):
                key = (int(ball), fpair)
                assert key not in seen
                seen.add(key)
