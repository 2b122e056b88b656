"""Force-biased ball-chain fiber packing with explicit inter-fiber contact."""

from .distributions import MvmfParams, SchladitzParams, VmfParams, combine_mvmf, sample_schladitz, sample_vmf
from .forces import ForceParams, angle, contact, effective_distance, overlap_I, repulsion, smoothing, spring, total_force
from .generation import (Ball, Fiber, FiberSystem, GenerationConfig,
                         align_main_direction, chain_length_for,
                         fiber_count_for_volume_fraction, fiber_length,
                         fiber_union_volume, generate, prepack,
                         random_walk_fiber)
from .geometry import RngState, Window, periodic_delta, periodic_direction, periodic_distance, wrap
from .grid import Grid, build_grid, candidate_pairs
from .packing import (IterationStats, PackingParams, Shortlist,
                      find_candidates, pack_aj, pack_contact,
                      prune_conflicting, shortlist, step, stop_criterion)

__version__ = "0.1.0"
