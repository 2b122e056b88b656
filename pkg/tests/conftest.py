import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")

import fiberpack as fp
from fiberpack.generation import chain_length_for, fiber_count_for_volume_fraction
from fiberpack.geometry import RngState


def make_system(size=64.0, vv=0.20, fiber_len=40.0, beta=1.0, seed=11,
                kappa1=10.0, kappa2=100.0, r=2.0, trials=10):
    w = fp.Window.cube(size)
    l = chain_length_for(fiber_len, r)
    n = fiber_count_for_volume_fraction(vv, w, l, r)
    cfg = fp.GenerationConfig(n_fibers=n, chain_length=l, radius=r, beta=beta,
                              kappa1=kappa1, kappa2=kappa2,
                              prepack_trials=trials)
    return fp.generate(cfg, w, RngState(seed))


@pytest.fixture(scope="session")
def small_system():
    """Generated (unpacked) 20% system, aspect 10, 64^3."""
    return make_system()


@pytest.fixture(scope="session")
def packed_system(small_system):
    """The same system after plain packing."""
    sys = small_system.copy()
    sys, hist = fp.pack_aj(sys, fp.PackingParams(max_iterations=400))
    return sys


@pytest.fixture(scope="session")
def contact_system(packed_system):
    """Contact-packed continuation of the plain packing."""
    sys = packed_system.copy()
    sys, hist, sls = fp.pack_contact(
        sys, fp.PackingParams(epsilon=0.5, max_iterations=400))
    return sys


def brute_force_pairs(x, warr, cutoff):
    """O(n^2) 27-image reference for periodic pair queries."""
    n = x.shape[0]
    out_i, out_j, out_d = [], [], []
    for i in range(n - 1):
        d = x[i + 1:] - x[i]
        d -= warr * np.round(d / warr)
        dist = np.sqrt((d * d).sum(axis=1))
        hit = np.nonzero(dist <= cutoff)[0]
        for k in hit:
            out_i.append(i)
            out_j.append(i + 1 + k)
            out_d.append(dist[k])
    return (np.array(out_i, dtype=np.int64), np.array(out_j, dtype=np.int64),
            np.array(out_d))
