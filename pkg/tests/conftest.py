import numpy as np
import pytest

from gossipavg import LatticeSpec, build_moore_lattice, rewire_round, shortest_path_stats


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timing assertions stay honest."""
    topo = build_moore_lattice(LatticeSpec(3, 3))
    rewire_round(topo, np.random.default_rng(0))
    shortest_path_stats(build_moore_lattice(LatticeSpec(3, 3)), "exact")
