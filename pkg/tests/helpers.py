"""Independent reference implementations used as test oracles.

Everything here deliberately avoids the production code paths it checks:
the dense averaging matrix and spectral predictor never call the
simulator's gather loop, the plain-python BFS and clustering never touch
the compiled kernels, and the torus matrix is built from lattice
coordinates rather than the lattice builder.
"""

from collections import deque

import numpy as np

from gossipavg import Topology, rewire_round


def dense_average_matrix(topology: Topology) -> np.ndarray:
    """Row-stochastic update matrix: 1/(q+1) on in(i) and the diagonal."""
    n, q = topology.in_lists.shape
    w = np.zeros((n, n))
    for i in range(n):
        for j in topology.in_lists[i]:
            w[i, int(j)] += 1.0
        w[i, i] += 1.0
    return w / (q + 1)


def circulant_topology(n: int, q: int) -> Topology:
    """in(i) = the next q nodes around a ring; valid for any q < n."""
    base = (np.arange(n)[:, None] + np.arange(1, q + 1)[None, :]) % n
    return Topology(base.astype(np.int32))


def random_regular_topology(n: int, q: int, rng: np.random.Generator,
                            mix_rounds: int = 12) -> Topology:
    """A randomized q-in/q-out digraph: circulant base plus exchange passes."""
    topo = circulant_topology(n, q)
    for _ in range(mix_rounds):
        rewire_round(topo, rng)
    return topo


def python_rewire_reference(in_lists: np.ndarray, partners, pos_i, pos_j) -> int:
    """Plain-python mirror of the compiled rewiring pass (same candidate
    arrays, same acceptance policy); mutates in_lists, returns accepted count."""
    n, q = in_lists.shape
    accepted = 0
    for i in range(n):
        for t in range(partners.shape[1]):
            j = int(partners[i, t])
            if j >= i:
                j += 1
            pi = int(pos_i[i, t])
            pj = int(pos_j[i, t])
            a = int(in_lists[i, pi])
            b = int(in_lists[j, pj])
            if b == i or a == j:
                continue
            row_i = in_lists[i]
            row_j = in_lists[j]
            if any(row_i[s] == b for s in range(q) if s != pi):
                continue
            if any(row_j[s] == a for s in range(q) if s != pj):
                continue
            in_lists[i, pi] = b
            in_lists[j, pj] = a
            accepted += 1
            break
    return accepted


def bfs_reference(topology: Topology):
    """All-pairs directed BFS in plain python.

    Returns (sum of distances, reachable ordered pairs, diameter,
    strongly_connected).
    """
    n, q = topology.in_lists.shape
    out = [[] for _ in range(n)]
    for i in range(n):
        for j in topology.in_lists[i]:
            out[int(j)].append(i)
    total = 0
    pairs = 0
    diameter = 0
    strong = True
    for s in range(n):
        dist = [-1] * n
        dist[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for w in out[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    dq.append(w)
        reached = [d for d in dist if d > 0]
        total += sum(reached)
        pairs += len(reached)
        if reached:
            diameter = max(diameter, max(reached))
        if len(reached) != n - 1:
            strong = False
    return total, pairs, diameter, strong


def clustering_reference(topology: Topology) -> float:
    """Set-based clustering on the undirected projection (all-node mean)."""
    n, q = topology.in_lists.shape
    nbr = [set() for _ in range(n)]
    for i in range(n):
        for j in topology.in_lists[i]:
            nbr[i].add(int(j))
            nbr[int(j)].add(i)
    total = 0.0
    for i in range(n):
        k = len(nbr[i])
        if k < 2:
            continue
        members = sorted(nbr[i])
        links = sum(
            1
            for ai in range(k)
            for bi in range(ai + 1, k)
            if members[bi] in nbr[members[ai]]
        )
        total += links / (k * (k - 1) / 2)
    return total / n


def moore_torus_matrix(m: int, n: int) -> np.ndarray:
    """Dense averaging matrix of the wrapped 8-neighbor lattice, built
    straight from cell coordinates (independent of the lattice builder)."""
    N = m * n
    r = np.arange(N) // n
    c = np.arange(N) % n
    dr = np.abs(r[:, None] - r[None, :])
    dr = np.minimum(dr, m - dr)
    dc = np.abs(c[:, None] - c[None, :])
    dc = np.minimum(dc, n - dc)
    return (np.maximum(dr, dc) <= 1).astype(np.float64) / 9.0


def spectral_crossings(m: int, n: int, values: np.ndarray,
                       thresholds, max_rounds: int = 20_000) -> dict:
    """Predict first-crossing rounds without iterating the dynamics.

    Diagonalizes the symmetric torus averaging matrix once; after t
    rounds the squared deviation from the mean is the eigen-amplitude sum
    with each amplitude scaled by its eigenvalue to the 2t.
    """
    w = moore_torus_matrix(m, n)
    lam, vecs = np.linalg.eigh(w)
    amps = (vecs.T @ np.asarray(values, dtype=np.float64)) ** 2
    mean = float(np.mean(values))
    N = m * n
    lam2 = lam * lam
    crossings: dict[float, int] = {}
    t = 0
    while t <= max_rounds and len(crossings) < len(thresholds):
        var = amps.sum() / N - mean * mean
        b = np.sqrt(max(var, 0.0)) / mean
        for thr in thresholds:
            if thr not in crossings and b < thr:
                crossings[thr] = t
        amps = amps * lam2
        t += 1
    return crossings
