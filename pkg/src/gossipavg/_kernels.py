"""Compiled inner loops: the sequential rewiring pass and batched BFS.

Both kernels are deterministic. The rewiring pass consumes pre-drawn
random candidate arrays (so all randomness stays in numpy Generators),
and the BFS kernel aggregates into per-source integer arrays, which makes
the reduction order irrelevant under thread parallelism.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True)
def rewire_pass(in_lists, partners, pos_i, pos_j, record, events):
    """Visit every node once in ascending order; attempt one entry swap each.

    partners[i, t] is the t-th candidate partner draw for node i, encoded
    in [0, n-1) and mapped to skip i itself. pos_i / pos_j are the slot
    draws. A candidate swap is rejected if it would put a node into its
    own in-list or duplicate an entry in either list; on rejection the
    next candidate column is tried (the redraw), until the columns run out.

    When record is True, one row per attempt is written to events:
    (initiator, partner, initiator_slot, partner_slot, accepted).

    Returns (accepted_swap_count, event_count).
    """
    n, q = in_lists.shape
    tries = partners.shape[1]
    accepted = 0
    n_ev = 0
    for i in range(n):
        for t in range(tries):
            j = partners[i, t]
            if j >= i:
                j += 1
            pi = pos_i[i, t]
            pj = pos_j[i, t]
            a = in_lists[i, pi]
            b = in_lists[j, pj]
            ok = b != i and a != j
            if ok:
                for s in range(q):
                    if s != pi and in_lists[i, s] == b:
                        ok = False
                        break
            if ok:
                for s in range(q):
                    if s != pj and in_lists[j, s] == a:
                        ok = False
                        break
            if record:
                events[n_ev, 0] = i
                events[n_ev, 1] = j
                events[n_ev, 2] = pi
                events[n_ev, 3] = pj
                events[n_ev, 4] = 1 if ok else 0
                n_ev += 1
            if ok:
                in_lists[i, pi] = b
                in_lists[j, pj] = a
                accepted += 1
                break
    return accepted, n_ev


@njit(cache=True, parallel=True)
def bfs_batch(indptr, indices, sources, n_nodes, n_chunks):
    """Run one directed BFS per source node over a CSR adjacency.

    Sources are processed in chunks so each thread reuses one distance
    and one queue buffer. Returns per-source arrays:
    (sum of finite distances, count of reached nodes excl. source,
    eccentricity restricted to reached nodes).
    """
    ns = sources.shape[0]
    sum_d = np.zeros(ns, np.int64)
    reached = np.zeros(ns, np.int64)
    ecc = np.zeros(ns, np.int64)
    for c in prange(n_chunks):
        dist = np.empty(n_nodes, np.int32)
        queue = np.empty(n_nodes, np.int32)
        lo = c * ns // n_chunks
        hi = (c + 1) * ns // n_chunks
        for si in range(lo, hi):
            s = sources[si]
            dist[:] = -1
            dist[s] = 0
            queue[0] = s
            head = 0
            tail = 1
            sd = 0
            rc = 0
            e = 0
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[u]
                for p in range(indptr[u], indptr[u + 1]):
                    w = indices[p]
                    if dist[w] < 0:
                        dw = du + 1
                        dist[w] = dw
                        queue[tail] = w
                        tail += 1
                        sd += dw
                        rc += 1
                        if dw > e:
                            e = dw
            sum_d[si] = sd
            reached[si] = rc
            ecc[si] = e
    return sum_d, reached, ecc
