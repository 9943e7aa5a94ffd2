"""Network topology: lattice construction, neighbor-exchange rewiring,
node churn, structural validation, and edge-list serialization.

A topology is a directed graph in which every node reads from exactly q
other nodes (its in-neighbors) and is read by exactly q nodes. The
in-neighbors of node i are stored as row i of an (n_nodes, q) integer
array, in slot order. Edges point from the node that is read (source)
to the reader (target).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import rewire_pass

DEFAULT_Q = 8

# Moore neighborhood offsets in row-major order; slot k of a lattice cell's
# in-list is the cell at this offset.
MOORE_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


class ChurnError(RuntimeError):
    """Node insertion/deletion could not restore a valid topology."""


@dataclass(frozen=True)
class LatticeSpec:
    """Dimensions of the initial square lattice.

    Periodic (torus) wrap is required for degree-exact construction;
    wrapped lattices smaller than 3x3 would fold distinct neighbor
    offsets onto the same cell.
    """

    rows: int
    cols: int
    periodic: bool = True

    def __post_init__(self):
        if self.periodic and (self.rows < 3 or self.cols < 3):
            raise ValueError(
                f"periodic lattice needs rows, cols >= 3, got {self.rows}x{self.cols}"
            )

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols


@dataclass(eq=False)
class Topology:
    """Directed q-regular graph stored as per-node ordered in-neighbor lists.

    Invariants (checked by :func:`validate`):
      * every in-list has exactly q entries,
      * no node lists itself,
      * entries within one in-list are pairwise distinct,
      * every node appears in exactly q in-lists.
    """

    in_lists: np.ndarray  # (n_nodes, q) int32

    def __post_init__(self):
        arr = np.ascontiguousarray(self.in_lists, dtype=np.int32)
        if arr.ndim != 2:
            raise ValueError("in_lists must be a 2-d array of node ids")
        self.in_lists = arr

    @property
    def n_nodes(self) -> int:
        return self.in_lists.shape[0]

    @property
    def q(self) -> int:
        return self.in_lists.shape[1]

    def copy(self) -> "Topology":
        return Topology(self.in_lists.copy())


@dataclass(frozen=True)
class RewireEvent:
    """One attempted neighbor exchange (audit log entry)."""

    round: int
    initiator: int
    partner: int
    initiator_slot: int
    partner_slot: int
    accepted: bool


@dataclass(frozen=True)
class Violation:
    """A single broken topology invariant, located by node and slot."""

    rule: str  # bad_id | self_loop | duplicate_entry | out_degree
    node: int
    slot: int | None = None
    detail: str = ""


def build_moore_lattice(spec: LatticeSpec) -> Topology:
    """Build the torus lattice where each cell reads its 8 surrounding cells.

    Slot order is fixed: row-major over the offset grid (top-left to
    bottom-right, skipping the cell itself). The construction is
    edge-symmetric: j reads i iff i reads j.
    """
    if not spec.periodic:
        raise ValueError(
            "non-periodic lattices are rejected: boundary cells would have "
            "fewer than 8 in-neighbors"
        )
    m, n = spec.rows, spec.cols
    idx = np.arange(m * n, dtype=np.int32).reshape(m, n)
    in_lists = np.empty((m * n, len(MOORE_OFFSETS)), dtype=np.int32)
    for k, (dr, dc) in enumerate(MOORE_OFFSETS):
        in_lists[:, k] = np.roll(np.roll(idx, -dr, axis=0), -dc, axis=1).ravel()
    return Topology(in_lists)


def _swap_blocked(in_lists: np.ndarray, i: int, pos_i: int, j: int, pos_j: int) -> bool:
    """True if exchanging the two entries would self-loop or duplicate."""
    q = in_lists.shape[1]
    a = in_lists[i, pos_i]
    b = in_lists[j, pos_j]
    if b == i or a == j:
        return True
    for s in range(q):
        if s != pos_i and in_lists[i, s] == b:
            return True
    for s in range(q):
        if s != pos_j and in_lists[j, s] == a:
            return True
    return False


def swap_in_entries(topology: Topology, i: int, pos_i: int, j: int, pos_j: int) -> bool:
    """Exchange in_lists[i][pos_i] with in_lists[j][pos_j] if legal.

    The swap moves one out-edge of each exchanged neighbor from one reader
    to the other, so all degree invariants are preserved. Returns False
    (topology unchanged) if the swap would create a self-loop or a
    duplicate entry in either list.
    """
    n, q = topology.in_lists.shape
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"node ids out of range: i={i}, j={j}, n_nodes={n}")
    if i == j:
        raise ValueError("swap requires two distinct nodes")
    if not (0 <= pos_i < q and 0 <= pos_j < q):
        raise ValueError(f"slots out of range: pos_i={pos_i}, pos_j={pos_j}, q={q}")
    in_lists = topology.in_lists
    if _swap_blocked(in_lists, i, pos_i, j, pos_j):
        return False
    a = in_lists[i, pos_i]
    in_lists[i, pos_i] = in_lists[j, pos_j]
    in_lists[j, pos_j] = a
    return True


MAX_REDRAWS = 8


def rewire_round(
    topology: Topology,
    rng: np.random.Generator,
    round_index: int = 0,
    events: list[RewireEvent] | None = None,
) -> int:
    """One rewiring pass: every node attempts one neighbor exchange.

    Nodes are visited once each in ascending index order. Each visit draws
    a partner uniformly from the other nodes plus one slot on each side,
    then attempts the swap; rejected draws are retried up to MAX_REDRAWS
    times before the node is skipped. Candidate draws are consumed from
    pre-drawn arrays (partners first, then initiator slots, then partner
    slots), so a fixed generator state fixes the whole pass.

    When ``events`` is a list, one RewireEvent per attempt is appended.
    Returns the number of accepted swaps (at most n_nodes).
    """
    in_lists = topology.in_lists
    n, q = in_lists.shape
    tries = 1 + MAX_REDRAWS
    partners = rng.integers(0, n - 1, size=(n, tries), dtype=np.int32)
    pos_i = rng.integers(0, q, size=(n, tries), dtype=np.int32)
    pos_j = rng.integers(0, q, size=(n, tries), dtype=np.int32)
    record = events is not None
    if record:
        ev_buf = np.empty((n * tries, 5), dtype=np.int32)
    else:
        ev_buf = np.empty((0, 5), dtype=np.int32)
    accepted, n_ev = rewire_pass(in_lists, partners, pos_i, pos_j, record, ev_buf)
    if record:
        for row in ev_buf[:n_ev]:
            events.append(
                RewireEvent(
                    round=round_index,
                    initiator=int(row[0]),
                    partner=int(row[1]),
                    initiator_slot=int(row[2]),
                    partner_slot=int(row[3]),
                    accepted=bool(row[4]),
                )
            )
    return int(accepted)


def validate(topology: Topology) -> list[Violation]:
    """Check all topology invariants; empty list means the topology is valid.

    Out-degree imbalance is reported once per node with out-degree above q.
    Because the total entry count is fixed at n_nodes * q, any deficit
    implies an excess elsewhere, so reporting excesses alone still detects
    every imbalanced topology (and keeps one violation per misplaced edge).
    """
    in_lists = topology.in_lists
    n, q = in_lists.shape
    violations: list[Violation] = []

    bad = (in_lists < 0) | (in_lists >= n)
    for node, slot in zip(*np.nonzero(bad)):
        violations.append(
            Violation("bad_id", int(node), int(slot), f"entry {in_lists[node, slot]} outside [0, {n})")
        )

    self_loops = in_lists == np.arange(n, dtype=in_lists.dtype)[:, None]
    for node, slot in zip(*np.nonzero(self_loops)):
        violations.append(Violation("self_loop", int(node), int(slot), "node lists itself"))

    srt = np.sort(in_lists, axis=1)
    dup_rows = np.nonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))[0]
    for node in dup_rows:
        row = in_lists[node]
        seen: set[int] = set()
        for slot in range(q):
            v = int(row[slot])
            if v in seen:
                violations.append(
                    Violation("duplicate_entry", int(node), slot, f"entry {v} repeated")
                )
            seen.add(v)

    counts = np.bincount(in_lists[~bad].ravel() if bad.any() else in_lists.ravel(), minlength=n)
    for node in np.nonzero(counts > q)[0]:
        violations.append(
            Violation("out_degree", int(node), None, f"out-degree {counts[node]} != {q}")
        )
    return violations


def _fill_candidates(in_lists: np.ndarray, reader: int, forbidden: int, rng) -> list[int]:
    """Nodes that could legally occupy reader's open slot, shuffled."""
    n = in_lists.shape[0]
    taken = set(int(x) for x in in_lists[reader])
    taken.add(reader)
    taken.add(forbidden)
    options = [x for x in range(n) if x not in taken]
    rng.shuffle(options)
    return options


def _match_readers_to_sources(
    allowed: list[list[int]], q: int, rng: np.random.Generator
) -> list[int]:
    """Maximum bipartite matching (augmenting paths), randomized order.

    allowed[r] lists the source indices legal for reader index r.
    Returns match: reader index -> source index or -1.
    """
    src_owner = [-1] * q

    def try_assign(r: int, seen: list[bool]) -> bool:
        for s in allowed[r]:
            if not seen[s]:
                seen[s] = True
                if src_owner[s] < 0 or try_assign(src_owner[s], seen):
                    src_owner[s] = r
                    return True
        return False

    order = list(rng.permutation(q))
    for r in order:
        rng.shuffle(allowed[r])
        try_assign(r, [False] * q)
    match = [-1] * q
    for s, r in enumerate(src_owner):
        if r >= 0:
            match[r] = s
    return match


MAX_PERM_REDRAWS = 16


def delete_node(topology: Topology, v: int, rng: np.random.Generator) -> Topology:
    """Remove node v, redirecting its readers to the nodes v read from.

    The q readers of v are matched bijectively at random to the q members
    of v's in-list, and each reader's v-entry is replaced by its matched
    source, which conserves every in- and out-degree. Random permutations
    are redrawn up to MAX_PERM_REDRAWS times when a matched entry would
    self-loop or duplicate; after that a maximum bipartite matching
    repairs the offending slots, and any reader that no legal source fits
    is filled with a uniformly drawn replacement whose displaced out-edge
    is re-homed so that out-degrees stay exact.

    Surviving nodes are re-indexed densely (ids above v shift down by one).
    The input topology is not modified.
    """
    n, q = topology.in_lists.shape
    if not 0 <= v < n:
        raise ValueError(f"node {v} out of range [0, {n})")
    if n <= q + 1:
        raise ValueError(
            f"network too small to delete from: {n - 1} survivors cannot "
            f"each keep {q} distinct non-self in-neighbors"
        )
    work = topology.in_lists.copy()
    readers = np.nonzero((work == v).any(axis=1))[0]
    reader_slots = {int(r): int(np.nonzero(work[r] == v)[0][0]) for r in readers}
    sources = [int(x) for x in work[v]]

    def legal(reader: int, source: int) -> bool:
        if source == reader:
            return False
        row = work[reader]
        slot = reader_slots[reader]
        for s in range(q):
            if s != slot and row[s] == source:
                return False
        return True

    assignment: dict[int, int] = {}
    for _ in range(MAX_PERM_REDRAWS):
        perm = rng.permutation(q)
        trial = {int(r): sources[perm[k]] for k, r in enumerate(readers)}
        if all(legal(r, w) for r, w in trial.items()):
            assignment = trial
            break
    if not assignment:
        allowed = [
            [s for s in range(q) if legal(int(r), sources[s])] for r in readers
        ]
        match = _match_readers_to_sources(allowed, q, rng)
        assignment = {
            int(r): sources[match[k]] for k, r in enumerate(readers) if match[k] >= 0
        }
        unmatched_readers = [int(r) for k, r in enumerate(readers) if match[k] < 0]
        unmatched_sources = [
            sources[s] for s in range(q) if s not in set(m for m in match if m >= 0)
        ]
        for r in unmatched_readers:
            filled = False
            for x in _fill_candidates(work, r, v, rng):
                w = unmatched_sources[0]
                if _rehome_out_edge(work, v, x, w, rng, skip_row=r):
                    assignment[r] = x
                    unmatched_sources.pop(0)
                    filled = True
                    break
            if not filled:
                raise ChurnError(f"could not rewire readers of node {v}")

    for r, w in assignment.items():
        work[r, reader_slots[r]] = w

    work = np.delete(work, v, axis=0)
    work[work > v] -= 1
    out = Topology(work)
    problems = validate(out)
    if problems:
        raise ChurnError(f"deletion left an invalid topology: {problems[:3]}")
    return out


def _rehome_out_edge(
    work: np.ndarray, v: int, x: int, w: int, rng: np.random.Generator, skip_row: int
) -> bool:
    """Replace one occurrence of x in some row with w (keeps out-degrees exact).

    Used by delete_node's last-resort repair: x is about to gain an
    out-edge it should not keep, w has just lost one. Rows equal to v or
    skip_row are not touched. Returns False if no occurrence can take w.
    """
    n, q = work.shape
    rows, slots = np.nonzero(work == x)
    order = rng.permutation(len(rows))
    for k in order:
        y, s = int(rows[k]), int(slots[k])
        if y == v or y == skip_row or y == w:
            continue
        if any(work[y, t] == w for t in range(q)):
            continue
        work[y, s] = w
        return True
    return False


def insert_node(topology: Topology, rng: np.random.Generator) -> tuple[Topology, int]:
    """Add a node wired in by q distinct sponsors.

    Each sponsor donates one uniformly chosen in-list entry to the new
    node and reads the new node in that slot instead. Donations must be
    pairwise distinct; colliding slot draws are redrawn up to
    MAX_PERM_REDRAWS times and then resolved by choosing uniformly among
    the sponsor's not-yet-donated entries (at least one always exists).
    Every donated neighbor keeps its out-degree: it loses the edge to its
    sponsor and gains the edge to the new node.

    Returns the grown topology (input unmodified) and the new node's id,
    which is the previous node count.
    """
    n, q = topology.in_lists.shape
    u = n
    work = np.empty((n + 1, q), dtype=np.int32)
    work[:n] = topology.in_lists
    sponsors = rng.choice(n, size=q, replace=False)
    donated: list[int] = []
    used: set[int] = set()
    for k in sponsors:
        w = -1
        for _ in range(MAX_PERM_REDRAWS):
            slot = int(rng.integers(0, q))
            cand = int(work[k, slot])
            if cand not in used:
                w = cand
                break
        if w < 0:
            options = [s for s in range(q) if int(work[k, s]) not in used]
            slot = options[int(rng.integers(0, len(options)))]
            w = int(work[k, slot])
        used.add(w)
        donated.append(w)
        work[k, slot] = u
    work[u] = np.array(donated, dtype=np.int32)
    return Topology(work), u


# --- edge-list serialization --------------------------------------------

def save_edge_list(topology: Topology, path) -> None:
    """Write the topology as text: header line, then one 'source,target'
    line per edge, each node's in-edges consecutive in slot order."""
    n, q = topology.in_lists.shape
    rows = topology.in_lists
    with open(path, "w", encoding="ascii") as f:
        f.write(f"nodes={n} q={q}\n")
        for i in range(n):
            base = rows[i]
            f.write("".join(f"{base[s]},{i}\n" for s in range(q)))


def load_edge_list(path) -> Topology:
    """Read a topology written by :func:`save_edge_list`."""
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        parts = header.split()
        try:
            n = int(parts[0].removeprefix("nodes="))
            q = int(parts[1].removeprefix("q="))
        except (IndexError, ValueError):
            raise ValueError(f"bad edge-list header: {header!r}") from None
        in_lists = np.empty((n, q), dtype=np.int32)
        for i in range(n):
            for s in range(q):
                line = f.readline()
                if not line:
                    raise ValueError(f"edge list truncated at node {i}, slot {s}")
                src_s, _, tgt_s = line.strip().partition(",")
                src, tgt = int(src_s), int(tgt_s)
                if tgt != i:
                    raise ValueError(
                        f"edge list out of order at node {i}, slot {s}: target {tgt}"
                    )
                in_lists[i, s] = src
    return Topology(in_lists)
