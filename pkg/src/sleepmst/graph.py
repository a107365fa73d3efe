"""Weighted input graphs: generators, validation, and centralized MST oracles.

All generators produce connected undirected graphs with pairwise-distinct
positive integer edge weights (a random permutation of 1..m), so every graph
has a unique MST.  Node indices run 0..n-1; each node additionally carries a
distinct ID drawn from [1, N] with N = n**3 by default.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    """Raised for invalid generator parameters or malformed graphs."""


DEFAULT_ID_SPACE_EXP = 3  # N = n**3 unless overridden


def _rng(seed) -> random.Random:
    # String seeding is stable across interpreter runs (no hash randomization).
    return random.Random(f"sleepmst:{seed}")


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected connected graph with distinct edge weights and port numbering.

    edges are canonical (u, v, w) triples with u < v.  Ports at each node are
    numbered 1..deg in increasing order of the neighbor index; protocol code
    only ever sees (port, weight) pairs, never neighbor identities.
    """

    n: int
    edges: tuple[tuple[int, int, int], ...]
    node_ids: tuple[int, ...]
    N: int

    @cached_property
    def _adj(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _port_index(self) -> tuple[dict[int, int], ...]:
        # neighbor index -> port number (1-based)
        return tuple(
            {nbr: p for p, (nbr, _w) in enumerate(nbrs, start=1)} for nbrs in self._adj
        )

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    def neighbors(self, u: int) -> tuple[tuple[int, int], ...]:
        """Ports of u as (neighbor index, weight), in port order."""
        return self._adj[u]

    def port_weights(self, u: int) -> tuple[tuple[int, int], ...]:
        """What the node itself knows: (port number, incident edge weight)."""
        return tuple((p, w) for p, (_nbr, w) in enumerate(self._adj[u], start=1))

    def port_target(self, u: int, port: int) -> int:
        return self._adj[u][port - 1][0]

    def port_of(self, u: int, v: int) -> int:
        return self._port_index[u][v]

    def edge_key(self, u: int, port: int) -> tuple[int, int]:
        v = self.port_target(u, port)
        return (u, v) if u < v else (v, u)


# An EdgeSet is a frozenset of canonical (min_idx, max_idx) node-index pairs.
EdgeSet = frozenset


class DisjointSets:
    """Union-find with path compression and union by size."""

    def __init__(self, items=()):
        self.parent: dict = {x: x for x in items}
        self.size: dict = {x: 1 for x in items}

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def validate(g: WeightedGraph) -> None:
    """Check all WeightedGraph invariants; raise GraphError on violation."""
    if g.n < 1:
        raise GraphError("graph must have at least one node")
    seen_pairs = set()
    weights = set()
    for u, v, w in g.edges:
        if not (0 <= u < v < g.n):
            raise GraphError(f"edge ({u},{v}) is not canonical or out of range")
        if (u, v) in seen_pairs:
            raise GraphError(f"duplicate edge ({u},{v})")
        seen_pairs.add((u, v))
        if w <= 0:
            raise GraphError(f"edge weight {w} is not a positive integer")
        if w in weights:
            raise GraphError(f"duplicate edge weight {w}")
        weights.add(w)
    if len(g.node_ids) != g.n:
        raise GraphError("node_ids length mismatch")
    if len(set(g.node_ids)) != g.n:
        raise GraphError("node IDs are not distinct")
    if any(not (1 <= i <= g.N) for i in g.node_ids):
        raise GraphError("node ID outside [1, N]")
    if g.N < g.n:
        raise GraphError("N must be at least n")
    # connectivity by BFS from node 0
    if g.n > 1:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _w in g.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != g.n:
            raise GraphError("graph is not connected")


def _assign_ids(n: int, rng: random.Random, N: int | None) -> tuple[int, tuple[int, ...]]:
    if N is None:
        N = max(n, n**DEFAULT_ID_SPACE_EXP)
    ids = rng.sample(range(1, N + 1), n)
    return N, tuple(ids)


def _permute_weights(num_edges: int, rng: random.Random) -> list[int]:
    weights = list(range(1, num_edges + 1))
    rng.shuffle(weights)
    return weights


def _finish(n: int, pairs: list[tuple[int, int]], rng: random.Random,
            N: int | None) -> WeightedGraph:
    weights = _permute_weights(len(pairs), rng)
    edges = tuple(sorted((u, v, w) for (u, v), w in zip(pairs, weights)))
    N, ids = _assign_ids(n, rng, N)
    g = WeightedGraph(n=n, edges=edges, node_ids=ids, N=N)
    validate(g)
    return g


def gen_random_connected(n: int, avg_degree: float, seed,
                         N: int | None = None) -> WeightedGraph:
    """Random connected graph with ~n*avg_degree/2 edges (random tree + fill)."""
    if n < 2:
        raise GraphError("gen_random_connected requires n >= 2")
    if avg_degree < 2:
        raise GraphError("avg_degree must be >= 2")
    rng = _rng(f"random:{n}:{avg_degree}:{seed}")
    order = list(range(n))
    rng.shuffle(order)
    pairs = set()
    for i in range(1, n):  # random recursive tree over a shuffled order
        u, v = order[i], order[rng.randrange(i)]
        pairs.add((min(u, v), max(u, v)))
    target_m = min(n * (n - 1) // 2, max(n - 1, round(n * avg_degree / 2)))
    while len(pairs) < target_m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    return _finish(n, sorted(pairs), rng, N)


def gen_ring(length: int, seed, N: int | None = None) -> WeightedGraph:
    """Cycle of `length` nodes (the lower-bound construction uses length 4n+4)."""
    if length < 3:
        raise GraphError("gen_ring requires length >= 3")
    rng = _rng(f"ring:{length}:{seed}")
    pairs = [(i, i + 1) for i in range(length - 1)] + [(0, length - 1)]
    return _finish(length, sorted(pairs), rng, N)


def gen_path(n: int, seed, N: int | None = None) -> WeightedGraph:
    if n < 2:
        raise GraphError("gen_path requires n >= 2")
    rng = _rng(f"path:{n}:{seed}")
    pairs = [(i, i + 1) for i in range(n - 1)]
    return _finish(n, pairs, rng, N)


def grc_x_count(r: int, c: int) -> int:
    """Default |X|: smallest power of two >= log2(r*c), at least 2."""
    target = max(1.0, math.log2(r * c))
    x = 2
    while x < target:
        x *= 2
    return x


def gen_grc(r: int, c: int, seed, x_count: int | None = None,
            N: int | None = None) -> WeightedGraph:
    """Row-and-column lower-bound topology: r parallel paths of c nodes,
    endpoint hubs, |X| equally spaced columns cross-linked to every path, and
    a complete binary tree over X.

    Node layout: index ell*c + j is the j-th node (0-based) of path ell;
    indices r*c .. r*c + |X| - 2 are the internal tree nodes.
    """
    if r < 1:
        raise GraphError("gen_grc requires r >= 1")
    if c < 4:
        raise GraphError("gen_grc requires c >= 4")
    x = grc_x_count(r, c) if x_count is None else x_count
    if x < 2 or x & (x - 1):
        raise GraphError("|X| must be a power of two >= 2")
    if x > c:
        raise GraphError(f"cannot place {x} equally spaced columns among {c}")
    cols = sorted({round(j * (c - 1) / (x - 1)) for j in range(x)})
    if len(cols) != x:
        raise GraphError(f"equally spaced X of size {x} collides on {c} columns")

    rng = _rng(f"grc:{r}:{c}:{x}:{seed}")
    pairs: set[tuple[int, int]] = set()

    def node(ell: int, j: int) -> int:
        return ell * c + j

    for ell in range(r):
        for j in range(c - 1):
            pairs.add((node(ell, j), node(ell, j + 1)))
    alice, bob = node(0, 0), node(0, c - 1)
    for ell in range(1, r):
        pairs.add(tuple(sorted((alice, node(ell, 0)))))
        pairs.add(tuple(sorted((bob, node(ell, c - 1)))))
    for j in cols:
        for ell in range(1, r):
            pairs.add(tuple(sorted((node(0, j), node(ell, j)))))

    # Complete binary tree over the X nodes (leaves are path-1 nodes).
    leaves = [node(0, j) for j in cols]
    internal_base = r * c
    internal = list(range(internal_base, internal_base + x - 1))
    # heap layout: internal[0] is the root; children of internal[i] are
    # internal[2i+1], internal[2i+2] when internal, else leaves.
    total = internal + leaves
    for i in range(len(internal)):
        for child in (2 * i + 1, 2 * i + 2):
            if child < len(total):
                pairs.add(tuple(sorted((total[i], total[child]))))

    n = r * c + len(internal)
    return _finish(n, sorted(pairs), rng, N)


def mst_oracle(g: WeightedGraph) -> EdgeSet:
    """The unique MST, Kruskal-style with union-find."""
    dsu = DisjointSets(range(g.n))
    chosen = []
    for u, v, _w in sorted(g.edges, key=lambda e: e[2]):
        if dsu.union(u, v):
            chosen.append((u, v))
            if len(chosen) == g.n - 1:
                break
    return frozenset(chosen)


def mst_oracle_prim(g: WeightedGraph) -> EdgeSet:
    """Independent second oracle (Prim with a heap) for cross-checking."""
    import heapq

    in_tree = [False] * g.n
    in_tree[0] = True
    heap: list[tuple[int, int, int]] = []
    for v, w in g.neighbors(0):
        heapq.heappush(heap, (w, 0, v))
    chosen = []
    while heap and len(chosen) < g.n - 1:
        w, u, v = heapq.heappop(heap)
        if in_tree[v]:
            continue
        in_tree[v] = True
        chosen.append((u, v) if u < v else (v, u))
        for x, wx in g.neighbors(v):
            if not in_tree[x]:
                heapq.heappush(heap, (wx, v, x))
    return frozenset(chosen)


def bfs_depths(g: WeightedGraph, source: int) -> list[int]:
    from collections import deque

    depth = [-1] * g.n
    depth[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for v, _w in g.neighbors(u):
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                q.append(v)
    return depth


def diameter(g: WeightedGraph) -> int:
    """Hop diameter: max BFS eccentricity, ignoring weights."""
    best = 0
    for s in range(g.n):
        best = max(best, max(bfs_depths(g, s)))
    return best


def total_weight(g: WeightedGraph, edge_set: EdgeSet) -> int:
    by_pair = {(u, v): w for u, v, w in g.edges}
    return sum(by_pair[e] for e in edge_set)


# --- graph file format -------------------------------------------------------
# Header "n m N", then m lines "u v w", then n lines "nodeIdx nodeID".

def write_graph(g: WeightedGraph, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{g.n} {g.m} {g.N}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w}\n")
        for idx, nid in enumerate(g.node_ids):
            fh.write(f"{idx} {nid}\n")


def read_graph(path) -> WeightedGraph:
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    try:
        n, m, N = int(next(it)), int(next(it)), int(next(it))
        edges = tuple(
            tuple(sorted((int(next(it)), int(next(it))))) + (int(next(it)),)
            for _ in range(m)
        )
        ids = [0] * n
        for _ in range(n):
            idx, nid = int(next(it)), int(next(it))
            ids[idx] = nid
    except StopIteration:
        raise GraphError("truncated graph file") from None
    g = WeightedGraph(n=n, edges=tuple(sorted(edges)), node_ids=tuple(ids), N=N)
    validate(g)
    return g
