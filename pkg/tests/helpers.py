"""Shared test machinery: fragment forests, primitive harnesses, and
independent brute-force references."""

from __future__ import annotations

import random

from sleepmst import engine
from sleepmst.graph import WeightedGraph, DisjointSets
from sleepmst.ldt import LdtState


def build_ldts(g: WeightedGraph, parent_of: dict[int, int | None]) -> list[LdtState]:
    """LdtStates for a prescribed forest given as node -> parent node (or None).

    Levels are walked from the roots; fragment ids are the root node IDs.
    """
    children: dict[int, set[int]] = {u: set() for u in range(g.n)}
    roots = []
    for u in range(g.n):
        p = parent_of[u]
        if p is None:
            roots.append(u)
        else:
            children[p].add(u)
    level = {}
    fid = {}
    for r in roots:
        stack = [(r, 0)]
        while stack:
            u, d = stack.pop()
            level[u] = d
            fid[u] = g.node_ids[r]
            for c in children[u]:
                stack.append((c, d + 1))
    ldts = []
    for u in range(g.n):
        p = parent_of[u]
        ldts.append(LdtState(
            fragment_id=fid[u],
            level=level[u],
            parent_port=None if p is None else g.port_of(u, p),
            children_ports={g.port_of(u, c) for c in children[u]},
        ))
    return ldts


def run_forest_protocol(g: WeightedGraph, parent_of, proto_fn, seed=0,
                        max_rounds=10**9, fast_forward=True):
    """Run proto_fn(ctx, ldt) -> generator on every node over a given forest.

    Returns (outputs, RunResult); each node's ldt is exposed as ctx.state.
    """
    ldts = build_ldts(g, parent_of)

    def factory(ctx):
        ldt = ldts[ctx.idx]
        ctx.state = ldt
        return proto_fn(ctx, ldt)

    cfg = engine.EngineConfig(
        congestion_bits=engine.default_congestion_bits(g.N),
        max_rounds=max_rounds, seed=seed, fast_forward=fast_forward)
    result = engine.run(g, factory, cfg)
    return result.outputs, result


def brute_force_moe(g: WeightedGraph, fragment_of: dict[int, int]):
    """Minimum outgoing edge per fragment, by scanning every edge."""
    best: dict[int, tuple] = {}
    for u, v, w in g.edges:
        fu, fv = fragment_of[u], fragment_of[v]
        if fu == fv:
            continue
        for f, a, b in ((fu, u, v), (fv, v, u)):
            entry = (w, a, b)
            if f not in best or entry < best[f]:
                best[f] = entry
    return best


def random_spanning_tree(g: WeightedGraph, rng: random.Random):
    """A uniform-ish random spanning tree via randomized Kruskal."""
    edges = list(g.edges)
    rng.shuffle(edges)
    dsu = DisjointSets(range(g.n))
    picked = set()
    for u, v, _w in edges:
        if dsu.union(u, v):
            picked.add((u, v))
    return frozenset(picked)


def components_of(n: int, edge_set) -> list[set[int]]:
    dsu = DisjointSets(range(n))
    for u, v in edge_set:
        dsu.union(u, v)
    groups: dict[int, set[int]] = {}
    for u in range(n):
        groups.setdefault(dsu.find(u), set()).add(u)
    return list(groups.values())


# --- deterministic-MST observer checks --------------------------------------

def fragment_logs(run):
    """(phase, fragment_id) -> PhaseLog; all nodes of a fragment log alike."""
    logs = {}
    for c in run.result.ctxs:
        for log in c.state.phase_log:
            logs[(log.phase, log.fragment_id)] = log
    return logs


def gprime(logs, phase):
    """Fragment graph at one phase: ({fid: log}, {frozenset fid pairs})."""
    frags = {fid: log for (p, fid), log in logs.items() if p == phase}
    edges = set()
    for fid, log in frags.items():
        for t in log.nbr_info:
            edges.add(frozenset((fid, t[3])))
    return frags, edges


def fragment_components(frags, edges):
    dsu = DisjointSets(frags)
    for e in edges:
        a, b = tuple(e)
        dsu.union(a, b)
    groups: dict = {}
    for fid in frags:
        groups.setdefault(dsu.find(fid), set()).add(fid)
    return list(groups.values())


def check_coloring_lemmas(run, max_degree=4, blue=0):
    """Proper G' coloring, <= 5 awake stages, degree <= 4, >= 1 Blue while
    two or more fragments remain; plus the floor(|H'|/342) Blue bound on
    every component.  Returns the number of (phase, fragment) records seen."""
    logs = fragment_logs(run)
    checked = 0
    for phase in {p for p, _f in logs}:
        frags, edges = gprime(logs, phase)
        for fid, log in frags.items():
            assert len(log.nbr_info) <= max_degree
            assert len(log.wake_stages) <= 5
            assert log.color in range(5)
            checked += 1
        for e in edges:
            a, b = tuple(e)
            assert frags[a].color != frags[b].color, f"improper coloring at {e}"
        if len(frags) >= 2:
            assert any(log.blue for log in frags.values())
        for comp in fragment_components(frags, edges):
            if len(comp) >= 342:
                blues = sum(1 for f in comp if frags[f].color == blue)
                assert blues >= len(comp) // 342
    return checked


# --- engine delivery-rule reference ------------------------------------------

def schedule_protocol(schedule, sends_at):
    """Nodes wake at prescribed rounds and send prescribed payloads."""
    def factory(ctx):
        def main():
            heard = []
            for r in schedule[ctx.idx]:
                inbox = yield (r, sends_at[ctx.idx].get(r, []))
                heard.extend((r, m.src_port, m.payload) for m in inbox)
            return heard
        return main()
    return factory


def reference_delivery(g, schedule, sends_at):
    """Brute-force delivery rule: delivered iff both endpoints awake."""
    delivered = {i: [] for i in range(g.n)}
    for u in range(g.n):
        for r in schedule[u]:
            for port, payload in sends_at[u].get(r, []):
                v = g.port_target(u, port)
                if r in schedule[v]:
                    delivered[v].append((r, g.port_of(v, u), payload))
    for msgs in delivered.values():
        msgs.sort()
    return delivered


def random_wake_instance(rng, n_nodes=8):
    from sleepmst.graph import gen_random_connected

    g = gen_random_connected(n_nodes, 3, seed=rng.randrange(10**9))
    schedule = {}
    sends_at = {}
    for u in range(g.n):
        rounds = sorted(rng.sample(range(1, 20), rng.randrange(1, 8)))
        schedule[u] = rounds
        sends_at[u] = {}
        for r in rounds:
            sends = []
            for p, _w in g.port_weights(u):
                if rng.random() < 0.4:
                    sends.append((p, (u, r)))
            if sends:
                sends_at[u][r] = sends
    return g, schedule, sends_at
