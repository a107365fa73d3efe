"""Awake-optimal deterministic MST.

Each phase finds fragment MOEs as in the randomized algorithm, then prunes
the fragment graph G' to max degree 4 by letting every fragment accept at
most 3 of its incoming MOEs (virtual tokens distributed down the tree), then
5-colors G' in O(log^4 N) stages in which each fragment is awake at most 5
times, and finally merges every Blue fragment into a non-Blue neighbor (or,
for G'-degree-0 "singleton" fragments, along their original MOE after a
global refresh).  Phases repeat until a fragment learns it spans the graph;
the analytical phase cap from the coloring argument is astronomically larger
than the observed O(log n) phases, so the loop is driven by the spanning
test rather than a fixed counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from . import engine
from .graph import WeightedGraph
from .ldt import (LdtState, block_length, fragment_broadcast, merging_fragments,
                  neighbor_awareness, transmit_adjacent, upcast_min,
                  validate_ldt_forest, UP_RECEIVE, UP_SEND, DOWN_RECEIVE,
                  DOWN_SEND)
from .metrics import Metrics
from .mst_randomized import AlgoRun, NodeState as _RandState, edgeset_from_outputs, find_fragment_moe

BLUE, RED, ORANGE, BLACK, GREEN = 0, 1, 2, 3, 4  # descending priority
UNCOLORED = -1

T_COUNT = 8
T_TOKEN = 9

MAX_VALID_INCOMING = 3
MAX_GPRIME_DEGREE = 4

# Worst-case per-phase awake rounds per node, counted slot by slot across the
# fixed block list (step i: 8, step ii: 7, two-hop gathering: 9, coloring:
# 5 stages x 5 slots, two merge waves plus the refresh: 11).
AWAKE_PER_PHASE_BOUND = 60


def coloring_bits(N: int) -> int:
    # IDs are values in [1, N]; pad to 4 bits so 4-subsets exist for tiny N
    return max(4, N.bit_length())


def stage_count(N: int) -> int:
    return math.comb(coloring_bits(N), 4) * 16


def blocks_per_phase(N: int) -> int:
    return 20 + 3 * stage_count(N)


def phase_rounds(n: int, N: int) -> int:
    return blocks_per_phase(N) * block_length(n)


def active_stage(fragment_id: int, neighbor_ids, N: int) -> int:
    """First stage whose 4-bit choice and assignment is valid for fragment_id
    and invalid for every neighbor.  Stages enumerate 4-subsets of bit
    positions lexicographically, then the 16 assignments in binary order.
    Existence is guaranteed by ID distinctness."""
    others = [g for g in neighbor_ids if g != fragment_id]
    for idx, combo in enumerate(combinations(range(coloring_bits(N)), 4)):
        pattern = 0
        for j, pos in enumerate(combo):
            pattern |= ((fragment_id >> pos) & 1) << j
        clash = False
        for g in others:
            gpat = 0
            for j, pos in enumerate(combo):
                gpat |= ((g >> pos) & 1) << j
            if gpat == pattern:
                clash = True
                break
        if not clash:
            return idx * 16 + pattern
    raise AssertionError(
        f"no active stage for {fragment_id} among {neighbor_ids}; IDs collide?")


@dataclass
class PhaseLog:
    """Observer-facing record of one completed phase (test instrumentation)."""
    phase: int
    fragment_id: int
    moe_w: int
    moe_target: int
    valid_in: int
    moe_valid: bool
    nbr_info: tuple
    color: int
    active: int
    wake_stages: tuple
    blue: bool
    singleton: bool


@dataclass
class DetState(_RandState):
    valid_in_ports: set[int] = field(default_factory=set)
    moe_valid: bool = False
    root_sees_valid: bool | None = None
    nbr_info: tuple = ()
    two_hop: dict = field(default_factory=dict)
    color: int = UNCOLORED
    nbr_colors: dict = field(default_factory=dict)
    phase_log: list = field(default_factory=list)

    def gprime_ports(self, ctx) -> set[int]:
        ports = set(self.valid_in_ports)
        if self.moe_valid and self.moe and self.moe.origin_id == ctx.node_id:
            ports.add(self.moe.origin_port)
        return ports


def _count_up(ctx, ldt: LdtState, start: int, s: int, own: int):
    """Upcast of incoming-MOE counts; returns (subtree total, per-child counts)."""
    slots = ldt.slots(s, start)
    child_counts: dict[int, int] = {}
    total = own
    if ldt.children_ports:
        inbox = yield (slots[UP_RECEIVE], [])
        for m in inbox:
            p = m.payload
            if (isinstance(p, tuple) and p[0] == T_COUNT
                    and m.src_port in ldt.children_ports
                    and p[1] == ldt.fragment_id):
                child_counts[m.src_port] = p[2]
                total += p[2]
    if not ldt.is_root and total > 0:
        yield (slots[UP_SEND], [(ldt.parent_port, (T_COUNT, ldt.fragment_id, total))])
    return total, child_counts


def _token_down(ctx, ldt: LdtState, start: int, s: int, own: int,
                child_counts: dict[int, int], subtree_total: int,
                fragment_total: int):
    """Distribute min(3, total) tokens; returns how many this node keeps.

    The root takes tokens for itself first, then splits the rest among its
    children's subtrees in port order; every node repeats the same rule.
    """
    slots = ldt.slots(s, start)
    if ldt.is_root:
        alloc = min(MAX_VALID_INCOMING, fragment_total)
    elif subtree_total == 0:
        return 0
    else:
        alloc = 0
        inbox = yield (slots[DOWN_RECEIVE], [])
        for m in inbox:
            p = m.payload
            if (isinstance(p, tuple) and p[0] == T_TOKEN
                    and m.src_port == ldt.parent_port
                    and p[1] == ldt.fragment_id):
                alloc = p[2]
    take = min(own, alloc)
    rem = alloc - take
    sends = []
    for port in sorted(child_counts):
        if rem <= 0:
            break
        give = min(child_counts[port], rem)
        if give > 0:
            sends.append((port, (T_TOKEN, ldt.fragment_id, give)))
            rem -= give
    if sends:
        yield (slots[DOWN_SEND], sends)
    return take


def _coloring_stage(ctx, st: DetState, base: int, s: int, stage: int,
                    my_active: int, my_nbrs):
    """One coloring stage: color if active, then announce / gather / spread."""
    ldt = st.ldt
    L = block_length(s)
    if stage == my_active:
        used = {st.nbr_colors[f] for f in my_nbrs if f in st.nbr_colors}
        st.color = min(c for c in range(5) if c not in used)

    gports = st.gprime_ports(ctx)
    per_port = {}
    if st.color != UNCOLORED:
        per_port = {port: (st.color,) for port in gports}
    got = yield from transmit_adjacent(ctx, ldt, base, s, per_port=per_port)
    pairs = []
    for port, (fid, body) in got.items():
        if port in gports and body is not None:
            pairs.append((fid, body[0]))
    pairs = yield from neighbor_awareness(ctx, ldt, base + L, s, pairs)
    body = pairs if ldt.is_root else None
    pairs = yield from fragment_broadcast(ctx, ldt, base + 2 * L, s, body)
    for fid, color in pairs or ():
        st.nbr_colors[fid] = color


def node_main(ctx, n: int, max_phases: int):
    st = DetState(ldt=LdtState(fragment_id=ctx.node_id))
    ctx.state = st
    s = n
    L = block_length(s)
    N = ctx.N
    S = stage_count(N)
    per_phase = blocks_per_phase(N) * L
    port_by_weight = {w: p for p, w in ctx.ports}
    weight_by_port = {p: w for p, w in ctx.ports}

    for phase in range(1, max_phases + 1):
        st.phase = phase
        base = (phase - 1) * per_phase + 1
        ldt = st.ldt
        fid_start = ldt.fragment_id

        # --- step (i): find the fragment MOE (blocks 0..3) ---
        yield from find_fragment_moe(ctx, st, base, s)
        if st.spanning:
            ctx.finish_round = base + 3 * L - 1
            return {"mst_ports": sorted(st.mst_ports)}

        # --- step (ii): select up to 3 valid incoming MOEs (blocks 4..7) ---
        own = len(st.incoming)
        subtree, child_counts = yield from _count_up(ctx, ldt, base + 4 * L, s, own)
        fragment_total = subtree if ldt.is_root else 0
        # every node learns the fragment total implicitly: only the root uses it
        take = yield from _token_down(ctx, ldt, base + 5 * L, s, own,
                                      child_counts, subtree, fragment_total)
        by_weight = sorted(st.incoming, key=lambda p: weight_by_port[p])
        st.valid_in_ports = set(by_weight[:take])

        per_port = {port: (port in st.valid_in_ports) for port in st.incoming}
        got = yield from transmit_adjacent(ctx, ldt, base + 6 * L, s,
                                           per_port=per_port)
        is_origin = st.moe.origin_id == ctx.node_id
        value = None
        if is_origin:
            reply = got.get(st.moe.origin_port)
            st.moe_valid = bool(reply and reply[1] is True)
            value = (0, st.moe.w) if st.moe_valid else (-1, 0)
        seen = yield from upcast_min(ctx, ldt, base + 7 * L, s, value)
        if ldt.is_root:
            # the root sees the MOE weight when valid and -infinity otherwise
            st.root_sees_valid = seen is not None and seen[0] == 0

        # --- step (iii): two-hop views of G' (blocks 8..12) ---
        tuples = []
        for port in st.valid_in_ports:
            w = weight_by_port[port]
            tuples.append((ctx.node_id, ldt.fragment_id, w, st.incoming[port],
                           UNCOLORED))
        if is_origin and st.moe_valid:
            tuples.append((ctx.node_id, ldt.fragment_id, st.moe.w,
                           st.moe.target_fid, UNCOLORED))
        info = yield from neighbor_awareness(ctx, ldt, base + 8 * L, s, tuples)
        body = info if ldt.is_root else None
        st.nbr_info = (yield from fragment_broadcast(ctx, ldt, base + 9 * L, s,
                                                     body)) or ()
        if len(st.nbr_info) > MAX_GPRIME_DEGREE:
            raise AssertionError(
                f"fragment {ldt.fragment_id} has G' degree {len(st.nbr_info)}")

        gports = st.gprime_ports(ctx)
        per_port = {port: st.nbr_info for port in gports}
        got = yield from transmit_adjacent(ctx, ldt, base + 10 * L, s,
                                           per_port=per_port)
        pairs = []
        for port, (fid, body) in got.items():
            if port in gports and body is not None:
                pairs.extend((fid, tup) for tup in body)
        pairs = yield from neighbor_awareness(ctx, ldt, base + 11 * L, s, pairs)
        body = pairs if ldt.is_root else None
        pairs = yield from fragment_broadcast(ctx, ldt, base + 12 * L, s, body)
        st.two_hop = {}
        for fid, tup in pairs or ():
            st.two_hop.setdefault(fid, []).append(tup)

        # --- Fast-Awake-Coloring: 3 blocks per stage, awake in <= 5 stages ---
        st.color = UNCOLORED
        st.nbr_colors = {}
        my_nbrs = sorted({t[3] for t in st.nbr_info})
        my_active = active_stage(ldt.fragment_id, my_nbrs, N)
        wake = {my_active}
        for gfid in my_nbrs:
            g_nbrs = sorted({t[3] for t in st.two_hop.get(gfid, ())})
            wake.add(active_stage(gfid, g_nbrs, N))
        for stage in sorted(wake):
            stage_base = base + (13 + 3 * stage) * L
            yield from _coloring_stage(ctx, st, stage_base, s, stage,
                                       my_active, my_nbrs)
        if st.color == UNCOLORED:
            raise AssertionError("fragment left uncolored after its active stage")

        # --- merging wave 1: Blue fragments with G' neighbors (3 blocks) ---
        blue = st.color == BLUE
        singleton = blue and not st.nbr_info
        wave1_base = base + (13 + 3 * S) * L
        is_tails = blue and bool(st.nbr_info)
        moe_port = None
        skip_up = False
        if is_tails:
            for f in my_nbrs:
                if f not in st.nbr_colors:
                    raise AssertionError("missing neighbor color at merge time")
            entry = min(st.nbr_info, key=lambda t: (t[3], t[2]))
            skip_up = entry[0] == ldt.fragment_id
            if entry[0] == ctx.node_id:
                moe_port = port_by_weight[entry[2]]
        attaches, _ = yield from merging_fragments(
            ctx, ldt, wave1_base, s, is_tails=is_tails, moe_port=moe_port,
            skip_up=skip_up)
        if attaches and blue:
            raise AssertionError("Blue fragment received a wave-1 attach")
        st.mst_ports |= attaches
        if moe_port is not None:
            st.mst_ports.add(moe_port)

        # --- refresh, then wave 2: Blue singletons along their MOE ---
        refresh_base = wave1_base + 3 * L
        refreshed = yield from transmit_adjacent(ctx, ldt, refresh_base, s,
                                                 default=(ldt.level,))
        wave2_base = refresh_base + L
        is_tails2 = singleton
        moe_port2 = None
        if singleton and st.moe.origin_id == ctx.node_id:
            moe_port2 = st.moe.origin_port
        skip_up2 = singleton and st.moe.origin_id == ldt.fragment_id
        attaches2, target2 = yield from merging_fragments(
            ctx, ldt, wave2_base, s, is_tails=is_tails2, moe_port=moe_port2,
            skip_up=skip_up2)
        if attaches2 and singleton:
            raise AssertionError("wave-2 target is itself a Blue singleton")
        if moe_port2 is not None:
            expect = refreshed.get(moe_port2)
            if expect is None or (expect[0], expect[1][0]) != target2:
                raise AssertionError("refresh and merge disagree on the target")
            st.mst_ports.add(moe_port2)
        st.mst_ports |= attaches2

        st.phase_log.append(PhaseLog(
            phase=phase, fragment_id=fid_start, moe_w=st.moe.w,
            moe_target=st.moe.target_fid,
            valid_in=len(st.valid_in_ports), moe_valid=st.moe_valid,
            nbr_info=st.nbr_info, color=st.color, active=my_active,
            wake_stages=tuple(sorted(wake)), blue=blue, singleton=singleton))

    raise AssertionError("phase cap reached; fragment count failed to reach 1")


def run_deterministic_mst(g: WeightedGraph, *, validate: bool = False,
                          fast_forward: bool = True, trace=None,
                          max_rounds: int | None = None) -> AlgoRun:
    n = g.n
    max_phases = n + 2
    per_phase = phase_rounds(n, g.N)
    cfg = engine.EngineConfig(
        congestion_bits=engine.default_congestion_bits(g.N),
        max_rounds=max_rounds if max_rounds is not None
        else (max_phases + 1) * per_phase,
        seed=0, fast_forward=fast_forward, trace=trace)

    trajectory: list[int] = [n]
    awake_snaps: list[list[int]] = []

    def make_probe():
        def probe(_r, ctxs, awake):
            if trajectory[-1] == 1:
                return
            trajectory.append(len({c.state.ldt.fragment_id for c in ctxs}))
            awake_snaps.append(list(awake))
            if validate:
                validate_ldt_forest(g, [c.state.ldt for c in ctxs])
        return probe

    probes = [(p * per_phase, make_probe()) for p in range(1, max_phases + 1)]
    result = engine.run(g, lambda ctx: node_main(ctx, n=n, max_phases=max_phases),
                        cfg, probes=probes)

    metrics = result.metrics
    metrics.fragment_trajectory = trajectory
    metrics.phases = max(len(c.state.phase_log) for c in result.ctxs)
    prev = [0] * n
    deltas = []
    for snap in awake_snaps:
        deltas.append([b - a for a, b in zip(prev, snap)])
        prev = snap
    metrics.phase_awake = deltas
    edge_set = edgeset_from_outputs(g, result.outputs)
    return AlgoRun(edge_set=edge_set, metrics=metrics, result=result)
