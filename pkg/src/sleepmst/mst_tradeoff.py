"""Parameterized awake/round trade-off MST.

Stage one elects a leader and builds a BFS tree (two selectable modes: a
faithful flood that keeps every node awake for O(D) rounds, or an
oracle-awake mode where the harness grants the identical leader and tree and
charges each node a configurable polylog awake cost, standing in for the
cited multi-level-clustering machinery).  Stage two runs a controlled GHS for
phases i = 1..k with primitives sized 5*2^i + 1: fragments participate only
while their height is at most 2^i, participating fragments' MOEs form rooted
supergraph trees that are 3-colored (bit-reduction coloring plus three
eliminate-a-class steps), a maximal matching is read off the coloring, and
matched pairs merge first, unmatched participants second.  Stage three
pipelines the surviving inter-fragment edges up the BFS tree under the red
rule, the root solves the fragment-level MST locally, and a mirrored
schedule sends the chosen edges back down.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from random import Random

from . import engine
from .graph import WeightedGraph, DisjointSets, bfs_depths, diameter as hop_diameter
from .ldt import (LdtState, block_length, fragment_broadcast, merging_fragments,
                  transmit_adjacent, upcast_min, validate_ldt_forest)
from .metrics import Metrics
from .mst_randomized import AlgoRun, edgeset_from_outputs

T_LE = 10
T_BFS = 11
T_BFS_PICK = 12
T_PIPE_UP = 13
T_PIPE_DOWN = 14


class RankCollision(engine.EngineError):
    """Two nodes drew the maximum leader-election rank; retry with a new seed."""


class BudgetExceeded(engine.EngineError):
    """A node's pipeline window closed with undelivered non-cycle edges."""


# --- schedule arithmetic (pure functions of n, N, D, k; every node agrees) ---

def ghs_s(i: int) -> int:
    # headroom of +1 keeps every schedule level strictly below the block bound
    return 5 * 2**i + 1


def cv_iterations(N: int) -> int:
    """Color-bit-reduction rounds from ID-sized colors down to 6 colors.

    With colors below 2^b one round maps them below 2b; stopping at b = 3
    still allows colors 6 and 7, so one final round (positions <= 2, new
    color <= 5) is always appended."""
    bits = max(2, N.bit_length())
    iters = 0
    while bits > 3:
        bits = (2 * bits - 1).bit_length()
        iters += 1
    return iters + 1


def ghs_blocks(N: int) -> int:
    # 8 bookkeeping blocks, 3 per coloring exchange, 18 for the three
    # eliminate-a-class steps, 18 for matching, 7 for the two merge waves
    return 8 + 3 * cv_iterations(N) + 18 + 18 + 7


def stage1_rounds(D: int) -> int:
    return 2 * (D + 1)


def ghs_phase_rounds(N: int, i: int) -> int:
    return ghs_blocks(N) * block_length(ghs_s(i))


def stage2_rounds(N: int, k: int) -> int:
    total = sum(ghs_phase_rounds(N, i) for i in range(1, k + 1))
    return total + block_length(ghs_s(k))  # final global fid refresh block


def default_budget(n: int, k: int) -> int:
    return 2 * math.ceil(n / 2**k) + 1


@dataclass(frozen=True)
class Timeline:
    n: int
    N: int
    D: int
    k: int
    budget: int

    @property
    def stage2_start(self) -> int:
        return stage1_rounds(self.D) + 1

    def phase_start(self, i: int) -> int:
        return self.stage2_start + sum(
            ghs_phase_rounds(self.N, j) for j in range(1, i))

    @property
    def final_refresh(self) -> int:
        return self.phase_start(self.k + 1)

    @property
    def stage3_start(self) -> int:
        return self.final_refresh + block_length(ghs_s(self.k))

    @property
    def downcast_start(self) -> int:
        return self.stage3_start + self.D + self.budget + 1

    @property
    def end(self) -> int:
        return self.downcast_start + self.D + self.budget + 1


# --- stage one -----------------------------------------------------------

def draw_rank(seed, node_id: int, n: int) -> int:
    return Random(f"{seed}:rank:{node_id}").randint(1, n**4)


def grant_le_bfs(g: WeightedGraph, seed):
    """Central computation of the leader and BFS tree for oracle-awake mode.

    Uses the same rank stream and the same min-depth-then-min-port parent
    rule as the flooding mode, so both modes produce identical trees.
    """
    ranks = {u: draw_rank(seed, g.node_ids[u], g.n) for u in range(g.n)}
    best = max(ranks.values())
    holders = [u for u, r in ranks.items() if r == best]
    if len(holders) > 1:
        raise RankCollision(f"rank {best} drawn by {len(holders)} nodes")
    leader = holders[0]
    depth = bfs_depths(g, leader)
    parent_port: dict[int, int | None] = {leader: None}
    children: dict[int, set[int]] = {u: set() for u in range(g.n)}
    for u in range(g.n):
        if u == leader:
            continue
        cands = [p for p, (v, _w) in enumerate(g.neighbors(u), start=1)
                 if depth[v] == depth[u] - 1]
        parent_port[u] = min(cands)
        v = g.port_target(u, parent_port[u])
        children[v].add(g.port_of(v, u))
    return leader, depth, parent_port, children


def le_bfs_flood(ctx, n: int, D: int, seed):
    """SIMPLE-LE then SIMPLE-BFS with every node awake for the whole stage."""
    rank = draw_rank(seed, ctx.node_id, n)
    best = (rank, ctx.node_id)
    coll = False
    outgoing = True
    for r in range(1, D + 2):
        sends = []
        if outgoing:
            payload = (T_LE, best[0], best[1], coll)
            sends = [(p, payload) for p, _w in ctx.ports]
            outgoing = False
        inbox = yield (r, sends)
        for m in inbox:
            p = m.payload
            if not (isinstance(p, tuple) and p[0] == T_LE):
                continue
            rk, nid, c = p[1], p[2], p[3]
            if rk > best[0]:
                best, coll, outgoing = (rk, nid), c, True
            elif rk == best[0]:
                if nid != best[1]:
                    coll = True
                    outgoing = True
                    best = (rk, max(nid, best[1]))
                elif c and not coll:
                    coll = True
                    outgoing = True
    if coll:
        raise RankCollision(f"rank collision observed at node {ctx.node_id}")

    is_leader = best[1] == ctx.node_id
    depth = 0 if is_leader else None
    parent_port = None
    bfs_children: set[int] = set()
    announce = is_leader
    picked = False
    for r in range(D + 2, 2 * D + 3):
        sends = []
        if announce:
            sends = [(p, (T_BFS, depth)) for p, _w in ctx.ports]
            announce = False
            if parent_port is not None and not picked:
                sends.append((parent_port, (T_BFS_PICK,)))
                picked = True
        inbox = yield (r, sends)
        fresh = []
        for m in inbox:
            p = m.payload
            if isinstance(p, tuple) and p[0] == T_BFS:
                fresh.append((p[1], m.src_port))
            elif isinstance(p, tuple) and p[0] == T_BFS_PICK:
                bfs_children.add(m.src_port)
        if depth is None and fresh:
            dd, port = min(fresh)
            depth = dd + 1
            parent_port = port
            announce = True
    return depth, parent_port, bfs_children


# --- stage two: controlled GHS -------------------------------------------

@dataclass
class TradeState:
    ldt: LdtState
    mst_ports: set[int] = field(default_factory=set)
    nbr_fids: dict[int, int] = field(default_factory=dict)
    nbr_part: dict[int, bool] = field(default_factory=dict)
    incoming: dict[int, int] = field(default_factory=dict)  # child-edge ports
    moe: tuple | None = None  # (w, origin_id, origin_port, target_fid)
    spanning: bool = False
    participating: bool = False
    color: int | None = None
    matched: bool = False
    pair_child: bool = False
    phase_log: list = field(default_factory=list)
    stage3_sent: int = 0
    bfs_depth: int = 0
    pipeline_collected: set | None = None  # at the BFS root only
    pipeline_chosen: list | None = None


@dataclass
class GhsPhaseLog:
    phase: int
    fragment_id: int
    participating: bool
    height: int
    color: int | None
    matched: bool
    pair_child: bool
    merged_wave: int  # 0 none, 1 matched pair, 2 unmatched along MOE


class _Cursor:
    def __init__(self, base: int, L: int):
        self.r = base
        self.L = L

    def take(self, count: int = 1) -> int:
        r = self.r
        self.r += count * self.L
        return r


def _exchange_parent(ctx, st: TradeState, cur: _Cursor, s: int, value: int):
    """One supergraph round: push own value to child fragments, learn the
    parent fragment's value (3 blocks: adjacent, upcast, broadcast)."""
    ldt = st.ldt
    per_port = {port: (value,) for port in st.incoming}
    got = yield from transmit_adjacent(ctx, ldt, cur.take(), s,
                                       per_port=per_port)
    up = None
    if st.moe and st.moe[1] == ctx.node_id and st.moe[2] in got:
        body = got[st.moe[2]][1]
        if body is not None:
            up = (body[0],)
    up = yield from upcast_min(ctx, ldt, cur.take(), s, up)
    body = up if ldt.is_root else None
    down = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
    return down[0] if down is not None else None


def _cv_color(own: int, parent: int) -> int:
    diff = own ^ parent
    pos = (diff & -diff).bit_length() - 1
    return 2 * pos + ((own >> pos) & 1)


def _propose_round(ctx, st: TradeState, cur: _Cursor, s: int, turn_color: int,
                   sg_root: bool):
    """One matching turn: unmatched fragments of `turn_color` propose to
    their supergraph parent; an unmatched parent accepts the minimum
    fragment id (6 blocks)."""
    ldt = st.ldt
    proposing = (st.color == turn_color and not st.matched and not sg_root)
    per_port = {}
    if proposing and st.moe[1] == ctx.node_id:
        per_port = {st.moe[2]: (ldt.fragment_id,)}
    got = yield from transmit_adjacent(ctx, ldt, cur.take(), s,
                                       per_port=per_port)
    prop = None
    for port in st.incoming:
        if port in got and got[port][1] is not None:
            fid = got[port][1][0]
            if prop is None or fid < prop:
                prop = fid
    prop = (prop,) if prop is not None else None
    prop = yield from upcast_min(ctx, ldt, cur.take(), s, prop)
    winner = None
    if ldt.is_root and not st.matched and prop is not None:
        winner = prop[0]
    body = (winner,) if ldt.is_root else None
    down = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
    winner = down[0] if down is not None else None
    if winner is not None:
        st.matched = True  # accepted a child: we are the pair parent

    per_port = {port: (winner,) for port in st.incoming}
    got = yield from transmit_adjacent(ctx, ldt, cur.take(), s,
                                       per_port=per_port)
    outcome = None
    if proposing and st.moe[1] == ctx.node_id:
        reply = got.get(st.moe[2])
        accepted = bool(reply and reply[1] is not None
                        and reply[1][0] == ldt.fragment_id)
        outcome = (1 if accepted else 0,)
    outcome = yield from upcast_min(ctx, ldt, cur.take(), s, outcome)
    body = outcome if ldt.is_root else None
    outcome = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
    if proposing and outcome == (1,):
        st.matched = True
        st.pair_child = True


def ghs_phase(ctx, st: TradeState, base: int, i: int, N: int):
    s = ghs_s(i)
    L = block_length(s)
    ldt = st.ldt
    cur = _Cursor(base, L)
    fid_start = ldt.fragment_id

    # participation: propagate the maximum root distance, root decides
    top = yield from upcast_min(ctx, ldt, cur.take(), s, (-ldt.level,))
    height = -top[0]
    body = None
    if ldt.is_root:
        body = (1 if height <= 2**i else 0, height)
    body = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
    st.participating = body[0] == 1
    height = body[1]

    # global announce: every node advertises (fragment id, participation)
    announce_block = cur.take()
    if st.participating:
        yield from fragment_broadcast(ctx, ldt, announce_block, s, None)
    got = yield from transmit_adjacent(ctx, ldt, announce_block, s,
                                       default=(1 if st.participating else 0,))
    st.nbr_fids = {port: fid for port, (fid, _b) in got.items()}
    st.nbr_part = {port: body[0] == 1 for port, (_f, body) in got.items()}

    st.color = None
    st.matched = False
    st.pair_child = False
    merged_wave = 0

    if st.participating:
        cand = None
        for port, w in ctx.ports:
            if port in st.nbr_fids:
                entry = (w, ctx.node_id, port, st.nbr_fids[port])
                if cand is None or entry < cand:
                    cand = entry
        sub = yield from upcast_min(ctx, ldt, cur.take(), s, cand)
        body = sub if ldt.is_root else None
        moe = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
        if moe is None:
            st.spanning = True
            return
        st.moe = moe

        # MOE markers: targets learn child edges, origins detect mutual pairs
        per_port = None
        is_origin = moe[1] == ctx.node_id
        if is_origin:
            per_port = {moe[2]: True}
        got = yield from transmit_adjacent(ctx, ldt, cur.take(), s,
                                           per_port=per_port)
        st.incoming = {port: fid for port, (fid, body) in got.items()
                       if body is True and st.nbr_part.get(port)}
        mutual = is_origin and moe[2] in st.incoming

        info = None
        if is_origin:
            target_part = st.nbr_part.get(moe[2], False)
            info = (1 if mutual else 0, moe[3], 1 if target_part else 0)
        info = yield from upcast_min(ctx, ldt, cur.take(), s, info)
        body = info if ldt.is_root else None
        info = yield from fragment_broadcast(ctx, ldt, cur.take(), s, body)
        mutual, parent_fid, parent_part = info[0] == 1, info[1], info[2] == 1
        sg_root = (not parent_part) or (mutual and ldt.fragment_id < parent_fid)

        # 3-coloring of the rooted supergraph tree: bit reduction, then
        # eliminate classes 5, 4, 3 by shift-down plus recolor
        color = ldt.fragment_id
        for _ in range(cv_iterations(N)):
            pcolor = yield from _exchange_parent(ctx, st, cur, s, color)
            if sg_root:
                pcolor = 0 if color != 0 else 1
            color = _cv_color(color, pcolor)
        assert color < 6
        for cls in (5, 4, 3):
            pcolor = yield from _exchange_parent(ctx, st, cur, s, color)
            prev = color
            if sg_root:
                color = min(c for c in range(3) if c != color % 3)
            else:
                color = pcolor
            pnow = yield from _exchange_parent(ctx, st, cur, s, color)
            if color == cls:
                color = min(c for c in range(3) if c not in (pnow, prev))
        st.color = color
        assert color in (0, 1, 2)

        for turn in (0, 1, 2):
            yield from _propose_round(ctx, st, cur, s, turn, sg_root)
    else:
        cur.take(5 + 3 * cv_iterations(N) + 18 + 18)  # sleep through them

    # wave A: matched pair children re-orient into their pair parent
    is_tails = st.participating and st.pair_child
    moe_port = None
    skip_up = False
    if is_tails:
        skip_up = st.moe[1] == ldt.fragment_id
        if st.moe[1] == ctx.node_id:
            moe_port = st.moe[2]
    attaches, _ = yield from merging_fragments(
        ctx, ldt, cur.take(3), s, is_tails=is_tails, moe_port=moe_port,
        skip_up=skip_up, join_side=st.participating)
    st.mst_ports |= attaches
    if moe_port is not None:
        st.mst_ports.add(moe_port)
        merged_wave = 1
    elif is_tails:
        merged_wave = 1

    # global refresh so wave-B tails see post-wave-A ids and levels
    refreshed = yield from transmit_adjacent(ctx, ldt, cur.take(), s,
                                             default=(ldt.level,))

    # wave B: unmatched participants merge along their MOE (its target is
    # matched or non-participating, never another unmatched participant)
    is_tails2 = st.participating and not st.matched
    moe_port2 = None
    skip_up2 = False
    if is_tails2:
        skip_up2 = st.moe[1] == ldt.fragment_id
        if st.moe[1] == ctx.node_id:
            moe_port2 = st.moe[2]
    attaches2, target2 = yield from merging_fragments(
        ctx, ldt, cur.take(3), s, is_tails=is_tails2, moe_port=moe_port2,
        skip_up=skip_up2)
    st.mst_ports |= attaches2
    if moe_port2 is not None:
        expect = refreshed.get(moe_port2)
        if expect is None or (expect[0], expect[1][0]) != target2:
            raise AssertionError("refresh and wave-B merge disagree on target")
        st.mst_ports.add(moe_port2)
    if is_tails2:
        merged_wave = 2

    st.phase_log.append(GhsPhaseLog(
        phase=i, fragment_id=fid_start, participating=st.participating,
        height=height, color=st.color, matched=st.matched,
        pair_child=st.pair_child, merged_wave=merged_wave))


# --- stage three: pipelined upcast/downcast over the BFS tree --------------

def pipeline(ctx, st: TradeState, tl: Timeline, depth: int, parent_port,
             bfs_children, edges0):
    import heapq

    budget = tl.budget
    q = list(edges0)
    heapq.heapify(q)
    dsu = DisjointSets()
    collected = set(edges0)
    start = tl.stage3_start + tl.D - depth
    inbox = yield (start, [])

    def absorb(msgs):
        for m in msgs:
            p = m.payload
            if isinstance(p, tuple) and p[0] == T_PIPE_UP \
                    and m.src_port in bfs_children:
                edge = p[1:]
                heapq.heappush(q, edge)
                collected.add(edge)

    absorb(inbox)
    for j in range(1, budget + 1):
        sends = []
        if parent_port is not None:
            while q:
                edge = heapq.heappop(q)
                fa, fb = edge[3], edge[4]
                dsu.add(fa)
                dsu.add(fb)
                if dsu.union(fa, fb):
                    sends = [(parent_port, (T_PIPE_UP,) + edge)]
                    st.stage3_sent += 1
                    break
        inbox = yield (start + j, sends)
        absorb(inbox)
    if parent_port is not None:
        while q:
            edge = heapq.heappop(q)
            dsu.add(edge[3])
            dsu.add(edge[4])
            if dsu.union(edge[3], edge[4]):
                raise BudgetExceeded(
                    f"node {ctx.node_id} still holds edge {edge} at window end")

    chosen = []
    if parent_port is None:
        picker = DisjointSets()
        for edge in sorted(collected):
            picker.add(edge[3])
            picker.add(edge[4])
            if picker.union(edge[3], edge[4]):
                chosen.append(edge)
        st.pipeline_collected = collected
        st.pipeline_chosen = chosen

    # mirrored downcast: forward one chosen edge per round toward the leaves
    pending = list(chosen)
    forwarded = 0
    start = tl.downcast_start + depth
    weight_to_port = {w: p for p, w in ctx.ports}
    for j in range(budget + 2):
        sends = []
        if j >= 1 and forwarded < len(pending):
            edge = pending[forwarded]
            forwarded += 1
            sends = [(p, (T_PIPE_DOWN,) + edge) for p in sorted(bfs_children)]
        inbox = yield (start + j, sends)
        for m in inbox:
            p = m.payload
            if isinstance(p, tuple) and p[0] == T_PIPE_DOWN \
                    and m.src_port == parent_port:
                edge = p[1:]
                pending.append(edge)
                if ctx.node_id in (edge[1], edge[2]):
                    st.mst_ports.add(weight_to_port[edge[0]])
    if forwarded < len(pending):
        raise BudgetExceeded(
            f"node {ctx.node_id} could not forward all chosen edges down")
    for edge in chosen:
        if ctx.node_id in (edge[1], edge[2]):
            st.mst_ports.add(weight_to_port[edge[0]])


# --- whole-algorithm node program ------------------------------------------

def node_main(ctx, tl: Timeline, seed, mode: str, charge: int, grant=None):
    st = TradeState(ldt=LdtState(fragment_id=ctx.node_id))
    ctx.state = st

    if mode == "flood":
        depth, parent_port, bfs_children = yield from le_bfs_flood(
            ctx, tl.n, tl.D, seed)
    else:
        depth, parent_port, bfs_children = grant
        for r in range(1, min(charge, stage1_rounds(tl.D)) + 1):
            yield (r, [])
    st.bfs_depth = depth

    for i in range(1, tl.k + 1):
        if st.spanning:
            break
        yield from ghs_phase(ctx, st, tl.phase_start(i), i, tl.N)

    edges0 = []
    if not st.spanning:
        got = yield from transmit_adjacent(
            ctx, st.ldt, tl.final_refresh, ghs_s(tl.k), default=(ctx.node_id,))
        for port, (fid, body) in got.items():
            w = dict(ctx.ports)[port]
            a, b = sorted((ctx.node_id, body[0]))
            fa, fb = sorted((st.ldt.fragment_id, fid))
            edges0.append((w, a, b, fa, fb))
        yield from pipeline(ctx, st, tl, depth, parent_port, bfs_children,
                            edges0)

    ctx.finish_round = tl.end
    return {"mst_ports": sorted(st.mst_ports)}


def useful_k_range(n: int, D: int) -> tuple[int, int]:
    lo = max(math.ceil(0.5 * math.log2(n)), math.ceil(math.log2(max(2, D))))
    return lo, math.ceil(math.log2(n))


def run_tradeoff_mst(g: WeightedGraph, k: int, *, mode: str = "oracle",
                     seed=0, budget: int | None = None, validate: bool = False,
                     fast_forward: bool = True, trace=None,
                     max_retries: int = 5,
                     max_rounds: int | None = None) -> AlgoRun:
    if mode not in ("oracle", "flood"):
        raise ValueError("mode must be 'oracle' or 'flood'")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = g.n
    D = hop_diameter(g)
    lo, hi = useful_k_range(n, D)
    if not (lo <= k <= hi):
        warnings.warn(f"k={k} outside the useful trade-off range [{lo}, {hi}]",
                      stacklevel=2)
    budget = default_budget(n, k) if budget is None else budget
    charge = math.ceil(math.log2(n)) ** 2

    attempt_seed = seed
    for attempt in range(max_retries):
        try:
            return _run_once(g, k, mode, attempt_seed, budget, charge, D,
                             validate, fast_forward, trace, max_rounds)
        except RankCollision:
            attempt_seed = f"{seed}:retry:{attempt + 1}"
    raise RankCollision(f"leader election kept colliding after {max_retries} tries")


def _run_once(g, k, mode, seed, budget, charge, D, validate, fast_forward,
              trace, max_rounds=None) -> AlgoRun:
    n = g.n
    tl = Timeline(n=n, N=g.N, D=D, k=k, budget=budget)
    grant = None
    grants = None
    if mode == "oracle":
        leader, depth, parent_port, children = grant_le_bfs(g, seed)
        grants = [(depth[u], parent_port[u], children[u]) for u in range(n)]

    cfg = engine.EngineConfig(
        congestion_bits=engine.default_congestion_bits(g.N),
        max_rounds=max_rounds if max_rounds is not None else tl.end + 1,
        seed=seed, fast_forward=fast_forward, trace=trace)

    trajectory: list[int] = [n]
    stage_snaps: dict[str, list[int]] = {}

    def count_probe(_r, ctxs, awake):
        if trajectory[-1] != 1:
            trajectory.append(len({c.state.ldt.fragment_id for c in ctxs}))
            if validate:
                validate_ldt_forest(g, [c.state.ldt for c in ctxs])

    def snap(name):
        def probe(_r, _ctxs, awake):
            stage_snaps[name] = list(awake)
        return probe

    probes = [(tl.phase_start(i + 1) - 1, count_probe) for i in range(1, k + 1)]
    probes.append((stage1_rounds(D), snap("le_bfs")))
    probes.append((tl.stage3_start - 1, snap("controlled_ghs")))
    probes.append((tl.end, snap("pipeline")))

    def factory(ctx):
        return node_main(ctx, tl, seed, mode, charge,
                         grant=grants[ctx.idx] if grants else None)

    result = engine.run(g, factory, cfg, probes=probes)
    metrics = result.metrics
    metrics.fragment_trajectory = trajectory
    metrics.phases = k
    zero = [0] * n
    le = stage_snaps.get("le_bfs", zero)
    ghs = stage_snaps.get("controlled_ghs", le)
    fin = stage_snaps.get("pipeline", metrics.awake_rounds)
    metrics.stage_awake = {
        "le_bfs": le,
        "controlled_ghs": [b - a for a, b in zip(le, ghs)],
        "pipeline": [b - a for a, b in zip(ghs, fin)],
    }
    edge_set = edgeset_from_outputs(g, result.outputs)
    return AlgoRun(edge_set=edge_set, metrics=metrics, result=result)
