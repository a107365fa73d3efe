"""Awake-optimal randomized MST: GHS-style phases where per-phase coin flips
prune MOEs to tails-fragment -> heads-fragment edges, so merge groups are
stars and re-orientation takes O(1) awake rounds.

Every phase spends exactly PHASE_BLOCKS blocks of 2n+1 rounds, so the total
round count has the closed form phases * PHASE_BLOCKS * (2n+1).  Fragments
that learn they span the graph (their MOE search upcasts the empty sentinel)
skip all remaining blocks and phases; fragment count can never grow, so only
a spanning fragment ever goes quiet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random

from . import engine
from .graph import WeightedGraph, EdgeSet
from .ldt import (LdtState, block_length, fragment_broadcast, merging_fragments,
                  transmit_adjacent, upcast_min, validate_ldt_forest)
from .metrics import Metrics

HEADS, TAILS = 1, 0

# blocks per phase: step (i) uses 4 (broadcast + announce, upcast, broadcast,
# adjacent), step (ii) uses 4 (broadcast coin, adjacent, upcast, broadcast),
# step (iii) uses 3 (adjacent + two schedule instances of the merge).
PHASE_BLOCKS = 11

# Worst-case awake rounds one node can spend in one phase, counted slot by
# slot over the block list above; frozen as a regression constant.
AWAKE_PER_PHASE_BOUND = 20


def phase_count(n: int) -> int:
    return 4 * math.ceil(math.log(n) / math.log(4 / 3)) + 1


def schedule_end(n: int, phases: int) -> int:
    return phases * PHASE_BLOCKS * block_length(n)


def coin_flip(seed, phase: int, fragment_id: int) -> int:
    """The fragment root's fair coin, stream-split for reproducibility."""
    return HEADS if Random(f"{seed}:coin:{phase}:{fragment_id}").random() < 0.5 else TAILS


@dataclass
class Moe:
    """Fragment-wide knowledge of the minimum outgoing edge."""
    w: int
    origin_id: int
    origin_port: int
    target_fid: int

    def as_tuple(self):
        return (self.w, self.origin_id, self.origin_port, self.target_fid)


@dataclass
class NodeState:
    ldt: LdtState
    mst_ports: set[int] = field(default_factory=set)
    nbr_fids: dict[int, int] = field(default_factory=dict)
    incoming: dict[int, int] = field(default_factory=dict)  # port -> sender fid
    moe: Moe | None = None
    moe_mutual: bool = False
    coin: int | None = None
    spanning: bool = False
    phase: int = 0


def find_fragment_moe(ctx, st: NodeState, base: int, s: int):
    """Step (i): four blocks ending with every fragment node knowing the MOE.

    Block 1's broadcast carries the go-find-the-MOE token and its globally
    synchronized Side slot doubles as the per-phase fragment-id announcement
    every node needs to classify its incident edges as outgoing.  Block 4
    sends a marker over the MOE edge so the target fragment learns about the
    incoming MOE (and the origin detects a mutual MOE pair).
    """
    ldt = st.ldt
    L = block_length(s)
    yield from fragment_broadcast(ctx, ldt, base, s, None)
    got = yield from transmit_adjacent(ctx, ldt, base, s, default=None)
    st.nbr_fids = {port: fid for port, (fid, _body) in got.items()}

    cand = None
    for port, w in ctx.ports:
        if port in st.nbr_fids:
            entry = (w, ctx.node_id, port, st.nbr_fids[port])
            if cand is None or entry < cand:
                cand = entry
    sub = yield from upcast_min(ctx, ldt, base + L, s, cand)

    body = sub if ldt.is_root else None
    moe_msg = yield from fragment_broadcast(ctx, ldt, base + 2 * L, s, body)
    st.moe = Moe(*moe_msg) if moe_msg is not None else None
    if st.moe is None:
        st.spanning = True
        return

    per_port = None
    if st.moe.origin_id == ctx.node_id:
        per_port = {st.moe.origin_port: True}
    got = yield from transmit_adjacent(ctx, ldt, base + 3 * L, s, per_port=per_port)
    st.incoming = {port: fid for port, (fid, body) in got.items() if body is True}
    st.moe_mutual = (st.moe.origin_id == ctx.node_id
                     and st.moe.origin_port in st.incoming)


def node_main(ctx, n: int, seed, phases: int):
    st = NodeState(ldt=LdtState(fragment_id=ctx.node_id))
    ctx.state = st
    s = n
    L = block_length(s)
    finish = schedule_end(n, phases)

    for phase in range(1, phases + 1):
        st.phase = phase
        base = (phase - 1) * PHASE_BLOCKS * L + 1
        ldt = st.ldt

        yield from find_fragment_moe(ctx, st, base, s)
        if st.spanning:
            break

        # step (ii): coin flip, exchange, validity up and back down
        coin = coin_flip(seed, phase, ldt.fragment_id) if ldt.is_root else None
        st.coin = yield from fragment_broadcast(ctx, ldt, base + 4 * L, s, coin)
        got = yield from transmit_adjacent(ctx, ldt, base + 5 * L, s,
                                           default=(st.coin,))
        flag = None
        is_origin = st.moe.origin_id == ctx.node_id
        if is_origin:
            target = got.get(st.moe.origin_port)
            valid = (st.coin == TAILS and target is not None
                     and target[1][0] == HEADS)
            flag = (0 if valid else 1,)
        flag = yield from upcast_min(ctx, ldt, base + 6 * L, s, flag)
        body = flag if ldt.is_root else None
        flag = yield from fragment_broadcast(ctx, ldt, base + 7 * L, s, body)
        moe_valid = flag == (0,)

        # step (iii): merge stars of tails fragments into their heads fragment
        is_tails = moe_valid  # validity already implies our coin was tails
        moe_port = st.moe.origin_port if (is_tails and is_origin) else None
        skip_up = is_tails and st.moe.origin_id == ldt.fragment_id
        attaches, _target = yield from merging_fragments(
            ctx, ldt, base + 8 * L, s,
            is_tails=is_tails, moe_port=moe_port, skip_up=skip_up)
        if attaches and st.coin != HEADS:
            raise AssertionError("tails fragment received an attach request")
        st.mst_ports |= attaches
        if is_tails and is_origin:
            st.mst_ports.add(st.moe.origin_port)

    ctx.finish_round = finish
    return {"mst_ports": sorted(st.mst_ports)}


def edgeset_from_outputs(g: WeightedGraph, outputs) -> EdgeSet:
    """Collect per-node MST port sets into a canonical EdgeSet, checking that
    both endpoints of every committed edge agree."""
    claims: dict[tuple[int, int], set[int]] = {}
    for idx, out in enumerate(outputs):
        for port in out["mst_ports"]:
            claims.setdefault(g.edge_key(idx, port), set()).add(idx)
    for (u, v), endpoints in claims.items():
        if endpoints != {u, v}:
            raise AssertionError(f"edge ({u},{v}) committed by one endpoint only")
    return frozenset(claims)


@dataclass
class AlgoRun:
    edge_set: EdgeSet
    metrics: Metrics
    result: engine.RunResult


def _phase_probes(g, phase_end_rounds, trajectory, phase_awake, validate):
    """Build engine probes recording F_i and per-phase awake deltas."""
    probes = []

    def make(_round):
        def probe(_r, ctxs, awake):
            if trajectory and trajectory[-1] == 1:
                return  # fragment count is 1 forever once the MST spans
            trajectory.append(len({c.state.ldt.fragment_id for c in ctxs}))
            phase_awake.append(list(awake))
            if validate:
                validate_ldt_forest(g, [c.state.ldt for c in ctxs])
        return probe

    for r in phase_end_rounds:
        probes.append((r, make(r)))
    return probes


def run_randomized_mst(g: WeightedGraph, seed, *, phase_override: int | None = None,
                       validate: bool = False, fast_forward: bool = True,
                       trace=None, max_rounds: int | None = None) -> AlgoRun:
    n = g.n
    phases = phase_override if phase_override is not None else phase_count(n)
    end = schedule_end(n, phases)
    cfg = engine.EngineConfig(
        congestion_bits=engine.default_congestion_bits(g.N),
        max_rounds=max_rounds if max_rounds is not None else end + 1,
        seed=seed, fast_forward=fast_forward, trace=trace)

    trajectory: list[int] = [n]
    phase_awake_snaps: list[list[int]] = []
    L = block_length(n)
    ends = [p * PHASE_BLOCKS * L for p in range(1, phases + 1)]
    probes = _phase_probes(g, ends, trajectory, phase_awake_snaps, validate)

    result = engine.run(
        g, lambda ctx: node_main(ctx, n=n, seed=seed, phases=phases), cfg,
        probes=probes)

    metrics = result.metrics
    metrics.fragment_trajectory = trajectory
    metrics.phases = phases
    prev = [0] * n
    deltas = []
    for snap in phase_awake_snaps:
        deltas.append([b - a for a, b in zip(prev, snap)])
        prev = snap
    metrics.phase_awake = deltas
    edge_set = edgeset_from_outputs(g, result.outputs)
    return AlgoRun(edge_set=edge_set, metrics=metrics, result=result)
