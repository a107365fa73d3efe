"""Sleeping-model synchronous CONGEST engine.

Each node runs a Python generator.  A node yields ``(round, sends)`` to say
"I will be awake in `round` and transmit `sends` (a list of (port, payload))
during its send step"; the engine resumes the generator with the list of
Messages the node received in that round.  Returning from the generator
terminates the node; the return value is the node's output.

Round structure: all awake nodes' send steps run first, then messages are
filtered by mutual awakeness (a message sent on an edge in round r is
delivered iff both endpoints are awake in round r), then all awake nodes'
receive/compute steps run.  A sleeping node does nothing and receives
nothing.  Rounds where no node is awake can be skipped wholesale
(fast-forward); they still count toward round complexity.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from random import Random
from typing import Any, Callable, Iterator

from .graph import WeightedGraph
from .metrics import Metrics


class EngineError(Exception):
    pass


class CongestionViolation(EngineError):
    """A message, or one round's traffic on one edge direction, exceeded B bits."""


class NonTermination(EngineError):
    """The round cap was reached before every node terminated."""


@dataclass(frozen=True)
class Message:
    src_port: int          # port at the receiver on which the message arrived
    payload: Any
    bit_size: int


def payload_bits(payload) -> int:
    """Deterministic bit charge for a payload (ints, bools, None, tuples)."""
    if payload is None or isinstance(payload, bool):
        return 1
    if isinstance(payload, int):
        return payload.bit_length() + 1  # sign bit
    if isinstance(payload, tuple):
        return 2 + sum(payload_bits(x) for x in payload)
    raise TypeError(f"unsupported payload type {type(payload).__name__}")


def default_congestion_bits(N: int) -> int:
    """Default budget B = 128 * ceil(log2 N) bits."""
    return 128 * max(1, math.ceil(math.log2(N)))


@dataclass
class EngineConfig:
    congestion_bits: int
    max_rounds: int = 10**9
    seed: Any = 0
    drop_log: bool = False
    fast_forward: bool = True
    trace: Any = None  # writable file object for JSON-lines trace, or None

    def validate(self, N: int) -> None:
        if self.congestion_bits < max(1, math.ceil(math.log2(N))):
            raise EngineError("congestion budget below ceil(log2 N) bits")
        if self.max_rounds < 1:
            raise EngineError("max_rounds must be >= 1")


class NodeCtx:
    """Per-node view handed to a protocol factory.

    Protocol code must only rely on node_id, n, N, ports, and rng; idx exists
    for the harness (probes, output collection) and must not leak into
    protocol decisions.
    """

    __slots__ = ("idx", "node_id", "n", "N", "ports", "rng", "state", "finish_round")

    def __init__(self, idx: int, node_id: int, n: int, N: int,
                 ports: tuple[tuple[int, int], ...], rng: Random):
        self.idx = idx
        self.node_id = node_id
        self.n = n
        self.N = N
        self.ports = ports          # ((port, weight), ...)
        self.rng = rng
        self.state: Any = None      # protocols may expose state here for probes
        self.finish_round: int | None = None


@dataclass
class RunResult:
    outputs: list
    metrics: Metrics
    ctxs: list
    dropped: list


NodeFactory = Callable[[NodeCtx], Iterator]
Probe = tuple[int, Callable[[int, list], None]]


def run(g: WeightedGraph, factory: NodeFactory, cfg: EngineConfig,
        probes: list[Probe] | None = None) -> RunResult:
    cfg.validate(g.N)
    n = g.n
    ctxs = [
        NodeCtx(idx=i, node_id=g.node_ids[i], n=n, N=g.N,
                ports=g.port_weights(i),
                rng=Random(f"{cfg.seed}:node:{g.node_ids[i]}"))
        for i in range(n)
    ]
    gens = [factory(ctx) for ctx in ctxs]
    outputs: list = [None] * n
    finished: list[int | None] = [None] * n
    alive = n

    awake_rounds = [0] * n
    messages_sent = 0
    bits_sent = 0
    max_edge_round_bits = 0
    dropped: list[tuple[int, int, int]] = []

    pending_sends: list = [None] * n
    heap: list[tuple[int, int]] = []

    def advance(i: int, inbox: list[Message], at_round: int) -> None:
        nonlocal alive
        try:
            directive = gens[i].send(inbox)
        except StopIteration as stop:
            outputs[i] = stop.value
            fin = ctxs[i].finish_round
            finished[i] = at_round if fin is None else max(fin, at_round)
            alive -= 1
            return
        wake, sends = directive
        if wake <= at_round:
            raise EngineError(
                f"node {i} requested wake round {wake} not after round {at_round}")
        pending_sends[i] = sends
        heapq.heappush(heap, (wake, i))

    for i in range(n):
        advance(i, None, 0)  # prime: all nodes start awake "before round 1"

    probe_list = sorted(probes or [], key=lambda p: p[0])
    probe_pos = 0
    current = 0

    while alive > 0:
        next_round = heap[0][0]
        if next_round > cfg.max_rounds:
            raise NonTermination(
                f"{alive} nodes still running at round cap {cfg.max_rounds}")
        if cfg.fast_forward:
            current = next_round
        else:
            current += 1
            if current > cfg.max_rounds:
                raise NonTermination(
                    f"{alive} nodes still running at round cap {cfg.max_rounds}")
            if current < next_round:
                continue  # empty round: counted, no work

        # fire probes for skipped and current-round boundaries (state is
        # unchanged across empty rounds, so firing them here is equivalent)
        while probe_pos < len(probe_list) and probe_list[probe_pos][0] < current:
            r, fn = probe_list[probe_pos]
            fn(r, ctxs, awake_rounds)
            probe_pos += 1

        awake: list[int] = []
        while heap and heap[0][0] == current:
            awake.append(heapq.heappop(heap)[1])
        awake.sort()
        awake_set = set(awake)

        inboxes: dict[int, list[Message]] = {i: [] for i in awake}
        edge_bits: dict[tuple[int, int], int] = {}
        trace_sent: dict[int, list] = {i: [] for i in awake} if cfg.trace else {}

        for i in awake:
            for port, payload in pending_sends[i]:
                bits = payload_bits(payload)
                if bits > cfg.congestion_bits:
                    raise CongestionViolation(
                        f"round {current}: {bits}-bit message from node {i} "
                        f"port {port} exceeds budget {cfg.congestion_bits}")
                key = (i, port)
                edge_bits[key] = edge_bits.get(key, 0) + bits
                if edge_bits[key] > cfg.congestion_bits:
                    raise CongestionViolation(
                        f"round {current}: {edge_bits[key]} bits on edge from "
                        f"node {i} port {port} exceed budget {cfg.congestion_bits}")
                target = g.port_target(i, port)
                messages_sent += 1
                bits_sent += bits
                if target in awake_set:
                    inboxes[target].append(
                        Message(g.port_of(target, i), payload, bits))
                else:
                    if cfg.drop_log:
                        dropped.append((current, i, target))
                if cfg.trace is not None:
                    trace_sent[i].append({"to": target, "bits": bits})
        if edge_bits:
            max_edge_round_bits = max(max_edge_round_bits, max(edge_bits.values()))

        for i in awake:
            awake_rounds[i] += 1
            inbox = sorted(inboxes[i], key=lambda msg: msg.src_port)
            if cfg.trace is not None:
                cfg.trace.write(json.dumps({
                    "round": current, "node": i, "sent": trace_sent[i],
                    "received": [{"from": g.port_target(i, msg.src_port),
                                  "bits": msg.bit_size} for msg in inbox],
                }) + "\n")
            advance(i, inbox, current)

        while probe_pos < len(probe_list) and probe_list[probe_pos][0] == current:
            r, fn = probe_list[probe_pos]
            fn(r, ctxs, awake_rounds)
            probe_pos += 1

    # probes registered past the final round see the frozen final state
    while probe_pos < len(probe_list):
        r, fn = probe_list[probe_pos]
        fn(r, ctxs, awake_rounds)
        probe_pos += 1

    total_rounds = max([current] + [f for f in finished if f is not None])
    metrics = Metrics(
        n=n,
        awake_rounds=list(awake_rounds),
        total_rounds=total_rounds,
        messages_sent=messages_sent,
        bits_sent=bits_sent,
        max_edge_round_bits=max_edge_round_bits,
    )
    return RunResult(outputs=outputs, metrics=metrics, ctxs=ctxs, dropped=dropped)
