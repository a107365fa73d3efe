"""Labeled distance trees: fragment state, the transmission schedule, and the
O(1)-awake communication primitives shared by every MST algorithm here.

A fragment is a rooted oriented tree in which every node's level equals its
hop distance to the fragment root and the fragment id equals the root's node
ID.  All primitives operate inside a block of 2s+1 rounds; `s` bounds the
height of every participating fragment (height <= s-1 keeps the five slots
of the schedule collision free).  All fragments share block boundaries.

Primitives are generators compatible with the engine protocol: they yield
``(round, sends)`` pairs and are resumed with the inbox for that round, so
algorithm code composes them with ``yield from``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# schedule slot roles
DOWN_RECEIVE = "Down-Receive"
DOWN_SEND = "Down-Send"
SIDE_SEND_RECEIVE = "Side-Send-Receive"
UP_RECEIVE = "Up-Receive"
UP_SEND = "Up-Send"

# message tags (small ints keep the congestion charge low)
T_BCAST = 1
T_UP = 2
T_SIDE = 3
T_NBR_DOWN = 4
T_NBR_UP = 5
T_MERGE_UP = 6
T_MERGE_DOWN = 7

NOSEND = object()  # per-port sentinel: stay silent on this port


@dataclass(frozen=True)
class ScheduleSlot:
    round: int
    role: str


def transmission_schedule(level: int, is_root: bool, s: int,
                          start_round: int = 1) -> list[ScheduleSlot]:
    """Absolute awake rounds for a node at `level` in a block of 2s+1 rounds.

    Non-root at level i: offsets i, i+1, s+1, 2s-i+1, 2s-i+2.
    Root: offsets 1, s+1, 2s+1.
    """
    if level < 0 or level > s:
        raise ValueError(f"level {level} outside [0, {s}]")
    base = start_round - 1
    if is_root:
        return [
            ScheduleSlot(base + 1, DOWN_SEND),
            ScheduleSlot(base + s + 1, SIDE_SEND_RECEIVE),
            ScheduleSlot(base + 2 * s + 1, UP_RECEIVE),
        ]
    if level == 0:
        raise ValueError("non-root node cannot be at level 0")
    i = level
    return [
        ScheduleSlot(base + i, DOWN_RECEIVE),
        ScheduleSlot(base + i + 1, DOWN_SEND),
        ScheduleSlot(base + s + 1, SIDE_SEND_RECEIVE),
        ScheduleSlot(base + 2 * s - i + 1, UP_RECEIVE),
        ScheduleSlot(base + 2 * s - i + 2, UP_SEND),
    ]


def block_length(s: int) -> int:
    return 2 * s + 1


@dataclass
class LdtState:
    """Per-node fragment membership and orientation."""

    fragment_id: int
    level: int = 0
    parent_port: int | None = None
    children_ports: set[int] = field(default_factory=set)
    new_fragment_id: int | None = None
    new_level: int | None = None
    pend_parent: int | None = None
    pend_children: set[int] | None = None

    @property
    def is_root(self) -> bool:
        return self.parent_port is None

    def slots(self, s: int, start_round: int) -> dict[str, int]:
        return {sl.role: sl.round for sl in
                transmission_schedule(self.level, self.is_root, s, start_round)}

    def tree_ports(self) -> set[int]:
        ports = set(self.children_ports)
        if self.parent_port is not None:
            ports.add(self.parent_port)
        return ports


def _by_tag(inbox, tag):
    return [m for m in inbox if isinstance(m.payload, tuple) and m.payload[0] == tag]


def fragment_broadcast(ctx, ldt: LdtState, start: int, s: int, msg):
    """Root's msg reaches every fragment node; each node awake <= 2 rounds."""
    slots = ldt.slots(s, start)
    if not ldt.is_root:
        inbox = yield (slots[DOWN_RECEIVE], [])
        msg = None
        for m in _by_tag(inbox, T_BCAST):
            if m.src_port == ldt.parent_port and m.payload[1] == ldt.fragment_id:
                msg = m.payload[2]
    if ldt.children_ports:
        payload = (T_BCAST, ldt.fragment_id, msg)
        yield (slots[DOWN_SEND], [(p, payload) for p in sorted(ldt.children_ports)])
    return msg


def upcast_min(ctx, ldt: LdtState, start: int, s: int, value):
    """Propagate the minimum value (tuple ordering) to the root.

    `value` is a tuple or None; ties are impossible for distinct weights and
    otherwise break lexicographically by including an origin id in the tuple.
    Returns the subtree minimum (at the root: the fragment-wide minimum).
    """
    slots = ldt.slots(s, start)
    best = value
    if ldt.children_ports:
        inbox = yield (slots[UP_RECEIVE], [])
        for m in _by_tag(inbox, T_UP):
            if m.src_port in ldt.children_ports and m.payload[1] == ldt.fragment_id:
                got = m.payload[2]
                if got is not None and (best is None or got < best):
                    best = got
    if not ldt.is_root and best is not None:
        yield (slots[UP_SEND], [(ldt.parent_port, (T_UP, ldt.fragment_id, best))])
    return best


def transmit_adjacent(ctx, ldt: LdtState, start: int, s: int,
                      default=NOSEND, per_port: dict | None = None):
    """One globally synchronized Side-Send-Receive round (offset s+1).

    Sends `default` on every port (or the per_port override; NOSEND silences
    a port) and returns {port: (sender_fragment_id, body)} restricted to
    senders in other fragments.  Precondition: every fragment that must be
    heard runs the same block.
    """
    side = start - 1 + s + 1
    sends = []
    for port, _w in ctx.ports:
        body = default
        if per_port and port in per_port:
            body = per_port[port]
        if body is not NOSEND:
            sends.append((port, (T_SIDE, ldt.fragment_id, body)))
    inbox = yield (side, sends)
    got = {}
    for m in _by_tag(inbox, T_SIDE):
        if m.payload[1] != ldt.fragment_id:
            got[m.src_port] = (m.payload[1], m.payload[2])
    return got


def transmit_neighbor(ctx, ldt: LdtState, start: int, s: int, msg):
    """Each node passes msg to its tree parent and children; awake <= 4."""
    slots = ldt.slots(s, start)
    from_parent = None
    from_children: dict[int, object] = {}
    if not ldt.is_root:
        inbox = yield (slots[DOWN_RECEIVE], [])
        for m in _by_tag(inbox, T_NBR_DOWN):
            if m.src_port == ldt.parent_port and m.payload[1] == ldt.fragment_id:
                from_parent = m.payload[2]
    if ldt.children_ports:
        sends = []
        if msg is not None:
            payload = (T_NBR_DOWN, ldt.fragment_id, msg)
            sends = [(p, payload) for p in sorted(ldt.children_ports)]
        inbox = yield (slots[DOWN_SEND], sends)
        inbox = yield (slots[UP_RECEIVE], [])
        for m in _by_tag(inbox, T_NBR_UP):
            if m.src_port in ldt.children_ports and m.payload[1] == ldt.fragment_id:
                from_children[m.src_port] = m.payload[2]
    if not ldt.is_root:
        sends = []
        if msg is not None:
            sends = [(ldt.parent_port, (T_NBR_UP, ldt.fragment_id, msg))]
        yield (slots[UP_SEND], sends)
    return from_parent, from_children


def neighbor_awareness(ctx, ldt: LdtState, start: int, s: int, tuples):
    """Upcast-Min variant concatenating tuples; root gets all of them, sorted.

    Contributors hold at most 4 tuples each and a fragment carries at most 16
    in total, so the concatenation stays within the congestion budget.
    """
    slots = ldt.slots(s, start)
    collected = list(tuples)
    if ldt.children_ports:
        inbox = yield (slots[UP_RECEIVE], [])
        for m in _by_tag(inbox, T_UP):
            if m.src_port in ldt.children_ports and m.payload[1] == ldt.fragment_id:
                collected.extend(m.payload[2])
    collected = sorted(set(collected))
    if not ldt.is_root and collected:
        payload = (T_UP, ldt.fragment_id, tuple(collected))
        yield (slots[UP_SEND], [(ldt.parent_port, payload)])
    return tuple(collected)


def merging_fragments(ctx, ldt: LdtState, start: int, s: int, *,
                      is_tails: bool, moe_port: int | None = None,
                      skip_up: bool = False, join_side: bool = True):
    """Merge re-orienting tails fragments into heads fragments (three blocks).

    Block 1 is a Transmit-Adjacent exchanging (level, attach?) on every port;
    the tails MOE endpoint flags its MOE port so the heads endpoint learns its
    new child.  Blocks 2 and 3 are two transmission-schedule instances over
    the OLD tails tree: an upward pass fills NEW-LEVEL/NEW-FRAGMENT-ID (and
    the child-becomes-parent reorientation) along the MOE-endpoint-to-root
    path, then a downward pass fills the remaining nodes.  Temporaries apply
    only after the passes, keeping old-tree semantics throughout.

    Returns (attach_ports, target) where target is (fragment_id, level) of
    the heads endpoint, known only at the tails MOE endpoint.
    """
    attach_ports: set[int] = set()
    target = None
    if join_side:
        per_port = None
        if is_tails and moe_port is not None:
            per_port = {moe_port: (ldt.level, True)}
        got = yield from transmit_adjacent(
            ctx, ldt, start, s, default=(ldt.level, False), per_port=per_port)
        for port, (fid, body) in got.items():
            if body[1]:
                attach_ports.add(port)
        if attach_ports and is_tails:
            raise AssertionError(
                "re-orienting fragment received an attach request; merge "
                "groups must be stars around a heads fragment")
        if is_tails and moe_port is not None:
            if moe_port not in got:
                raise AssertionError("tails MOE endpoint heard nothing from heads")
            fid, body = got[moe_port]
            target = (fid, body[0])
            ldt.new_fragment_id = fid
            ldt.new_level = body[0] + 1
            ldt.pend_parent = moe_port
            ldt.pend_children = ldt.tree_ports()

    up_start = start + block_length(s)
    down_start = start + 2 * block_length(s)

    if is_tails and not skip_up:
        slots = ldt.slots(s, up_start)
        if ldt.new_level is None and ldt.children_ports:
            inbox = yield (slots[UP_RECEIVE], [])
            senders = [m for m in _by_tag(inbox, T_MERGE_UP)
                       if m.src_port in ldt.children_ports
                       and m.payload[1] == ldt.fragment_id]
            if len(senders) > 1:
                raise AssertionError("two children claim the reorientation path")
            for m in senders:
                lvl, nfid = m.payload[2]
                ldt.new_level = lvl + 1
                ldt.new_fragment_id = nfid
                ldt.pend_parent = m.src_port
                ldt.pend_children = ldt.tree_ports() - {m.src_port}
        if ldt.new_level is not None and not ldt.is_root:
            payload = (T_MERGE_UP, ldt.fragment_id,
                       (ldt.new_level, ldt.new_fragment_id))
            yield (slots[UP_SEND], [(ldt.parent_port, payload)])

    if is_tails:
        slots = ldt.slots(s, down_start)
        if ldt.new_level is None:
            inbox = yield (slots[DOWN_RECEIVE], [])
            for m in _by_tag(inbox, T_MERGE_DOWN):
                if m.src_port == ldt.parent_port and m.payload[1] == ldt.fragment_id:
                    lvl, nfid = m.payload[2]
                    ldt.new_level = lvl + 1
                    ldt.new_fragment_id = nfid
        if ldt.children_ports and ldt.new_level is not None:
            payload = (T_MERGE_DOWN, ldt.fragment_id,
                       (ldt.new_level, ldt.new_fragment_id))
            yield (slots[DOWN_SEND],
                   [(p, payload) for p in sorted(ldt.children_ports)])

    apply_merge(ldt, attach_ports)
    return attach_ports, target


def apply_merge(ldt: LdtState, attach_ports=()) -> None:
    """Commit NEW-FRAGMENT-ID / NEW-LEVEL-NUM and any reorientation, then
    clear the temporaries; also adopt children gained through attaches."""
    if ldt.new_fragment_id is not None:
        ldt.fragment_id = ldt.new_fragment_id
        ldt.level = ldt.new_level
        if ldt.pend_parent is not None:
            ldt.parent_port = ldt.pend_parent
            ldt.children_ports = set(ldt.pend_children or ())
    ldt.children_ports |= set(attach_ports)
    ldt.new_fragment_id = None
    ldt.new_level = None
    ldt.pend_parent = None
    ldt.pend_children = None


def validate_ldt_forest(g, ldts: list[LdtState]) -> None:
    """Check every LdtState invariant across the whole graph.

    Parent/children pointers must be mutually consistent along edges, each
    fragment must be one rooted tree whose root has level 0 and whose id is
    the root's node ID, and every node's level must equal its hop distance to
    the root along parent pointers.  Raises AssertionError on any violation.
    """
    roots: dict[int, int] = {}
    for u, st in enumerate(ldts):
        if st.new_fragment_id is not None or st.new_level is not None:
            raise AssertionError(f"node {u} holds uncommitted merge temporaries")
        if st.parent_port is None:
            if st.level != 0:
                raise AssertionError(f"root {u} has nonzero level {st.level}")
            if st.fragment_id != g.node_ids[u]:
                raise AssertionError(f"fragment id at root {u} is not its own ID")
            if st.fragment_id in roots:
                raise AssertionError(
                    f"fragment {st.fragment_id} has two roots: "
                    f"{roots[st.fragment_id]} and {u}")
            roots[st.fragment_id] = u
        else:
            v = g.port_target(u, st.parent_port)
            pst = ldts[v]
            if pst.fragment_id != st.fragment_id:
                raise AssertionError(f"edge ({u},{v}) joins different fragments")
            if g.port_of(v, u) not in pst.children_ports:
                raise AssertionError(f"parent {v} does not list {u} as a child")
            if st.level != pst.level + 1:
                raise AssertionError(
                    f"node {u} level {st.level} != parent level {pst.level} + 1")
        for port in st.children_ports:
            v = g.port_target(u, port)
            if ldts[v].parent_port != g.port_of(v, u):
                raise AssertionError(f"child {v} does not point back at {u}")

    # every fragment must have a root and be fully reachable from it
    seen = [False] * g.n
    for fid, root in roots.items():
        stack = [root]
        while stack:
            u = stack.pop()
            if seen[u]:
                raise AssertionError(f"node {u} reached twice; cycle in fragment {fid}")
            seen[u] = True
            for port in ldts[u].children_ports:
                stack.append(g.port_target(u, port))
    if not all(seen):
        missing = seen.index(False)
        raise AssertionError(f"node {missing} unreachable from any fragment root")
