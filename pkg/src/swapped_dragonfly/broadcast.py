"""Spanning-tree broadcasts: depth-three and depth-four trees, delegation, pipelining.

Depth three, header ``[3;*,*,*]``::

    (c,d,p) -l-> (c,d,*) -g-> (*,*,d) -l-> (*,*,*)

Depth four, header ``[4;*,*,*]``, one tree per root ``(c,d,p)`` of a drawer::

    (c,d,p) -g-> (*,p,d) -l-> (*,p,*) -0-> (*,*,p) -l-> (*,*,*)

A tree keeps, for every router, the first channel that reaches it, so it has
KM^2 - 1 edges. Schedules carry the full header traffic, which includes the
copies a tree prunes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .engine import SimReport, TimedSchedule, simulate
from .routing import WILD, SyncHeader, TreeEdge, expand_broadcast_header
from .topology import Channel, RouterCoord, Topology

DEPTH3 = SyncHeader(3, WILD, WILD, WILD, broadcast=True)
DEPTH4 = SyncHeader(4, WILD, WILD, WILD, broadcast=True)


@dataclass
class SpanningTreeSpec:
    root: RouterCoord
    depth: int
    levels: List[List[Channel]]
    traffic: List[List[TreeEdge]] = field(repr=False, default_factory=list)

    def channels(self) -> Set[Channel]:
        return {ch for level in self.levels for ch in level}

    def covered(self) -> Set[RouterCoord]:
        return {self.root} | {ch.dst for ch in self.channels()}

    def in_degrees(self) -> Dict[RouterCoord, int]:
        deg: Dict[RouterCoord, int] = {}
        for ch in self.channels():
            deg[ch.dst] = deg.get(ch.dst, 0) + 1
        return deg

    def is_spanning_tree(self, t: Topology) -> bool:
        deg = self.in_degrees()
        return (
            self.covered() == set(t.routers)
            and len(self.channels()) == len(t) - 1
            and self.root not in deg
            and all(v == 1 for v in deg.values())
        )

    @property
    def level_widths(self) -> List[int]:
        """Routers holding the message after each level of header traffic."""
        return [len({e.dst for e in level}) for level in self.traffic]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh)
        w.writerow(["level", "from", "to", "class", "port"])
        for i, level in enumerate(self.levels):
            for ch in sorted(level):
                w.writerow([i + 1, str(ch.src), str(ch.dst), ch.kind, ch.port])


def _tree(t: Topology, root: RouterCoord, header: SyncHeader) -> SpanningTreeSpec:
    traffic = expand_broadcast_header(t, root, header)
    reached = {root}
    levels = []
    for level in traffic:
        kept = []
        for e in level:
            if e.channel is not None and e.dst not in reached:
                kept.append(e.channel)
                reached.add(e.dst)
        levels.append(kept)
    return SpanningTreeSpec(root, header.b, levels, traffic)


def depth3_tree(t: Topology, root: RouterCoord) -> SpanningTreeSpec:
    return _tree(t, RouterCoord(*root), DEPTH3)


def depth4_tree(t: Topology, root: RouterCoord) -> SpanningTreeSpec:
    return _tree(t, RouterCoord(*root), DEPTH4)


def depth4_trees(t: Topology, drawer: Tuple[int, int]) -> List[SpanningTreeSpec]:
    c, d = drawer
    return [depth4_tree(t, RouterCoord(c, d, p)) for p in t.drawers.elements()]


def shared_channels(trees: Sequence[SpanningTreeSpec]) -> Dict[Tuple[int, int], Set[Channel]]:
    """Directed channels common to each pair of trees (only non-empty pairs)."""
    sets = [tr.channels() for tr in trees]
    out = {}
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            common = sets[i] & sets[j]
            if common:
                out[(i, j)] = common
    return out


def edge_disjoint(trees: Sequence[SpanningTreeSpec]) -> bool:
    return not shared_channels(trees)


def level_disjoint(trees: Sequence[SpanningTreeSpec]) -> bool:
    """No channel is used by two trees at the same level (the concurrency condition)."""
    seen = set()
    for tr in trees:
        for i, level in enumerate(tr.traffic):
            for e in level:
                if e.channel is None:
                    continue
                key = (i, e.channel)
                if key in seen:
                    return False
                seen.add(key)
    return True


# -- schedules ----------------------------------------------------------------


@dataclass
class BroadcastRun:
    schedule: TimedSchedule
    report: SimReport
    received: Dict[RouterCoord, Set[object]]
    levels: int
    cost: Dict[str, float] = field(default_factory=dict)

    def complete(self, t: Topology, messages: Sequence[object]) -> bool:
        want = set(messages)
        return all(self.received.get(r, set()) == want for r in t.routers)


def _launch(sched: TimedSchedule, received, tree: SpanningTreeSpec, msg, base: int, tag) -> None:
    received.setdefault(tree.root, set()).add(msg)
    for i, level in enumerate(tree.traffic):
        for n, e in enumerate(level):
            received.setdefault(e.dst, set()).add(msg)
            if e.channel is not None:
                sched.add_path(tag + (i, n), e.src, [e.channel], base + i)
    sched.total_slots = max(sched.total_slots, base + len(tree.traffic))


def _run(t: Topology, sched: TimedSchedule, received, levels: int, cost=None) -> BroadcastRun:
    return BroadcastRun(sched, simulate(t, sched), received, levels, cost or {})


def broadcast_depth3(t: Topology, root: RouterCoord, msg: object = 0) -> BroadcastRun:
    sched, received = TimedSchedule(rounds=1), {}
    _launch(sched, received, depth3_tree(t, root), msg, 0, ("m", msg))
    return _run(t, sched, received, 3)


def _delegate(sched, received, t: Topology, trees, source: RouterCoord, msgs: Dict[int, object], base: int, tag):
    """Local hop from ``source`` to each tree root at ``base``, trees from ``base + 1``."""
    for p, msg in msgs.items():
        received.setdefault(source, set()).add(msg)
        if p != source.p:
            sched.add_path(tag + ("del", p), source, [t.local(source, t.drawers.sub(p, source.p))], base)
        _launch(sched, received, trees[p], msg, base + 1, tag + ("tree", p))


def delegated_broadcast(
    t: Topology,
    source: RouterCoord,
    messages: Sequence[object],
    duplication: bool = True,
    t_w: float = 1.0,
    t_s: float = 1.0,
) -> BroadcastRun:
    """M broadcasts from one router: hand message i to ``(c, d, i)``, then run
    the M depth-four trees of the drawer together.

    With router duplication the cost is one node handling plus five hops;
    without it every hop is a node handling.
    """
    source = RouterCoord(*source)
    if len(messages) != t.M:
        raise ValueError(f"need exactly M={t.M} messages, got {len(messages)}")
    sched, received = TimedSchedule(rounds=1), {}
    trees = depth4_trees(t, (source.c, source.d))
    _delegate(sched, received, t, trees, source, dict(enumerate(messages)), 0, ())
    levels = 1 + DEPTH4.b
    cost = {"duplication": duplication, "time": t_s + levels * t_w if duplication else levels * t_s}
    return _run(t, sched, received, levels, cost)


def pipeline_depth3(t: Topology, root: RouterCoord, X: int) -> BroadcastRun:
    """X messages down one depth-three tree, a new one every slot."""
    root = RouterCoord(*root)
    if root.p == root.d:
        raise ValueError("stride-1 depth-three pipelining needs a root with p != d")
    if X < 1:
        raise ValueError("X must be positive")
    tree = depth3_tree(t, root)
    sched, received = TimedSchedule(rounds=X), {}
    for w in range(X):
        _launch(sched, received, tree, w, w, ("m", w))
    return _run(t, sched, received, 3)


def wave_offsets(waves: int, pair_offset: int = 1) -> List[int]:
    """Launch slots of successive delegated waves: pairs six slots apart, the
    second wave of a pair ``pair_offset`` slots after the first."""
    if not 1 <= pair_offset <= 3:
        raise ValueError("pair offset must be 1, 2 or 3")
    return [6 * (w // 2) + pair_offset * (w % 2) for w in range(waves)]


def pipeline_depth4_pairs(
    t: Topology,
    drawer: Tuple[int, int],
    X: int,
    mode: str = "paired",
    pair_offset: int = 1,
    source_p: Optional[int] = None,
) -> BroadcastRun:
    """X broadcasts from router ``(c, d, source_p)`` over the drawer's M depth-four trees.

    ``paired``: X/M delegated waves, message ``w*M + p`` on tree ``p`` in wave
    ``w``, launched in pairs (:func:`wave_offsets`). ``stride1`` is the naive
    chain kept as a diagnostic: broadcast ``w`` starts at slot ``w`` on tree
    ``w mod M``; it runs into link conflicts once three broadcasts overlap.
    """
    if X < 1 or X % (2 * t.M):
        raise ValueError(f"X={X} must be a positive multiple of 2M={2 * t.M}")
    c, d = drawer
    source = RouterCoord(c, d, t.drawers.add(d, 1) if source_p is None else source_p)
    trees = depth4_trees(t, drawer)
    sched, received = TimedSchedule(), {}
    if mode == "paired":
        waves = X // t.M
        for w, base in enumerate(wave_offsets(waves, pair_offset)):
            msgs = {p: w * t.M + p for p in range(t.M)}
            _delegate(sched, received, t, trees, source, msgs, base, ("w", w))
        sched.rounds = waves
    elif mode == "stride1":
        for w in range(X):
            _delegate(sched, received, t, trees, source, {w % t.M: w}, w, ("w", w))
        sched.rounds = X
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _run(t, sched, received, 1 + DEPTH4.b)


def repeated_depth3(t: Topology, root: RouterCoord, X: int) -> int:
    """Slots for X broadcasts run one after another on a depth-three tree."""
    return 3 * X


def cost_crossover(t: Topology, drawer: Tuple[int, int], X: int) -> dict:
    c, d = drawer
    root = RouterCoord(c, d, t.drawers.add(d, 1))
    paired = pipeline_depth4_pairs(t, drawer, X)
    piped = pipeline_depth3(t, root, X)
    return {
        "X": X,
        "depth4_paired": paired.report.total_slots,
        "depth3_pipelined": piped.report.total_slots,
        "depth3_repeated": repeated_depth3(t, root, X),
    }
