"""Source-vector paths and the synchronized-header router program."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Tuple

from .topology import GLOBAL, LOCAL, Channel, RouterCoord, Topology


class _Wildcard:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "*"

    def __reduce__(self):
        return (_Wildcard, ())


WILD = _Wildcard()
"""Broadcast-over-all-ports marker for a header field (never equal to port 0)."""


class SourceVector(NamedTuple):
    gamma: int
    pi: int
    delta: int
    order: str = "LGL"

    def __str__(self):
        return f"({self.gamma},{self.pi},{self.delta})"


def vector_steps(t: Topology, r: RouterCoord, v: SourceVector, swap_on_zero: bool = False) -> List[Optional[Channel]]:
    """Positional hop list of a vector path; ``None`` marks an idle (skipped) hop.

    LGL is ``local delta, global gamma, local pi``. A zero local component is
    always skipped. A zero ``gamma`` is skipped unless ``swap_on_zero``, in
    which case the packet takes global port 0 (the d/p swap).

    GLG is ``global gamma, local delta, global 0`` followed by ``local pi``;
    both global hops are always taken, so the terminal router is
    ``(c + gamma, d + delta, p + pi)``.
    """
    steps: List[Optional[Channel]] = []
    here = r

    def hop(ch):
        nonlocal here
        steps.append(ch)
        if ch is not None:
            here = ch.dst

    if v.order == "LGL":
        hop(t.local(here, v.delta) if v.delta else None)
        hop(t.glob(here, v.gamma) if (v.gamma or swap_on_zero) else None)
        hop(t.local(here, v.pi) if v.pi else None)
    elif v.order == "GLG":
        hop(t.glob(here, v.gamma))
        hop(t.local(here, v.delta) if v.delta else None)
        hop(t.glob(here, 0))
        hop(t.local(here, v.pi) if v.pi else None)
    else:
        raise ValueError(f"unknown vector order {v.order!r}")
    return steps


def expand_vector(t: Topology, r: RouterCoord, v: SourceVector, swap_on_zero: bool = False) -> List[Channel]:
    t.index(r)
    return [ch for ch in vector_steps(t, r, v, swap_on_zero) if ch is not None]


def destination(t: Topology, r: RouterCoord, v: SourceVector, swap_on_zero: bool = False) -> RouterCoord:
    path = expand_vector(t, r, v, swap_on_zero)
    return path[-1].dst if path else r


# -- synchronized headers -----------------------------------------------------


@dataclass(frozen=True)
class SyncHeader:
    b: int
    gamma: object = 0
    pi: object = 0
    delta: object = 0
    broadcast: bool = False

    def __str__(self):
        return format_header(self)

    @property
    def arrived(self) -> bool:
        return self.b == 0


def format_header(h: SyncHeader) -> str:
    return f"[{h.b};{h.gamma},{h.pi},{h.delta}]"


def rewrite_header(h: SyncHeader) -> Tuple[str, object, SyncHeader]:
    """Apply the parity rule to a header alone.

    Returns ``(port class, port field used, next header)``. Works on symbolic
    field values too, which is what makes the program position independent.
    """
    if h.b <= 0:
        raise ValueError("header has already arrived (b = 0)")
    if h.b % 2:
        return LOCAL, h.delta, replace(h, b=h.b - 1, delta=h.pi, pi=0)
    return GLOBAL, h.gamma, replace(h, b=h.b - 1, gamma=0)


def header_trace(h: SyncHeader) -> List[SyncHeader]:
    out = [h]
    while not h.arrived:
        _, _, h = rewrite_header(h)
        out.append(h)
    return out


def step_sync_header(t: Topology, r: RouterCoord, h: SyncHeader) -> Tuple[Optional[Channel], SyncHeader]:
    """One router's handling of a point-to-point synchronized header.

    A local step on port 0 is an idle hop and yields no channel.
    """
    kind, port, nxt = rewrite_header(h)
    if port is WILD:
        raise ValueError("wildcard header field: use expand_broadcast_header")
    if kind == LOCAL:
        return (t.local(r, port) if port else None), nxt
    return t.glob(r, port), nxt


def header_path(t: Topology, r: RouterCoord, h: SyncHeader) -> List[Optional[Channel]]:
    """Positional hop list of a concrete header (``None`` = idle hop)."""
    steps = []
    while not h.arrived:
        ch, h = step_sync_header(t, r, h)
        steps.append(ch)
        if ch is not None:
            r = ch.dst
    return steps


class TreeEdge(NamedTuple):
    src: RouterCoord
    dst: RouterCoord
    channel: Optional[Channel]  # None: the router keeps its own copy
    header: SyncHeader


def _fanout(t: Topology, r: RouterCoord, kind: str, port) -> List[Tuple[RouterCoord, Optional[Channel]]]:
    if kind == LOCAL:
        if port is WILD:
            return [(r, None)] + [(ch.dst, ch) for ch in (t.local(r, x) for x in t.drawers.elements() if x)]
        if port == 0:
            return [(r, None)]
        ch = t.local(r, port)
        return [(ch.dst, ch)]
    ports = t.cabinets.elements() if port is WILD else [port]
    out = []
    for g in ports:
        ch = t.glob(r, g)
        out.append((ch.dst, None if ch.degenerate else ch))
    return out


def expand_broadcast_header(t: Topology, r: RouterCoord, h: SyncHeader) -> List[List[TreeEdge]]:
    """Expand a wildcard header into per-level copy lists.

    Level ``i`` lists every copy made at hop ``i``: ``channel`` is the link
    used, or ``None`` when a router keeps the packet for itself (local
    wildcard self-inclusion, a local port 0 idle hop, or a degenerate global
    port 0 self-swap).
    """
    if not h.broadcast:
        raise ValueError("broadcast bit is not set")
    wild = sum(f is WILD for f in (h.gamma, h.pi, h.delta))
    used = 0
    frontier = [(r, h)]
    levels: List[List[TreeEdge]] = []
    while not frontier[0][1].arrived:
        kind, port, nxt = rewrite_header(frontier[0][1])
        used += port is WILD
        level = []
        for here, _ in frontier:
            for dst, ch in _fanout(t, here, kind, port):
                level.append(TreeEdge(here, dst, ch, nxt))
        levels.append(level)
        frontier = [(e.dst, e.header) for e in level]
    if used != wild:
        raise ValueError(f"header {h}: a wildcard field is never used")
    return levels


def level_routers(levels: List[List[TreeEdge]]) -> List[set]:
    return [{e.dst for e in level} for level in levels]
