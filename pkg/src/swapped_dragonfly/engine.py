"""Slotted simulation of packet moves with directed-channel conflict detection.

Time model: one hop per slot; a channel carries at most one packet per slot
in each direction. Degenerate channels (global port 0 at a router with
``d == p``) are non-events: they occupy nothing and are never in conflict.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .routing import SourceVector, vector_steps
from .topology import Channel, RouterCoord, Topology

PATTERNS = ("S1", "S2", "S3")


class PacketMove(NamedTuple):
    packet_id: Hashable
    channel: Channel
    slot: int


class Conflict(NamedTuple):
    channel: Channel
    slot: int
    packet_ids: Tuple


@dataclass
class Round:
    """Every launch starts its first hop in the same slot."""

    launches: List[Tuple[RouterCoord, SourceVector]]
    swap_on_zero: bool = False
    label: object = None

    @classmethod
    def uniform(cls, t: Topology, vectors: Sequence[SourceVector], swap_on_zero=False, label=None) -> "Round":
        return cls([(r, v) for r in t.routers for v in vectors], swap_on_zero, label)

    @property
    def vectors(self) -> List[SourceVector]:
        seen = []
        for _, v in self.launches:
            if v not in seen:
                seen.append(v)
        return seen

    def steps(self, t: Topology) -> List[List[Optional[Channel]]]:
        return [vector_steps(t, r, v, self.swap_on_zero) for r, v in self.launches]


@dataclass
class TimedSchedule:
    moves: List[PacketMove] = field(default_factory=list)
    sources: Dict[Hashable, RouterCoord] = field(default_factory=dict)
    total_slots: int = 0
    pattern: Optional[str] = None
    bases: List[int] = field(default_factory=list)
    delays: int = 0
    off_and_on: int = 0
    rounds: int = 0

    def add_path(self, pid, source: RouterCoord, steps: Sequence[Optional[Channel]], base: int):
        self.sources[pid] = source
        for i, ch in enumerate(steps):
            if ch is not None:
                self.moves.append(PacketMove(pid, ch, base + i))
        self.total_slots = max(self.total_slots, base + len(steps))

    def extend(self, other: "TimedSchedule", offset: int = 0):
        self.moves.extend(PacketMove(m.packet_id, m.channel, m.slot + offset) for m in other.moves)
        self.sources.update(other.sources)
        self.total_slots = max(self.total_slots, other.total_slots + offset)
        self.off_and_on += other.off_and_on
        self.rounds += other.rounds
        self.delays += other.delays


@dataclass
class SimReport:
    total_slots: int
    total_hops: int
    conflicts: List[Conflict]
    delays_inserted: int
    deliveries: Dict[Hashable, RouterCoord]
    off_and_on: int = 0

    @property
    def conflict_free(self) -> bool:
        return not self.conflicts

    def time(self, t_w: float = 1.0, t_s: float = 1.0) -> float:
        return self.total_slots * t_w + self.off_and_on * t_s

    def to_dict(self) -> dict:
        return {
            "total_slots": self.total_slots,
            "total_hops": self.total_hops,
            "conflicts": len(self.conflicts),
            "conflict_samples": [
                {"channel": str(c.channel), "slot": c.slot, "packets": [str(p) for p in c.packet_ids]}
                for c in self.conflicts[:20]
            ],
            "delays_inserted": self.delays_inserted,
            "off_and_on": self.off_and_on,
            "deliveries": len(self.deliveries),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class PathError(ValueError):
    pass


def channel_usage(moves: Iterable[PacketMove]) -> Dict[Tuple[Channel, int], List]:
    usage = defaultdict(list)
    for m in moves:
        if not m.channel.degenerate:
            usage[(m.channel, m.slot)].append(m.packet_id)
    return usage


def find_conflicts(moves: Iterable[PacketMove]) -> List[Conflict]:
    out = []
    for (ch, slot), pids in channel_usage(moves).items():
        distinct = sorted(set(pids), key=repr)
        if len(distinct) > 1 or len(pids) > len(distinct):
            out.append(Conflict(ch, slot, tuple(distinct)))
    out.sort(key=lambda c: (c.slot, c.channel))
    return out


def simulate(t: Topology, s: TimedSchedule) -> SimReport:
    by_packet = defaultdict(list)
    for m in s.moves:
        if not t.has_channel(m.channel):
            raise PathError(f"channel {m.channel} is not in {t.name}")
        by_packet[m.packet_id].append(m)
    deliveries = {}
    for pid, src in s.sources.items():
        here = src
        last = -1
        for m in sorted(by_packet.get(pid, ()), key=lambda m: m.slot):
            if m.channel.src != here or m.slot <= last:
                raise PathError(f"packet {pid!r} jumps to {m.channel.src} at slot {m.slot}")
            here, last = m.channel.dst, m.slot
        deliveries[pid] = here
    stray = set(by_packet) - set(s.sources)
    if stray:
        raise PathError(f"moves for packets without a source: {sorted(stray, key=repr)[:3]}")
    conflicts = find_conflicts(s.moves)
    last_slot = max((m.slot for m in s.moves), default=-1)
    return SimReport(
        total_slots=max(s.total_slots, last_slot + 1),
        total_hops=sum(not m.channel.degenerate for m in s.moves),
        conflicts=conflicts,
        delays_inserted=s.delays,
        deliveries=deliveries,
        off_and_on=s.off_and_on,
    )


def write_trace(s: TimedSchedule, fh) -> None:
    """Per-move CSV trace: slot, packet_id, from, to, class, port."""
    w = csv.writer(fh)
    w.writerow(["slot", "packet_id", "from", "to", "class", "port"])
    for m in sorted(s.moves, key=lambda m: (m.slot, repr(m.packet_id), m.channel)):
        w.writerow([m.slot, m.packet_id, str(m.channel.src), str(m.channel.dst), m.channel.kind, m.channel.port])


def trace_text(s: TimedSchedule) -> str:
    buf = io.StringIO()
    write_trace(s, buf)
    return buf.getvalue()


# -- round launches and pipelines ---------------------------------------------

DelayPolicy = Callable[[List[List[Tuple[Hashable, RouterCoord, List[Optional[Channel]]]]]], List[int]]


def expand_rounds(t: Topology, rounds: Sequence[Round]):
    expanded = []
    for i, rnd in enumerate(rounds):
        expanded.append(
            [((i, j), r, steps) for j, ((r, _), steps) in enumerate(zip(rnd.launches, rnd.steps(t)))]
        )
    return expanded


def stride_bases(n_rounds: int, pattern: str) -> List[int]:
    """Launch slots of the S2/S3 pipelines.

    S3 launches every third slot. S2 launches rounds in pairs one slot apart,
    with a new pair every four slots: within a pair the two rounds never use
    the same link class in the same slot, and a pair finishes before the next
    one starts.
    """
    if pattern == "S3":
        return [3 * i for i in range(n_rounds)]
    if pattern == "S2":
        return [4 * (i // 2) + (i % 2) for i in range(n_rounds)]
    raise ValueError(f"no fixed stride for pattern {pattern!r}")


def no_delays(expanded) -> List[int]:
    """Plain stride-1 launches; used to expose Schedule-1 conflicts."""
    return list(range(len(expanded)))


def pipeline(
    t: Topology,
    rounds: Sequence[Round],
    pattern: str,
    delay_policy: Optional[DelayPolicy] = None,
) -> TimedSchedule:
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}")
    expanded = expand_rounds(t, rounds)
    if pattern == "S1":
        if delay_policy is None:
            raise ValueError("pattern S1 needs a delay policy")
        bases = delay_policy(expanded)
    else:
        bases = stride_bases(len(rounds), pattern)
    s = TimedSchedule(pattern=pattern, bases=list(bases), rounds=len(rounds))
    for base, launches in zip(bases, expanded):
        for pid, src, steps in launches:
            s.add_path(pid, src, steps, base)
    if pattern == "S1":
        s.delays = sum(b - a - 1 for a, b in zip(bases, bases[1:]))
    return s


def single_round(t: Topology, rnd: Round) -> TimedSchedule:
    return pipeline(t, [rnd], "S3")


def verify_property1(t: Topology, v: SourceVector, swap_on_zero: bool = False) -> dict:
    """Every router launches ``v`` at once: conflicts and whether destinations permute."""
    rep = simulate(t, single_round(t, Round.uniform(t, [v], swap_on_zero)))
    dests = list(rep.deliveries.values())
    return {"permutation": len(set(dests)) == len(t), "conflicts": len(rep.conflicts)}


def verify_property3(t: Topology, v: SourceVector, w: SourceVector, swap_on_zero: bool = False) -> int:
    """Conflict count when every router launches both ``v`` and ``w``."""
    rep = simulate(t, single_round(t, Round.uniform(t, [v, w], swap_on_zero)))
    return len(rep.conflicts)
