"""Swapped Boolean Hypercube SBH(k, m) and hypercube emulation on D3(2^k, 2^m).

Addresses are ``k + 2m`` bit integers. Bit order, low to high: the m bits of
``p``, the m bits of ``d``, the k bits of ``c``. Hypercube dimension ``j``
therefore flips a p bit for ``j < m``, a d bit for ``m <= j < 2m`` and a c bit
otherwise.

Links: ``pi_i`` flips bit i of p; ``gamma_i`` flips bit i of c and swaps d
and p; ``Z`` swaps d and p and does not exist when ``d == p``. On the boolean
D3 these are local port ``2^i``, global port ``2^i`` and global port 0.
"""

from __future__ import annotations

import operator
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

from .engine import SimReport, TimedSchedule, simulate
from .routing import SyncHeader, header_path
from .topology import Channel, GroupSpec, RouterCoord, Topology, build_topology, embed_subnetwork

MAX_NODES = 1 << 14


class SbhLink(NamedTuple):
    label: str  # "pi", "gamma" or "Z"
    bit: Optional[int]
    src: int
    dst: int


@dataclass(frozen=True)
class SbhGraph:
    k: int
    m: int

    def __post_init__(self):
        if self.k < 0 or self.m < 0 or self.k + self.m == 0:
            raise ValueError("SBH needs k >= 0, m >= 0, not both zero")

    @property
    def dims(self) -> int:
        return self.k + 2 * self.m

    def __len__(self) -> int:
        return 1 << self.dims

    def fields(self, x: int) -> Tuple[int, int, int]:
        mask = (1 << self.m) - 1
        return x >> (2 * self.m), (x >> self.m) & mask, x & mask

    def addr(self, c: int, d: int, p: int) -> int:
        return (c << (2 * self.m)) | (d << self.m) | p

    def field_of(self, j: int) -> Tuple[str, int]:
        if not 0 <= j < self.dims:
            raise ValueError(f"dimension {j} outside [0, {self.dims})")
        if j < self.m:
            return "p", j
        if j < 2 * self.m:
            return "d", j - self.m
        return "c", j - 2 * self.m

    def pi(self, x: int, i: int) -> int:
        return x ^ (1 << i)

    def gamma(self, x: int, i: int) -> int:
        c, d, p = self.fields(x)
        return self.addr(c ^ (1 << i), p, d)

    def z(self, x: int) -> int:
        c, d, p = self.fields(x)
        if d == p:
            raise ValueError(f"node {x} has d == p and no Z link")
        return self.addr(c, p, d)

    def links(self, x: int) -> List[SbhLink]:
        out = [SbhLink("pi", i, x, self.pi(x, i)) for i in range(self.m)]
        out += [SbhLink("gamma", i, x, self.gamma(x, i)) for i in range(self.k)]
        c, d, p = self.fields(x)
        if d != p:
            out.append(SbhLink("Z", None, x, self.z(x)))
        return out

    def degree(self, x: int) -> int:
        return len(self.links(x))

    def apply(self, x: int, label: str, bit: Optional[int]) -> int:
        if label == "pi":
            return self.pi(x, bit)
        if label == "gamma":
            return self.gamma(x, bit)
        if label == "Z":
            return self.z(x)
        raise ValueError(f"unknown link {label!r}")


def build_sbh(k: int, m: int) -> SbhGraph:
    return SbhGraph(k, m)


# -- overlay on D3(2^k, 2^m) --------------------------------------------------


def overlay_topology(g: SbhGraph) -> Topology:
    if g.k < 1 or g.m < 1:
        raise ValueError(f"SBH({g.k},{g.m}) has no D3 host: both k and m must be at least 1")
    return build_topology(GroupSpec.boolean(g.k), GroupSpec.boolean(g.m))


def router_of(g: SbhGraph, x: int) -> RouterCoord:
    return RouterCoord(*g.fields(x))


def link_channel(t: Topology, g: SbhGraph, link: SbhLink) -> Channel:
    r = router_of(g, link.src)
    if link.label == "pi":
        return t.local(r, 1 << link.bit)
    if link.label == "gamma":
        return t.glob(r, 1 << link.bit)
    return t.glob(r, 0)


def overlay_check(g: SbhGraph) -> bool:
    """Every SBH link is a non-degenerate channel of D3(2^k, 2^m) with matching endpoints."""
    t = overlay_topology(g)
    for x in range(len(g)):
        for link in g.links(x):
            ch = link_channel(t, g, link)
            if not t.has_channel(ch) or ch.degenerate or ch.dst != router_of(g, link.dst):
                return False
    return True


def emulation_host(K: int, M: int):
    """Largest D3(2^k, 2^m) inside D3(K, M): (SbhGraph, Embedding)."""
    k, m = K.bit_length() - 1, M.bit_length() - 1
    if k < 1 or m < 1:
        raise ValueError("need K >= 2 and M >= 2")
    big = build_topology(GroupSpec.cyclic(K), GroupSpec.cyclic(M))
    emb = embed_subnetwork(big, range(1 << k), range(1 << m), require_closed=False, small_kind="boolean")
    return SbhGraph(k, m), emb


# -- dimension exchange -------------------------------------------------------


class DimExchangePlan(NamedTuple):
    dim: int
    field: str
    links: List[SbhLink]

    @property
    def dilation(self) -> int:
        return len(self.links)


def dim_exchange_path(g: SbhGraph, x: int, j: int) -> DimExchangePlan:
    field, i = g.field_of(j)
    c, d, p = g.fields(x)
    if field == "p":
        seq = [("pi", i)]
    elif field == "c":
        seq = [("gamma", i)] if d == p else [("gamma", i), ("Z", None)]
    else:
        d2 = d ^ (1 << i)
        if d == p:
            seq = [("pi", i), ("Z", None)]
        elif d2 == p:
            seq = [("Z", None), ("pi", i)]
        else:
            seq = [("Z", None), ("pi", i), ("Z", None)]
    links = []
    here = x
    for label, bit in seq:
        nxt = g.apply(here, label, bit)
        links.append(SbhLink(label, bit, here, nxt))
        here = nxt
    assert here == x ^ (1 << j), "dimension exchange must flip exactly one bit"
    return DimExchangePlan(j, field, links)


def dilation_stats(k: int, m: int) -> dict:
    g = SbhGraph(k, m)
    per_field = {"p": 1, "c": 2, "d": 3}
    realized = [per_field[g.field_of(j)[0]] for j in range(g.dims)]
    total = sum(dim_exchange_path(g, x, j).dilation for x in range(len(g)) for j in range(g.dims))
    return {
        "max": max(realized),
        "uniform_mean": (2 * k + 4 * m) / (k + 2 * m),
        "empirical_mean": total / (len(g) * g.dims),
    }


def _bfs(g: SbhGraph, src: int) -> int:
    dist = {src: 0}
    q = deque([src])
    while q:
        x = q.popleft()
        for link in g.links(x):
            if link.dst not in dist:
                dist[link.dst] = dist[x] + 1
                q.append(link.dst)
    if len(dist) != len(g):
        raise AssertionError("SBH is disconnected")
    return max(dist.values())


def diameter_check(k: int, m: int) -> dict:
    """Exact diameter by BFS.

    Translating c by any mask and d, p by a common mask is an automorphism,
    so the 2^m nodes (0, 0, x) represent every orbit.
    """
    g = SbhGraph(k, m)
    if len(g) > MAX_NODES:
        raise ValueError(f"SBH({k},{m}) has {len(g)} nodes, cap is {MAX_NODES}")
    diam = max(_bfs(g, g.addr(0, 0, x)) for x in range(1 << m))
    return {"diameter": diam, "bound": 2 * k + 4 * m, "ok": diam <= 2 * k + 4 * m}


# -- dimension-sequence executor ----------------------------------------------

# op(node, own value, partner value) -> new value
DimOp = Callable[[int, object, object], object]


@dataclass
class ExchangeRun:
    values: List[object]
    schedule: TimedSchedule
    report: SimReport
    steps: int

    @property
    def channel_slots(self) -> int:
        return self.report.total_slots


def run_dimension_sequence(g: SbhGraph, steps: Sequence[Tuple[int, DimOp]], values: Sequence[object]) -> ExchangeRun:
    """Each step exchanges values across one hypercube dimension on the D3 overlay.

    All nodes send at once along their :func:`dim_exchange_path`; the step
    takes as many slots as its longest path. The schedule is simulated, so
    conflicts and misrouted packets are caught by the engine.
    """
    if len(values) != len(g):
        raise ValueError(f"need {len(g)} values")
    t = overlay_topology(g)
    vals = list(values)
    sched = TimedSchedule()
    slot = 0
    for n, (j, op) in enumerate(steps):
        depth = 0
        for x in range(len(g)):
            plan = dim_exchange_path(g, x, j)
            sched.add_path((n, x), router_of(g, x), [link_channel(t, g, l) for l in plan.links], slot)
            depth = max(depth, plan.dilation)
        vals = [op(x, vals[x], vals[x ^ (1 << j)]) for x in range(len(g))]
        slot += depth
        sched.rounds += 1
    sched.total_slots = slot
    rep = simulate(t, sched)
    for (n, x), dst in rep.deliveries.items():
        j = steps[n][0]
        if dst != router_of(g, x ^ (1 << j)):
            raise AssertionError(f"step {n}: node {x} delivered to {dst}")
    return ExchangeRun(vals, sched, rep, len(steps))


def reference_hypercube(dims: int, steps: Sequence[Tuple[int, DimOp]], values: Sequence[object]) -> List[object]:
    vals = list(values)
    for j, op in steps:
        vals = [op(x, vals[x], vals[x ^ (1 << j)]) for x in range(1 << dims)]
    return vals


def combine(fn: Callable[[object, object], object]) -> DimOp:
    """Lift a symmetric binary function to a dimension op."""
    return lambda x, a, b: fn(a, b)


COMBINERS = {"sum": operator.add, "min": min, "max": max, "xor": operator.xor}


def ascend_descend(k: int, m: int, dimension_op: DimOp, values: Optional[Sequence[object]] = None) -> ExchangeRun:
    """Dimensions 0..n-1 then n-1..0, each followed by ``dimension_op``."""
    g = SbhGraph(k, m)
    vals = list(range(len(g))) if values is None else values
    order = list(range(g.dims)) + list(reversed(range(g.dims)))
    return run_dimension_sequence(g, [(j, dimension_op) for j in order], vals)


def bitonic_steps(dims: int) -> List[Tuple[int, DimOp]]:
    steps = []
    for i in range(dims):
        for j in range(i, -1, -1):

            def op(x, a, b, i=i, j=j):
                up = not (x >> (i + 1)) & 1
                low = not (x >> j) & 1
                return min(a, b) if low == up else max(a, b)

            steps.append((j, op))
    return steps


def bitonic_sort(k: int, m: int, keys: Sequence) -> ExchangeRun:
    g = SbhGraph(k, m)
    return run_dimension_sequence(g, bitonic_steps(g.dims), keys)


def hypercube_hops(steps: Sequence[Tuple[int, DimOp]]) -> int:
    """Hop count of the same step sequence on a direct hypercube (one per step)."""
    return len(steps)


# -- dilation-four headers and cost comparison --------------------------------

HEADER_TEMPLATES = {
    "c": SyncHeader(4, "γ", 0, 0),
    "d": SyncHeader(4, 0, 0, "δ"),
    "p": SyncHeader(4, 0, "π", 0),
}


def uniform_dilation4_paths(dim_class: str) -> SyncHeader:
    try:
        return HEADER_TEMPLATES[dim_class]
    except KeyError:
        raise ValueError(f"dimension class must be c, d or p, not {dim_class!r}") from None


def dilation4_header(dim_class: str, port: int) -> SyncHeader:
    if port == 0:
        raise ValueError("port must be nonzero")
    h = uniform_dilation4_paths(dim_class)
    return SyncHeader(4, *(port if isinstance(f, str) else f for f in (h.gamma, h.pi, h.delta)))


def dilation4_schedule(t: Topology, headers: Sequence[SyncHeader]) -> TimedSchedule:
    """Every router launches every header in slot 0."""
    sched = TimedSchedule(rounds=1)
    for r in t.routers:
        for n, h in enumerate(headers):
            steps = header_path(t, r, h)
            if len(steps) != 4:
                raise AssertionError(f"header {h} expanded to {len(steps)} hops")
            sched.add_path((n, r), r, steps, 0)
    return sched


def dilation4_check(k: int, m: int, classes: Sequence[str] = ("c", "d", "p"), bit: int = 0) -> dict:
    """Launch one header per class from every router of D3(2^k, 2^m) and simulate."""
    t = overlay_topology(SbhGraph(k, m))
    headers = [dilation4_header(cl, 1 << bit) for cl in classes]
    sched = dilation4_schedule(t, headers)
    rep = simulate(t, sched)
    flips = all(
        dst == _flip(t, sched.sources[pid], classes[pid[0]], 1 << bit) for pid, dst in rep.deliveries.items()
    )
    return {"classes": list(classes), "conflicts": len(rep.conflicts), "hops": 4, "correct": flips, "report": rep}


def _flip(t: Topology, r: RouterCoord, cl: str, port: int) -> RouterCoord:
    if cl == "c":
        return RouterCoord(t.cabinets.add(r.c, port), r.d, r.p)
    if cl == "d":
        return RouterCoord(r.c, t.drawers.add(r.d, port), r.p)
    return RouterCoord(r.c, r.d, t.drawers.add(r.p, port))


def a2a_cost_compare(k: int, m: int) -> dict:
    """All-to-all cost (t_w units): doubly-parallel on D3 vs Johnsson-Ho on SBH.

    ``doubly_parallel`` evaluates max(2^m, 2^(k+m+1)) as published;
    ``doubly_parallel_rederived`` evaluates the quotient it is derived from,
    2^(k+2m) / min(2^k, 2^(m-1)) = max(2^(2m), 2^(k+m+1)).
    """
    dp = max(2 ** m, 2 ** (k + m + 1))
    dp2 = max(2 ** (2 * m), 2 ** (k + m + 1))
    jh = (2 / 3) * (2 ** (k + 2 * m) / 2)
    return {
        "doubly_parallel": dp,
        "doubly_parallel_rederived": dp2,
        "johnsson_ho": jh,
        "winner": "doubly_parallel" if dp < jh else "johnsson_ho",
    }
