"""Swapped Dragonfly D3(K, M) topology.

Routers are triples ``(c, d, p)``: ``c`` lives in the cabinet group C of
order K, ``d`` and ``p`` both live in the drawer group P of order M.

* local link:  ``(c, d, p) <-> (c, d, p + delta)`` for ``delta != 0``
* global link: ``(c, d, p) <-> (c + gamma, p, d)`` for every ``gamma`` in C

The global link always swaps ``d`` and ``p``. Global port 0 is a real port;
it is a self-loop exactly when ``d == p``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

LOCAL = "L"
GLOBAL = "G"


@dataclass(frozen=True)
class GroupSpec:
    """Finite Abelian group whose elements are the integers ``0..order-1``.

    ``cyclic`` is Z_n with modular addition; ``boolean`` is (Z_2)^w with XOR.
    """

    kind: str
    order: int

    def __post_init__(self):
        if self.kind not in ("cyclic", "boolean"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("group order must be positive")
        if self.kind == "boolean" and self.order & (self.order - 1):
            raise ValueError(f"boolean group order must be a power of two, got {self.order}")

    @classmethod
    def cyclic(cls, n: int) -> "GroupSpec":
        return cls("cyclic", n)

    @classmethod
    def boolean(cls, width: int) -> "GroupSpec":
        return cls("boolean", 1 << width)

    @property
    def width(self) -> int:
        """Bit width of a boolean group."""
        return self.order.bit_length() - 1

    zero = 0

    def add(self, a: int, b: int) -> int:
        if self.kind == "boolean":
            return a ^ b
        return (a + b) % self.order

    def neg(self, a: int) -> int:
        if self.kind == "boolean":
            return a
        return (-a) % self.order

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def elements(self) -> range:
        return range(self.order)

    def canonical(self, a: int) -> int:
        if self.kind == "boolean":
            if not 0 <= a < self.order:
                raise ValueError(f"{a} is not an element of {self}")
            return a
        return a % self.order

    def __str__(self):
        if self.kind == "boolean":
            return f"boolean({self.width})"
        return f"cyclic({self.order})"


class RouterCoord(NamedTuple):
    c: int
    d: int
    p: int

    def __str__(self):
        return f"({self.c},{self.d},{self.p})"


class Channel(NamedTuple):
    """One direction of one physical link."""

    src: RouterCoord
    dst: RouterCoord
    kind: str  # LOCAL or GLOBAL
    port: int

    @property
    def degenerate(self) -> bool:
        # global port 0 at a router with d == p
        return self.src == self.dst

    def __str__(self):
        return f"{self.src}-{self.kind}{self.port}->{self.dst}"


def parse_router(text: str) -> RouterCoord:
    parts = [int(x) for x in text.replace("(", "").replace(")", "").split(",")]
    if len(parts) != 3:
        raise ValueError(f"router must be c,d,p: {text!r}")
    return RouterCoord(*parts)


@dataclass
class Topology:
    cabinets: GroupSpec
    drawers: GroupSpec
    routers: List[RouterCoord] = field(repr=False)
    _index: Dict[RouterCoord, int] = field(repr=False, default_factory=dict)

    @property
    def K(self) -> int:
        return self.cabinets.order

    @property
    def M(self) -> int:
        return self.drawers.order

    @property
    def name(self) -> str:
        return f"D3({self.K},{self.M})"

    def __contains__(self, r) -> bool:
        return r in self._index

    def __len__(self) -> int:
        return len(self.routers)

    def index(self, r: RouterCoord) -> int:
        try:
            return self._index[r]
        except KeyError:
            raise KeyError(f"router {r} is not in {self.name}") from None

    # -- connectivity rules -------------------------------------------------

    def local(self, r: RouterCoord, delta: int) -> Channel:
        if delta == 0:
            raise ValueError("local port 0 does not exist")
        P = self.drawers
        return Channel(r, RouterCoord(r.c, r.d, P.add(r.p, delta)), LOCAL, delta)

    def glob(self, r: RouterCoord, gamma: int) -> Channel:
        return Channel(r, RouterCoord(self.cabinets.add(r.c, gamma), r.p, r.d), GLOBAL, gamma)

    def reverse(self, ch: Channel) -> Channel:
        if ch.kind == LOCAL:
            return self.local(ch.dst, self.drawers.neg(ch.port))
        return self.glob(ch.dst, self.cabinets.neg(ch.port))

    def neighbors(self, r: RouterCoord) -> List[Channel]:
        """All outgoing channels of ``r``: M-1 locals then K globals."""
        self.index(r)
        out = [self.local(r, delta) for delta in self.drawers.elements() if delta != 0]
        out.extend(self.glob(r, gamma) for gamma in self.cabinets.elements())
        return out

    def channels(self) -> Iterator[Channel]:
        for r in self.routers:
            yield from self.neighbors(r)

    def has_channel(self, ch: Channel) -> bool:
        if ch.src not in self._index:
            return False
        if ch.kind == LOCAL:
            return ch.port in self.drawers.elements() and ch.port != 0 and self.local(ch.src, ch.port) == ch
        if ch.kind == GLOBAL:
            return ch.port in self.cabinets.elements() and self.glob(ch.src, ch.port) == ch
        return False

    def channel_between(self, a: RouterCoord, b: RouterCoord) -> Optional[Channel]:
        """The channel from ``a`` to ``b`` if the routers are adjacent (locals first)."""
        if a.c == b.c and a.d == b.d and a.p != b.p:
            return self.local(a, self.drawers.sub(b.p, a.p))
        if b.d == a.p and b.p == a.d:
            return self.glob(a, self.cabinets.sub(b.c, a.c))
        return None

    def summary(self) -> dict:
        degrees = {}
        n_channels = 0
        n_degenerate = 0
        for r in self.routers:
            nb = self.neighbors(r)
            n_channels += len(nb)
            n_degenerate += sum(ch.degenerate for ch in nb)
            key = (sum(ch.kind == LOCAL for ch in nb), sum(ch.kind == GLOBAL for ch in nb))
            degrees[key] = degrees.get(key, 0) + 1
        return {
            "network": self.name,
            "cabinet_group": str(self.cabinets),
            "drawer_group": str(self.drawers),
            "routers": len(self.routers),
            "channels": n_channels,
            "degenerate_channels": n_degenerate,
            "degree_table": [
                {"local": lo, "global": gl, "routers": n} for (lo, gl), n in sorted(degrees.items())
            ],
        }


def build_topology(cabinet_group: GroupSpec, drawer_group: GroupSpec) -> Topology:
    if cabinet_group.order < 2 or drawer_group.order < 2:
        raise ValueError("D3(K,M) needs K >= 2 and M >= 2")
    routers = [
        RouterCoord(c, d, p)
        for c, d, p in itertools.product(
            cabinet_group.elements(), drawer_group.elements(), drawer_group.elements()
        )
    ]
    t = Topology(cabinet_group, drawer_group, routers)
    t._index = {r: i for i, r in enumerate(routers)}
    return t


def d3(K: int, M: int, kind: str = "cyclic") -> Topology:
    """Shorthand: D3(K, M) over cyclic groups, or boolean groups of orders K and M."""
    if kind == "boolean":
        for n in (K, M):
            if n & (n - 1):
                raise ValueError(f"boolean groups need power-of-two orders, got {n}")
        return build_topology(GroupSpec.boolean(K.bit_length() - 1), GroupSpec.boolean(M.bit_length() - 1))
    return build_topology(GroupSpec.cyclic(K), GroupSpec.cyclic(M))


# -- closed sub-networks ------------------------------------------------------


def _coset_map(group: GroupSpec, subset: Sequence[int]) -> Optional[Tuple[GroupSpec, List[int]]]:
    """If ``subset`` is a coset of a subgroup H, return (group isomorphic to H, map).

    The map sends element ``x`` of the small group to ``base + phi(x)``
    where ``phi`` is an isomorphism onto H.
    """
    elems = sorted(set(subset))
    base = elems[0]
    H = {group.sub(x, base) for x in elems}
    closed = all(group.add(a, b) in H for a in H for b in H)
    if not closed:
        return None
    n = len(H)
    if group.kind == "cyclic":
        step = group.order // n
        return GroupSpec.cyclic(n), [group.add(base, i * step) for i in range(n)]
    basis: List[int] = []
    span = {0}
    for h in sorted(H):
        if h not in span:
            basis.append(h)
            span |= {x ^ h for x in span}
    image = []
    for x in range(n):
        y = 0
        for bit, b in enumerate(basis):
            if x >> bit & 1:
                y ^= b
        image.append(group.add(base, y))
    return GroupSpec.boolean(len(basis)), image


@dataclass
class Embedding:
    """Dilation-one image of a small D3(J, L) inside a larger network."""

    small: Topology
    big: Topology
    cabinet_map: List[int]
    drawer_map: List[int]
    # port relabeling, present only when both subsets are cosets of subgroups
    local_ports: Optional[Dict[int, int]] = None
    global_ports: Optional[Dict[int, int]] = None

    @property
    def uniform_ports(self) -> bool:
        return self.local_ports is not None

    def router(self, r: RouterCoord) -> RouterCoord:
        return RouterCoord(self.cabinet_map[r.c], self.drawer_map[r.d], self.drawer_map[r.p])

    def channel(self, ch: Channel) -> Channel:
        a, b = self.router(ch.src), self.router(ch.dst)
        if ch.kind == LOCAL:
            return self.big.local(a, self.big.drawers.sub(b.p, a.p))
        return self.big.glob(a, self.big.cabinets.sub(b.c, a.c))

    def verify(self) -> bool:
        """Exhaustive edge-preservation and injectivity check."""
        images = {self.router(r) for r in self.small.routers}
        if len(images) != len(self.small):
            return False
        seen = set()
        for ch in self.small.channels():
            big = self.channel(ch)
            if not self.big.has_channel(big) or big.kind != ch.kind:
                return False
            if big.src != self.router(ch.src) or big.dst != self.router(ch.dst):
                return False
            if big in seen:
                return False
            seen.add(big)
            if self.uniform_ports:
                table = self.local_ports if ch.kind == LOCAL else self.global_ports
                if table[ch.port] != big.port:
                    return False
        return True


def embed_subnetwork(
    t: Topology,
    cabinet_subset: Iterable[int],
    drawer_subset: Iterable[int],
    require_closed: bool = True,
    small_kind: str = "cyclic",
) -> Embedding:
    """Embed D3(J, L) on the routers with ``c`` in the cabinet subset and ``d, p``
    in the drawer subset.

    With ``require_closed`` the subsets must be cosets of subgroups, which gives
    a position-independent port relabeling (source vectors translate to source
    vectors). Without it any subsets are accepted and ports are relabeled per
    channel; the induced subgraph is still a copy of D3(J, L), built on
    ``small_kind`` groups ("cyclic" or "boolean").
    """
    cabs = sorted(set(t.cabinets.canonical(x) for x in cabinet_subset))
    drs = sorted(set(t.drawers.canonical(x) for x in drawer_subset))
    if len(cabs) < 2 or len(drs) < 2:
        raise ValueError("sub-network needs at least 2 cabinets and 2 drawer values")
    if require_closed:
        cm = _coset_map(t.cabinets, cabs)
        dm = _coset_map(t.drawers, drs)
        if cm is None:
            raise ValueError(f"cabinet subset {cabs} is not closed under {t.cabinets}")
        if dm is None:
            raise ValueError(f"drawer subset {drs} is not closed under {t.drawers}")
        (Cs, cmap), (Ps, dmap) = cm, dm
        small = build_topology(Cs, Ps)
        local_ports = {x: t.drawers.sub(dmap[x], dmap[0]) for x in Ps.elements() if x}
        global_ports = {x: t.cabinets.sub(cmap[x], cmap[0]) for x in Cs.elements()}
        emb = Embedding(small, t, cmap, dmap, local_ports, global_ports)
    else:
        if small_kind == "boolean":
            for n in (len(cabs), len(drs)):
                if n & (n - 1):
                    raise ValueError(f"boolean sub-network needs power-of-2 sizes, got {n}")
            small = build_topology(GroupSpec.boolean(len(cabs).bit_length() - 1), GroupSpec.boolean(len(drs).bit_length() - 1))
        elif small_kind == "cyclic":
            small = build_topology(GroupSpec.cyclic(len(cabs)), GroupSpec.cyclic(len(drs)))
        else:
            raise ValueError(f"unknown group kind {small_kind!r}")
        emb = Embedding(small, t, cabs, drs)
    if not emb.verify():
        raise AssertionError("embedding failed edge-preservation check")
    return emb
