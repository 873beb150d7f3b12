"""Matrix product on D3(K^2, M).

Layout: the X-by-X block with row pair ``(t, v)`` and column pair ``(t2, v2)``
sits at router ``(t + t2*K, v, v2)``; the flat row index of ``(t, v, i)`` is
``(t*M + v)*X + i``. Row ``(s, u)`` of a matrix is therefore stored on the
KM routers ``(s + *K, u, *)``.

One round moves one scalar per (t, v) through four hops:

* broadcast  ``(s+tK, u, v) -g-> (t+t2K, v, u) -l-> (t+t2K, v, *)``
* gather     ``(t+t2K, v, v2) -g-> (t2+sK, v2, v) -l-> (t2+sK, v2, u)``

The gather merges the K addends of one output element after the global hop
and the M partial sums after the local hop. Results land at
``(t2+sK, v2, u)``, the standard home of element ((t2, v2), (s, u)): the
product comes out in transposed layout, and one global hop
(:func:`transpose`) restores the standard layout when needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .engine import SimReport, TimedSchedule, simulate
from .topology import GroupSpec, RouterCoord, Topology, build_topology, embed_subnetwork


class MergeError(RuntimeError):
    """Partial sums with different output tags met at one router."""


@dataclass(frozen=True)
class IndexMap4:
    K: int
    M: int

    def __call__(self, s: int, t: int, u: int, v: int) -> RouterCoord:
        K, M = self.K, self.M
        if not (0 <= s < K and 0 <= t < K and 0 <= u < M and 0 <= v < M):
            raise ValueError(f"index {(s, t, u, v)} out of range for K={K}, M={M}")
        return RouterCoord(s + t * K, u, v)

    def inverse(self, r: RouterCoord) -> Tuple[int, int, int, int]:
        return r.c % self.K, r.c // self.K, r.d, r.p


def index_map(s: int, t: int, u: int, v: int, K: int, M: int) -> RouterCoord:
    return IndexMap4(K, M)(s, t, u, v)


def matmul_topology(K: int, M: int) -> Topology:
    return build_topology(GroupSpec.cyclic(K * K), GroupSpec.cyclic(M))


@dataclass
class DistributedMatrix:
    K: int
    M: int
    X: int
    blocks: Dict[RouterCoord, np.ndarray] = field(repr=False)
    transposed: bool = False

    @property
    def n(self) -> int:
        return self.X * self.K * self.M

    def _idx(self, t: int, v: int) -> slice:
        start = (t * self.M + v) * self.X
        return slice(start, start + self.X)

    @classmethod
    def from_dense(cls, A, K: int, M: int) -> "DistributedMatrix":
        A = np.asarray(A)
        n = A.shape[0]
        if A.shape != (n, n) or n % (K * M):
            raise ValueError(f"matrix order {A.shape} is not a multiple of KM={K * M}")
        dm = cls(K, M, n // (K * M), {})
        imap = IndexMap4(K, M)
        for t in range(K):
            for t2 in range(K):
                for v in range(M):
                    for v2 in range(M):
                        dm.blocks[imap(t, t2, v, v2)] = A[dm._idx(t, v), dm._idx(t2, v2)].copy()
        return dm

    def to_dense(self) -> np.ndarray:
        first = next(iter(self.blocks.values()))
        out = np.zeros((self.n, self.n), dtype=first.dtype)
        imap = IndexMap4(self.K, self.M)
        for r, blk in self.blocks.items():
            t, t2, v, v2 = imap.inverse(r)
            out[self._idx(t, v), self._idx(t2, v2)] = blk
        return out.T.copy() if self.transposed else out

    def row_block(self, s: int, u: int, t: int, v: int) -> np.ndarray:
        """Block ((s, u), (t, v)) of the stored (standard-layout) matrix."""
        if self.transposed:
            raise ValueError("matrix is stored transposed; transpose() it first")
        return self.blocks[RouterCoord(s + t * self.K, u, v)]


@dataclass(frozen=True)
class DistributedVector:
    """Home routers of a row vector ``(s, u)`` or a column vector ``(t, v)``."""

    K: int
    M: int
    kind: str
    a: int
    b: int

    @property
    def routers(self) -> List[RouterCoord]:
        K, M = self.K, self.M
        if self.kind == "row":
            return [RouterCoord(self.a + t * K, self.b, v) for t in range(K) for v in range(M)]
        if self.kind == "column":
            return [RouterCoord(s + self.a * K, u, self.b) for s in range(K) for u in range(M)]
        raise ValueError(f"unknown vector kind {self.kind!r}")


def transpose_schedule(K: int, M: int) -> TimedSchedule:
    """Every router sends its block over global port ``(t + sK) - (s + tK)``."""
    topo = matmul_topology(K, M)
    imap = IndexMap4(K, M)
    sched = TimedSchedule(rounds=1)
    for r in topo.routers:
        s, t, u, v = imap.inverse(r)
        gamma = topo.cabinets.sub(t + s * K, s + t * K)
        sched.add_path(("T", r), r, [topo.glob(r, gamma)], 0)
    return sched


def transpose(dm: DistributedMatrix) -> Tuple[DistributedMatrix, SimReport]:
    """One global hop; the logical matrix is unchanged, the layout flag flips."""
    sched = transpose_schedule(dm.K, dm.M)
    rep = simulate(matmul_topology(dm.K, dm.M), sched)
    blocks = {}
    for (_, r), dst in rep.deliveries.items():
        blocks[dst] = dm.blocks[r].T.copy()
    return DistributedMatrix(dm.K, dm.M, dm.X, blocks, not dm.transposed), rep


class MatmulMachine:
    """Simulation context for vector-matrix and matrix-matrix products."""

    def __init__(self, K: int, M: int):
        if K < 1 or M < 2 or K * K < 2:
            raise ValueError("need K >= 2 and M >= 2")
        self.K, self.M = K, M
        self.topo = matmul_topology(K, M)
        self.imap = IndexMap4(K, M)

    def juxtapose_broadcast(self, s: int, u: int, values: Dict[Tuple[int, int], object], slot: int = 0, tag=()):
        """Two-hop broadcast of element (t, v) of row (s, u) to routers (t + *K, v, *).

        Returns the schedule and ``{router: ((t, v), value)}`` for the
        juxtaposition routers.
        """
        K, M, topo = self.K, self.M, self.topo
        sched = TimedSchedule()
        received: Dict[RouterCoord, Tuple[Tuple[int, int], object]] = {}

        def deliver(r, tv, val):
            if r in received:
                raise ValueError(f"router {r} received two vector elements")
            received[r] = (tv, val)

        for (t, v), val in values.items():
            src = RouterCoord(s + t * K, u, v)
            for t2 in range(K):
                g = topo.glob(src, topo.cabinets.sub(t + t2 * K, src.c))
                center = g.dst
                sched.add_path(("bc",) + tag + (t, v, t2), src, [g], slot)
                deliver(center, (t, v), val)
                for v2 in range(M):
                    if v2 == center.p:
                        continue
                    ch = topo.local(center, topo.drawers.sub(v2, center.p))
                    sched.add_path(("bc",) + tag + (t, v, t2, v2), center, [ch], slot + 1)
                    deliver(ch.dst, (t, v), val)
        return sched, received

    def gather_accumulate(self, addends: Dict[RouterCoord, Tuple[tuple, object]], out: Tuple[int, int], slot: int = 0, tag=()):
        """Two-hop gather with merges; ``addends`` maps a router to (output tag, value).

        An addend at ``(x, v, v2)`` with ``t2 = x // K`` travels
        ``-g-> (t2 + s'K, v2, v) -l-> (t2 + s'K, v2, u')``. Returns the
        schedule and ``{(t2, v2): (router, value)}``.
        """
        K, topo = self.K, self.topo
        s_out, u_out = out
        sched = TimedSchedule(off_and_on=2)
        mid: Dict[RouterCoord, Tuple[tuple, object]] = {}

        def merge(store, r, tg, val):
            if r in store:
                old_tag, old = store[r]
                if old_tag != tg:
                    raise MergeError(f"router {r}: cannot merge {old_tag} with {tg}")
                store[r] = (tg, old + val)
            else:
                store[r] = (tg, val)

        for r, (tg, val) in addends.items():
            # the route follows the router's position; the tag only guards the merges
            t2 = r.c // K
            g = topo.glob(r, topo.cabinets.sub(t2 + s_out * K, r.c))
            sched.add_path(("g1",) + tag + tuple(r), r, [g], slot)
            merge(mid, g.dst, tg, val)
        final: Dict[RouterCoord, Tuple[tuple, object]] = {}
        for r, (tg, val) in mid.items():
            if r.p == u_out:
                sched.add_path(("g2",) + tag + tuple(r), r, [], slot + 1)
                merge(final, r, tg, val)
                continue
            ch = topo.local(r, topo.drawers.sub(u_out, r.p))
            sched.add_path(("g2",) + tag + tuple(r), r, [ch], slot + 1)
            merge(final, ch.dst, tg, val)
        sched.total_slots = slot + 2
        return sched, {tg: (r, val) for r, (tg, val) in final.items()}

    def vector_matrix(self, B: DistributedMatrix, s: int, u: int, V: Dict[Tuple[int, int], np.ndarray],
                      out: Optional[Tuple[int, int]] = None, slot: int = 0, tag=(), block_mul=None):
        """Row-vector times matrix in X rounds of four hops each.

        ``V[(t, v)]`` is the X-long piece of the vector held at
        ``(s + tK, u, v)``. ``out`` redirects the two gather hops to another
        row ``(s', u')``; ``block_mul(vec, block)`` replaces the local X-by-X
        product. Returns (schedule, ``{(t2, v2): (router, X-vector)}``).
        """
        block_mul = block_mul or np.dot
        if B.transposed:
            raise ValueError("matrix operand must be in standard layout")
        X = B.X
        out = (s, u) if out is None else out
        sched = TimedSchedule()
        held: Dict[RouterCoord, Tuple[Tuple[int, int], list]] = {}
        for i in range(X):
            part, got = self.juxtapose_broadcast(s, u, {tv: vec[i] for tv, vec in V.items()}, slot + 2 * i, tag + (i,))
            sched.extend(part)
            for r, (tv, val) in got.items():
                if r in held and held[r][0] != tv:
                    raise ValueError(f"layout mismatch at {r}")
                held.setdefault(r, (tv, []))[1].append(val)
        products = {}
        for r, (tv, vals) in held.items():
            t, t2, v, v2 = self.imap.inverse(r)
            if (t, v) != tv:
                raise ValueError(f"router {r} holds vector element {tv}, expected {(t, v)}")
            products[r] = ((t2, v2), np.asarray(block_mul(np.asarray(vals), B.blocks[r])))
        result: Dict[Tuple[int, int], Tuple[RouterCoord, list]] = {}
        g0 = slot + 2 * X
        for i in range(X):
            addends = {r: (tg, w[i]) for r, (tg, w) in products.items()}
            part, got = self.gather_accumulate(addends, out, g0 + 2 * i, tag + (i,))
            sched.extend(part)
            for tg, (r, val) in got.items():
                result.setdefault(tg, (r, []))[1].append(val)
        sched.rounds = X
        sched.total_slots = slot + 4 * X
        return sched, {tg: (r, np.asarray(vals)) for tg, (r, vals) in result.items()}

    def mat_mat_multiply(self, A: DistributedMatrix, B: DistributedMatrix, dest=None, block_mul=None):
        """C = A @ B, one vector-matrix product per row of A.

        Returns (C in transposed layout, schedule). KM rounds when X = 1,
        n^2/KM rounds in general. ``dest(s, u) -> (s', u')`` sends row
        (s, u) of the product to row (s', u') instead (a permutation of rows).
        """
        if (A.K, A.M) != (self.K, self.M) or (B.K, B.M) != (self.K, self.M) or A.X != B.X:
            raise ValueError("dimension mismatch")
        K, M, X = self.K, self.M, A.X
        sched = TimedSchedule()
        blocks: Dict[RouterCoord, np.ndarray] = {}
        filled = set()
        dtype = np.result_type(A.blocks[RouterCoord(0, 0, 0)], B.blocks[RouterCoord(0, 0, 0)])
        for s in range(K):
            for u in range(M):
                for j in range(X):
                    V = {(t, v): A.row_block(s, u, t, v)[j] for t in range(K) for v in range(M)}
                    so, uo = dest(s, u) if dest else (s, u)
                    part, res = self.vector_matrix(B, s, u, V, out=(so, uo), slot=sched.total_slots,
                                                   tag=(s, u, j), block_mul=block_mul)
                    sched.extend(part)
                    for (t2, v2), (r, vec) in res.items():
                        if r != RouterCoord(t2 + so * K, v2, uo):
                            raise AssertionError(f"output {(t2, v2)} of row {(s, u)} landed at {r}")
                        blk = blocks.setdefault(r, np.zeros((X, X), dtype=dtype))
                        if (r, j) in filled:
                            raise ValueError("destination rows must be a permutation")
                        filled.add((r, j))
                        blk[:, j] = vec
        return DistributedMatrix(K, M, X, blocks, transposed=True), sched


@dataclass
class MatmulResult:
    C: np.ndarray
    rounds: int
    report: SimReport
    hops_per_round: int
    off_and_on_per_round: int


def multiply(A, B, K: int, M: int, restore_layout: bool = False) -> MatmulResult:
    """Distribute dense ``A`` and ``B`` on D3(K^2, M), multiply, simulate, gather."""
    mach = MatmulMachine(K, M)
    dA = DistributedMatrix.from_dense(A, K, M)
    dB = DistributedMatrix.from_dense(B, K, M)
    dC, sched = mach.mat_mat_multiply(dA, dB)
    rep = simulate(mach.topo, sched)
    if restore_layout:
        dC, trep = transpose(dC)
        rep.conflicts.extend(trep.conflicts)
    return MatmulResult(dC.to_dense(), sched.rounds, rep, sched.total_slots // sched.rounds, sched.off_and_on // sched.rounds)


def mat_mat_multiply(A, B, K: int, M: int) -> MatmulResult:
    """KM x KM product (X = 1)."""
    if np.asarray(A).shape[0] != K * M:
        raise ValueError(f"expected {K * M}x{K * M} matrices")
    return multiply(A, B, K, M)


def blocked_multiply(A, B, K: int, M: int) -> MatmulResult:
    n = np.asarray(A).shape[0]
    if n % (K * M):
        raise ValueError(f"n={n} is not a multiple of KM={K * M}")
    return multiply(A, B, K, M)


def products_equal(got, want, exact: bool = True, rtol: float = 1e-12) -> bool:
    got, want = np.asarray(got), np.asarray(want)
    if exact:
        return got.shape == want.shape and bool(np.array_equal(got, want))
    scale = max(1.0, float(np.max(np.abs(want))))
    return bool(np.allclose(got, want, rtol=rtol, atol=rtol * scale))


# -- analytic comparisons -----------------------------------------------------

COST_VARIANTS = ("D3", "Cannon", "HJE", "DNS-mesh", "GS", "DNS-cube")


def cost_table(n: float, P: float, variant: str) -> float:
    """Network cost (units of t_w) of an n x n product on P processors."""
    lg = math.log2(P)
    table = {
        "D3": 4 * n * n / math.sqrt(P),
        "Cannon": 2 * n * n / math.sqrt(P),
        "HJE": 2 * n * n / math.sqrt(P) * lg,
        "DNS-mesh": 2 * n * n / math.sqrt(P),
        "GS": 3 * n * n / P ** (2 / 3) * lg,
        "DNS-cube": 4 * n * n / P ** (2 / 3),
    }
    try:
        return table[variant]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}; choose from {COST_VARIANTS}") from None


def replicated_rounds(K: int, M: int) -> dict:
    """Round counts of the K-fold replicated layout on D3(K, M)."""
    return {"vector_matrix": K, "matrix_matrix": K * K * M}


def subnetwork_vector_rounds(K: int, M: int, seed: int = 0) -> dict:
    """Vector-matrix product of length KM on D3(L^2, M) embedded in D3(K, M).

    Runs the blocked product with X = ceil(K/L) on the embedded network,
    maps every move through the embedding and simulates it on D3(K, M).
    """
    L = math.isqrt(K)
    if L < 1 or L * L < 2:
        raise ValueError("K too small for a D3(L^2, M) sub-network")
    X = -(-K // L)
    big = build_topology(GroupSpec.cyclic(K), GroupSpec.cyclic(M))
    emb = embed_subnetwork(big, range(L * L), range(M), require_closed=False)
    mach = MatmulMachine(L, M)
    rng = np.random.default_rng(seed)
    n = X * L * M
    vec = np.zeros(n, dtype=np.int64)
    vec[: K * M] = rng.integers(-9, 10, K * M)
    B = rng.integers(-9, 10, (n, n))
    dB = DistributedMatrix.from_dense(B, L, M)
    V = {(t, v): vec[dB._idx(t, v)] for t in range(L) for v in range(M)}
    sched, res = mach.vector_matrix(dB, 0, 0, V)
    got = np.zeros(n, dtype=np.int64)
    for (t2, v2), (_, piece) in res.items():
        got[dB._idx(t2, v2)] = piece
    mapped = TimedSchedule(total_slots=sched.total_slots, rounds=sched.rounds)
    for pid, src in sched.sources.items():
        mapped.sources[pid] = emb.router(src)
    from .engine import PacketMove

    mapped.moves = [PacketMove(m.packet_id, emb.channel(m.channel), m.slot) for m in sched.moves]
    rep = simulate(big, mapped)
    return {
        "K": K, "M": M, "L": L,
        "rounds_embedded": sched.rounds,
        "rounds_replicated": K,
        "conflicts": len(rep.conflicts),
        "exact": bool(np.array_equal(got, vec @ B)),
    }


# -- file formats -------------------------------------------------------------


def load_dense(path) -> np.ndarray:
    A = np.loadtxt(path, ndmin=2)
    if np.all(A == np.round(A)):
        return A.astype(np.int64)
    return A


def save_dense(path, A) -> None:
    A = np.asarray(A)
    fmt = "%d" if np.issubdtype(A.dtype, np.integer) else "%.17g"
    np.savetxt(path, A, fmt=fmt)


def dump_blocks(dm: DistributedMatrix) -> str:
    return json.dumps(
        {
            "K": dm.K, "M": dm.M, "X": dm.X, "transposed": dm.transposed,
            "blocks": {f"{r.c},{r.d},{r.p}": blk.tolist() for r, blk in sorted(dm.blocks.items())},
        },
        sort_keys=True,
    )


def load_blocks(text: str) -> DistributedMatrix:
    doc = json.loads(text)
    blocks = {RouterCoord(*map(int, k.split(","))): np.asarray(v) for k, v in doc["blocks"].items()}
    return DistributedMatrix(doc["K"], doc["M"], doc["X"], blocks, doc["transposed"])
