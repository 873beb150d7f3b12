"""Doubly-parallel all-to-all exchange on D3(ks, ms).

Vectors ``(gamma, pi, delta)`` are drawn from coset cells of the subgroup
generated by ``s``. Vectors taken from different columns of a disagreeable
array differ in every component, so one vector per column can be launched
by every router in the same round without link conflicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .engine import Round, TimedSchedule, pipeline
from .routing import SourceVector
from .topology import Topology


@dataclass(frozen=True)
class CosetTable:
    n: int
    s: int

    def __post_init__(self):
        if self.s < 1 or self.n % self.s:
            raise ValueError(f"stride {self.s} does not divide {self.n}")

    @property
    def coset_size(self) -> int:
        return self.n // self.s

    def coset(self, t: int) -> List[int]:
        """``[t] = {t, t+s, ..., t+(n/s-1)s}``."""
        return [t + a * self.s for a in range(self.coset_size)]

    @property
    def cosets(self) -> List[List[int]]:
        return [self.coset(t) for t in range(self.s)]

    def dual_cell(self, a: int) -> List[int]:
        """The a-th column of the coset display: ``{as, as+1, ..., as+s-1}``."""
        return [a * self.s + j for j in range(self.s)]

    @property
    def dual_cells(self) -> List[List[int]]:
        return [self.dual_cell(a) for a in range(self.coset_size)]


def coset_partition(n: int, s: int) -> CosetTable:
    return CosetTable(n, s)


@dataclass(frozen=True)
class RoundSelector:
    """``lam = a + b*m + c*m**2``: entry c of each gamma cell, a of pi, b of delta."""

    lam: int
    k: int
    m: int

    def __post_init__(self):
        if not 0 <= self.lam < self.k * self.m * self.m:
            raise ValueError(f"selector {self.lam} outside [0, {self.k * self.m * self.m})")

    @property
    def a(self) -> int:
        return self.lam % self.m

    @property
    def b(self) -> int:
        return self.lam // self.m % self.m

    @property
    def c(self) -> int:
        return self.lam // (self.m * self.m)

    @classmethod
    def of(cls, a: int, b: int, c: int, k: int, m: int) -> "RoundSelector":
        return cls(a + b * m + c * m * m, k, m)


@dataclass(frozen=True)
class DisagreeableArray:
    K: int
    M: int
    s: int
    mu: int = 0
    nu: int = 0

    def __post_init__(self):
        if self.s < 1 or self.K % self.s or self.M % self.s:
            raise ValueError(f"s={self.s} is not a common divisor of K={self.K} and M={self.M}")
        if not (0 <= self.mu < self.s and 0 <= self.nu < self.s):
            raise ValueError("shifts must satisfy 0 <= mu, nu < s")

    @property
    def k(self) -> int:
        return self.K // self.s

    @property
    def m(self) -> int:
        return self.M // self.s

    def cells(self, i: int) -> Tuple[int, int, int]:
        """Coset labels (gamma, pi, delta) of column ``i`` after the left shifts."""
        return i, (i + self.mu) % self.s, (i + self.nu) % self.s

    @property
    def rows(self) -> Dict[str, List[int]]:
        cols = [self.cells(i) for i in range(self.s)]
        return {name: [c[j] for c in cols] for j, name in enumerate(("gamma", "pi", "delta"))}

    def column_vectors(self, i: int) -> List[SourceVector]:
        g, p, d = self.cells(i)
        s = self.s
        return [
            SourceVector(g + c * s, p + a * s, d + b * s)
            for c in range(self.k)
            for b in range(self.m)
            for a in range(self.m)
        ]

    def vectors(self) -> List[SourceVector]:
        return [v for i in range(self.s) for v in self.column_vectors(i)]

    def is_disagreeable(self) -> bool:
        cols = [self.column_vectors(i) for i in range(self.s)]
        for i in range(self.s):
            for j in range(i + 1, self.s):
                for v in cols[i]:
                    for w in cols[j]:
                        if v.gamma == w.gamma or v.pi == w.pi or v.delta == w.delta:
                            return False
        return True


def build_da(K: int, M: int, s: int, mu: int = 0, nu: int = 0) -> DisagreeableArray:
    return DisagreeableArray(K, M, s, mu, nu)


def round_vectors(da: DisagreeableArray, sel: RoundSelector) -> List[SourceVector]:
    s = da.s
    out = []
    for i in range(s):
        g, p, d = da.cells(i)
        out.append(SourceVector(g + sel.c * s, p + sel.a * s, d + sel.b * s))
    return out


def all_rounds_vectors(K: int, M: int, s: int) -> List[Tuple[Tuple[int, int, int], List[SourceVector]]]:
    """Round vectors in schedule order: shift index ``phi = mu + nu*s`` outer, selector inner."""
    k, m = K // s, M // s
    out = []
    for phi in range(s * s):
        mu, nu = phi % s, phi // s
        da = build_da(K, M, s, mu, nu)
        for lam in range(k * m * m):
            out.append(((mu, nu, lam), round_vectors(da, RoundSelector(lam, k, m))))
    return out


def _check_a2a(t: Topology, s: int):
    if t.cabinets.kind != "cyclic" or t.drawers.kind != "cyclic":
        raise ValueError("the doubly-parallel schedule is defined on cyclic coordinate groups")
    if s < 1 or t.K % s or t.M % s:
        raise ValueError(f"s={s} must divide K={t.K} and M={t.M}")


def doubly_parallel_rounds(t: Topology, s: int) -> List[Round]:
    _check_a2a(t, s)
    # global port 0 carries the zero-gamma vectors so that every destination is reached
    return [Round.uniform(t, vecs, swap_on_zero=True, label=label) for label, vecs in all_rounds_vectors(t.K, t.M, s)]


def schedule1_delays(t: Topology):
    """Delay policy for Schedule 1: greedy look-ahead on actual channel use.

    Each round goes at the earliest slot after its predecessor whose moves hit
    no channel already taken in the same slot; every skipped slot is a delay
    that stalls this round and everything after it.
    """

    def policy(expanded) -> List[int]:
        taken = set()
        bases = []
        prev = -1
        for launches in expanded:
            base = prev + 1
            while True:
                mine = [
                    (ch, base + i)
                    for _, _, steps in launches
                    for i, ch in enumerate(steps)
                    if ch is not None and not ch.degenerate
                ]
                if not any(key in taken for key in mine):
                    break
                base += 1
            taken.update(mine)
            bases.append(base)
            prev = base
        return bases

    return policy


def doubly_parallel_schedule(t: Topology, s: int, pattern: str = "S2", rounds: Optional[List[Round]] = None) -> TimedSchedule:
    _check_a2a(t, s)
    if pattern == "S1" and 2 * s > t.M:
        raise ValueError(f"Schedule 1 needs s <= M/2 (s={s}, M={t.M})")
    if rounds is None:
        rounds = doubly_parallel_rounds(t, s)
    policy = schedule1_delays(t) if pattern == "S1" else None
    return pipeline(t, rounds, pattern, policy)


def blocked_a2a(t: Topology, s: int, n: int, pattern: str = "S2") -> TimedSchedule:
    """All-to-all among ``n = X*KM^2`` items: the base schedule repeated X^2 times."""
    size = t.K * t.M * t.M
    if n < size or n % size:
        raise ValueError(f"n={n} must be a positive multiple of KM^2={size}")
    X = n // size
    base = doubly_parallel_rounds(t, s)
    rounds = []
    for rep in range(X * X):
        rounds.extend(Round(r.launches, r.swap_on_zero, (rep,) + tuple(r.label)) for r in base)
    return doubly_parallel_schedule(t, s, pattern, rounds=rounds)


def delivery_matrix(t: Topology, s: TimedSchedule, deliveries) -> Dict[Tuple, int]:
    """Message counts per ordered (source, destination) router pair."""
    counts: Dict[Tuple, int] = {}
    for pid, dst in deliveries.items():
        key = (s.sources[pid], dst)
        counts[key] = counts.get(key, 0) + 1
    return counts


def export_rounds_csv(rounds: Sequence[Round], fh) -> None:
    import csv

    w = csv.writer(fh)
    w.writerow(["round", "column", "gamma", "pi", "delta"])
    for i, rnd in enumerate(rounds):
        for j, v in enumerate(rnd.vectors):
            w.writerow([i, j, v.gamma, v.pi, v.delta])


# -- sub-network planning -----------------------------------------------------


@dataclass(frozen=True)
class EmulationPlan:
    K: int
    M: int
    J: int
    L: int
    s: int
    rounds_estimate: float
    rounds_executable: int
    load: float

    def as_dict(self) -> dict:
        return {
            "K": self.K, "M": self.M, "J": self.J, "L": self.L, "s": self.s,
            "load": self.load,
            "rounds_estimate": self.rounds_estimate,
            "rounds_executable": self.rounds_executable,
        }


def plan_value(K: int, M: int, J: int, L: int, s: int) -> Tuple[float, int]:
    """Fractional estimate and integer executable round count for running
    a KM^2 all-to-all on D3(J, L) with stride s."""
    size, sub = K * M * M, J * L * L
    estimate = (sub / s) * (size / sub) ** 2
    X = math.ceil(size / sub)
    return estimate, X * X * sub // s


def _admissible(K, M, J, L, s) -> bool:
    if J < 2 or L < 2 or J % s or L % s or 2 * s > L:
        return False
    # either the network itself, or a strictly smaller sub-network
    return (J == K and L == M) or (J < K and L < M)


def plan_emulation(K: int, M: int) -> EmulationPlan:
    """Pick (J, L, s) minimizing the estimated round count.

    Candidates are D3(K, M) itself and every D3(J, L) with J < K and L < M;
    s must divide both J and L with s <= L/2. For a fixed s the best
    sub-network is the largest multiple of s below K and below M.
    """
    best = None
    candidates = []
    for s in range(1, max(K, M) + 1):
        if K % s == 0 and M % s == 0 and 2 * s <= M:
            candidates.append((K, M, s))
        J = (K - 1) // s * s
        L = (M - 1) // s * s
        if J >= 2 and L >= 2 and 2 * s <= L:
            candidates.append((J, L, s))
    for J, L, s in candidates:
        est, _ = plan_value(K, M, J, L, s)
        key = (est, -s, -J, -L)
        if best is None or key < best[0]:
            best = (key, (J, L, s))
    if best is None:
        J, L, s = K, M, 1
    else:
        J, L, s = best[1]
    est, exe = plan_value(K, M, J, L, s)
    return EmulationPlan(K, M, J, L, s, est, exe, K * M * M / (J * L * L))
