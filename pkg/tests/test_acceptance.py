"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPT #n PASS|FAIL`` line (visible under
``pytest -v``) before asserting, so a run doubles as a scorecard.
"""

import random
import time
from collections import Counter

import numpy as np
import pytest

from swapped_dragonfly.alltoall import delivery_matrix, doubly_parallel_rounds, doubly_parallel_schedule, plan_emulation
from swapped_dragonfly.broadcast import depth4_trees, pipeline_depth4_pairs
from swapped_dragonfly.engine import simulate, verify_property1, verify_property3
from swapped_dragonfly.hypercube import (
    SbhGraph,
    bitonic_sort,
    bitonic_steps,
    diameter_check,
    dilation4_check,
    dilation_stats,
    hypercube_hops,
    overlay_topology,
)
from swapped_dragonfly.matmul import blocked_multiply, mat_mat_multiply, products_equal
from swapped_dragonfly.routing import SourceVector, SyncHeader, format_header, header_trace, step_sync_header
from swapped_dragonfly.topology import RouterCoord, d3


@pytest.fixture
def verdict(capsys):
    start = time.perf_counter()

    def record(n, title, ok, limit, detail=""):
        elapsed = time.perf_counter() - start
        ok = bool(ok) and elapsed < limit
        with capsys.disabled():
            print(f"\nACCEPT #{n:<2} {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.2f}s < {limit}s) {detail}")
        assert ok, f"criterion {n} failed: {detail}"

    return record


def test_01_single_vector_permutation(verdict):
    t = d3(4, 3)
    results = [
        verify_property1(t, SourceVector(g, p, d)) for g in range(4) for p in range(3) for d in range(3)
    ]
    bad = [r for r in results if not r["permutation"] or r["conflicts"]]
    verdict(1, "D3(4,3) all 36 vectors: permutation, 0 conflicts", len(results) == 36 and not bad, 1,
            f"vectors={len(results)} failing={len(bad)}")


def test_02_distinct_vector_pairs(verdict):
    t = d3(3, 4)
    rng = random.Random(2024)
    total = 0
    for _ in range(50):
        g1, g2 = rng.sample(range(3), 2)
        p1, p2 = rng.sample(range(4), 2)
        d1, d2 = rng.sample(range(4), 2)
        total += verify_property3(t, SourceVector(g1, p1, d1), SourceVector(g2, p2, d2))
    verdict(2, "D3(3,4) 50 componentwise-distinct pairs conflict-free", total == 0, 1, f"conflicts={total}")


def test_03_doubly_parallel_s2(verdict):
    t = d3(4, 4)
    rounds = doubly_parallel_rounds(t, 2)
    used = Counter(tuple(v) for r in rounds for v in r.vectors)
    every_vector_once = len(used) == 64 and set(used.values()) == {1}
    sched = doubly_parallel_schedule(t, 2, "S2", rounds=rounds)
    rep = simulate(t, sched)
    counts = delivery_matrix(t, sched, rep.deliveries)
    pairs_once = len(counts) == len(t) ** 2 and set(counts.values()) == {1}
    ok = len(rounds) == 32 and every_vector_once and pairs_once and rep.conflict_free and rep.total_slots <= 65
    verdict(3, "D3(4,4) s=2: 32 rounds, full coverage, S2 conflict-free", ok, 5,
            f"rounds={len(rounds)} slots={rep.total_slots} conflicts={len(rep.conflicts)}")


def test_04_schedule1_delays(verdict):
    t = d3(4, 4)
    sched = doubly_parallel_schedule(t, 2, "S1")
    rep = simulate(t, sched)
    counts = delivery_matrix(t, sched, rep.deliveries)
    ok = rep.conflict_free and sched.delays <= 16 and rep.total_slots <= 50 and set(counts.values()) == {1}
    verdict(4, "D3(4,4) s=2 under S1: delays <= 16, slots <= 50", ok, 5,
            f"delays={sched.delays} slots={rep.total_slots} conflicts={len(rep.conflicts)}")


def test_05_planner(verdict):
    plan = plan_emulation(7, 16)
    ok = (plan.J, plan.L, plan.s) == (5, 15, 5) and 565 <= plan.rounds_estimate <= 573
    verdict(5, "plan(7,16) = (5,15,5), estimate in [565,573]", ok, 1,
            f"plan=({plan.J},{plan.L},{plan.s}) estimate={plan.rounds_estimate:.2f}")


def test_06_matmul_km_rounds(verdict):
    failures = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A, B = rng.integers(-9, 10, (4, 4)), rng.integers(-9, 10, (4, 4))
        res = mat_mat_multiply(A, B, 2, 2)
        if not (res.rounds == 4 and res.hops_per_round == 4 and res.off_and_on_per_round == 2
                and res.report.conflict_free and products_equal(res.C, A @ B)):
            failures.append(seed)
    rng = np.random.default_rng(0)
    A, B = rng.integers(-9, 10, (9, 9)), rng.integers(-9, 10, (9, 9))
    big = mat_mat_multiply(A, B, 3, 3)
    big_ok = big.rounds == 9 and big.report.conflict_free and products_equal(big.C, A @ B)
    verdict(6, "KM rounds, 4 hops + 2 off-and-on per round, exact (D3(4,2) x100, D3(9,3))",
            not failures and big_ok, 5, f"failing_seeds={failures} d3_9_3_rounds={big.rounds}")


def test_07_blocked_multiply_rounds(verdict):
    rng = np.random.default_rng(7)
    A, B = rng.integers(-9, 10, (8, 8)), rng.integers(-9, 10, (8, 8))
    res = blocked_multiply(A, B, 2, 2)
    ok = res.rounds == 16 and res.report.conflict_free and products_equal(res.C, A @ B)
    verdict(7, "D3(4,2) n=8 blocked multiply in 16 rounds, exact", ok, 10, f"rounds={res.rounds}")


def test_08_sbh_dilation(verdict):
    stats = dilation_stats(2, 2)
    diam = diameter_check(2, 2)["diameter"]
    ok = stats["max"] == 3 and stats["uniform_mean"] == 2.0 and stats["empirical_mean"] <= 2.0 and diam <= 12
    verdict(8, "SBH(2,2) dilation max 3, uniform mean 2, diameter <= 12", ok, 5,
            f"max={stats['max']} uniform={stats['uniform_mean']} empirical={stats['empirical_mean']:.3f} diameter={diam}")


def test_09_ascend_descend_sort(verdict):
    rng = random.Random(9)
    keys = [rng.randrange(1 << 16) for _ in range(64)]
    run = bitonic_sort(2, 2, keys)
    hops = hypercube_hops(bitonic_steps(SbhGraph(2, 2).dims))
    ok = run.values == sorted(keys) and run.channel_slots <= 2 * hops
    verdict(9, "SBH(2,2) bitonic sort of 64 keys at <= 2x hypercube hops", ok, 5,
            f"sorted={run.values == sorted(keys)} channel_slots={run.channel_slots} hops={hops}")


def test_10_depth4_trees_edge_disjoint(verdict):
    t = d3(3, 4)
    spanning, disjoint, overlaps = True, True, 0
    for c in range(3):
        for d in range(4):
            trees = depth4_trees(t, (c, d))
            spanning &= len(trees) == 4 and all(tr.is_spanning_tree(t) for tr in trees)
            for i in range(4):
                for j in range(i + 1, 4):
                    common = trees[i].channels() & trees[j].channels()
                    overlaps += len(common)
                    disjoint &= not common
    verdict(10, "D3(3,4) depth-4 trees of every drawer pairwise directed-edge-disjoint", spanning and disjoint, 1,
            f"spanning={spanning} shared_directed_channels={overlaps}")


def test_11_paired_pipelining(verdict):
    t = d3(3, 4)
    run = pipeline_depth4_pairs(t, (0, 0), 8)
    diag = pipeline_depth4_pairs(t, (0, 0), 8, mode="stride1")
    ok = (run.report.conflict_free and run.report.total_slots <= 12 and run.complete(t, range(8))
          and len(diag.report.conflicts) >= 1)
    verdict(11, "D3(3,4) X=8 paired broadcasts in <= 12 slots, stride-1 conflicts", ok, 5,
            f"slots={run.report.total_slots} conflicts={len(run.report.conflicts)} stride1_conflicts={len(diag.report.conflicts)}")


def _concrete_trace(b):
    """Drive step_sync_header on concrete fields and map them back to symbols."""
    t = d3(3, 4)
    names = {1: "γ", 2: "π", 3: "δ", 0: "0"}
    h, r = SyncHeader(b, 1, 2, 3), RouterCoord(0, 0, 0)
    out = [h]
    while not h.arrived:
        ch, h = step_sync_header(t, r, h)
        r = ch.dst if ch is not None else r
        out.append(h)
    return [f"[{x.b};{names[x.gamma]},{names[x.pi]},{names[x.delta]}]" for x in out]


def test_12_header_traces(verdict):
    want3 = ["[3;γ,π,δ]", "[2;γ,0,π]", "[1;0,0,π]", "[0;0,0,0]"]
    want4 = ["[4;γ,π,δ]", "[3;0,π,δ]", "[2;0,0,π]", "[1;0,0,π]", "[0;0,0,0]"]
    symbolic = [[format_header(x) for x in header_trace(SyncHeader(b, "γ", "π", "δ"))] for b in (3, 4)]
    ok = symbolic == [want3, want4] and _concrete_trace(3) == want3 and _concrete_trace(4) == want4
    verdict(12, "header traces [3;γ,π,δ] and [4;γ,π,δ] field-for-field", ok, 1)


def test_13_uniform_dilation4_concurrent(verdict):
    res = dilation4_check(2, 2, ("c", "d", "p"))
    t = overlay_topology(SbhGraph(2, 2))
    ok = res["conflicts"] == 0 and res["hops"] == 4 and res["correct"] and t.K == 4 and t.M == 4
    verdict(13, "D3(4,4)-boolean, all three dilation-4 classes at once, 0 conflicts", ok, 5,
            f"conflicts={res['conflicts']} correct={res['correct']}")
