import operator
import random
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from swapped_dragonfly.hypercube import (
    COMBINERS,
    SbhGraph,
    a2a_cost_compare,
    ascend_descend,
    bitonic_sort,
    bitonic_steps,
    build_sbh,
    combine,
    diameter_check,
    dilation4_check,
    dilation4_header,
    dilation_stats,
    dim_exchange_path,
    emulation_host,
    hypercube_hops,
    overlay_check,
    reference_hypercube,
    uniform_dilation4_paths,
)
from swapped_dragonfly.routing import format_header


def test_sbh_sizes_and_missing_z():
    g = build_sbh(1, 1)
    assert len(g) == 8
    no_z = [x for x in range(8) if "Z" not in {l.label for l in g.links(x)}]
    assert len(no_z) == 4 and all(g.fields(x)[1] == g.fields(x)[2] for x in no_z)
    assert len(build_sbh(2, 2)) == 64
    with pytest.raises(ValueError):
        build_sbh(0, 0)


def test_links_are_bidirectional():
    g = SbhGraph(2, 2)
    for x in range(len(g)):
        for link in g.links(x):
            back = [l for l in g.links(link.dst) if l.dst == x and l.label == link.label]
            assert back


def test_degree_is_k_plus_m_plus_z():
    g = SbhGraph(2, 2)
    for x in range(len(g)):
        c, d, p = g.fields(x)
        assert g.degree(x) == 2 + 2 + (d != p)


@pytest.mark.parametrize("k,m", [(1, 1), (2, 2), (2, 1), (1, 3)])
def test_overlay_on_boolean_d3(k, m):
    assert overlay_check(SbhGraph(k, m))


def test_no_overlay_without_both_fields():
    with pytest.raises(ValueError):
        overlay_check(SbhGraph(0, 2))


def test_dim_exchange_examples():
    g = SbhGraph(2, 2)
    x = g.addr(0b00, 0b01, 0b10)
    c0 = dim_exchange_path(g, x, 4)
    assert [l.label for l in c0.links] == ["gamma", "Z"] and c0.dilation == 2
    p1 = dim_exchange_path(g, x, 1)
    assert [(l.label, l.bit) for l in p1.links] == [("pi", 1)]
    y = g.addr(0, 0b01, 0b01)
    d0 = dim_exchange_path(g, y, 2)
    assert [l.label for l in d0.links] == ["pi", "Z"]
    assert d0.links[-1].dst == g.addr(0, 0b00, 0b01)


def test_dilations_exhaustive_sbh22():
    g = SbhGraph(2, 2)
    for x in range(len(g)):
        c, d, p = g.fields(x)
        for j in range(g.dims):
            plan = dim_exchange_path(g, x, j)
            assert plan.links[-1].dst == x ^ (1 << j)
            here = x
            for link in plan.links:
                assert link in g.links(here)
                here = link.dst
            field, i = g.field_of(j)
            if field == "p":
                assert plan.dilation == 1
            elif field == "c":
                assert plan.dilation == (1 if d == p else 2)
            else:
                special = d == p or (d ^ (1 << i)) == p
                assert plan.dilation == (2 if special else 3)


def test_dilation_stats():
    s = dilation_stats(2, 2)
    assert s["max"] == 3 and s["uniform_mean"] == 2.0 and s["empirical_mean"] <= 2.0
    assert dilation_stats(3, 0)["max"] == 2 and dilation_stats(3, 0)["uniform_mean"] == 2.0
    s = dilation_stats(0, 2)
    assert s["max"] == 3 and s["uniform_mean"] == 2.0


def brute_diameter(g):
    best = 0
    for src in range(len(g)):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for x in frontier:
                for l in g.links(x):
                    if l.dst not in dist:
                        dist[l.dst] = dist[x] + 1
                        nxt.append(l.dst)
            frontier = nxt
        best = max(best, max(dist.values()))
    return best


@pytest.mark.parametrize("k,m,bound", [(1, 1, 6), (2, 2, 12), (0, 1, 4), (2, 1, 8)])
def test_diameter(k, m, bound):
    res = diameter_check(k, m)
    assert res["bound"] == bound and res["ok"]
    assert res["diameter"] == brute_diameter(SbhGraph(k, m))


def test_diameter_cap():
    with pytest.raises(ValueError):
        diameter_check(4, 6)


def test_allreduce_sum_sbh11():
    run = ascend_descend(1, 1, combine(operator.add))
    order = [0, 1, 2, 2, 1, 0]
    assert run.values == reference_hypercube(3, [(j, combine(operator.add)) for j in order], list(range(8)))
    assert run.report.conflict_free
    assert run.channel_slots <= 2 * hypercube_hops(order)


def test_identity_op_keeps_state():
    vals = list(range(100, 164))
    run = ascend_descend(2, 2, lambda x, a, b: a, vals)
    assert run.values == vals


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(sorted(COMBINERS)), st.sampled_from([(1, 1), (2, 1), (1, 2)]), st.integers(0, 10**6))
def test_ascend_descend_matches_hypercube(name, km, seed):
    k, m = km
    g = SbhGraph(k, m)
    vals = [random.Random(seed + x).randint(0, 999) for x in range(len(g))]
    op = combine(COMBINERS[name])
    run = ascend_descend(k, m, op, vals)
    order = list(range(g.dims)) + list(reversed(range(g.dims)))
    assert run.values == reference_hypercube(g.dims, [(j, op) for j in order], vals)
    assert run.report.conflict_free
    if name in ("min", "max"):
        # idempotent: the second sweep leaves the reduced value in place
        assert len(set(run.values)) == 1 and run.values[0] == reduce(COMBINERS[name], vals)


def test_bitonic_sort_sbh22():
    keys = random.Random(1).sample(range(10**6), 64)
    run = bitonic_sort(2, 2, keys)
    assert run.values == sorted(keys)
    assert run.report.conflict_free
    assert run.channel_slots == 38 <= 2 * hypercube_hops(bitonic_steps(6))


def test_header_templates():
    assert [format_header(uniform_dilation4_paths(c)) for c in "cdp"] == ["[4;γ,0,0]", "[4;0,0,δ]", "[4;0,π,0]"]
    assert dilation4_header("d", 2).delta == 2
    with pytest.raises(ValueError):
        uniform_dilation4_paths("x")


@pytest.mark.parametrize("cls", ["c", "d", "p"])
@pytest.mark.parametrize("bit", [0, 1])
def test_single_class_conflict_free(cls, bit):
    res = dilation4_check(2, 2, (cls,), bit)
    assert res["conflicts"] == 0 and res["correct"]


def test_classes_share_port_zero_at_first_hop():
    # the d and p templates both open with global port 0, so launching them
    # from the same routers in the same slot collides
    res = dilation4_check(2, 2, ("d", "p"))
    assert res["conflicts"] > 0 and res["correct"]


def test_a2a_cost_compare():
    r = a2a_cost_compare(1, 1)
    assert r["doubly_parallel"] == 8 and r["johnsson_ho"] == pytest.approx(8 / 3)
    r = a2a_cost_compare(2, 2)
    assert r["doubly_parallel"] == 32 and r["johnsson_ho"] == pytest.approx(64 / 3)
    r = a2a_cost_compare(3, 3)
    assert r["doubly_parallel"] == 128 and r["winner"] == "doubly_parallel"
    assert a2a_cost_compare(1, 3)["doubly_parallel_rederived"] == 64


def test_emulation_host():
    g, emb = emulation_host(6, 5)
    assert (g.k, g.m) == (2, 2) and emb.verify()
    assert len(emb.small) == len(g)
