import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from swapped_dragonfly.engine import (
    PathError,
    Round,
    TimedSchedule,
    find_conflicts,
    no_delays,
    pipeline,
    simulate,
    stride_bases,
    trace_text,
    verify_property1,
    verify_property3,
)
from swapped_dragonfly.routing import SourceVector
from swapped_dragonfly.topology import RouterCoord, d3


def two_packets(t, ch_a, ch_b):
    s = TimedSchedule()
    s.add_path("a", ch_a.src, [ch_a], 0)
    s.add_path("b", ch_b.src, [ch_b], 0)
    return simulate(t, s)


def test_opposite_directions_do_not_conflict():
    t = d3(2, 2)
    ch = t.local(RouterCoord(0, 0, 0), 1)
    rep = two_packets(t, ch, t.reverse(ch))
    assert rep.conflict_free


def test_same_directed_channel_conflicts():
    t = d3(2, 2)
    ch = t.local(RouterCoord(0, 0, 0), 1)
    rep = two_packets(t, ch, ch)
    assert len(rep.conflicts) == 1
    assert set(rep.conflicts[0].packet_ids) == {"a", "b"}


def test_degenerate_channel_never_conflicts():
    t = d3(2, 2)
    ch = t.glob(RouterCoord(1, 1, 1), 0)
    assert ch.degenerate
    assert two_packets(t, ch, ch).conflict_free


def test_discontiguous_path_rejected():
    t = d3(2, 2)
    s = TimedSchedule()
    s.add_path("a", RouterCoord(0, 0, 0), [t.local(RouterCoord(0, 0, 0), 1), t.local(RouterCoord(1, 0, 0), 1)], 0)
    with pytest.raises(PathError):
        simulate(t, s)


def test_foreign_channel_rejected():
    s = TimedSchedule()
    ch = d3(3, 3).local(RouterCoord(2, 2, 2), 1)
    s.add_path("a", ch.src, [ch], 0)
    with pytest.raises(PathError):
        simulate(d3(2, 2), s)


def test_property1_round():
    t = d3(4, 3)
    res = verify_property1(t, SourceVector(1, 1, 2))
    assert res == {"permutation": True, "conflicts": 0}


def test_property1_sweep_and_zero():
    t = d3(4, 3)
    for g in range(4):
        for p in range(3):
            for d in range(3):
                assert verify_property1(t, SourceVector(g, p, d)) == {"permutation": True, "conflicts": 0}
    assert verify_property1(d3(2, 4), SourceVector(1, 3, 2)) == {"permutation": True, "conflicts": 0}
    rnd = Round.uniform(t, [SourceVector(0, 0, 0)])
    rep = simulate(t, pipeline(t, [rnd], "S3"))
    assert all(dst == rnd.launches[j][0] for (_, j), dst in rep.deliveries.items())


def test_property3_examples():
    t = d3(3, 4)
    assert verify_property3(t, SourceVector(0, 1, 2), SourceVector(1, 2, 3)) == 0
    assert verify_property3(t, SourceVector(1, 1, 1), SourceVector(2, 2, 2)) == 0
    # the same vector twice from every router collides on every hop
    assert verify_property3(t, SourceVector(1, 1, 1), SourceVector(1, 1, 1)) > 0


def test_pipeline_slot_counts():
    t = d3(3, 4)
    rounds = [Round.uniform(t, [SourceVector(g, p, d)]) for g, p, d in [(1, 1, 2), (2, 3, 1), (0, 2, 3), (1, 3, 3)]]
    assert pipeline(t, rounds, "S3").total_slots == 12
    assert pipeline(t, rounds, "S2").total_slots == 8
    for pattern in ("S2", "S3"):
        assert pipeline(t, rounds[:1], pattern).total_slots == 3
    assert pipeline(t, rounds[:1], "S1", no_delays).total_slots == 3
    assert stride_bases(4, "S2") == [0, 1, 4, 5]


def test_s1_needs_policy():
    t = d3(2, 2)
    with pytest.raises(ValueError):
        pipeline(t, [Round.uniform(t, [SourceVector(1, 1, 1)])], "S1")
    with pytest.raises(ValueError):
        pipeline(t, [], "S4")


def test_conflict_detection_order_independent():
    t = d3(3, 3)
    rounds = [Round.uniform(t, [SourceVector(1, 1, 1), SourceVector(2, 1, 2)])]
    s = pipeline(t, rounds * 3, "S1", no_delays)
    base = find_conflicts(s.moves)
    assert base
    rng = random.Random(7)
    for _ in range(5):
        moves = list(s.moves)
        rng.shuffle(moves)
        assert find_conflicts(moves) == base


def test_simulate_is_deterministic():
    t = d3(3, 3)
    rounds = [Round.uniform(t, [SourceVector(1, 2, 1)]), Round.uniform(t, [SourceVector(2, 1, 2)])]
    a = simulate(t, pipeline(t, rounds, "S1", no_delays)).to_json()
    b = simulate(t, pipeline(t, rounds, "S1", no_delays)).to_json()
    assert a == b
    assert json.loads(a)["total_hops"] == 2 * 27 * 3


def test_trace_csv_header_and_rows():
    t = d3(2, 2)
    s = pipeline(t, [Round.uniform(t, [SourceVector(1, 1, 1)])], "S3")
    lines = trace_text(s).strip().splitlines()
    assert lines[0] == "slot,packet_id,from,to,class,port"
    assert len(lines) == 1 + len(s.moves)


def test_time_accounting():
    t = d3(2, 2)
    s = TimedSchedule(off_and_on=2)
    ch = t.local(RouterCoord(0, 0, 0), 1)
    s.add_path("a", ch.src, [ch], 0)
    rep = simulate(t, s)
    assert rep.time(t_w=1, t_s=10) == 1 + 20


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.data())
def test_distinct_component_vectors_never_conflict(K, M, data):
    t = d3(K, M)
    g1, g2 = data.draw(st.lists(st.integers(0, K - 1), min_size=2, max_size=2, unique=True))
    p1, p2 = data.draw(st.lists(st.integers(0, M - 1), min_size=2, max_size=2, unique=True))
    d1, d2 = data.draw(st.lists(st.integers(0, M - 1), min_size=2, max_size=2, unique=True))
    assert verify_property3(t, SourceVector(g1, p1, d1), SourceVector(g2, p2, d2)) == 0
