import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iidcast import meg
from iidcast.meg import (ConfigurationError, ExpanderSegment, FloodingState, GraphSnapshot,
                         estimate_expansion_probability, flood_step, flood_until_complete,
                         is_expander_exact, repeat_snapshot)
from iidcast.mobility import induced_snapshot, make_config, sample_assignment, snapshots


def informed_set(state):
    return set(np.flatnonzero(state.informed).tolist())


def test_snapshot_groups_round_trip():
    g = GraphSnapshot.from_groups([[0, 1], [2]])
    assert g.node_count == 3
    assert set(g.groups) == {frozenset({0, 1}), frozenset({2})}


def test_snapshot_rejects_overlapping_groups():
    with pytest.raises(ConfigurationError):
        GraphSnapshot.from_groups([[0, 1], [1, 2]])
    with pytest.raises(ConfigurationError):
        GraphSnapshot.from_groups([[0], [2]])


def test_flood_step_examples():
    g = GraphSnapshot.from_groups([[0, 1], [2]])
    s = flood_step(FloodingState.start(3, 0), g)
    assert informed_set(s) == {0, 1} and s.step == 1

    lonely = GraphSnapshot.from_groups([[0], [1], [2]])
    assert informed_set(flood_step(FloodingState.start(3, 0), lonely)) == {0}


def test_flood_step_fixpoint_when_all_informed():
    g = GraphSnapshot.from_groups([[0, 2], [1]])
    s = FloodingState(np.ones(3, dtype=bool), 4)
    nxt = flood_step(s, g)
    assert nxt.informed.all() and nxt.step == 5


def test_flood_step_errors():
    g = GraphSnapshot.from_groups([[0, 1]])
    with pytest.raises(ConfigurationError):
        flood_step(FloodingState.start(3, 0), g)
    with pytest.raises(ConfigurationError):
        flood_step(FloodingState(np.zeros(2, dtype=bool)), g)


@settings(max_examples=60, deadline=None)
@given(labels=st.lists(st.integers(0, 4), min_size=1, max_size=12), data=st.data())
def test_flood_step_matches_neighbor_definition(labels, data):
    n = len(labels)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    if not mask.any():
        mask[0] = True
    g = GraphSnapshot(np.array(labels))
    got = informed_set(flood_step(FloodingState(mask.copy()), g))
    want = {j for j in range(n) if mask[j] or any(mask[i] and labels[i] == labels[j] for i in range(n))}
    assert got == want


def test_complete_graph_floods_in_one_step():
    for n in (2, 5, 9):
        g = GraphSnapshot(np.zeros(n, dtype=int))
        res = flood_until_complete(repeat_snapshot(g), n - 1, max_steps=10)
        assert res.completed and res.flooding_time == 1


def test_edgeless_provider_times_out():
    g = GraphSnapshot(np.arange(4))
    res = flood_until_complete(repeat_snapshot(g), 0, max_steps=25)
    assert res.timed_out and res.flooding_time is None


def test_provider_exhaustion_is_a_timeout():
    g = GraphSnapshot.from_groups([[0], [1, 2]])
    res = flood_until_complete([g, g], 0, max_steps=100)
    assert res.timed_out


def test_trajectory_is_monotone():
    cfg = make_config(30, 1.2)
    rng = np.random.default_rng(5)
    res = flood_until_complete(snapshots(cfg, rng), 0, 10_000, record_trajectory=True)
    assert res.completed
    assert res.trajectory[0] == 1 and res.trajectory[-1] == 30
    assert np.all(np.diff(res.trajectory) >= 0)
    assert len(res.trajectory) == res.flooding_time + 1


def test_two_node_iid_mean_is_geometric():
    # co-cell with probability 1/2 per slot: T ~ Geometric(1/2), mean 2
    cfg = make_config(2, 1.0)
    rng = np.random.default_rng(11)
    times = []
    for _ in range(4000):
        times.append(flood_until_complete(snapshots(cfg, rng), 0, 1000).flooding_time)
    times = np.array(times)
    assert abs(times.mean() - 2.0) < 3 * times.std(ddof=1) / np.sqrt(times.size)


def test_expander_examples():
    assert is_expander_exact(GraphSnapshot(np.zeros(6, dtype=int)), 1, 3, 1)
    assert not is_expander_exact(GraphSnapshot(np.arange(5)), 0, 3, 0.1)
    assert not is_expander_exact(GraphSnapshot.from_groups([[0, 1], [2, 3]]), 1, 2, 1)


def test_expander_cap_and_range():
    with pytest.raises(ConfigurationError):
        is_expander_exact(GraphSnapshot(np.zeros(16, dtype=int)), 1, 2, 1)
    with pytest.raises(ConfigurationError):
        is_expander_exact(GraphSnapshot(np.zeros(4, dtype=int)), 2, 2, 1)
    with pytest.raises(ConfigurationError):
        is_expander_exact(GraphSnapshot(np.zeros(4, dtype=int)), 1, 5, 1)


@settings(max_examples=40, deadline=None)
@given(labels=st.lists(st.integers(0, 3), min_size=2, max_size=7),
       k=st.sampled_from([0.25, 0.5, 1.0, 2.0]), data=st.data())
def test_expander_matches_brute_force(labels, k, data):
    n = len(labels)
    h_hi = data.draw(st.integers(1, n))
    h_lo = data.draw(st.integers(0, h_hi - 1))
    g = GraphSnapshot(np.array(labels))
    want = True
    for m in range(1, 1 << n):
        subset = [i for i in range(n) if m >> i & 1]
        if h_lo < len(subset) <= h_hi:
            want &= int(g.neighbors(subset).sum()) >= k * len(subset)
    assert is_expander_exact(g, h_lo, h_hi, k) == want


def test_segment_invariants():
    ExpanderSegment(0, 1, 1.0)
    with pytest.raises(ConfigurationError):
        ExpanderSegment(3, 3, 1.0)
    with pytest.raises(ConfigurationError):
        ExpanderSegment(1, 3, 0.0)


def test_expansion_probability_examples():
    complete = make_config(6, 0.1, 10.0)  # one cell
    est = estimate_expansion_probability(
        lambda r: induced_snapshot(sample_assignment(complete, r)), ExpanderSegment(1, 3, 1.0), 10, 50)
    assert est.value == 1.0 and est.exhaustive

    pair = make_config(2, 1.0)  # a_N = 1/2
    est = estimate_expansion_probability(
        lambda r: induced_snapshot(sample_assignment(pair, r)), ExpanderSegment(0, 1, 1.0), 1, 20_000, seed=3)
    assert abs(est.value - 0.5) < 4 * est.stderr

    lonely = lambda r: GraphSnapshot(np.arange(8))
    assert estimate_expansion_probability(lonely, ExpanderSegment(0, 4, 1e-9), 5, 10).value == 0.0


def test_expansion_probability_rejects_oversized_segment():
    cfg = make_config(4, 1.0)
    with pytest.raises(ConfigurationError):
        estimate_expansion_probability(lambda r: induced_snapshot(sample_assignment(cfg, r)),
                                       ExpanderSegment(1, 5, 1.0), 1, 1)


def test_exhaustive_estimate_equals_per_snapshot_average():
    cfg = make_config(8, 0.8)
    seg = ExpanderSegment(1, 4, 0.5)
    est = estimate_expansion_probability(lambda r: induced_snapshot(sample_assignment(cfg, r)),
                                         seg, 1, 300, seed=9)
    rng = np.random.default_rng(9)
    hits = [is_expander_exact(induced_snapshot(sample_assignment(cfg, rng)), 1, 4, 0.5)
            for _ in range(300)]
    assert est.value == np.mean(hits)


def test_sampled_estimate_is_flagged():
    cfg = make_config(20, 0.5)
    est = estimate_expansion_probability(lambda r: induced_snapshot(sample_assignment(cfg, r)),
                                         ExpanderSegment(1, 5, 0.5), 50, 20)
    assert not est.exhaustive and 0 <= est.value <= 1
    assert meg.EXHAUSTIVE_CAP == 15
