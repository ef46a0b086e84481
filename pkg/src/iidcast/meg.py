"""Flooding over Markov evolving graphs whose snapshots are unions of cliques.

A snapshot is stored as a group label per node: two nodes are adjacent iff
they carry the same label (same cell). Informed sets are boolean masks.
"""
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

EXHAUSTIVE_CAP = 15


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSnapshot:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ConfigurationError("a snapshot needs at least one node")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_groups(cls, groups, node_count=None):
        groups = [list(g) for g in groups]
        members = [v for g in groups for v in g]
        n = len(members) if node_count is None else node_count
        if sorted(members) != list(range(n)):
            raise ConfigurationError("groups must partition the node IDs 0..n-1")
        labels = np.empty(n, dtype=np.int64)
        for gid, g in enumerate(groups):
            labels[g] = gid
        return cls(labels)

    @property
    def node_count(self):
        return int(self.labels.size)

    @property
    def groups(self):
        _, inverse = np.unique(self.labels, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        splits = np.flatnonzero(np.diff(inverse[order])) + 1
        return [frozenset(g.tolist()) for g in np.split(order, splits)]

    def neighbors(self, subset):
        """N(I): nodes outside ``subset`` sharing a group with a member of it."""
        mask = _as_mask(subset, self.node_count)
        return np.isin(self.labels, self.labels[mask]) & ~mask


@dataclass
class FloodingState:
    informed: np.ndarray
    step: int = 0

    @classmethod
    def start(cls, node_count, source):
        informed = np.zeros(node_count, dtype=bool)
        informed[source] = True
        return cls(informed, 0)

    @property
    def size(self):
        return int(self.informed.sum())


@dataclass
class FloodingResult:
    """``flooding_time`` is None when the run timed out."""

    flooding_time: Optional[int]
    completed: bool
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def timed_out(self):
        return not self.completed


def _as_mask(subset, n):
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (n,):
            raise ConfigurationError("mask length does not match node count")
        return subset
    mask = np.zeros(n, dtype=bool)
    mask[subset.astype(np.int64)] = True
    return mask


def flood_step(state: FloodingState, graph: GraphSnapshot) -> FloodingState:
    if graph.node_count != state.informed.size:
        raise ConfigurationError(
            f"snapshot has {graph.node_count} nodes, flooding instance has {state.informed.size}")
    if not state.informed.any():
        raise ConfigurationError("informed set is empty")
    informed = state.informed | graph.neighbors(state.informed)
    return FloodingState(informed, state.step + 1)


def flood_until_complete(source_graphs: Iterable[GraphSnapshot], start_node: int,
                         max_steps: int, record_trajectory: bool = False) -> FloodingResult:
    """Flood from ``start_node`` over successive snapshots.

    One snapshot is consumed per step. Running out of snapshots or of steps
    gives a timed-out result rather than an exception.
    """
    if max_steps < 1:
        raise ConfigurationError("max_steps must be >= 1")
    graphs: Iterator[GraphSnapshot] = iter(source_graphs)
    state = None
    traj = []
    while True:
        if state is not None and state.informed.all():
            break
        if state is not None and state.step >= max_steps:
            break
        try:
            graph = next(graphs)
        except StopIteration:
            break
        if state is None:
            state = FloodingState.start(graph.node_count, start_node)
            traj.append(1)
            if state.informed.all():
                break
        state = flood_step(state, graph)
        traj.append(state.size)
    trajectory = np.array(traj, dtype=np.int64) if record_trajectory else None
    if state is not None and state.informed.all():
        return FloodingResult(state.step, True, trajectory)
    return FloodingResult(None, False, trajectory)


def repeat_snapshot(graph: GraphSnapshot):
    while True:
        yield graph


def is_expander_exact(graph: GraphSnapshot, h_lo: int, h_hi: int, k: float) -> bool:
    """Brute-force check that |N(I)| >= k|I| for every I with h_lo < |I| <= h_hi."""
    n = graph.node_count
    if n > EXHAUSTIVE_CAP:
        raise ConfigurationError(
            f"exhaustive check limited to {EXHAUSTIVE_CAP} nodes; use estimate_expansion_probability")
    if not 0 <= h_lo < h_hi <= n:
        raise ConfigurationError("need 0 <= h_lo < h_hi <= node_count")
    sizes, nbr_sizes = _subset_table(graph)
    sel = (sizes > h_lo) & (sizes <= h_hi)
    return bool(np.all(nbr_sizes[sel] >= k * sizes[sel]))


def _subset_table(graph):
    """|I| and |N(I)| for every subset I, indexed by bitmask."""
    n = graph.node_count
    labels = graph.labels
    group_mask = np.zeros(n, dtype=np.int64)
    for i in range(n):
        group_mask[i] = int(np.sum(1 << np.flatnonzero(labels == labels[i])))
    closure = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        lo = 1 << i
        closure[lo:2 * lo] = closure[:lo] | group_mask[i]
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = np.bitwise_count(masks).astype(np.int64)
    nbr_sizes = np.bitwise_count(closure & ~masks).astype(np.int64)
    return sizes, nbr_sizes


def _sampled_expander(graph, h_lo, h_hi, k, subset_samples, rng):
    n = graph.node_count
    for _ in range(subset_samples):
        size = int(rng.integers(h_lo + 1, h_hi + 1))
        subset = rng.choice(n, size=size, replace=False)
        if graph.neighbors(subset).sum() < k * size:
            return False
    return True


@dataclass(frozen=True)
class ExpanderSegment:
    """Sizes h_lo < |I| <= h_hi must expand by factor k."""

    h_lo: int
    h_hi: int
    k: float

    def __post_init__(self):
        if not 0 <= self.h_lo < self.h_hi:
            raise ConfigurationError("segment needs 0 <= h_lo < h_hi")
        if not self.k > 0:
            raise ConfigurationError("expansion factor must be positive")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int
    exhaustive: bool


def estimate_expansion_probability(sampler: Callable[[np.random.Generator], GraphSnapshot],
                                   segment: ExpanderSegment, subset_samples: int,
                                   snapshot_trials: int, seed=0) -> Estimate:
    """Monte Carlo estimate of P(snapshot is a ([h_lo, h_hi], k)-expander).

    Snapshots with at most ``EXHAUSTIVE_CAP`` nodes are checked over all
    subsets. Larger ones are checked on ``subset_samples`` random subsets,
    which can miss a violating subset, so the estimate is then biased upward.
    """
    if subset_samples < 1 or snapshot_trials < 1:
        raise ConfigurationError("subset_samples and snapshot_trials must be >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    exhaustive = True
    for _ in range(snapshot_trials):
        graph = sampler(rng)
        if segment.h_hi > graph.node_count:
            raise ConfigurationError("segment upper end exceeds node count")
        if graph.node_count <= EXHAUSTIVE_CAP:
            ok = is_expander_exact(graph, segment.h_lo, segment.h_hi, segment.k)
        else:
            exhaustive = False
            ok = _sampled_expander(graph, segment.h_lo, segment.h_hi, segment.k,
                                   subset_samples, rng)
        hits += ok
    p = hits / snapshot_trials
    return Estimate(p, float(np.sqrt(p * (1 - p) / snapshot_trials)), snapshot_trials, exhaustive)
