"""Cell-partitioned network under IID mobility.

Cells are abstract labels ``0..C-1``. Every slot each node independently
picks a uniform cell; co-cell nodes form a clique of the slot's snapshot.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import meg
from ._backend import kernels
from ._pykernels import bounded
from .meg import ConfigurationError, FloodingResult, GraphSnapshot
from .rng import trial_bit_generators

SPARSE = "sparse"
DENSE = "dense"
ORACLE_MAX_NODES = 2000
OCCUPANCY = "occupancy"
BINOMIAL = "binomial"


@dataclass(frozen=True)
class NetworkConfig:
    n_nodes: int
    alpha: float
    c: float
    cell_count: int
    cell_prob: float
    clamped: bool = False

    @property
    def regime(self):
        return SPARSE if self.alpha >= 1 else DENSE


def make_config(n_nodes, alpha, c=1.0) -> NetworkConfig:
    """Network of ``n_nodes`` nodes with cell area ``c * N**-alpha``.

    The cell count is rounded to an integer, ``C = max(1, round(N**alpha / c))``,
    and the effective cell probability is ``1/C`` everywhere downstream.
    """
    if int(n_nodes) != n_nodes or n_nodes < 2:
        raise ConfigurationError("n_nodes must be an integer >= 2")
    if not alpha > 0 or not c > 0:
        raise ConfigurationError("alpha and c must be positive")
    raw = math.floor(n_nodes ** alpha / c + 0.5)
    cells = max(1, int(raw))
    return NetworkConfig(int(n_nodes), float(alpha), float(c), cells, 1.0 / cells,
                         clamped=raw < 1)


def _bit_generator(rng):
    return rng.bit_generator if isinstance(rng, np.random.Generator) else rng


def sample_assignment(config: NetworkConfig, rng) -> np.ndarray:
    """Cell of every node for one slot (one raw 64-bit draw per node)."""
    raw = _bit_generator(rng).random_raw(config.n_nodes)
    return bounded(raw, config.cell_count)


def induced_snapshot(assignment) -> GraphSnapshot:
    return GraphSnapshot(np.asarray(assignment))


def snapshots(config: NetworkConfig, rng):
    """Endless provider of independent stationary snapshots."""
    while True:
        yield induced_snapshot(sample_assignment(config, rng))


@dataclass(frozen=True)
class BinomialSpec:
    trials: int
    success_prob: float

    def pmf(self, k):
        return stats.binom.pmf(k, self.trials, self.success_prob)

    @property
    def mean(self):
        return self.trials * self.success_prob


def _miss_prob(cell_prob, h):
    # (1 - a)^h without cancellation for small a
    if cell_prob >= 1.0:
        return 0.0
    return math.exp(h * math.log1p(-cell_prob))


def newly_informed_distribution(config: NetworkConfig, h: int) -> BinomialSpec:
    """Law of the number of nodes newly informed in one slot when h hold the packet."""
    if not 1 <= h <= config.n_nodes:
        raise ConfigurationError(f"h must lie in [1, {config.n_nodes}]")
    return BinomialSpec(config.n_nodes - h, 1.0 - _miss_prob(config.cell_prob, h))


def sample_newly_informed(config: NetworkConfig, h: int, trials: int, seed=0) -> np.ndarray:
    """Newly informed counts over independent slots, via snapshot + flood step."""
    rng = np.random.default_rng(seed)
    informed = np.zeros(config.n_nodes, dtype=bool)
    informed[:h] = True
    state = meg.FloodingState(informed)
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        nxt = meg.flood_step(state, induced_snapshot(sample_assignment(config, rng)))
        out[t] = nxt.size - h
    return out


def default_max_steps(config: NetworkConfig) -> int:
    n = config.n_nodes
    return int(50 * (config.cell_count / n + 1) * (math.log(n) + 1)) + 100


def simulate_single_packet_flood(config: NetworkConfig, rng, max_steps=None,
                                 record_trajectory=False) -> FloodingResult:
    """One single-packet flooding run from a uniformly drawn source."""
    max_steps = default_max_steps(config) if max_steps is None else max_steps
    if max_steps < 1:
        raise ConfigurationError("max_steps must be >= 1")
    steps, traj = kernels.flood_trajectory(_bit_generator(rng), config.n_nodes,
                                           config.cell_count, max_steps)
    return FloodingResult(int(steps) if steps >= 0 else None, steps >= 0,
                          traj if record_trajectory else None)


def simulate_flood_reference(config: NetworkConfig, rng, max_steps=None) -> FloodingResult:
    """Same run composed from sample_assignment, induced_snapshot and flood_step.

    Consumes the generator exactly like :func:`simulate_single_packet_flood`.
    """
    max_steps = default_max_steps(config) if max_steps is None else max_steps
    bg = _bit_generator(rng)
    source = int(bounded(np.uint64(bg.random_raw()), config.n_nodes))
    return meg.flood_until_complete(snapshots(config, bg), source, max_steps,
                                    record_trajectory=True)


def flood_times(config: NetworkConfig, trials: int, seed=0, point=0, max_steps=None):
    """Flooding times of independent trials; -1 marks a timeout."""
    max_steps = default_max_steps(config) if max_steps is None else max_steps
    bgs = trial_bit_generators(seed, point, trials)
    return kernels.flood_times(bgs, config.n_nodes, config.cell_count, max_steps)


def occupancy_distribution(n_cells: int, h_max: int):
    """Yield ``(h, probs)`` for h = 1..h_max, where ``probs[d]`` is the chance
    that h uniformly placed nodes occupy exactly d distinct cells."""
    dmax = min(h_max, n_cells)
    probs = np.zeros(dmax + 1)
    probs[0] = 1.0
    d = np.arange(dmax + 1)
    for h in range(1, h_max + 1):
        nxt = probs * d / n_cells
        nxt[1:] += probs[:-1] * (n_cells - d[:-1]) / n_cells
        probs = nxt
        yield h, probs


def _mixture_row(n, n_cells, h, occ):
    # P(N(h) = j) = sum_d P(D = d) Bin(N-h, d/C)(j); returns the row and 1 - P(stay)
    live = np.flatnonzero(occ > 1e-18 * occ.max())
    q = live / n_cells
    j = np.arange(n - h + 1)
    row = occ[live] @ stats.binom.pmf(j[None, :], n - h, q[:, None])
    with np.errstate(divide="ignore"):
        leave = occ[live] @ -np.expm1((n - h) * np.log1p(-q))
    return row, float(leave)


def newly_informed_pmf(config: NetworkConfig, h: int, law=OCCUPANCY) -> np.ndarray:
    """``pmf[j] = P(N(h) = j)`` for j = 0..N-h.

    ``law="occupancy"`` is exact: given the number D of distinct cells the h
    informed nodes occupy, each uninformed node joins independently with
    probability D/C, so N(h) is a mixture of binomials. ``law="binomial"``
    treats the joins as independent with probability 1-(1-a)^h; the mean is
    the same, but the variance is understated whenever 2 <= h and C > 1.
    """
    spec = newly_informed_distribution(config, h)
    j = np.arange(spec.trials + 1)
    if law == BINOMIAL or h == config.n_nodes:
        return spec.pmf(j)
    _check_law(law)
    for _, occ in occupancy_distribution(config.cell_count, h):
        pass
    return _mixture_row(config.n_nodes, config.cell_count, h, occ)[0]


def _check_law(law):
    if law not in (BINOMIAL, OCCUPANCY):
        raise ConfigurationError(f"unknown law {law!r}; use {BINOMIAL!r} or {OCCUPANCY!r}")


def _chain(config: NetworkConfig, law):
    """Transition matrix of the informed-count chain and the leave probabilities."""
    _check_law(law)
    n = config.n_nodes
    if n > ORACLE_MAX_NODES:
        raise ConfigurationError(f"exact chain limited to N <= {ORACLE_MAX_NODES}")
    P = np.zeros((n + 1, n + 1))
    leave = np.ones(n + 1)
    a = config.cell_prob
    if law == BINOMIAL:
        for h in range(1, n):
            spec = newly_informed_distribution(config, h)
            j = np.arange(spec.trials + 1)
            P[h, h + j] = stats.binom.pmf(j, spec.trials, spec.success_prob)
            # stay probability is (1-a)^(h(N-h))
            leave[h] = 1.0 if a >= 1 else -math.expm1(h * (n - h) * math.log1p(-a))
    else:
        for h, occ in occupancy_distribution(config.cell_count, n - 1):
            P[h, h:], leave[h] = _mixture_row(n, config.cell_count, h, occ)
    P[n, n] = 1.0
    leave[n] = 0.0
    return P, leave


def transition_matrix(config: NetworkConfig, law=OCCUPANCY) -> np.ndarray:
    """Informed-count chain on states 0..N (state 0 unused)."""
    return _chain(config, law)[0]


def exact_expected_flooding_time(config: NetworkConfig, law=OCCUPANCY) -> float:
    """E[T_N] from one informed node, by back-substitution on the count chain."""
    n = config.n_nodes
    P, leave = _chain(config, law)
    E = np.zeros(n + 1)
    for h in range(n - 1, 0, -1):
        E[h] = (1.0 + P[h, h + 1:] @ E[h + 1:]) / leave[h]
    return float(E[1])


def exact_flooding_time_cdf(config: NetworkConfig, max_t: int, law=OCCUPANCY) -> np.ndarray:
    """``cdf[t] = P(T_N <= t)`` for t = 0..max_t."""
    P = transition_matrix(config, law)
    dist = np.zeros(config.n_nodes + 1)
    dist[1] = 1.0
    cdf = np.empty(max_t + 1)
    cdf[0] = dist[-1]
    for t in range(1, max_t + 1):
        dist = dist @ P
        cdf[t] = dist[-1]
    return cdf


def exact_flooding_time_quantile(config: NetworkConfig, prob: float, max_t=None,
                                 law=OCCUPANCY) -> int:
    """Smallest u with P(T_N <= u) >= prob."""
    max_t = default_max_steps(config) if max_t is None else max_t
    cdf = exact_flooding_time_cdf(config, max_t, law)
    hit = np.flatnonzero(cdf >= prob)
    if hit.size == 0:
        raise ConfigurationError("quantile beyond max_t")
    return int(hit[0])
