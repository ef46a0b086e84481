"""FCFS packet flooding and the single-hop scheme: simulators and closed forms.

Both simulators take a master seed plus a key; arrivals and mobility use
separate streams under that key (see :mod:`iidcast.rng`), so changing the
load does not perturb the mobility sample path.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod
from ._backend import kernels
from .analytics import BoundReport, scaling_class
from .meg import ConfigurationError
from .mobility import NetworkConfig


class InstabilityError(ValueError):
    """A closed form was evaluated at or beyond its stability boundary."""


def batch_means_se(x, n_batches=20) -> float:
    """Standard error of the mean of a correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    if x.size < 2 * n_batches:
        return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    usable = x.size - x.size % n_batches
    means = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def poisson_arrivals(rate, horizon, gen: np.random.Generator) -> np.ndarray:
    """Arrival instants of a rate-``rate`` Poisson process on [0, horizon)."""
    if rate <= 0:
        return np.zeros(0)
    chunks, clock = [], 0.0
    block = max(16, int(rate * horizon * 1.05) + 64)
    while clock < horizon:
        t = clock + np.cumsum(gen.exponential(1.0 / rate, size=block))
        chunks.append(t)
        clock = t[-1]
    times = np.concatenate(chunks)
    return times[times < horizon]


@dataclass(frozen=True)
class BacklogTrajectory:
    slots: np.ndarray
    backlog: np.ndarray

    def slope(self, from_slot=0):
        """OLS slope of backlog against time for samples at or after ``from_slot``."""
        keep = self.slots >= from_slot
        x, y = self.slots[keep].astype(float), self.backlog[keep].astype(float)
        if x.size < 3:
            raise ConfigurationError("too few backlog samples for a trend")
        return float(np.polyfit(x, y, 1)[0])


# --- FCFS flooding ------------------------------------------------------------

@dataclass(frozen=True)
class FcfsConfig:
    network: NetworkConfig
    lam: float
    service_slots: int
    horizon_slots: int
    warmup_slots: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError("lam must be positive")
        if self.service_slots < 1:
            raise ConfigurationError("service_slots must be >= 1")
        if not 0 <= self.warmup_slots <= self.horizon_slots:
            raise ConfigurationError("need 0 <= warmup_slots <= horizon_slots")

    @property
    def utilization(self):
        return self.network.n_nodes * self.lam * self.service_slots


@dataclass
class QueueStats:
    """Post-warmup statistics of a queueing run.

    ``mean_delay`` runs from arrival to the last destination's reception and
    covers delivered packets only; ``mean_sojourn`` runs from arrival to the
    end of the packet's service (the M/D/1 sojourn time).
    """

    mean_delay: float
    mean_queue_len: float
    drop_rate: float
    delivered: int
    dropped: int
    mean_sojourn: float = math.nan
    delay_se: float = math.nan
    sojourn_se: float = math.nan
    utilization: float = math.nan
    backlog_trajectory: Optional[BacklogTrajectory] = field(default=None, repr=False)


def simulate_fcfs(cfg: FcfsConfig, seed=0, key=(), sample_every=None) -> QueueStats:
    """FCFS flooding: pooled Poisson arrivals, each head packet flooded for U slots.

    A packet whose flooding has not reached every node when its U slots end
    counts as dropped. Service starts at the first slot boundary at which the
    server is free and the packet has arrived.
    """
    net = cfg.network
    sample_every = sample_every or max(1, cfg.service_slots)
    gen = rngmod.generator(seed, *key, rngmod.ARRIVALS)
    arrival = poisson_arrivals(net.n_nodes * cfg.lam, cfg.horizon_slots, gen)
    source = gen.integers(0, net.n_nodes, size=arrival.size, dtype=np.int64)
    mobility = rngmod.bit_generator(seed, *key, rngmod.MOBILITY)
    start, finish, depart, backlog = kernels.fcfs_run(
        mobility, net.n_nodes, net.cell_count, cfg.service_slots, cfg.horizon_slots,
        np.ascontiguousarray(arrival), source, sample_every)

    served = (depart >= 0) & (arrival >= cfg.warmup_slots)
    ok = served & (finish >= 0)
    delay = finish[ok] - arrival[ok]
    sojourn = depart[served] - arrival[served]
    delivered, n_served = int(ok.sum()), int(served.sum())
    slots = np.arange(backlog.size) * sample_every
    late = backlog[slots >= cfg.warmup_slots]
    return QueueStats(
        mean_delay=float(delay.mean()) if delivered else math.nan,
        mean_queue_len=float(late.mean()) if late.size else math.nan,
        drop_rate=(n_served - delivered) / n_served if n_served else math.nan,
        delivered=delivered,
        dropped=n_served - delivered,
        mean_sojourn=float(sojourn.mean()) if n_served else math.nan,
        delay_se=batch_means_se(delay),
        sojourn_se=batch_means_se(sojourn),
        utilization=cfg.utilization,
        backlog_trajectory=BacklogTrajectory(slots, backlog),
    )


def md1_wait(n_nodes, lam, u_n) -> float:
    """M/D/1 sojourn time U + U rho / (2 (1 - rho)) with rho = N U lam."""
    rho = n_nodes * u_n * lam
    if rho >= 1:
        raise InstabilityError(f"utilization {rho:.4g} >= 1: queue is unstable")
    return u_n + u_n * rho / (2.0 * (1.0 - rho))


def fcfs_capacity_envelope(config: NetworkConfig, u_n, rho_target=0.5) -> BoundReport:
    """Per-node rate rho*/(N U) sustained by FCFS flooding with service time U."""
    if u_n < 1:
        raise ConfigurationError("u_n must be >= 1")
    if not 0 < rho_target < 1:
        raise ConfigurationError("rho_target must lie in (0, 1)")
    value = rho_target / (config.n_nodes * u_n)
    return BoundReport(value, config.regime, "fcfs_capacity_envelope",
                       dict(n_nodes=config.n_nodes, alpha=config.alpha, c=config.c,
                            u_n=u_n, rho_target=rho_target),
                       scaling_class(config.alpha).capacity_fcfs)


@dataclass(frozen=True)
class TrendTest:
    """Across-seed test on per-seed backlog slopes."""

    slopes: np.ndarray
    mean: float
    stderr: float
    sigmas: float

    @property
    def z(self):
        return self.mean / self.stderr if self.stderr > 0 else math.copysign(math.inf, self.mean)

    @property
    def increasing(self):
        return self.z > self.sigmas

    @property
    def tight(self):
        return self.z <= self.sigmas


def backlog_trend(trajectories, from_slot=0, sigmas=3.0) -> TrendTest:
    slopes = np.array([tr.slope(from_slot) for tr in trajectories])
    if slopes.size < 2:
        raise ConfigurationError("trend test needs at least two runs")
    se = float(slopes.std(ddof=1) / math.sqrt(slopes.size))
    return TrendTest(slopes, float(slopes.mean()), se, sigmas)


# --- single-hop scheme --------------------------------------------------------

def single_hop_rate(config: NetworkConfig) -> float:
    """Activation rate C p / (N (N-1)) of one ordered pair, p = P(cell has >= 2 nodes)."""
    n, a = config.n_nodes, config.cell_prob
    if a >= 1:
        p = 1.0
    else:
        p = -math.expm1(n * math.log1p(-a)) - n * a * math.exp((n - 1) * math.log1p(-a))
    return config.cell_count * p / (n * (n - 1))


def single_hop_wait(lam, r, arrivals="bernoulli") -> float:
    """Mean wait of one pair queue served with probability r per slot.

    ``(1 - lam) / (r - lam)`` for Bernoulli(lam) arrivals per slot and
    ``(1 - lam/2) / (r - lam)`` for Poisson(lam) arrivals, which is what the
    simulator feeds; both follow from the second-moment balance of the
    queue length, E[Q] (2r - 2 lam) = lam - 2 lam^2 + E[A^2].
    """
    if not 0 < r <= 1 or not lam > 0:
        raise ConfigurationError("need lam > 0 and 0 < r <= 1")
    if lam >= r:
        raise InstabilityError(f"lam={lam:.4g} >= r={r:.4g}: queue is unstable")
    if arrivals == "bernoulli":
        return (1.0 - lam) / (r - lam)
    if arrivals == "poisson":
        return (1.0 - lam / 2) / (r - lam)
    raise ConfigurationError(f"unknown arrivals {arrivals!r}")


@dataclass
class SingleHopStats:
    """Post-warmup statistics of a single-hop run.

    Waits count slots from the arrival slot to the delivery slot; a packet can
    first be sent in the slot after it arrives.
    """

    tagged_pair: tuple
    tagged_rate: float
    tagged_rate_se: float
    tagged_wait: float
    tagged_wait_se: float
    tagged_served: int
    mean_copy_wait: float
    broadcast_delay: float
    broadcast_completed: int
    packets: int
    copies_in: int
    copies_out: int
    mean_backlog: float
    backlog_trajectory: Optional[BacklogTrajectory] = field(default=None, repr=False)

    def queue_stats(self) -> QueueStats:
        """View as QueueStats; the scheme never drops, delay is the broadcast delay."""
        return QueueStats(
            mean_delay=self.broadcast_delay,
            mean_queue_len=self.mean_backlog,
            drop_rate=0.0,
            delivered=self.broadcast_completed,
            dropped=0,
            backlog_trajectory=self.backlog_trajectory,
        )


def simulate_single_hop(config: NetworkConfig, lam, horizon, warmup=0, seed=0, key=(),
                        tagged_pair=(0, 1), sample_every=None) -> SingleHopStats:
    """Single-hop broadcast over N(N-1) ordered-pair FIFO queues.

    Every slot, each cell holding at least two nodes activates one ordered
    pair chosen uniformly; the transmitter sends the head of its queue to
    that receiver. A packet arriving at node i is queued for every j != i.
    """
    n = config.n_nodes
    if not 0 <= warmup <= horizon:
        raise ConfigurationError("need 0 <= warmup <= horizon")
    if not lam > 0:
        raise ConfigurationError("lam must be positive")
    tx, rx = (int(v) for v in tagged_pair)
    if tx == rx or not (0 <= tx < n and 0 <= rx < n):
        raise ConfigurationError("tagged_pair must be two distinct node IDs")
    sample_every = sample_every or max(1, horizon // 2000)

    gen = rngmod.generator(seed, *key, rngmod.ARRIVALS)
    arrival = poisson_arrivals(n * lam, horizon, gen)
    source = gen.integers(0, n, size=arrival.size, dtype=np.int64)
    arrival_slot = np.floor(arrival).astype(np.int64)
    order = np.argsort(source, kind="stable")
    offsets = np.concatenate(([0], np.cumsum(np.bincount(source, minlength=n)))).astype(np.int64)
    mobility = rngmod.bit_generator(seed, *key, rngmod.MOBILITY)
    counters, tag_wait, delivered, last, backlog, _ = kernels.single_hop_run(
        mobility, n, config.cell_count, horizon, warmup, arrival_slot, source,
        offsets, order.astype(np.int64), tx, rx, sample_every)

    steady = horizon - warmup
    acts = counters["tagged_activations"]
    rate = acts / steady if steady else math.nan
    rate_se = math.sqrt(rate * (1 - rate) / steady) if steady else math.nan
    mine = arrival_slot >= warmup
    done = mine & (delivered == n - 1)
    slots = np.arange(backlog.size) * sample_every
    return SingleHopStats(
        tagged_pair=(tx, rx),
        tagged_rate=rate,
        tagged_rate_se=rate_se,
        tagged_wait=float(tag_wait.mean()) if tag_wait.size else math.nan,
        tagged_wait_se=batch_means_se(tag_wait),
        tagged_served=int(tag_wait.size),
        mean_copy_wait=counters["wait_sum"] / counters["served"] if counters["served"] else math.nan,
        broadcast_delay=float((last[done] - arrival_slot[done]).mean()) if done.any() else math.nan,
        broadcast_completed=int(done.sum()),
        packets=int(mine.sum()),
        copies_in=counters["copies_in"],
        copies_out=counters["copies_out"],
        mean_backlog=float(backlog[slots >= warmup].mean()),
        backlog_trajectory=BacklogTrajectory(slots, backlog),
    )
