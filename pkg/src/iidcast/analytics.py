"""Closed-form bounds on broadcast capacity, delay and flooding time.

Natural logarithms throughout. Asymptotic constants are explicit keyword
arguments; envelopes are returned as ``constant * shape(N)`` so a fitted
constant can be dropped in without touching the shape.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .meg import ConfigurationError, ExpanderSegment
from .mobility import DENSE, SPARSE, NetworkConfig


@dataclass(frozen=True)
class BoundReport:
    value: float
    regime: str
    formula_id: str
    inputs: dict = field(default_factory=dict)
    shape: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"{self.formula_id}: bound value {self.value} is not finite and >= 0")


def _echo(config):
    return dict(n_nodes=config.n_nodes, alpha=config.alpha, c=config.c,
                cell_count=config.cell_count, cell_prob=config.cell_prob)


def _pow1m(a, e):
    """(1 - a)**e, stable for small a."""
    if a >= 1.0:
        return 0.0 if e > 0 else 1.0
    return math.exp(e * math.log1p(-a))


# --- capacity and minimum delay ----------------------------------------------

def capacity_upper_bound(config: NetworkConfig) -> BoundReport:
    """Largest per-node rate any scheme can sustain: (1 - (1-a)^(N-1)) / (2(N-1))."""
    n, a = config.n_nodes, config.cell_prob
    value = -math.expm1((n - 1) * math.log1p(-a)) if a < 1 else 1.0
    value /= 2 * (n - 1)
    shape = "N^-alpha" if config.alpha >= 1 else "1/N"
    return BoundReport(value, config.regime, "capacity_upper_bound", _echo(config), shape)


def delay_lower_bound(config: NetworkConfig, t: int) -> float:
    """t (1 - (1 + (N-1)a)^t / N); a lower bound on E[T_N] for every integer t >= 1.

    Can be negative when t is too large; that is the caller's business.
    """
    if int(t) != t or t < 1:
        raise ConfigurationError("t must be a positive integer")
    n, a = config.n_nodes, config.cell_prob
    return t * (1.0 - (1.0 + (n - 1) * a) ** t / n)


def best_delay_t(config: NetworkConfig) -> int:
    n, a = config.n_nodes, config.cell_prob
    growth = math.log1p((n - 1) * a)
    numer = 0.5 * math.log(n) if config.alpha >= 1 else 0.5 * config.alpha * math.log(n)
    return max(1, math.floor(numer / growth))


def delay_lower_bound_best(config: NetworkConfig) -> BoundReport:
    t = best_delay_t(config)
    value = delay_lower_bound(config, t)
    shape = "N^(alpha-1) log N" if config.alpha >= 1 else "1"
    inputs = _echo(config) | {"t": t}
    return BoundReport(max(value, 0.0), config.regime, "delay_lower_bound_best", inputs, shape)


# --- generic MEG flooding-time bounds -----------------------------------------

def flooding_bound_expander(segments: Sequence[ExpanderSegment]) -> float:
    """Sum of log(h_i / h_{i-1}) / log(1 + k_i) over contiguous segments."""
    total = 0.0
    prev = None
    for seg in segments:
        if seg.h_lo < 1:
            raise ConfigurationError("segments for the flooding bound start at h >= 1")
        if prev is not None and seg.h_lo != prev.h_hi:
            raise ConfigurationError(f"segments not contiguous at {prev.h_hi} -> {seg.h_lo}")
        total += math.log(seg.h_hi / seg.h_lo) / math.log1p(seg.k)
        prev = seg
    return total


@dataclass(frozen=True)
class SuccessProfile:
    """Per-size success probability p(h), defined on h = 1..domain_hi."""

    p_of_h: Callable[[np.ndarray], np.ndarray]
    domain_hi: int

    def values(self, hi=None):
        hi = self.domain_hi if hi is None else hi
        if hi > self.domain_hi:
            raise ConfigurationError(f"profile defined up to h={self.domain_hi}, need {hi}")
        p = np.asarray(self.p_of_h(np.arange(1, hi + 1)), dtype=float)
        if np.any(p <= 0) or np.any(p > 1):
            raise ConfigurationError("p(h) must lie in (0, 1]")
        return p


def constant_profile(p, domain_hi):
    return SuccessProfile(lambda h: np.full(np.shape(h), float(p)), domain_hi)


def flooding_bound_geometric(profile: SuccessProfile, n_nodes: int) -> float:
    """Sum of 1/p(h) for h = 1..N-1."""
    return float(np.sum(1.0 / profile.values(n_nodes - 1)))


def flooding_bound_hybrid(profile, segments: Sequence[ExpanderSegment]) -> float:
    """Geometric sum up to h_1, then the expander sum from h_1 on.

    ``profile`` may be None when there is no geometric phase.
    """
    head = 0.0
    if profile is not None and profile.domain_hi > 0:
        if segments and profile.domain_hi != segments[0].h_lo:
            raise ConfigurationError("profile must end where the first segment starts")
        head = float(np.sum(1.0 / profile.values()))
    return head + flooding_bound_expander(segments)


# --- IID instantiations -----------------------------------------------------------

def expander_rate_dense(config: NetworkConfig, h, c3=None, c4=None) -> float:
    """Expansion factor k(h) for 0 < alpha < 1.

    ``c3 * N^(1-alpha)`` while h <= N^alpha, ``c4 * N / h`` beyond.
    Both constants default to ``c / 2``.
    """
    if config.alpha >= 1:
        raise ConfigurationError("expander_rate_dense needs 0 < alpha < 1")
    n = config.n_nodes
    if not 1 <= h <= n / 2:
        raise ConfigurationError("h must lie in [1, N/2]")
    c3 = 0.5 * config.c if c3 is None else c3
    c4 = 0.5 * config.c if c4 is None else c4
    if h <= n ** config.alpha:
        return c3 * n ** (1 - config.alpha)
    return c4 * n / h


def dense_segments(config: NetworkConfig, c3=None, c4=None):
    """Unit segments [h, h+1], h = 1..N/2-1, each with rate k(h)."""
    half = config.n_nodes // 2
    return [ExpanderSegment(h, h + 1, expander_rate_dense(config, h, c3, c4))
            for h in range(1, half)]


def success_profile(config: NetworkConfig, c4=1.1, c1=None, floor_c=0.5, beta=None) -> SuccessProfile:
    """Lower bound p(h) on the one-slot success probability in the sparse regime.

    alpha >= 2: ``c1 (N-h) h a_N`` on h = 1..N-1, with c1 = exp(-c/4).
    1 <= alpha < 2: ``1 - c4 exp(-h N a_N)`` on h = 1..beta N^(alpha-1) log N,
    with beta = 3/c; where that is not positive (small h at finite N) the
    weaker ``floor_c (1 - exp(-h N a_N))`` is used instead. a_N is the
    effective cell probability, so ``N a_N`` stands for ``c / N^(alpha-1)``.
    Values are clamped into (0, 1].
    """
    alpha, n, a = config.alpha, config.n_nodes, config.cell_prob
    if alpha < 1:
        raise ConfigurationError("success_profile covers alpha >= 1; use dense_segments")
    tiny = np.finfo(float).tiny
    if alpha >= 2:
        c1 = math.exp(-config.c / 4) if c1 is None else c1

        def p(h):
            h = np.asarray(h, dtype=float)
            return np.clip(c1 * (n - h) * h * a, tiny, 1.0)
        return SuccessProfile(p, n - 1)

    beta = 3.0 / config.c if beta is None else beta
    hi = max(1, min(n - 1, math.floor(beta * n ** (alpha - 1) * math.log(n))))
    rate = n * a

    def p(h):
        h = np.asarray(h, dtype=float)
        main = 1.0 - c4 * np.exp(-rate * h)
        floor = floor_c * -np.expm1(-rate * h)
        return np.clip(np.maximum(main, floor), tiny, 1.0)
    return SuccessProfile(p, hi)


def sparse_hybrid_parts(config: NetworkConfig, c4=1.1, floor_c=0.5, eta=0.5, eps=0.1, beta=None):
    """Profile on 1..h_1 and one expander segment [h_1, N/2] for 1 <= alpha < 2.

    The segment rate is ``eta (1-eps) c / N^(alpha-1)``, written with the
    effective cell probability. At desk scale h_1 often exceeds N/2; the
    profile is then cut at N/2 and there is no expander phase.
    """
    if not 1 <= config.alpha < 2:
        raise ConfigurationError("hybrid instantiation covers 1 <= alpha < 2")
    full = success_profile(config, c4=c4, floor_c=floor_c, beta=beta)
    half = config.n_nodes // 2
    h1 = min(full.domain_hi, half)
    profile = SuccessProfile(full.p_of_h, h1)
    k = eta * (1 - eps) * config.n_nodes * config.cell_prob
    segments = [ExpanderSegment(h1, half, k)] if h1 < half else []
    return profile, segments


def iid_flooding_bound(config: NetworkConfig) -> BoundReport:
    """The regime-appropriate MEG bound evaluated with default constants."""
    if config.alpha < 1:
        value, fid = flooding_bound_expander(dense_segments(config)), "expander_sum"
    elif config.alpha < 2:
        value, fid = flooding_bound_hybrid(*sparse_hybrid_parts(config)), "hybrid_sum"
    else:
        value, fid = flooding_bound_geometric(success_profile(config), config.n_nodes), "geometric_sum"
    return BoundReport(value, config.regime, fid, _echo(config), envelope_shape_name(config.alpha))


def envelope_shape(n, alpha) -> float:
    """N^(alpha-1) log N when sparse, max(1, log log N) when dense (real n allowed)."""
    if alpha >= 1:
        return n ** (alpha - 1) * math.log(n)
    if n <= math.e:
        return 1.0
    return max(1.0, math.log(math.log(n)))


def envelope_shape_name(alpha):
    return "N^(alpha-1) log N" if alpha >= 1 else "log log N"


def iid_flooding_envelope(config: NetworkConfig, constant=1.0) -> BoundReport:
    value = constant * envelope_shape(config.n_nodes, config.alpha)
    inputs = _echo(config) | {"constant": constant}
    return BoundReport(value, config.regime, "flooding_envelope", inputs,
                       envelope_shape_name(config.alpha))


# --- concentration inequalities -----------------------------------------------------

def chernoff_rate(a) -> float:
    """H(a) = 1 - a + a log a, with H(0) = 1."""
    if a < 0:
        raise ConfigurationError("H is defined for a >= 0")
    if a == 0:
        return 1.0
    return 1.0 - a + a * math.log(a)


UPPER = "upper"
LOWER = "lower"


def binomial_chernoff(n, p, k, tail=UPPER) -> float:
    """exp(-mu H(k/mu)) bounding P(X >= k) (upper, k >= mu) or P(X <= k) (lower, k <= mu)."""
    mu = n * p
    if not mu > 0:
        raise ConfigurationError("need n p > 0")
    if tail == UPPER and k < mu:
        raise ConfigurationError("upper tail needs k >= n p")
    if tail == LOWER and k > mu:
        raise ConfigurationError("lower tail needs k <= n p")
    if tail not in (UPPER, LOWER):
        raise ConfigurationError(f"unknown tail {tail!r}")
    return math.exp(-mu * chernoff_rate(k / mu))


def uniform_lower_tail_rate(eta, c1, c2) -> float:
    """Exponent c3 with P(X < eta c1 f) <= exp(-c3 f) for every binomial X
    whose mean lies in [c1 f, c2 f].

    The Chernoff exponent mu H(k/mu) grows with mu once mu > k, so the worst
    case is the smallest mean and c3 = c1 H(eta); the upper end c2 does not
    enter. Replacing the mean inside the logarithm by c2 f while keeping c1 f
    elsewhere, without the log(eta) term, overstates the exponent.
    """
    if not 0 < eta < 1 or not 0 < c1 <= c2:
        raise ConfigurationError("need 0 < eta < 1 and 0 < c1 <= c2")
    return c1 * chernoff_rate(eta)


def uniform_lower_tail(f, eta, c1, c2) -> float:
    return math.exp(-uniform_lower_tail_rate(eta, c1, c2) * f)


@dataclass(frozen=True)
class GeometricTailSpec:
    ps: tuple
    c: float
    t: float

    def __post_init__(self):
        ps = tuple(float(p) for p in self.ps)
        if not ps or ps[0] <= 0 or any(p > 1 for p in ps):
            raise ConfigurationError("success probabilities must lie in (0, 1]")
        if any(b < a for a, b in zip(ps, ps[1:])):
            raise ConfigurationError("ps must be sorted nondecreasing")
        object.__setattr__(self, "ps", ps)

    @property
    def mu(self):
        return sum(1.0 / p for p in self.ps)

    @property
    def n(self):
        return len(self.ps)


def geometric_sum_tail(spec: GeometricTailSpec) -> float:
    """Bound (1-p_1)^t exp(-(2c-3) n / 4) on P(S_n > c (mu + t)).

    Evaluated as stated. It does not hold for every sorted p: with a small
    p_1 and the other rates near 1 the tail decays like (1-p_1)^(c mu) while
    the bound decays in n, so the tail can exceed it by orders of magnitude.
    """
    if spec.c < 2:
        raise ConfigurationError("the geometric-sum bound needs c >= 2")
    if spec.t < 0:
        raise ConfigurationError("t must be nonnegative")
    return _pow1m(spec.ps[0], spec.t) * math.exp(-(2 * spec.c - 3) * spec.n / 4)


# --- Table I -------------------------------------------------------------------------

def _loglog(n):
    return max(1.0, math.log(math.log(n))) if n > math.e else 1.0


@dataclass(frozen=True)
class ScalingClass:
    regime: str
    capacity_upper: str
    capacity_fcfs: str
    delay_lower: str
    delay_fcfs: str
    shapes: dict = field(repr=False, default_factory=dict)

    def evaluate(self, row, n):
        return self.shapes[row](n)


def scaling_class(alpha) -> ScalingClass:
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    if alpha >= 1:
        return ScalingClass(
            SPARSE, "N^-alpha", "N^-alpha / log N", "N^(alpha-1) log N", "N^(alpha-1) log N",
            shapes=dict(
                capacity_upper=lambda n: n ** -alpha,
                capacity_fcfs=lambda n: n ** -alpha / math.log(n),
                delay_lower=lambda n: n ** (alpha - 1) * math.log(n),
                delay_fcfs=lambda n: n ** (alpha - 1) * math.log(n),
            ))
    return ScalingClass(
        DENSE, "1/N", "1/(N log log N)", "1", "log log N",
        shapes=dict(
            capacity_upper=lambda n: 1.0 / n,
            capacity_fcfs=lambda n: 1.0 / (n * _loglog(n)),
            delay_lower=lambda n: 1.0,
            delay_fcfs=_loglog,
        ))
