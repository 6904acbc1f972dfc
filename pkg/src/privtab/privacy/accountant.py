"""Renyi-DP accountant for Gaussian noisy-vote aggregation.

Per released label with tally n out of k teachers, the vote gap is
|n - k/2| and the majority-flip probability is

    q = 0.5 * erfc(gap / (2 sigma)).

The data-dependent RDP cost at integer order alpha is

    (1/(alpha-1)) * log[ (1-q) ((1-q)/(1 - q e^{2/sigma^2}))^{alpha-1}
                         + q e^{2(alpha-1)/sigma^2} ]

valid while q e^{2/sigma^2} < 1; outside that region the accountant uses the
data-independent Gaussian bound alpha/sigma^2. Costs compose additively over
released labels per order, and the ledger converts to (epsilon, delta)-DP by
minimising totals(alpha) + log(1/delta)/(alpha-1) over the integer order
grid alpha in {2, ..., 511}.

Everything is evaluated in log space (orders up to 511 overflow direct
powers) and the data-dependent branch is clamped by alpha/sigma^2 so the
reported cost can never fall below what was actually charged; pass
clamp=False for the raw formula value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, ParameterError
from .special import erfc

ORDER_MIN = 2
ORDER_MAX = 511
ORDERS = np.arange(ORDER_MIN, ORDER_MAX + 1)

# Below this, q is numerically indistinguishable from the zero-cost limit.
Q_UNDERFLOW = 1e-300


def flip_probability(gap: float, sigma: float) -> float:
    """Probability that Gaussian vote noise flips the teacher majority.

    Strictly decreasing in gap, increasing in sigma; equals 0.5 at gap 0.
    """
    if sigma <= 0.0:
        raise ParameterError(f"flip_probability: sigma must be > 0, got {sigma}")
    if gap < 0.0:
        raise ParameterError(f"flip_probability: gap must be >= 0, got {gap}")
    return 0.5 * erfc(gap / (2.0 * sigma))


def _cost_vector(q: float, sigma: float, orders: np.ndarray, clamp: bool) -> np.ndarray:
    """Per-order RDP cost of one released label, over an integer order grid."""
    bound = orders / (sigma * sigma)
    if q < Q_UNDERFLOW:
        return np.zeros_like(bound, dtype=np.float64)
    t = 2.0 / (sigma * sigma)
    log_q = math.log(q)
    if log_q + t >= 0.0:  # q * e^{2/sigma^2} >= 1: data-independent fallback
        return bound.astype(np.float64)
    log1mq = math.log1p(-q)
    log_denom = math.log1p(-math.exp(log_q + t))  # log(1 - q e^t), argument < 1
    am1 = orders - 1.0
    a_log = log1mq + am1 * (log1mq - log_denom)
    b_log = log_q + t * am1
    vals = np.logaddexp(a_log, b_log) / am1
    np.maximum(vals, 0.0, out=vals)
    if clamp:
        np.minimum(vals, bound, out=vals)
    return vals


def rdp_cost(alpha: int, q: float, sigma: float, clamp: bool = True) -> float:
    """RDP cost at one integer order alpha >= 2 for flip probability q."""
    if int(alpha) != alpha or alpha < 2:
        raise ParameterError(f"rdp_cost: alpha must be an integer >= 2, got {alpha}")
    if not (0.0 <= q <= 0.5):
        raise ParameterError(f"rdp_cost: q must lie in [0, 0.5], got {q}")
    if sigma <= 0.0:
        raise ParameterError(f"rdp_cost: sigma must be > 0, got {sigma}")
    return float(_cost_vector(q, sigma, np.array([int(alpha)]), clamp)[0])


@dataclass(frozen=True)
class VoteRecord:
    """One noisy-aggregation batch: the per-label tallies charged together."""

    tallies: tuple
    k: int
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "tallies", tuple(int(t) for t in self.tallies))
        if self.k < 1:
            raise ParameterError(f"VoteRecord: k must be >= 1, got {self.k}")
        if self.sigma <= 0.0:
            raise ParameterError(f"VoteRecord: sigma must be > 0, got {self.sigma}")
        for t in self.tallies:
            if not (0 <= t <= self.k):
                raise ParameterError(f"VoteRecord: tally {t} outside [0, {self.k}]")


@dataclass(frozen=True)
class Epsilon:
    """Converted (epsilon, delta) guarantee and the order realising it."""

    value: float
    delta: float
    argmin_order: int


@dataclass
class RdpLedger:
    """Accumulated per-order RDP costs plus conversion state.

    Charging depends only on tallies: sampled noise and released labels never
    enter the ledger.
    """

    k: int
    sigma: float
    delta: float
    clamp: bool = True
    totals: np.ndarray = field(default_factory=lambda: np.zeros(ORDERS.size))
    released: int = 0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"RdpLedger: delta must lie in (0, 1), got {self.delta}")
        if self.sigma <= 0.0:
            raise ConfigError(f"RdpLedger: sigma must be > 0, got {self.sigma}")
        if self.k < 1:
            raise ConfigError(f"RdpLedger: k must be >= 1, got {self.k}")
        self.totals = np.asarray(self.totals, dtype=np.float64).copy()

    def copy(self) -> "RdpLedger":
        dup = RdpLedger(self.k, self.sigma, self.delta, self.clamp, self.totals.copy())
        dup.released = self.released
        return dup


def record_query(
    ledger: RdpLedger,
    record: VoteRecord,
    collect: Callable[[int, int, float, float, float], None] | None = None,
) -> RdpLedger:
    """Charge one noisy-aggregation batch to the ledger, in place.

    Labels in the batch compose additively, so the batch charge equals the
    sum of per-label charges. With `collect` set, labels are charged one at a
    time and collect(label_index, tally, gap, q, epsilon_hat_after) is called
    after each, which is how the per-label accountant trace is produced.
    """
    if record.k != ledger.k:
        raise ConfigError(f"record_query: record k={record.k} != ledger k={ledger.k}")
    if record.sigma != ledger.sigma:
        raise ConfigError(
            f"record_query: record sigma={record.sigma} != ledger sigma={ledger.sigma}"
        )
    half_k = ledger.k / 2.0
    cache: dict[int, np.ndarray] = {}
    for j, tally in enumerate(record.tallies):
        costs = cache.get(tally)
        if costs is None:
            q = flip_probability(abs(tally - half_k), ledger.sigma)
            costs = _cost_vector(q, ledger.sigma, ORDERS, ledger.clamp)
            cache[tally] = costs
        ledger.totals += costs
        ledger.released += 1
        if collect is not None:
            gap = abs(tally - half_k)
            q = flip_probability(gap, ledger.sigma)
            collect(j, tally, gap, q, get_epsilon(ledger).value)
    return ledger


def get_epsilon(ledger: RdpLedger) -> Epsilon:
    """Tightest (epsilon, delta) conversion over the order grid.

    epsilon_hat = min_alpha [ totals(alpha) + log(1/delta)/(alpha - 1) ];
    ties break toward the smaller order.
    """
    penalty = math.log(1.0 / ledger.delta) / (ORDERS - 1.0)
    values = ledger.totals + penalty
    idx = int(np.argmin(values))  # first occurrence = smallest order
    return Epsilon(value=float(values[idx]), delta=ledger.delta, argmin_order=int(ORDERS[idx]))


def epsilon_floor(delta: float) -> float:
    """Conversion value of an empty ledger: log(1/delta)/(ORDER_MAX - 1)."""
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"epsilon_floor: delta must lie in (0, 1), got {delta}")
    return math.log(1.0 / delta) / (ORDER_MAX - 1)


def charge_cost_vector(tallies: Sequence[int], k: int, sigma: float, clamp: bool = True) -> np.ndarray:
    """Total per-order cost of a tally batch without touching a ledger."""
    ledger = RdpLedger(k=k, sigma=sigma, delta=0.5, clamp=clamp)
    record_query(ledger, VoteRecord(tuple(tallies), k, sigma))
    return ledger.totals
