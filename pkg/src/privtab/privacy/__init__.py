"""Noisy vote aggregation and the Renyi-DP accountant."""

from .accountant import (
    ORDER_MAX,
    ORDER_MIN,
    ORDERS,
    Epsilon,
    RdpLedger,
    VoteRecord,
    charge_cost_vector,
    epsilon_floor,
    flip_probability,
    get_epsilon,
    rdp_cost,
    record_query,
)
from .aggregate import noisy_aggregate, noisy_aggregate_batch
from .special import erfc

__all__ = [
    "ORDERS",
    "ORDER_MAX",
    "ORDER_MIN",
    "Epsilon",
    "RdpLedger",
    "VoteRecord",
    "charge_cost_vector",
    "epsilon_floor",
    "erfc",
    "flip_probability",
    "get_epsilon",
    "noisy_aggregate",
    "noisy_aggregate_batch",
    "rdp_cost",
    "record_query",
]
