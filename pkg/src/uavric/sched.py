"""Proportional-fair downlink scheduler with bulk per-UE RB grants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

SUBCARRIERS_PER_RB = 12


@dataclass(frozen=True)
class SchedConfig:
    n_prb: int = 106
    ewma_window_slots: int = 100
    ewma_floor_bps: float = 1e3
    overhead_symbols: int = 2

    def __post_init__(self):
        if self.n_prb < 1:
            raise ValueError("n_prb must be >= 1")
        if self.ewma_window_slots < 1:
            raise ValueError("ewma_window_slots must be >= 1")
        if self.ewma_floor_bps <= 0:
            raise ValueError("ewma_floor_bps must be > 0")
        if self.overhead_symbols < 0:
            raise ValueError("overhead_symbols must be >= 0")


@dataclass
class SchedUeState:
    ue_id: int
    cqi: int = 1
    ewma_rate_bps: float = 1e3
    backlog_bits: int = 0
    rb_demand: int = 0


@dataclass
class Allocation:
    rbs: dict[int, int] = field(default_factory=dict)
    mcs: dict[int, int] = field(default_factory=dict)
    tb_bits: dict[int, int] = field(default_factory=dict)

    @property
    def total_rbs(self) -> int:
        return sum(self.rbs.values())


def bits_per_rb(data_symbols: int, efficiency: float) -> float:
    return SUBCARRIERS_PER_RB * data_symbols * efficiency


def tb_bits(rb_count: int, data_symbols: int, efficiency: float) -> int:
    # the epsilon keeps exact products (e.g. 2.0 - 1e-16) from flooring down
    return math.floor(rb_count * bits_per_rb(data_symbols, efficiency) + 1e-9)


def select_mcs(cqi: int) -> int:
    """MCS index; identity over the CQI table index (no separate MCS table)."""
    return cqi


def rb_demand(backlog_bits: int, per_rb_bits: float) -> int:
    if backlog_bits <= 0 or per_rb_bits <= 0:
        return 0
    return math.ceil(backlog_bits / per_rb_bits - 1e-9)


def pf_coefficient(ue: SchedUeState, per_rb_rate_bps: float, n_prb: int) -> float:
    achievable = per_rb_rate_bps * min(ue.rb_demand, n_prb)
    return achievable / ue.ewma_rate_bps


def greedy_grant(demands: Mapping[int, int], coefficients: Mapping[int, float], n_prb: int) -> dict[int, int]:
    """Serve UEs in descending coefficient order, each up to its full demand.

    Ties go to the lower ue_id. UEs with no demand get nothing.
    """
    grants = {ue: 0 for ue in demands}
    remaining = n_prb
    for ue in sorted(demands, key=lambda u: (-coefficients[u], u)):
        if remaining == 0:
            break
        if demands[ue] <= 0:
            continue
        grant = min(demands[ue], remaining)
        grants[ue] = grant
        remaining -= grant
    return grants


def pf_schedule(
    ues: Iterable[SchedUeState],
    data_symbols: int,
    efficiency: Mapping[int, float],
    cfg: SchedConfig,
    slot_s: float,
) -> Allocation:
    """Allocate one slot's RBs. ``efficiency`` maps ue_id to bits/s/Hz at its CQI.

    Updates each UE's ``rb_demand`` in place from its backlog.
    """
    ues = list(ues)
    alloc = Allocation()
    if data_symbols <= 0:
        return alloc
    demands: dict[int, int] = {}
    coeffs: dict[int, float] = {}
    for ue in ues:
        per_rb = bits_per_rb(data_symbols, efficiency[ue.ue_id])
        ue.rb_demand = rb_demand(ue.backlog_bits, per_rb)
        demands[ue.ue_id] = ue.rb_demand
        coeffs[ue.ue_id] = pf_coefficient(ue, per_rb / slot_s, cfg.n_prb)
    grants = greedy_grant(demands, coeffs, cfg.n_prb)
    for ue in ues:
        rbs = grants[ue.ue_id]
        alloc.rbs[ue.ue_id] = rbs
        alloc.mcs[ue.ue_id] = select_mcs(ue.cqi)
        alloc.tb_bits[ue.ue_id] = tb_bits(rbs, data_symbols, efficiency[ue.ue_id])
    assert alloc.total_rbs <= cfg.n_prb
    return alloc


def update_ewma(rate_bps: float, served_bits: float, window_slots: int, slot_s: float, floor_bps: float) -> float:
    alpha = 1.0 / window_slots
    return max(floor_bps, (1 - alpha) * rate_bps + alpha * (served_bits / slot_s))
