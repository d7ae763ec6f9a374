import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavric.sched import (
    SchedConfig,
    SchedUeState,
    greedy_grant,
    pf_coefficient,
    pf_schedule,
    rb_demand,
    select_mcs,
    tb_bits,
    update_ewma,
)

SLOT_S = 0.0005


def test_tb_bits_values():
    # floor(106 * 12 * 12 * 5.55) = floor(84715.2)
    assert tb_bits(106, 12, 5.55) == 84_715
    assert tb_bits(0, 12, 5.55) == 0
    assert tb_bits(1, 12, 0.15) == 21


def test_mcs_identity():
    assert [select_mcs(c) for c in range(1, 16)] == list(range(1, 16))


def test_pf_coefficient_values():
    ue = SchedUeState(1, ewma_rate_bps=2e6, rb_demand=10)
    assert pf_coefficient(ue, 1e6, 106) == pytest.approx(5.0)
    a = SchedUeState(1, ewma_rate_bps=10e6, rb_demand=10)
    b = SchedUeState(2, ewma_rate_bps=2e6, rb_demand=10)
    assert pf_coefficient(b, 1e6, 106) > pf_coefficient(a, 1e6, 106)
    assert pf_coefficient(SchedUeState(3, rb_demand=0), 1e6, 106) == 0


def test_greedy_grant_example():
    assert greedy_grant({1: 4, 2: 4, 3: 4}, {1: 3.0, 2: 2.0, 3: 1.0}, 10) == {1: 4, 2: 4, 3: 2}


def test_single_ue_gets_its_demand():
    ue = SchedUeState(1, cqi=15, backlog_bits=5 * 12 * 12 * 5.55)
    alloc = pf_schedule([ue], 12, {1: 5.55}, SchedConfig(), SLOT_S)
    assert alloc.rbs == {1: 5}


def test_low_ewma_ue_takes_whole_carrier():
    big = 10**9
    a = SchedUeState(1, cqi=10, ewma_rate_bps=10e6, backlog_bits=big)
    b = SchedUeState(2, cqi=10, ewma_rate_bps=2e6, backlog_bits=big)
    alloc = pf_schedule([a, b], 12, {1: 2.73, 2: 2.73}, SchedConfig(), SLOT_S)
    assert alloc.rbs == {1: 0, 2: 106}


def test_zero_backlog_gets_nothing():
    ue = SchedUeState(1, cqi=15, backlog_bits=0)
    assert pf_schedule([ue], 12, {1: 5.55}, SchedConfig(), SLOT_S).rbs == {1: 0}


def test_ewma_examples():
    assert update_ewma(1e6, 0, 100, SLOT_S, 1e3) == pytest.approx(0.99e6)
    assert update_ewma(1e3, 0, 100, SLOT_S, 1e3) == 1e3
    r = 1e3
    rate = 5e6
    for _ in range(500):
        r = update_ewma(r, rate * SLOT_S, 100, SLOT_S, 1e3)
    assert r == pytest.approx(rate, rel=0.01)


def test_sched_config_validation():
    for kw in ({"n_prb": 0}, {"ewma_window_slots": 0}, {"ewma_floor_bps": 0}, {"overhead_symbols": -1}):
        with pytest.raises(ValueError):
            SchedConfig(**kw)


def brute_force_greedy(demands, coeffs, n_prb):
    """Independent replay: repeatedly pick the best remaining UE."""
    left = dict(demands)
    grants = {u: 0 for u in demands}
    budget = n_prb
    while budget > 0:
        cands = [u for u in left if left[u] > 0]
        if not cands:
            break
        best = max(cands, key=lambda u: (coeffs[u], -u))
        g = min(left[best], budget)
        grants[best] = g
        budget -= g
        left[best] = 0
    return grants


def random_instance(rng):
    n_ue = rng.randint(1, 4)
    n_prb = rng.randint(1, 12)
    ues = []
    eff = {}
    for u in range(1, n_ue + 1):
        cqi = rng.randint(1, 15)
        ues.append(SchedUeState(u, cqi=cqi, ewma_rate_bps=rng.choice([1e3, 1e5, 1e6, 5e6]),
                                backlog_bits=rng.randint(0, 40_000)))
        eff[u] = [0.15, 0.23, 0.38, 0.60, 0.88, 1.18, 1.48, 1.91, 2.41, 2.73, 3.32, 3.90, 4.52, 5.12, 5.55][cqi - 1]
    return ues, eff, n_prb


def test_matches_brute_force_on_small_instances():
    rng = random.Random(1234)
    for _ in range(1000):
        ues, eff, n_prb = random_instance(rng)
        cfg = SchedConfig(n_prb=n_prb)
        alloc = pf_schedule(ues, 12, eff, cfg, SLOT_S)
        coeffs = {u.ue_id: pf_coefficient(u, 12 * 12 * eff[u.ue_id] / SLOT_S, n_prb) for u in ues}
        assert alloc.rbs == brute_force_greedy({u.ue_id: u.rb_demand for u in ues}, coeffs, n_prb)


@given(st.lists(st.tuples(st.integers(1, 15), st.floats(1e3, 1e8), st.integers(0, 10**7)), min_size=1, max_size=6),
       st.integers(1, 273), st.floats(0.01, 100))
def test_allocation_properties(specs, n_prb, scale):
    table = [0.15, 0.23, 0.38, 0.60, 0.88, 1.18, 1.48, 1.91, 2.41, 2.73, 3.32, 3.90, 4.52, 5.12, 5.55]
    cfg = SchedConfig(n_prb=n_prb)

    def build(k):
        return [SchedUeState(i, cqi=c, ewma_rate_bps=r * k, backlog_bits=b) for i, (c, r, b) in enumerate(specs, 1)]

    eff = {i: table[c - 1] for i, (c, _, _) in enumerate(specs, 1)}
    ues = build(1.0)
    alloc = pf_schedule(ues, 12, eff, cfg, SLOT_S)
    assert alloc.total_rbs <= n_prb
    for ue in ues:
        if alloc.rbs[ue.ue_id]:
            assert ue.backlog_bits > 0
    if sum(u.rb_demand for u in ues) <= n_prb:
        assert all(alloc.rbs[u.ue_id] == u.rb_demand for u in ues)
    # a common EWMA scale leaves the ranking, hence the grants, unchanged
    assert pf_schedule(build(scale), 12, eff, cfg, SLOT_S).rbs == alloc.rbs


@given(st.integers(0, 10**7), st.floats(1, 1e5))
def test_rb_demand_covers_backlog(backlog, per_rb):
    n = rb_demand(backlog, per_rb)
    assert n * per_rb >= backlog - 1e-6
    if n:
        assert (n - 1) * per_rb < backlog


def run_saturated_pair(n_slots):
    cfg = SchedConfig()
    ues = [SchedUeState(1, cqi=9, backlog_bits=10**12), SchedUeState(2, cqi=9, backlog_bits=10**12)]
    eff = {1: 2.41, 2: 2.41}
    totals = {1: 0, 2: 0}
    for _ in range(n_slots):
        alloc = pf_schedule(ues, 12, eff, cfg, SLOT_S)
        for ue in ues:
            totals[ue.ue_id] += alloc.rbs[ue.ue_id]
            ue.ewma_rate_bps = update_ewma(ue.ewma_rate_bps, alloc.tb_bits[ue.ue_id], cfg.ewma_window_slots,
                                           SLOT_S, cfg.ewma_floor_bps)
    return totals


def test_long_run_fairness():
    totals = run_saturated_pair(10_000)
    assert abs(totals[1] - totals[2]) / max(totals.values()) <= 0.01
