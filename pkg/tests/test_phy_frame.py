from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavric.phy_frame import (
    Slot,
    SlotKind,
    TddConfig,
    TddConfigError,
    UndefinedRatioError,
    derive_tdd_pattern,
    dl_data_symbols,
    symbol_counts,
)

# frozen hand-derived values
EXPECTED_DL, EXPECTED_UL = 104, 32


def test_reference_pattern_layout():
    p = derive_tdd_pattern(TddConfig())
    kinds = [s.kind for s in p]
    assert kinds == [SlotKind.DL] * 7 + [SlotKind.SPECIAL] + [SlotKind.UL] * 2
    assert p.slots[7] == Slot(SlotKind.SPECIAL, 6, 4, 4)


def test_reference_symbol_counts():
    c = symbol_counts(derive_tdd_pattern(TddConfig()))
    assert (c.dl_symbols, c.ul_symbols) == (EXPECTED_DL, EXPECTED_UL)
    assert c.ratio == Fraction(4, 13)
    assert round(float(c.ratio), 4) == 0.3077


def test_all_dl_pattern():
    cfg = TddConfig(full_dl_slots=10, extra_dl_symbols=0, full_ul_slots=0, extra_ul_symbols=0)
    p = derive_tdd_pattern(cfg)
    assert len(p) == 10 and all(s.kind is SlotKind.DL for s in p)
    c = symbol_counts(p)
    assert (c.dl_symbols, c.ul_symbols, c.ratio) == (140, 0, 0)


def test_no_dl_symbols_is_undefined_ratio():
    cfg = TddConfig(full_dl_slots=0, extra_dl_symbols=0, full_ul_slots=10, extra_ul_symbols=0)
    with pytest.raises(UndefinedRatioError):
        symbol_counts(derive_tdd_pattern(cfg))


def test_two_dl_one_ul():
    cfg = TddConfig(period_ms=1.5, full_dl_slots=2, extra_dl_symbols=0, full_ul_slots=1, extra_ul_symbols=0)
    c = symbol_counts(derive_tdd_pattern(cfg))
    assert (c.dl_symbols, c.ul_symbols, c.ratio) == (28, 14, Fraction(1, 2))


def test_capacity_violation_names_constraint():
    with pytest.raises(TddConfigError) as err:
        derive_tdd_pattern(TddConfig(period_ms=3.0, full_ul_slots=0, extra_ul_symbols=0))
    assert "7 + 0 + 1 > 6" in str(err.value)


@pytest.mark.parametrize("kwargs", [
    {"scs_khz": 40},
    {"period_ms": 5.25},
    {"extra_dl_symbols": 10, "extra_ul_symbols": 10},
    {"n_prb": 0},
])
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(TddConfigError):
        derive_tdd_pattern(TddConfig(**kwargs))


def test_dl_data_symbols():
    assert dl_data_symbols(Slot(SlotKind.DL, 14, 0, 0), 2) == 12
    assert dl_data_symbols(Slot(SlotKind.SPECIAL, 6, 4, 4), 2) == 4
    assert dl_data_symbols(Slot(SlotKind.UL, 0, 14, 0), 2) == 0
    assert dl_data_symbols(Slot(SlotKind.SPECIAL, 1, 4, 9), 2) == 0


@st.composite
def valid_configs(draw):
    scs = draw(st.sampled_from([15, 30, 60]))
    slot_ms = 15 / scs
    n_slots = draw(st.integers(2, 20))
    dl = draw(st.integers(0, n_slots - 1))
    ul = draw(st.integers(0, n_slots - 1 - dl))
    edl = draw(st.integers(0, 14))
    eul = draw(st.integers(0, 14 - edl))
    return TddConfig(scs, n_slots * slot_ms, dl, edl, ul, eul)


@given(valid_configs())
def test_symbol_totals_match_config(cfg):
    p = derive_tdd_pattern(cfg)
    assert len(p) == cfg.slots_per_period
    assert sum(s.dl_symbols for s in p) == 14 * cfg.full_dl_slots + cfg.extra_dl_symbols
    assert sum(s.ul_symbols for s in p) == 14 * cfg.full_ul_slots + cfg.extra_ul_symbols
    for s in p:
        assert s.dl_symbols + s.ul_symbols + s.guard_symbols == 14


@given(valid_configs())
def test_derivation_is_pure(cfg):
    assert derive_tdd_pattern(cfg) == derive_tdd_pattern(cfg)
