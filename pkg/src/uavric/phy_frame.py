"""TDD frame numerology and per-slot symbol accounting."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import NamedTuple


class TddConfigError(ValueError):
    """A TDD configuration violates one of its constraints.

    ``constraint`` names the violated rule so callers (and the scenario
    loader) can point at the offending keys.
    """

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"{constraint}: {message}")


class UndefinedRatioError(ArithmeticError):
    pass


class SlotKind(str, Enum):
    DL = "DL"
    UL = "UL"
    SPECIAL = "Special"


@dataclass(frozen=True)
class Slot:
    kind: SlotKind
    dl_symbols: int
    ul_symbols: int
    guard_symbols: int


@dataclass(frozen=True)
class TddConfig:
    scs_khz: int = 30
    period_ms: float = 5.0
    full_dl_slots: int = 7
    extra_dl_symbols: int = 6
    full_ul_slots: int = 2
    extra_ul_symbols: int = 4
    n_prb: int = 106
    symbols_per_slot: int = 14

    @property
    def slot_ms(self) -> float:
        return 15.0 / self.scs_khz

    @property
    def slots_per_period(self) -> int:
        return int(round(Fraction(str(self.period_ms)) * self.scs_khz / 15))

    @property
    def needs_special_slot(self) -> bool:
        return self.extra_dl_symbols + self.extra_ul_symbols > 0

    def validate(self) -> None:
        if self.scs_khz <= 0 or self.scs_khz % 15:
            raise TddConfigError("scs_khz", f"must be a positive multiple of 15 kHz, got {self.scs_khz}")
        if self.symbols_per_slot <= 0:
            raise TddConfigError("symbols_per_slot", f"must be positive, got {self.symbols_per_slot}")
        slots = Fraction(str(self.period_ms)) * self.scs_khz / 15
        if slots.denominator != 1 or slots <= 0:
            raise TddConfigError(
                "slots_per_period",
                f"period {self.period_ms} ms is not a positive whole number of "
                f"{self.slot_ms:g} ms slots",
            )
        for name in ("full_dl_slots", "extra_dl_symbols", "full_ul_slots", "extra_ul_symbols"):
            if getattr(self, name) < 0:
                raise TddConfigError(name, "must be non-negative")
        special = 1 if self.needs_special_slot else 0
        used = self.full_dl_slots + self.full_ul_slots + special
        if used > slots:
            raise TddConfigError(
                "slot_capacity",
                f"{self.full_dl_slots} + {self.full_ul_slots} + {special} > {int(slots)} slots per period",
            )
        if self.extra_dl_symbols + self.extra_ul_symbols > self.symbols_per_slot:
            raise TddConfigError(
                "special_slot_symbols",
                f"{self.extra_dl_symbols} + {self.extra_ul_symbols} > {self.symbols_per_slot} symbols per slot",
            )
        if self.n_prb < 1:
            raise TddConfigError("n_prb", f"must be >= 1, got {self.n_prb}")


@dataclass(frozen=True)
class SlotPattern:
    slots: tuple[Slot, ...]
    symbols_per_slot: int = 14

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __getitem__(self, i: int) -> Slot:
        return self.slots[i]


class SymbolCounts(NamedTuple):
    dl_symbols: int
    ul_symbols: int
    ratio: Fraction


def derive_tdd_pattern(cfg: TddConfig) -> SlotPattern:
    """Lay out one TDD period as DL slots, one special slot, then UL slots.

    The special slot exists only when there are extra DL or UL symbols; its
    guard period fills whatever those leave of the slot. Slots left over
    after the full DL/UL allocation are emitted as guard-only special slots
    directly after the special slot so the pattern always spans the period.
    """
    cfg.validate()
    n = cfg.symbols_per_slot
    slots = [Slot(SlotKind.DL, n, 0, 0)] * cfg.full_dl_slots
    if cfg.needs_special_slot:
        guard = n - cfg.extra_dl_symbols - cfg.extra_ul_symbols
        slots.append(Slot(SlotKind.SPECIAL, cfg.extra_dl_symbols, cfg.extra_ul_symbols, guard))
    spare = cfg.slots_per_period - len(slots) - cfg.full_ul_slots
    slots += [Slot(SlotKind.SPECIAL, 0, 0, n)] * spare
    slots += [Slot(SlotKind.UL, 0, n, 0)] * cfg.full_ul_slots
    return SlotPattern(tuple(slots), n)


def symbol_counts(pattern: SlotPattern) -> SymbolCounts:
    dl = sum(s.dl_symbols for s in pattern)
    ul = sum(s.ul_symbols for s in pattern)
    if dl == 0:
        raise UndefinedRatioError("UL/DL ratio undefined: pattern has no DL symbols")
    return SymbolCounts(dl, ul, Fraction(ul, dl))


def dl_data_symbols(slot: Slot, overhead_symbols: int) -> int:
    """DL symbols left for data after control/reference overhead."""
    return slot.dl_symbols - min(overhead_symbols, slot.dl_symbols)
