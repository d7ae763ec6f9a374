"""Throughput-vs-distance curves at unseen transmit powers via link-budget inversion.

A measured curve is turned back into per-point SNR through the rate chain
(SNR -> CQI -> spectral efficiency -> throughput), shifted by the power
difference in dB (SNR is linear in transmit power on a dB scale), and
mapped forward again.
"""

from __future__ import annotations

import csv
import math
import re
from bisect import bisect_right
from dataclasses import dataclass, replace
from pathlib import Path
from statistics import median
from typing import Sequence, Union

from .channel import DEFAULT_CQI_TABLE, ChannelModel
from .phy_frame import TddConfig, derive_tdd_pattern, dl_data_symbols
from .sched import SUBCARRIERS_PER_RB, SchedConfig


class CappedPointError(ValueError):
    pass


@dataclass(frozen=True)
class MeasuredCurve:
    power_dbm: float
    points: tuple[tuple[float, float], ...]
    offered_load_mbps: float

    def __post_init__(self):
        xs = [h for h, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("horizontal_m must be strictly increasing")
        for h, thp in self.points:
            if not 0 <= thp <= self.offered_load_mbps + 1e-9:
                raise ValueError(f"throughput {thp} at {h} m outside [0, {self.offered_load_mbps}]")

    @property
    def distances(self) -> list[float]:
        return [h for h, _ in self.points]

    @property
    def throughputs(self) -> list[float]:
        return [t for _, t in self.points]


@dataclass(frozen=True)
class RateModel:
    """Continuous version of the CQI rate chain for one UE.

    Spectral efficiency is piecewise linear in SNR (dB) between the CQI
    switching points ``snr_min + (k-1)*step``, flat at the top entry and
    floored at the first entry, which is where the quantised chain clamps.
    Throughput is efficiency times the resource elements per second the UE
    gets (``rb_share`` of the carrier, every DL data symbol).
    """

    re_per_s: float
    cqi_table: tuple[float, ...] = DEFAULT_CQI_TABLE
    snr_min_db: float = -6.0
    step_db: float = 2.0
    rb_share: float = 1.0
    cap_tolerance: float = 0.02

    @classmethod
    def from_config(
        cls,
        tdd: TddConfig = TddConfig(),
        sched: SchedConfig = SchedConfig(),
        channel: ChannelModel = ChannelModel(),
        rb_share: float = 1.0,
    ) -> "RateModel":
        pattern = derive_tdd_pattern(tdd)
        symbols = sum(dl_data_symbols(s, sched.overhead_symbols) for s in pattern)
        re_per_s = tdd.n_prb * SUBCARRIERS_PER_RB * symbols / (tdd.period_ms / 1000.0)
        return cls(re_per_s, tuple(channel.cqi_table), channel.snr_min_db, channel.step_db, rb_share)

    @property
    def knots_db(self) -> list[float]:
        return [self.snr_min_db + k * self.step_db for k in range(len(self.cqi_table))]

    @property
    def capacity_mbps(self) -> float:
        return self.re_per_s * self.rb_share / 1e6

    def efficiency_at(self, snr: float) -> float:
        knots, table = self.knots_db, self.cqi_table
        if snr <= knots[0]:
            return table[0]
        if snr >= knots[-1]:
            return table[-1]
        i = bisect_right(knots, snr)
        f = (snr - knots[i - 1]) / self.step_db
        return table[i - 1] + f * (table[i] - table[i - 1])

    def snr_for_efficiency(self, eff: float) -> float:
        """Inverse of :meth:`efficiency_at`; below the first entry the first
        segment is extended linearly, so zero throughput lands under snr_min."""
        knots, table = self.knots_db, self.cqi_table
        if len(table) == 1:
            return knots[0]
        if eff >= table[-1]:
            return knots[-1]
        if eff < table[0]:
            slope = (table[1] - table[0]) / self.step_db
            return knots[0] - (table[0] - eff) / slope
        for i in range(1, len(table)):
            if eff <= table[i]:
                lo, hi = table[i - 1], table[i]
                f = 0.0 if hi == lo else (eff - lo) / (hi - lo)
                return knots[i - 1] + f * self.step_db
        return knots[-1]

    def throughput_mbps(self, snr: float, offered_load_mbps: float) -> float:
        return min(offered_load_mbps, self.efficiency_at(snr) * self.capacity_mbps)

    def is_capped(self, thp_mbps: float, offered_load_mbps: float) -> bool:
        return thp_mbps >= offered_load_mbps * (1 - self.cap_tolerance)

    @property
    def floor_mbps(self) -> float:
        return self.cqi_table[0] * self.capacity_mbps

    def is_floored(self, thp_mbps: float) -> bool:
        """At the CQI-1 clamp: the SNR is only known to be below the first knot."""
        return 0 < thp_mbps <= self.floor_mbps * (1 + self.cap_tolerance)


def invert_rate_to_snr(point: tuple[float, float], offered_load_mbps: float, model: RateModel) -> float:
    """Implied SNR (dB) of an uncapped (horizontal_m, throughput_mbps) point."""
    _, thp = point
    if model.is_capped(thp, offered_load_mbps):
        raise CappedPointError(f"throughput {thp} Mb/s is at the {offered_load_mbps} Mb/s cap; no unique SNR")
    return model.snr_for_efficiency(thp / model.capacity_mbps)


def power_shift_curve(curve: MeasuredCurve, new_power_dbm: float, model: RateModel) -> MeasuredCurve:
    delta = new_power_dbm - curve.power_dbm
    if delta == 0:
        return replace(curve)
    cap = curve.offered_load_mbps
    cap_snr = model.snr_for_efficiency(cap / model.capacity_mbps)
    points = []
    for h, thp in curve.points:
        if model.is_floored(thp) and not model.is_capped(thp, cap):
            # censored from below; the quantised chain keeps it at CQI 1
            new = thp
        elif model.is_capped(thp, cap):
            new = cap if delta >= 0 else model.throughput_mbps(cap_snr + delta, cap)
        else:
            new = model.throughput_mbps(invert_rate_to_snr((h, thp), cap, model) + delta, cap)
        points.append((h, new))
    return MeasuredCurve(new_power_dbm, tuple(points), cap)


@dataclass(frozen=True)
class Score:
    median_rel_err: float
    max_rel_err: float
    fraction_within_10pct: float
    n_points: int


def _interp(x: float, xs: Sequence[float], ys: Sequence[float]) -> float:
    i = bisect_right(xs, x)
    if i == 0:
        return ys[0]
    if i == len(xs):
        return ys[-1]
    x0, x1 = xs[i - 1], xs[i]
    return ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0)


def score_generated(gen: MeasuredCurve, oracle: MeasuredCurve, cap_tolerance: float = 0.02) -> Score:
    """Relative error of ``gen`` against ``oracle`` on the oracle's uncapped points.

    ``gen`` is linearly resampled onto the oracle's distances inside the
    overlap of the two ranges. Oracle points with zero throughput have no
    relative error and are skipped.
    """
    if not gen.points or not oracle.points:
        raise ValueError("cannot score an empty curve")
    lo = max(gen.distances[0], oracle.distances[0])
    hi = min(gen.distances[-1], oracle.distances[-1])
    if lo > hi:
        raise ValueError(f"distance ranges do not overlap ({gen.distances[0]}-{gen.distances[-1]} m vs "
                         f"{oracle.distances[0]}-{oracle.distances[-1]} m)")
    cap = oracle.offered_load_mbps * (1 - cap_tolerance)
    errs = []
    for h, ref in oracle.points:
        if not lo <= h <= hi or ref >= cap or ref <= 0:
            continue
        errs.append(abs(_interp(h, gen.distances, gen.throughputs) - ref) / ref)
    if not errs:
        raise ValueError("no uncapped oracle points inside the overlap")
    return Score(median(errs), max(errs), sum(e <= 0.10 for e in errs) / len(errs), len(errs))


_META = re.compile(r"#\s*power_dbm=(\S+)\s+offered_load_mbps=(\S+)")


def write_curve(curve: MeasuredCurve, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# power_dbm={curve.power_dbm!r} offered_load_mbps={curve.offered_load_mbps!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("horizontal_m", "throughput_mbps"))
        for h, thp in curve.points:
            w.writerow((repr(h), repr(thp)))


def read_curve(path: Union[str, Path]) -> MeasuredCurve:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = [m for m in map(_META.match, lines) if m]
    if not meta:
        raise ValueError(f"{path}: missing '# power_dbm=<v> offered_load_mbps=<v>' line")
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0].replace(" ", "") != "horizontal_m,throughput_mbps":
        raise ValueError(f"{path}: expected header horizontal_m,throughput_mbps")
    points = tuple((float(h), float(t)) for h, t in csv.reader(body[1:]))
    return MeasuredCurve(float(meta[0].group(1)), points, float(meta[0].group(2)))


def curve_from_bins(bins, power_dbm: float, offered_load_mbps: float) -> MeasuredCurve:
    """Build a curve from ``xapp_kpm.bin_by_distance`` output for one UE (bin centres)."""
    points = tuple((b.center_m, min(b.dl_thp_mbps, offered_load_mbps)) for b in bins)
    if any(math.isnan(t) for _, t in points):
        raise ValueError("NaN throughput in bins")
    return MeasuredCurve(power_dbm, points, offered_load_mbps)
