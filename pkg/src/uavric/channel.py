"""Air-to-ground link model: geometry, LoS, path loss, SNR and CQI."""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0

DEFAULT_CQI_TABLE: tuple[float, ...] = (
    0.15, 0.23, 0.38, 0.60, 0.88, 1.18, 1.48, 1.91,
    2.41, 2.73, 3.32, 3.90, 4.52, 5.12, 5.55,
)

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = -27.0
    tx_gain_db: float = 10.0
    rx_gain_db: float = 0.0
    noise_figure_db: float = 7.0
    bandwidth_hz: float = 40e6
    carrier_freq_hz: float = 3.5e9

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        if not self.carrier_freq_hz > 0:
            raise ValueError(f"carrier_freq_hz must be > 0, got {self.carrier_freq_hz}")

    @property
    def noise_floor_dbm(self) -> float:
        return THERMAL_NOISE_DBM_HZ + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class ChannelState:
    distance_3d_m: float
    elevation_deg: float
    los: bool
    path_loss_db: float
    snr_db: float
    cqi: int


def geometry(ue_pos: Sequence[float], gnb_pos: Sequence[float]) -> tuple[float, float, float]:
    """Return (3D distance, horizontal distance, elevation in degrees) from gNB to UE."""
    dx = ue_pos[0] - gnb_pos[0]
    dy = ue_pos[1] - gnb_pos[1]
    dz = ue_pos[2] - gnb_pos[2]
    for v in (dx, dy, dz):
        if not math.isfinite(v):
            raise ValueError("positions must be finite")
    horizontal = math.hypot(dx, dy)
    distance = math.hypot(horizontal, dz)
    if distance == 0:
        raise ValueError("UE and gNB positions coincide")
    return distance, horizontal, math.degrees(math.atan2(dz, horizontal))


def los_probability(elevation_deg: float, p0: float = 0.3, theta_sat_deg: float = 45.0) -> float:
    p = p0 + (1 - p0) * max(0.0, elevation_deg) / theta_sat_deg
    return min(max(p, p0), 1.0)


def sample_los(prob: float, rng: random.Random) -> bool:
    return rng.random() < prob


def free_space_ref_db(carrier_freq_hz: float, d_ref_m: float = 1.0) -> float:
    return 20 * math.log10(4 * math.pi * carrier_freq_hz * d_ref_m / SPEED_OF_LIGHT)


def path_loss_db(
    distance_3d_m: float,
    carrier_freq_hz: float,
    los: bool,
    *,
    n_los: float = 2.0,
    n_nlos: float = 3.5,
    shadowing_db: float = 0.0,
    d_ref_m: float = 1.0,
) -> float:
    """Log-distance path loss anchored at the free-space loss at ``d_ref_m``.

    ``shadowing_db`` is a caller-drawn lognormal term (0 when disabled).
    """
    if distance_3d_m < d_ref_m:
        raise ValueError(f"distance {distance_3d_m} m is below the {d_ref_m} m reference distance")
    n = n_los if los else n_nlos
    return free_space_ref_db(carrier_freq_hz, d_ref_m) + 10 * n * math.log10(distance_3d_m / d_ref_m) + shadowing_db


def snr_db(budget: LinkBudget, path_loss: float, antenna_gain_db: float = 0.0) -> float:
    received = budget.tx_power_dbm + budget.tx_gain_db + budget.rx_gain_db + antenna_gain_db - path_loss
    return received - budget.noise_floor_dbm


def snr_to_cqi(snr: float, snr_min_db: float = -6.0, step_db: float = 2.0, n_cqi: int = 15) -> int:
    if not math.isfinite(snr):
        raise ValueError(f"SNR must be finite, got {snr}")
    cqi = 1 + math.floor((snr - snr_min_db) / step_db)
    return min(max(cqi, 1), n_cqi)


def cqi_to_efficiency(cqi: int, table: Sequence[float] = DEFAULT_CQI_TABLE) -> float:
    if not 1 <= cqi <= len(table):
        raise ValueError(f"CQI {cqi} outside 1..{len(table)}")
    return table[cqi - 1]


@dataclass(frozen=True)
class ChannelModel:
    """Scenario-level channel constants plus the per-UE evaluation chain.

    ``antenna_gain_table`` holds ``(elevation_deg, gain_db)`` pairs,
    linearly interpolated and held flat beyond the ends; empty means an
    isotropic pattern. ``los_mode`` pins the LoS state ("los"/"nlos") or
    draws it from the elevation model ("elevation").
    """

    p0: float = 0.3
    theta_sat_deg: float = 45.0
    n_los: float = 2.0
    n_nlos: float = 3.5
    cqi_table: tuple[float, ...] = DEFAULT_CQI_TABLE
    snr_min_db: float = -6.0
    step_db: float = 2.0
    shadowing: bool = False
    shadowing_sigma_db: float = 4.0
    los_mode: str = "elevation"
    los_period_ms: float = 100.0
    antenna_gain_table: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.los_mode not in ("elevation", "los", "nlos"):
            raise ValueError(f"los_mode must be elevation, los or nlos, got {self.los_mode!r}")
        if len(self.cqi_table) < 1 or any(b < a for a, b in zip(self.cqi_table, self.cqi_table[1:])):
            raise ValueError("cqi_table must be non-empty and non-decreasing")
        if self.step_db <= 0 or self.theta_sat_deg <= 0:
            raise ValueError("step_db and theta_sat_deg must be positive")
        if self.los_period_ms <= 0:
            raise ValueError("los_period_ms must be positive")

    def los_prob(self, elevation_deg: float) -> float:
        if self.los_mode == "los":
            return 1.0
        if self.los_mode == "nlos":
            return 0.0
        return los_probability(elevation_deg, self.p0, self.theta_sat_deg)

    def antenna_gain_db(self, elevation_deg: float) -> float:
        table = self.antenna_gain_table
        if not table:
            return 0.0
        angles = [a for a, _ in table]
        i = bisect_right(angles, elevation_deg)
        if i == 0:
            return table[0][1]
        if i == len(table):
            return table[-1][1]
        (a0, g0), (a1, g1) = table[i - 1], table[i]
        return g0 + (g1 - g0) * (elevation_deg - a0) / (a1 - a0)

    def cqi(self, snr: float) -> int:
        return snr_to_cqi(snr, self.snr_min_db, self.step_db, len(self.cqi_table))

    def efficiency(self, cqi: int) -> float:
        return cqi_to_efficiency(cqi, self.cqi_table)

    def evaluate(
        self,
        ue_pos: Sequence[float],
        gnb_pos: Sequence[float],
        budget: LinkBudget,
        los: bool,
        shadowing_db: float = 0.0,
    ) -> ChannelState:
        distance, _, elevation = geometry(ue_pos, gnb_pos)
        # positions closer than the reference distance are evaluated at it
        pl = path_loss_db(
            max(distance, 1.0), budget.carrier_freq_hz, los,
            n_los=self.n_los, n_nlos=self.n_nlos, shadowing_db=shadowing_db,
        )
        snr = snr_db(budget, pl, self.antenna_gain_db(elevation))
        return ChannelState(distance, elevation, los, pl, snr, self.cqi(snr))
