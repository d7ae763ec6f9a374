"""Waypoint replay for aerial and ground UEs."""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional, Sequence

log = logging.getLogger(__name__)

Vec3 = tuple[float, float, float]
MODES = ("hover_sequence", "constant_speed_path", "static")


@dataclass(frozen=True)
class Waypoint:
    pos: Vec3
    hold_s: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """A timed 3D path.

    In ``hover_sequence`` mode the UE holds at each waypoint for ``hold_s``
    and transits between holds at ``speed_mps`` (instantaneously, with a
    warning, if no speed is given). ``constant_speed_path`` moves through
    the waypoints at ``speed_mps``, honouring any holds. ``static`` sits at
    the first waypoint. Every mode hovers at the last waypoint forever.
    """

    name: str
    mode: str
    waypoints: tuple[Waypoint, ...]
    speed_mps: Optional[float] = None
    _knots: tuple[tuple[float, Vec3], ...] = field(init=False, repr=False, compare=False)
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"trajectory {self.name!r}: mode must be one of {MODES}, got {self.mode!r}")
        if not self.waypoints:
            raise ValueError(f"trajectory {self.name!r}: needs at least one waypoint")
        if any(w.hold_s < 0 for w in self.waypoints):
            raise ValueError(f"trajectory {self.name!r}: hold_s must be >= 0")
        if self.mode == "constant_speed_path" and not (self.speed_mps and self.speed_mps > 0):
            raise ValueError(f"trajectory {self.name!r}: constant_speed_path needs speed_mps > 0")
        if self.speed_mps is not None and self.speed_mps <= 0:
            raise ValueError(f"trajectory {self.name!r}: speed_mps must be > 0")
        object.__setattr__(self, "_knots", self._build_knots())
        object.__setattr__(self, "_times", tuple(k[0] for k in self._knots))

    def _build_knots(self) -> tuple[tuple[float, Vec3], ...]:
        # (time, position) breakpoints; position is linear between knots
        wps = self.waypoints[:1] if self.mode == "static" else self.waypoints
        t = 0.0
        knots: list[tuple[float, Vec3]] = []
        for i, wp in enumerate(wps):
            if i:
                prev = wps[i - 1].pos
                dist = math.dist(prev, wp.pos)
                if self.speed_mps:
                    t += dist / self.speed_mps
                elif dist > 0:
                    log.warning("trajectory %r: no speed_mps, jumping %.1f m instantaneously", self.name, dist)
            knots.append((t, tuple(float(c) for c in wp.pos)))
            if wp.hold_s:
                t += wp.hold_s
                knots.append((t, knots[-1][1]))
        return tuple(knots)

    @property
    def duration_s(self) -> float:
        """Time at which the final waypoint is reached and its hold ends."""
        return self._knots[-1][0]

    def position_at(self, t_s: float) -> Vec3:
        if t_s < 0:
            raise ValueError(f"time must be >= 0, got {t_s}")
        knots = self._knots
        i = bisect_right(self._times, t_s)
        if i >= len(knots):
            return knots[-1][1]
        if i == 0:
            return knots[0][1]
        (t0, p0), (t1, p1) = knots[i - 1], knots[i]
        if t1 == t0:
            return p1
        f = (t_s - t0) / (t1 - t0)
        return (p0[0] + f * (p1[0] - p0[0]), p0[1] + f * (p1[1] - p0[1]), p0[2] + f * (p1[2] - p0[2]))


def position_at(traj: Trajectory, t_s: float) -> Vec3:
    return traj.position_at(t_s)


def _hover(name: str, holds: Sequence[Vec3], hold_s: float, speed_mps: float) -> Trajectory:
    return Trajectory(name, "hover_sequence", tuple(Waypoint(p, hold_s) for p in holds), speed_mps)


def bundled_scenarios(hover_dwell_s: float = 10.0) -> dict[str, Trajectory]:
    """The reference trajectories, in local metres with the gNB mast at the origin.

    ``fig3_hover`` holds at the named positions (15 m and 20 m at 5 m
    altitude, 30 m and 50 m at 10 m) and then climbs to 15 m and 20 m over
    the 50 m point; the climb positions are an extrapolation.
    """
    return {
        "fig3_hover": _hover(
            "fig3_hover",
            [(15, 0, 5), (20, 0, 5), (30, 0, 10), (50, 0, 10), (50, 0, 15), (50, 0, 20)],
            hover_dwell_s,
            speed_mps=5.0,
        ),
        "fig4_flythrough": Trajectory(
            "fig4_flythrough",
            "constant_speed_path",
            (Waypoint((0, 0, 20)), Waypoint((300, 0, 20))),
            speed_mps=10.0,
        ),
        "ground_static": Trajectory("ground_static", "static", (Waypoint((20, 0, 1)),)),
    }
