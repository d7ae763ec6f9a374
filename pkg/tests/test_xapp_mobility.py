import logging
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavric.e2.messages import Indication, KpmRecord
from uavric.mobility import Trajectory, Waypoint, bundled_scenarios, position_at
from uavric.xapp_kpm import (
    SERIES_HEADER,
    KpmMonitor,
    SeriesPoint,
    bin_by_distance,
    export_series,
    import_series,
    to_point,
)


def rec(t, ue, pos=(3000, 0, 1000), thp=5000.0, latency=1500):
    return KpmRecord(t, ue, thp, 10, latency, pos, 9, 9)


def pt(h, thp, ue=1):
    return SeriesPoint(0, ue, h, 5.0, thp, 0, None)


def test_unit_conversion():
    p = to_point(rec(100, 1), (0, 0, 0))
    assert (p.horizontal_m, p.altitude_m, p.dl_thp_mbps, p.sdu_latency_ms) == (30.0, 10.0, 5.0, 1.5)


def test_duplicate_seq_is_idempotent():
    m = KpmMonitor()
    m.track(1)
    ind = Indication(1, 1, (rec(100, 1), rec(100, 2)))
    m.on_indication(ind)
    m.on_indication(ind)
    assert len(m.series) == 2 and m.indications == 1


def test_unknown_sub_ignored_with_warning(caplog):
    m = KpmMonitor()
    with caplog.at_level(logging.WARNING):
        m.on_indication(Indication(9, 1, (rec(0, 1),)))
    assert not m.series and "unknown subscription" in caplog.text


def test_point_count():
    m = KpmMonitor()
    m.track(1)
    for s in range(1, 11):
        m.on_indication(Indication(1, s, (rec(s * 100, 1), rec(s * 100, 2))))
    assert len(m.series) == 20


def test_binning():
    bins = bin_by_distance([pt(5, 1.0), pt(15, 2.0)], 10)
    assert [(b.bin_index, b.dl_thp_mbps, b.n) for b in bins] == [(0, 1.0, 1), (1, 2.0, 1)]
    (b,) = bin_by_distance([pt(11, 10.0), pt(12, 14.0)], 10)
    assert (b.dl_thp_mbps, b.n, b.center_m) == (12.0, 2, 15.0)
    edge = bin_by_distance([pt(10.0, 1.0), pt(9.999, 3.0)], 10)
    assert [(b.lo_m, b.hi_m) for b in edge] == [(0, 10), (10, 20)]
    with pytest.raises(ValueError):
        bin_by_distance([], 0)


def test_series_csv_round_trip(tmp_path):
    series = [SeriesPoint(100, 1, 30.000000000000004, 10.0, 5.123456789, 10, 1.5),
              SeriesPoint(200, 2, 0.1, 1.0, 0.0, 0, None)]
    path = tmp_path / "s.csv"
    export_series(series, path)
    assert import_series(path) == series
    assert path.read_text().splitlines()[2].endswith(",")
    export_series([], path)
    assert path.read_text() == ",".join(SERIES_HEADER) + "\n"


def test_series_io_errors_name_the_path(tmp_path):
    bad = tmp_path / "missing" / "s.csv"
    with pytest.raises(OSError, match="missing"):
        export_series([], bad)
    with pytest.raises(OSError, match="missing"):
        import_series(bad)


def test_path_interpolation():
    tr = Trajectory("p", "constant_speed_path", (Waypoint((0, 0, 5)), Waypoint((100, 0, 5))), 10.0)
    assert position_at(tr, 0) == (0, 0, 5)
    assert position_at(tr, 5) == pytest.approx((50, 0, 5))
    assert position_at(tr, 99) == pytest.approx((100, 0, 5))


def test_bundled_trajectories():
    sc = bundled_scenarios()
    hover = sc["fig3_hover"]
    holds = [w.pos for w in hover.waypoints]
    assert (15, 0, 5) in holds and (20, 0, 5) in holds and (30, 0, 10) in holds and (50, 0, 10) in holds
    assert position_at(hover, 5) == (15, 0, 5)
    far = max(position_at(sc["fig4_flythrough"], t)[0] for t in range(0, 40))
    assert far >= 260
    g = sc["ground_static"]
    assert all(position_at(g, t) == (20, 0, 1) for t in (0, 3.3, 1e4))


def test_hover_transits_at_speed():
    hover = bundled_scenarios()["fig3_hover"]
    # 10 s hold then 5 m at 5 m/s: halfway point at t = 10.5
    assert position_at(hover, 10.5) == pytest.approx((17.5, 0, 5))


@pytest.mark.parametrize("kwargs", [
    {"mode": "warp"},
    {"waypoints": ()},
    {"mode": "constant_speed_path", "speed_mps": 0.0},
    {"waypoints": (Waypoint((0, 0, 0), -1.0),)},
])
def test_invalid_trajectories(kwargs):
    base = dict(name="t", mode="hover_sequence", waypoints=(Waypoint((0, 0, 0), 1.0),), speed_mps=5.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        Trajectory(**base)


coords = st.tuples(*[st.floats(-500, 500)] * 3)


@given(st.lists(coords, min_size=2, max_size=5), st.floats(0.5, 30), st.floats(0, 100), st.floats(0.001, 10))
def test_path_speed_bound(points, speed, t, dt):
    tr = Trajectory("p", "constant_speed_path", tuple(Waypoint(p) for p in points), speed)
    a, b = position_at(tr, t), position_at(tr, t + dt)
    assert math.dist(a, b) <= speed * dt * (1 + 1e-9) + 1e-9
