"""KPM monitoring xApp: indication stream to distance-annotated series."""

from __future__ import annotations

import csv
import logging
import math
import queue
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .e2.messages import Indication, KpmRecord

log = logging.getLogger(__name__)

SERIES_HEADER = ("t_ms", "ue_id", "horizontal_m", "altitude_m", "dl_thp_mbps", "rb_count", "sdu_latency_ms")


@dataclass(frozen=True)
class SeriesPoint:
    t_ms: int
    ue_id: int
    horizontal_m: float
    altitude_m: float
    dl_thp_mbps: float
    rb_count: int
    sdu_latency_ms: Optional[float]


@dataclass(frozen=True)
class BinnedMean:
    ue_id: int
    bin_index: int
    lo_m: float
    hi_m: float
    n: int
    dl_thp_mbps: float
    rb_count: float
    sdu_latency_ms: Optional[float]

    @property
    def center_m(self) -> float:
        return (self.lo_m + self.hi_m) / 2


def to_point(record: KpmRecord, gnb_pos: Sequence[float]) -> SeriesPoint:
    x, y, z = (c / 100.0 for c in record.pos_cm)
    horizontal = math.hypot(x - gnb_pos[0], y - gnb_pos[1])
    latency = None if record.sdu_latency_us is None else record.sdu_latency_us / 1000.0
    return SeriesPoint(record.t_ms, record.ue_id, horizontal, z, record.dl_thp_kbps / 1000.0, record.rb_count, latency)


class KpmMonitor:
    """Accumulates SeriesPoints from the indications of its own subscriptions.

    Duplicate (sub_id, seq) pairs are ignored, as are indications for
    subscriptions it does not own.
    """

    def __init__(self, gnb_pos: Sequence[float] = (0.0, 0.0, 0.0), name: str = "kpm_mon"):
        # horizontal distance is measured to the mast base (x, y only)
        self.gnb_pos = tuple(gnb_pos)
        self.name = name
        self.series: list[SeriesPoint] = []
        self.owned: set[int] = set()
        self.indications = 0
        self.seqs: list[int] = []
        self._seen: set[tuple[int, int]] = set()

    def track(self, sub_id: int) -> None:
        self.owned.add(sub_id)

    def on_indication(self, ind: Indication) -> None:
        if ind.sub_id not in self.owned:
            log.warning("%s: ignoring indication for unknown subscription %d", self.name, ind.sub_id)
            return
        key = (ind.sub_id, ind.seq)
        if key in self._seen:
            return
        self._seen.add(key)
        self.indications += 1
        self.seqs.append(ind.seq)
        self.series.extend(to_point(r, self.gnb_pos) for r in ind.records)


def on_indication(state: KpmMonitor, indication: Indication) -> None:
    state.on_indication(indication)


class XappRunner:
    """Drains an xApp inbox on its own thread until the RIC signals shutdown."""

    def __init__(self, monitor: KpmMonitor, inbox: "queue.Queue"):
        self.monitor = monitor
        self.inbox = inbox
        self.ended: set[int] = set()
        self.thread = threading.Thread(target=self._run, name=f"xapp-{monitor.name}", daemon=True)

    def start(self) -> "XappRunner":
        self.thread.start()
        return self

    def _run(self) -> None:
        while True:
            item = self.inbox.get()
            if item is None:
                return
            if isinstance(item, tuple) and item[0] == "end":
                self.ended.add(item[1])
                continue
            self.monitor.on_indication(item)

    def join(self, timeout: Optional[float] = None) -> None:
        self.thread.join(timeout)


def bin_by_distance(series: Iterable[SeriesPoint], bin_m: float) -> list[BinnedMean]:
    """Mean throughput, RBs and latency per (ue, [k*bin, (k+1)*bin)) bin; empty bins omitted."""
    if not bin_m > 0:
        raise ValueError(f"bin_m must be > 0, got {bin_m}")
    groups: dict[tuple[int, int], list[SeriesPoint]] = defaultdict(list)
    for p in series:
        groups[(p.ue_id, math.floor(p.horizontal_m / bin_m))].append(p)
    out = []
    for (ue, k), pts in sorted(groups.items()):
        lats = [p.sdu_latency_ms for p in pts if p.sdu_latency_ms is not None]
        out.append(BinnedMean(
            ue_id=ue,
            bin_index=k,
            lo_m=k * bin_m,
            hi_m=(k + 1) * bin_m,
            n=len(pts),
            dl_thp_mbps=sum(p.dl_thp_mbps for p in pts) / len(pts),
            rb_count=sum(p.rb_count for p in pts) / len(pts),
            sdu_latency_ms=sum(lats) / len(lats) if lats else None,
        ))
    return out


def export_series(series: Iterable[SeriesPoint], path: Union[str, Path]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_HEADER)
            for p in series:
                w.writerow([
                    p.t_ms, p.ue_id, repr(p.horizontal_m), repr(p.altitude_m), repr(p.dl_thp_mbps),
                    p.rb_count, "" if p.sdu_latency_ms is None else repr(p.sdu_latency_ms),
                ])
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def import_series(path: Union[str, Path]) -> list[SeriesPoint]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read series from {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != SERIES_HEADER:
        raise ValueError(f"{path}: expected header {','.join(SERIES_HEADER)}")
    return [
        SeriesPoint(int(t), int(ue), float(h), float(a), float(thp), int(rb), float(lat) if lat else None)
        for t, ue, h, a, thp, rb, lat in rows[1:]
    ]
