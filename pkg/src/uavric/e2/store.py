"""SQLite-backed KPM metric store."""

from __future__ import annotations

import csv
import sqlite3
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from .messages import KpmRecord

CSV_HEADER = (
    "t_ms", "ue_id", "dl_thp_kbps", "rb_count", "sdu_latency_us",
    "pos_x_cm", "pos_y_cm", "pos_z_cm", "cqi", "mcs", "sub_id",
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS kpm (
    id INTEGER PRIMARY KEY,
    t_ms INTEGER NOT NULL,
    ue_id INTEGER NOT NULL,
    dl_thp_kbps REAL NOT NULL,
    rb_count INTEGER NOT NULL,
    sdu_latency_us INTEGER,
    pos_x_cm INTEGER NOT NULL,
    pos_y_cm INTEGER NOT NULL,
    pos_z_cm INTEGER NOT NULL,
    cqi INTEGER NOT NULL,
    mcs INTEGER NOT NULL,
    sub_id INTEGER NOT NULL,
    ingest_time REAL NOT NULL
)
"""


class MetricStore:
    """Append-only ``kpm`` table in a single SQLite file.

    ``clock`` supplies the ingest timestamp for each appended batch; it
    defaults to wall-clock time. Pass a deterministic clock when the file
    must be byte-reproducible. ``record_clock`` instead derives the stamp
    from the batch itself (e.g. from the records' simulation time).
    """

    def __init__(
        self,
        path: Union[str, Path] = ":memory:",
        clock: Optional[Callable[[], float]] = None,
        record_clock: Optional[Callable[[list[KpmRecord]], float]] = None,
    ):
        self.path = str(path)
        self.clock = clock or time.time
        self.record_clock = record_clock
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
        self._conn.execute(_SCHEMA)

    def append(self, sub_id: int, records: Iterable[KpmRecord], ingest_time: Optional[float] = None) -> int:
        records = list(records)
        rows = [
            (r.t_ms, r.ue_id, r.dl_thp_kbps, r.rb_count, r.sdu_latency_us, *r.pos_cm, r.cqi, r.mcs, sub_id)
            for r in records
        ]
        with self._lock:
            if ingest_time is not None:
                stamp = ingest_time
            elif self.record_clock is not None:
                stamp = self.record_clock(records)
            else:
                stamp = self.clock()
            # one transaction per batch so readers never see half an indication
            with self._conn:
                self._conn.execute("BEGIN")
                self._conn.executemany(
                    "INSERT INTO kpm (t_ms, ue_id, dl_thp_kbps, rb_count, sdu_latency_us, pos_x_cm, "
                    "pos_y_cm, pos_z_cm, cqi, mcs, sub_id, ingest_time) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    [row + (stamp,) for row in rows],
                )
        return len(rows)

    def _select(self, where: str, params: tuple) -> list[tuple]:
        with self._lock:
            return self._conn.execute(
                "SELECT t_ms, ue_id, dl_thp_kbps, rb_count, sdu_latency_us, pos_x_cm, pos_y_cm, pos_z_cm, "
                f"cqi, mcs, sub_id FROM kpm {where} ORDER BY t_ms, id",
                params,
            ).fetchall()

    def query(
        self,
        ue_id: Optional[int] = None,
        t_from_ms: Optional[int] = None,
        t_to_ms: Optional[int] = None,
    ) -> list[KpmRecord]:
        """Records matching the filters, ordered by t_ms; the range is [t_from, t_to)."""
        clauses, params = [], []
        if ue_id is not None:
            clauses.append("ue_id = ?")
            params.append(ue_id)
        if t_from_ms is not None:
            clauses.append("t_ms >= ?")
            params.append(t_from_ms)
        if t_to_ms is not None:
            clauses.append("t_ms < ?")
            params.append(t_to_ms)
        where = ("WHERE " + " AND ".join(clauses)) if clauses else ""
        return [_row_to_record(row) for row in self._select(where, tuple(params))]

    def count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM kpm").fetchone()[0]

    def dump_csv(self, out: Union[str, Path]) -> int:
        rows = self._select("", ())
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                row = list(row)
                row[2] = repr(row[2])
                row[4] = "" if row[4] is None else row[4]
                writer.writerow(row)
        return len(rows)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _row_to_record(row: tuple) -> KpmRecord:
    t_ms, ue_id, thp, rbs, lat, x, y, z, cqi, mcs, _sub = row
    return KpmRecord(t_ms, ue_id, thp, rbs, lat, (x, y, z), cqi, mcs)


def query_metrics(
    store: MetricStore,
    ue_id: Optional[int] = None,
    t_from_ms: Optional[int] = None,
    t_to_ms: Optional[int] = None,
) -> list[KpmRecord]:
    return store.query(ue_id, t_from_ms, t_to_ms)


def dump(store_path: Union[str, Path], out_csv: Union[str, Path]) -> int:
    path = Path(store_path)
    if not path.is_file():
        raise FileNotFoundError(f"metric store not found: {path}")
    with MetricStore(path) as store:
        return store.dump_csv(out_csv)
