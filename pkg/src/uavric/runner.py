"""Experiment driver: wire node, RIC and xApp over a transport, run, export."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import mean
from typing import Optional, Union

from . import datagen
from .e2.messages import KPM_FUNCTION_ID
from .e2.ric import NearRtRic, SubscriptionRejected
from .e2.store import MetricStore
from .e2.transport import SocketStream, TransportError, parse_address, pipe_pair
from .ran_node import E2Agent, E2AgentError, RanNode, UeContext
from .scenario import Scenario
from .xapp_kpm import KpmMonitor, SeriesPoint, XappRunner, bin_by_distance, export_series

log = logging.getLogger(__name__)

STORE_FILE = "kpm.sqlite"
DUMP_FILE = "kpm.csv"
SERIES_FILE = "series.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.txt"


class RunError(RuntimeError):
    """A run that could not complete; ``category`` is config, protocol or io."""

    def __init__(self, category: str, message: str):
        self.category = category
        super().__init__(message)


@dataclass
class RunArtifacts:
    out_dir: Path
    store: Path
    series: Path
    summary: Path
    manifest: Path
    curves: dict[int, Path] = field(default_factory=dict)
    points: list[SeriesPoint] = field(default_factory=list)
    indications_emitted: int = 0
    indications_delivered: int = 0
    seqs: list[int] = field(default_factory=list)
    sub_id: int = 0


def build_node(scenario: Scenario, seed: Optional[int] = None) -> RanNode:
    ues = [
        UeContext(
            ue_id=u.id,
            attach=u.type,
            offered_load_bps=u.offered_load_bps,
            trajectory=scenario.trajectories[u.trajectory],
            sdu_size_bits=u.sdu_size_bits,
            rlc_buffer_bits=u.rlc_buffer_bits,
            traffic_start_s=u.traffic_start_s,
            traffic_stop_s=u.traffic_stop_s,
        )
        for u in scenario.ues
    ]
    return RanNode(
        scenario.tdd, scenario.sched, scenario.channel, scenario.link_budget,
        scenario.gnb_pos, ues, scenario.seed if seed is None else seed,
    )


def _sim_ingest_clock(records) -> float:
    return max((r.t_ms for r in records), default=0) / 1000.0


def run(
    scenario: Scenario,
    out_dir: Union[str, Path],
    seed: Optional[int] = None,
    transport: Optional[str] = None,
) -> RunArtifacts:
    """Setup, subscribe, run the slot loop, store and export.

    Output files depend only on (scenario, seed): the store's ingest
    timestamps come from simulation time, and nothing transport-specific
    is written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RunError("io", f"cannot create output directory {out}: {exc}") from exc
    kind = transport or scenario.transport.kind
    store_path = out / STORE_FILE
    for stale in (store_path, out / MANIFEST_FILE):
        if stale.exists():
            stale.unlink()

    store = MetricStore(store_path, record_clock=_sim_ingest_clock)
    ric = NearRtRic(store)
    xapp_id = ric.register_xapp("kpm_mon")
    monitor = KpmMonitor(scenario.gnb_pos)
    xapp = XappRunner(monitor, ric.inbox(xapp_id)).start()
    node = build_node(scenario, seed)
    agent = None
    try:
        if kind == "inproc":
            node_end, ric_end = pipe_pair()
            ric.attach(ric_end)
        elif kind == "socket":
            host, port = ric.listen(*parse_address(scenario.transport.address))
            node_end = SocketStream.connect((host, port))
        else:
            raise RunError("config", f"unknown transport {kind!r}")
        agent = E2Agent(node, node_end)
        agent.setup()
        ric.wait_for_node(KPM_FUNCTION_ID)
        sub_id = ric.xapp_subscribe(xapp_id, KPM_FUNCTION_ID, scenario.xapp.report_period_ms)
        monitor.track(sub_id)
        node.run(scenario.duration_s)
        agent.close()
        conn = ric.connections[0]
        conn.wait_closed(30)
        ric.shutdown()
        xapp.join(30)
        if conn.error is not None or agent.error is not None:
            raise RunError("protocol", f"E2 link failed: {conn.error or agent.error}")
    except (TransportError, E2AgentError, SubscriptionRejected, TimeoutError) as exc:
        _abort(ric, agent, store, out)
        raise RunError("protocol", f"run aborted: {exc}") from exc
    except RunError:
        _abort(ric, agent, store, out)
        raise
    if monitor.indications != agent.indications_sent:
        _abort(ric, agent, store, out)
        raise RunError("protocol", f"{agent.indications_sent} indications emitted, {monitor.indications} delivered")

    try:
        artifacts = _export(scenario, out, store, monitor.series)
    except OSError as exc:
        store.close()
        _write_manifest(out, partial=True)
        raise RunError("io", str(exc)) from exc
    store.close()
    artifacts.manifest = _write_manifest(out)
    artifacts.indications_emitted = agent.indications_sent
    artifacts.indications_delivered = monitor.indications
    artifacts.seqs = list(monitor.seqs)
    artifacts.sub_id = sub_id
    return artifacts


def _abort(ric: NearRtRic, agent: Optional[E2Agent], store: MetricStore, out: Path) -> None:
    try:
        if agent is not None:
            agent.stream.close()
        ric.shutdown()
    finally:
        store.close()
        _write_manifest(out, partial=True)


def _export(scenario: Scenario, out: Path, store: MetricStore, series: list[SeriesPoint]) -> RunArtifacts:
    series_path = out / SERIES_FILE
    export_series(series, series_path)
    store.dump_csv(out / DUMP_FILE)
    summary = summarize(series, scenario.xapp.bin_m)
    summary_path = out / SUMMARY_FILE
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    curves = {}
    bins = bin_by_distance(series, scenario.xapp.bin_m)
    for spec in scenario.ues:
        ue_bins = [b for b in bins if b.ue_id == spec.id]
        if not ue_bins:
            continue
        curve = datagen.curve_from_bins(ue_bins, scenario.link_budget.tx_power_dbm, spec.offered_load_bps / 1e6)
        path = out / f"curve_ue{spec.id}.csv"
        datagen.write_curve(curve, path)
        curves[spec.id] = path
    return RunArtifacts(out, out / STORE_FILE, series_path, summary_path, out / MANIFEST_FILE, curves, series)


def _write_manifest(out: Path, partial: bool = False) -> Path:
    lines = [f"status: {'partial' if partial else 'complete'}"]
    for path in sorted(out.iterdir()):
        if path.name == MANIFEST_FILE or not path.is_file():
            continue
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        lines.append(f"{digest}  {path.name}")
    manifest = out / MANIFEST_FILE
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def summarize(series: list[SeriesPoint], bin_m: float = 10.0) -> dict:
    """Per-UE throughput/latency/RB statistics plus the distance-binned table."""
    per_ue: dict[int, list[SeriesPoint]] = defaultdict(list)
    for p in series:
        per_ue[p.ue_id].append(p)
    rows = []
    for ue_id in sorted(per_ue):
        pts = per_ue[ue_id]
        thp = [p.dl_thp_mbps for p in pts]
        lats = [p.sdu_latency_ms for p in pts if p.sdu_latency_ms is not None]
        rows.append({
            "ue_id": ue_id,
            "n_windows": len(pts),
            "mean_thp_mbps": mean(thp),
            "min_thp_mbps": min(thp),
            "max_thp_mbps": max(thp),
            "mean_latency_ms": mean(lats) if lats else None,
            "total_rbs": sum(p.rb_count for p in pts),
        })
    binned = [asdict(b) for b in bin_by_distance(series, bin_m)] if series else []
    return {"per_ue": rows, "binned": binned}


def format_summary(summary: dict) -> str:
    lines = [f"{'ue':>4} {'windows':>8} {'mean Mb/s':>10} {'min':>8} {'max':>8} {'lat ms':>9} {'RBs':>10}"]
    for r in summary["per_ue"]:
        lat = "-" if r["mean_latency_ms"] is None else f"{r['mean_latency_ms']:.2f}"
        lines.append(
            f"{r['ue_id']:>4} {r['n_windows']:>8} {r['mean_thp_mbps']:>10.3f} {r['min_thp_mbps']:>8.3f} "
            f"{r['max_thp_mbps']:>8.3f} {lat:>9} {r['total_rbs']:>10}"
        )
    return "\n".join(lines)
