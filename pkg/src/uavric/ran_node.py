"""Emulated gNB: CBR traffic, RLC queues, PF scheduling, KPM windows and the E2 agent."""

from __future__ import annotations

import hashlib
import logging
import math
import queue
import random
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import sched as mac
from .channel import ChannelModel, ChannelState, LinkBudget
from .e2 import codec
from .e2.messages import (
    ERR_PROTOCOL_VIOLATION,
    KPM_FUNCTION_ID,
    REASON_BAD_PERIOD,
    REASON_DUPLICATE_SUB_ID,
    REASON_OK,
    REASON_UNKNOWN_FUNCTION,
    E2Message,
    ErrorIndication,
    Indication,
    KpmRecord,
    RanFunction,
    SetupRequest,
    SetupResponse,
    SubscriptionDelete,
    SubscriptionRequest,
    SubscriptionResponse,
)
from .e2.transport import ByteStream, TransportError
from .mobility import Trajectory
from .phy_frame import TddConfig, derive_tdd_pattern, dl_data_symbols

log = logging.getLogger(__name__)

DEFAULT_SDU_BITS = 12_000


def rng_stream(seed: int, subsystem: str) -> random.Random:
    """Independent, reproducible RNG stream for one stochastic subsystem."""
    digest = hashlib.sha256(f"{seed}:{subsystem}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class Sdu:
    enqueue_time_s: float
    remaining_bits: int


@dataclass
class UeContext:
    """Per-UE radio and RLC state.

    ``rlc_buffer_bits`` bounds the transmit queue (drop-tail on whole SDUs);
    None means unbounded. Traffic flows only inside
    ``[traffic_start_s, traffic_stop_s)``.
    """

    ue_id: int
    attach: str
    offered_load_bps: float
    trajectory: Trajectory
    sdu_size_bits: int = DEFAULT_SDU_BITS
    rlc_buffer_bits: Optional[int] = None
    traffic_start_s: float = 0.0
    traffic_stop_s: Optional[float] = None
    sched: mac.SchedUeState = field(default=None)  # type: ignore[assignment]
    rlc_queue: deque = field(default_factory=deque)
    queued_bits: int = 0
    credit_bits: float = 0.0
    enqueued_bits: int = 0
    served_bits: int = 0
    dropped_bits: int = 0
    rb_total: int = 0
    latency_sum_s: float = 0.0
    latency_count: int = 0
    los: bool = True
    shadowing_db: float = 0.0
    channel: Optional[ChannelState] = None

    def __post_init__(self):
        if self.offered_load_bps < 0:
            raise ValueError(f"UE {self.ue_id}: offered_load_bps must be >= 0")
        if self.sdu_size_bits <= 0:
            raise ValueError(f"UE {self.ue_id}: sdu_size_bits must be > 0")
        if self.sched is None:
            self.sched = mac.SchedUeState(self.ue_id)

    def traffic_active(self, now_s: float) -> bool:
        if now_s < self.traffic_start_s:
            return False
        return self.traffic_stop_s is None or now_s < self.traffic_stop_s


def enqueue_traffic(ue: UeContext, slot_interval_s: float, now_s: float) -> int:
    """Credit ``offered_load * interval`` bits and enqueue every whole SDU it buys.

    The fractional remainder carries over, so cumulative enqueued bits stay
    within one SDU of the offered load. Returns the number of SDUs created.
    """
    if not ue.traffic_active(now_s) or ue.offered_load_bps == 0:
        return 0
    ue.credit_bits += ue.offered_load_bps * slot_interval_s
    made = 0
    size = ue.sdu_size_bits
    while ue.credit_bits >= size:
        ue.credit_bits -= size
        made += 1
        if ue.rlc_buffer_bits is not None and ue.queued_bits + size > ue.rlc_buffer_bits:
            ue.dropped_bits += size
            continue
        ue.rlc_queue.append(Sdu(now_s, size))
        ue.queued_bits += size
        ue.enqueued_bits += size
    ue.sched.backlog_bits = ue.queued_bits
    return made


def drain_queue(ue: UeContext, budget_bits: int, completion_time_s: float) -> tuple[int, list[float]]:
    """Serve up to ``budget_bits`` front-first; return (served bits, latencies of completed SDUs)."""
    served = 0
    latencies: list[float] = []
    q = ue.rlc_queue
    while q and served < budget_bits:
        head = q[0]
        take = min(head.remaining_bits, budget_bits - served)
        head.remaining_bits -= take
        served += take
        if head.remaining_bits == 0:
            q.popleft()
            latencies.append(completion_time_s - head.enqueue_time_s)
    ue.queued_bits -= served
    ue.served_bits += served
    ue.sched.backlog_bits = ue.queued_bits
    return served, latencies


@dataclass
class SlotResult:
    served_bits: dict[int, int]
    rb_count: dict[int, int]
    latencies: dict[int, list[float]]


@dataclass
class KpmWindow:
    """Open reporting window; snapshots cumulative UE counters at its start."""

    sub_id: int
    period_slots: int
    next_boundary: int
    start_slot: int
    seq: int = 0
    snapshot: dict[int, tuple[int, int, float, int]] = field(default_factory=dict)


class RanNode:
    """The E2 node's simulation core. Owns the slot clock.

    Nothing outside the slot loop touches node state: the E2 agent posts
    subscription changes to ``control`` and the loop applies them at the
    next slot boundary.
    """

    def __init__(
        self,
        tdd: TddConfig,
        sched_cfg: mac.SchedConfig,
        channel: ChannelModel,
        budget: LinkBudget,
        gnb_pos: Sequence[float],
        ues: Sequence[UeContext],
        seed: int = 0,
    ):
        self.tdd = tdd
        self.pattern = derive_tdd_pattern(tdd)
        self.sched_cfg = sched_cfg
        self.channel_model = channel
        self.budget = budget
        self.gnb_pos = tuple(float(c) for c in gnb_pos)
        self.ues = sorted(ues, key=lambda u: u.ue_id)
        if len({u.ue_id for u in self.ues}) != len(self.ues):
            raise ValueError("duplicate ue_id")
        self.slot_s = tdd.slot_ms / 1000.0
        self.slot_ms = tdd.slot_ms
        self.data_symbols = [dl_data_symbols(s, sched_cfg.overhead_symbols) for s in self.pattern]
        los_slots = channel.los_period_ms / self.slot_ms
        self.los_period_slots = max(1, int(round(los_slots)))
        self.rng_los = rng_stream(seed, "los")
        self.rng_shadowing = rng_stream(seed, "shadowing")
        self.slot_index = 0
        for ue in self.ues:
            ue.sched.ewma_rate_bps = sched_cfg.ewma_floor_bps
        self.windows: dict[int, KpmWindow] = {}
        self.control: "queue.Queue[tuple]" = queue.Queue()
        self.emit: Callable[[Indication], None] = lambda ind: None

    @property
    def now_s(self) -> float:
        return self.slot_index * self.slot_s

    def period_slots(self, period_ms: float) -> int:
        slots = period_ms / self.slot_ms
        if slots < 1 or abs(slots - round(slots)) > 1e-9:
            raise ValueError(f"report period {period_ms} ms is not a whole number of {self.slot_ms} ms slots")
        return int(round(slots))

    # channel

    def _refresh_los(self, t_s: float) -> None:
        cm = self.channel_model
        for ue in self.ues:
            pos = ue.trajectory.position_at(t_s)
            _, _, elevation = _elevation(pos, self.gnb_pos)
            ue.los = self.rng_los.random() < cm.los_prob(elevation)
            ue.shadowing_db = self.rng_shadowing.gauss(0.0, cm.shadowing_sigma_db) if cm.shadowing else 0.0

    def channel_states(self, t_s: float) -> dict[int, ChannelState]:
        states = {}
        for ue in self.ues:
            pos = ue.trajectory.position_at(t_s)
            ue.channel = self.channel_model.evaluate(pos, self.gnb_pos, self.budget, ue.los, ue.shadowing_db)
            ue.sched.cqi = ue.channel.cqi
            states[ue.ue_id] = ue.channel
        return states

    # slot processing

    def step_slot(self, slot_pos: int, channel_states: Optional[dict[int, ChannelState]], now_s: float) -> SlotResult:
        """Run one slot at pattern position ``slot_pos`` starting at ``now_s``.

        Traffic for the slot is enqueued at its start; SDUs whose last bit
        goes out in this slot complete at ``now_s + slot_s``.
        """
        for ue in self.ues:
            enqueue_traffic(ue, self.slot_s, now_s)
        result = SlotResult({}, {}, {})
        symbols = self.data_symbols[slot_pos]
        if symbols == 0 or channel_states is None:
            for ue in self.ues:
                result.served_bits[ue.ue_id] = 0
                result.rb_count[ue.ue_id] = 0
                result.latencies[ue.ue_id] = []
            return result
        eff = {ue.ue_id: self.channel_model.efficiency(channel_states[ue.ue_id].cqi) for ue in self.ues}
        for ue in self.ues:
            ue.sched.cqi = channel_states[ue.ue_id].cqi
        alloc = mac.pf_schedule([u.sched for u in self.ues], symbols, eff, self.sched_cfg, self.slot_s)
        done_at = now_s + self.slot_s
        cfg = self.sched_cfg
        for ue in self.ues:
            served, lats = drain_queue(ue, alloc.tb_bits[ue.ue_id], done_at)
            rbs = alloc.rbs[ue.ue_id]
            ue.rb_total += rbs
            ue.latency_sum_s += sum(lats)
            ue.latency_count += len(lats)
            ue.sched.ewma_rate_bps = mac.update_ewma(
                ue.sched.ewma_rate_bps, served, cfg.ewma_window_slots, self.slot_s, cfg.ewma_floor_bps
            )
            result.served_bits[ue.ue_id] = served
            result.rb_count[ue.ue_id] = rbs
            result.latencies[ue.ue_id] = lats
        return result

    def advance(self) -> SlotResult:
        """Process the next slot: control inbox, LoS refresh, scheduling, report windows."""
        self._apply_control()
        k = self.slot_index
        now = self.now_s
        if k % self.los_period_slots == 0:
            self._refresh_los(now)
        pos = k % len(self.pattern)
        states = self.channel_states(now) if self.data_symbols[pos] else None
        result = self.step_slot(pos, states, now)
        self.slot_index += 1
        for sub_id in sorted(self.windows):
            win = self.windows[sub_id]
            if self.slot_index == win.next_boundary:
                records = self.collect_kpm(win)
                win.seq += 1
                self.emit(Indication(sub_id, win.seq, tuple(records)))
        return result

    def run(self, duration_s: float) -> None:
        n_slots = int(round(duration_s / self.slot_s))
        for _ in range(n_slots):
            self.advance()

    # KPM

    def open_window(self, sub_id: int, period_ms: float) -> KpmWindow:
        p = self.period_slots(period_ms)
        k = self.slot_index
        win = KpmWindow(sub_id, p, (k // p + 1) * p, k)
        self._snapshot(win)
        self.windows[sub_id] = win
        return win

    def close_window(self, sub_id: int) -> None:
        self.windows.pop(sub_id, None)

    def _snapshot(self, win: KpmWindow) -> None:
        win.snapshot = {
            ue.ue_id: (ue.served_bits, ue.rb_total, ue.latency_sum_s, ue.latency_count) for ue in self.ues
        }

    def collect_kpm(self, win: KpmWindow) -> list[KpmRecord]:
        """One record per UE aggregating the window that ends at the current slot boundary."""
        end_slot = self.slot_index
        window_s = (end_slot - win.start_slot) * self.slot_s
        t_end = self.now_s
        records = []
        for ue in self.ues:
            served0, rb0, lat0, n0 = win.snapshot.get(ue.ue_id, (0, 0, 0.0, 0))
            served = ue.served_bits - served0
            n_lat = ue.latency_count - n0
            latency_us = round((ue.latency_sum_s - lat0) / n_lat * 1e6) if n_lat else None
            pos = ue.trajectory.position_at(t_end)
            cqi = ue.channel.cqi if ue.channel is not None else 1
            records.append(KpmRecord(
                t_ms=int(round(t_end * 1000)),
                ue_id=ue.ue_id,
                dl_thp_kbps=served / window_s / 1e3 if window_s > 0 else 0.0,
                rb_count=ue.rb_total - rb0,
                sdu_latency_us=latency_us,
                pos_cm=tuple(int(round(c * 100)) for c in pos),
                cqi=cqi,
                mcs=mac.select_mcs(cqi),
            ))
        win.start_slot = end_slot
        win.next_boundary = end_slot + win.period_slots
        self._snapshot(win)
        return records

    def _apply_control(self) -> None:
        while True:
            try:
                cmd = self.control.get_nowait()
            except queue.Empty:
                return
            if cmd[0] == "add":
                self.open_window(cmd[1], cmd[2])
            elif cmd[0] == "delete":
                self.close_window(cmd[1])


def _elevation(pos, gnb_pos) -> tuple[float, float, float]:
    dx, dy, dz = pos[0] - gnb_pos[0], pos[1] - gnb_pos[1], pos[2] - gnb_pos[2]
    horizontal = math.hypot(dx, dy)
    return math.hypot(horizontal, dz), horizontal, math.degrees(math.atan2(dz, horizontal))


class E2AgentError(Exception):
    pass


class E2Agent:
    """E2 node side of the link.

    Sends SetupRequest advertising the node's RAN functions, then answers
    subscription requests from a reader thread. Accepted subscriptions are
    handed to the slot loop through ``node.control``; indications are sent
    from the loop thread via ``node.emit``.
    """

    def __init__(
        self,
        node: RanNode,
        stream: ByteStream,
        node_id: int = 1,
        functions: Sequence[RanFunction] = (RanFunction(KPM_FUNCTION_ID, "ORAN-E2SM-KPM"),),
    ):
        self.node = node
        self.stream = stream
        self.node_id = node_id
        self.functions = tuple(functions)
        self.established = False
        self.closed = False
        self.error: Optional[BaseException] = None
        self.sent = 0
        self.indications_sent = 0
        self._subs: dict[int, int] = {}
        self._send_lock = threading.Lock()
        self._setup_done = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, name=f"e2-agent-{node_id}", daemon=True)
        node.emit = self.emit

    def send(self, msg: E2Message) -> None:
        frame = codec.encode(msg)
        with self._send_lock:
            self.stream.send(frame)
            self.sent += 1

    def setup(self, timeout: float = 10.0) -> None:
        self._reader.start()
        self.send(SetupRequest(self.node_id, self.functions))
        if not self._setup_done.wait(timeout) or not self.established:
            raise E2AgentError(f"E2 setup failed: {self.error or 'timed out'}")

    def emit(self, indication: Indication) -> None:
        self.send(indication)
        self.indications_sent += 1

    def _read_loop(self) -> None:
        try:
            while True:
                payload = codec.read_frame(self.stream.recv_exact)
                if payload is None:
                    break
                self.handle(codec.decode_payload(payload))
        except (codec.DecodeError, TransportError, E2AgentError) as exc:
            self.error = exc
            log.warning("E2 agent %d: %s", self.node_id, exc)
        finally:
            self.closed = True
            self._setup_done.set()

    def handle(self, msg: E2Message) -> None:
        if not self.established:
            if isinstance(msg, SetupResponse):
                self.established = True
                self._setup_done.set()
                return
            if isinstance(msg, ErrorIndication):
                raise E2AgentError(f"setup refused: {msg.detail}")
            self._violation(f"{type(msg).__name__} received before setup completed")
        if isinstance(msg, SubscriptionRequest):
            self.send(self._admit(msg))
        elif isinstance(msg, SubscriptionDelete):
            if self._subs.pop(msg.sub_id, None) is not None:
                self.node.control.put(("delete", msg.sub_id))
        elif isinstance(msg, ErrorIndication):
            log.warning("RIC reported error %d: %s", msg.code, msg.detail)
        else:
            self.send(ErrorIndication(ERR_PROTOCOL_VIOLATION, f"unexpected {type(msg).__name__}"))

    def _violation(self, detail: str) -> None:
        try:
            self.send(ErrorIndication(ERR_PROTOCOL_VIOLATION, detail))
        except TransportError:
            pass
        self.stream.close()
        raise E2AgentError(detail)

    def _admit(self, req: SubscriptionRequest) -> SubscriptionResponse:
        if req.function_id not in {f.function_id for f in self.functions}:
            return SubscriptionResponse(req.sub_id, False, REASON_UNKNOWN_FUNCTION)
        if req.sub_id in self._subs:
            return SubscriptionResponse(req.sub_id, False, REASON_DUPLICATE_SUB_ID)
        try:
            self.node.period_slots(req.report_period_ms)
        except ValueError:
            return SubscriptionResponse(req.sub_id, False, REASON_BAD_PERIOD)
        self._subs[req.sub_id] = req.report_period_ms
        # queued before the response goes out, so the loop sees it first
        self.node.control.put(("add", req.sub_id, req.report_period_ms))
        return SubscriptionResponse(req.sub_id, True, REASON_OK)

    def close(self, timeout: float = 10.0) -> None:
        """Half-close the link and wait for the RIC to finish reading it."""
        self.stream.close_write()
        self._reader.join(timeout)
        self.stream.close()
