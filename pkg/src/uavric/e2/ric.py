"""Near-RT RIC: E2 termination, subscription management and xApp delivery."""

from __future__ import annotations

import enum
import itertools
import logging
import queue
import socket
import threading
from dataclasses import dataclass
from typing import Optional

from . import codec
from .messages import (
    ERR_PROTOCOL_VIOLATION,
    ERR_SEQUENCE,
    ERR_UNKNOWN_SUBSCRIPTION,
    E2Message,
    ErrorIndication,
    Indication,
    SetupRequest,
    SetupResponse,
    SubscriptionDelete,
    SubscriptionRequest,
    SubscriptionResponse,
)
from .store import MetricStore
from .transport import ByteStream, SocketStream, TransportError

log = logging.getLogger(__name__)

END_OF_STREAM = None


class ConnState(enum.Enum):
    AWAIT_SETUP = "await_setup"
    ESTABLISHED = "established"
    CLOSED = "closed"


class SubStatus(enum.Enum):
    PENDING = "pending"
    ACTIVE = "active"
    REJECTED = "rejected"
    DELETED = "deleted"


class SubscriptionRejected(Exception):
    def __init__(self, reason_code: int, message: str):
        self.reason_code = reason_code
        super().__init__(message)


class ProtocolViolation(Exception):
    pass


@dataclass
class SubscriptionState:
    sub_id: int
    owner: int
    function_id: int
    report_period_ms: int
    status: SubStatus = SubStatus.PENDING
    last_seq: int = 0
    reason_code: int = 0


class E2Connection:
    """RIC side of one E2 link, handled sequentially on its own thread.

    Inbound messages drive ``AWAIT_SETUP -> ESTABLISHED -> CLOSED``; any
    message other than SetupRequest before setup, or a second setup, is a
    protocol violation and closes the link after an ErrorIndication.
    """

    def __init__(self, ric: "NearRtRic", stream: ByteStream, conn_id: int):
        self.ric = ric
        self.stream = stream
        self.conn_id = conn_id
        self.state = ConnState.AWAIT_SETUP
        self.node_id: Optional[int] = None
        self.functions: dict[int, str] = {}
        self.subs: dict[int, SubscriptionState] = {}
        self.error: Optional[BaseException] = None
        self.messages_in = 0
        self.messages_out = 0
        self._send_lock = threading.Lock()
        self._established = threading.Event()
        self._closed = threading.Event()
        self._sub_events: dict[int, threading.Event] = {}
        self.thread = threading.Thread(target=self._serve, name=f"e2-conn-{conn_id}", daemon=True)

    def send(self, msg: E2Message) -> None:
        frame = codec.encode(msg)
        with self._send_lock:
            self.stream.send(frame)
            self.messages_out += 1

    def wait_established(self, timeout: Optional[float] = None) -> bool:
        return self._established.wait(timeout)

    def wait_closed(self, timeout: Optional[float] = None) -> bool:
        return self._closed.wait(timeout)

    def _serve(self) -> None:
        try:
            while self.state is not ConnState.CLOSED:
                payload = codec.read_frame(self.stream.recv_exact)
                if payload is None:
                    break
                self.messages_in += 1
                self.handle(codec.decode_payload(payload))
        except ProtocolViolation as exc:
            self.error = exc
            self._send_error(ERR_PROTOCOL_VIOLATION, str(exc))
        except (codec.DecodeError, TransportError) as exc:
            self.error = exc
            log.warning("E2 connection %d failed: %s", self.conn_id, exc)
        finally:
            self._close()

    def _send_error(self, code: int, detail: str) -> None:
        try:
            self.send(ErrorIndication(code, detail))
        except (TransportError, codec.EncodeError):
            pass

    def handle(self, msg: E2Message) -> None:
        if self.state is ConnState.AWAIT_SETUP:
            if not isinstance(msg, SetupRequest):
                raise ProtocolViolation(f"{type(msg).__name__} received before SetupRequest")
            self.node_id = msg.node_id
            self.functions = {f.function_id: f.name for f in msg.functions}
            self.state = ConnState.ESTABLISHED
            self.send(SetupResponse(tuple(sorted(self.functions))))
            self._established.set()
            self.ric._notify()
            return
        if isinstance(msg, SubscriptionResponse):
            self._on_sub_response(msg)
        elif isinstance(msg, Indication):
            self._on_indication(msg)
        elif isinstance(msg, ErrorIndication):
            log.warning("E2 node %s reported error %d: %s", self.node_id, msg.code, msg.detail)
        elif isinstance(msg, SubscriptionDelete):
            sub = self.subs.get(msg.sub_id)
            if sub is not None:
                self._finish(sub, SubStatus.DELETED)
        else:
            raise ProtocolViolation(f"unexpected {type(msg).__name__} on an established link")

    def _on_sub_response(self, msg: SubscriptionResponse) -> None:
        sub = self.subs.get(msg.sub_id)
        if sub is None or sub.status is not SubStatus.PENDING:
            self._send_error(ERR_UNKNOWN_SUBSCRIPTION, f"no pending subscription {msg.sub_id}")
            return
        sub.reason_code = msg.reason_code
        if msg.accepted:
            sub.status = SubStatus.ACTIVE
        else:
            self._finish(sub, SubStatus.REJECTED)
        self._sub_events[msg.sub_id].set()

    def _on_indication(self, msg: Indication) -> None:
        sub = self.subs.get(msg.sub_id)
        if sub is None or sub.status is not SubStatus.ACTIVE:
            self._send_error(ERR_UNKNOWN_SUBSCRIPTION, f"indication for inactive subscription {msg.sub_id}")
            return
        if msg.seq <= sub.last_seq:
            self._send_error(ERR_SEQUENCE, f"sub {msg.sub_id}: seq {msg.seq} after {sub.last_seq}")
            return
        sub.last_seq = msg.seq
        # store before delivery so the database is never behind any xApp
        self.ric.store.append(msg.sub_id, msg.records)
        self.ric._deliver(sub.owner, msg)

    def subscribe(self, sub: SubscriptionState) -> threading.Event:
        if self.state is not ConnState.ESTABLISHED:
            raise ProtocolViolation("cannot subscribe before E2 setup completes")
        ev = threading.Event()
        self._sub_events[sub.sub_id] = ev
        self.subs[sub.sub_id] = sub
        self.send(SubscriptionRequest(sub.sub_id, sub.function_id, sub.report_period_ms))
        return ev

    def unsubscribe(self, sub_id: int) -> None:
        sub = self.subs.get(sub_id)
        if sub is None or sub.status in (SubStatus.DELETED, SubStatus.REJECTED):
            return
        self._finish(sub, SubStatus.DELETED)
        if self.state is ConnState.ESTABLISHED:
            try:
                self.send(SubscriptionDelete(sub_id))
            except TransportError:
                pass

    def _finish(self, sub: SubscriptionState, status: SubStatus) -> None:
        was_active = sub.status is SubStatus.ACTIVE
        sub.status = status
        if was_active:
            self.ric._end_stream(sub.owner, sub.sub_id)

    def _close(self) -> None:
        self.state = ConnState.CLOSED
        for sub in self.subs.values():
            if sub.status in (SubStatus.ACTIVE, SubStatus.PENDING):
                self._finish(sub, SubStatus.DELETED)
        for ev in self._sub_events.values():
            ev.set()
        self._established.set()
        self.stream.close()
        self._closed.set()


@dataclass
class XappHandle:
    xapp_id: int
    name: str
    inbox: "queue.Queue"


class NearRtRic:
    """Hosts E2 connections and xApps over a shared metric store.

    xApp subscriptions map 1:1 onto E2 subscriptions. Each xApp has one
    bounded FIFO inbox; a full inbox blocks the connection thread (and
    through the transport, the emitting node) rather than dropping.
    """

    def __init__(self, store: MetricStore, inbox_capacity: int = 64):
        self.store = store
        self.inbox_capacity = inbox_capacity
        self.connections: list[E2Connection] = []
        self.xapps: dict[int, XappHandle] = {}
        self.subscriptions: dict[int, SubscriptionState] = {}
        self._sub_conn: dict[int, E2Connection] = {}
        self._xapp_ids = itertools.count(1)
        self._sub_ids = itertools.count(1)
        self._conn_ids = itertools.count(1)
        self._lock = threading.Lock()
        self._changed = threading.Condition(self._lock)
        self._listener: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None

    # E2 side

    def attach(self, stream: ByteStream) -> E2Connection:
        with self._lock:
            conn = E2Connection(self, stream, next(self._conn_ids))
            self.connections.append(conn)
        conn.thread.start()
        return conn

    def listen(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        """Accept E2 nodes over TCP on a background thread; returns the bound address."""
        srv = socket.create_server((host, port))
        self._listener = srv
        self._accept_thread = threading.Thread(target=self._accept_loop, name="e2-accept", daemon=True)
        self._accept_thread.start()
        return srv.getsockname()[:2]

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while True:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self.attach(SocketStream(sock))

    def wait_for_node(self, function_id: int, timeout: float = 10.0) -> E2Connection:
        """Block until some established connection advertises ``function_id``."""
        with self._changed:
            if not self._changed.wait_for(lambda: self._find_conn_locked(function_id) is not None, timeout):
                raise TimeoutError(f"no E2 node advertised function {function_id} within {timeout} s")
            return self._find_conn_locked(function_id)

    def _find_conn(self, function_id: int) -> Optional[E2Connection]:
        with self._lock:
            return self._find_conn_locked(function_id)

    def _find_conn_locked(self, function_id: int) -> Optional[E2Connection]:
        for conn in self.connections:
            if conn.state is ConnState.ESTABLISHED and function_id in conn.functions:
                return conn
        return None

    def _notify(self) -> None:
        with self._changed:
            self._changed.notify_all()

    # xApp side (the internal interface)

    def register_xapp(self, name: str) -> int:
        with self._lock:
            xapp_id = next(self._xapp_ids)
            self.xapps[xapp_id] = XappHandle(xapp_id, name, queue.Queue(self.inbox_capacity))
        return xapp_id

    def inbox(self, xapp_id: int) -> "queue.Queue":
        return self.xapps[xapp_id].inbox

    def xapp_subscribe(self, xapp_id: int, function_id: int, report_period_ms: int, timeout: float = 10.0) -> int:
        """Subscribe an xApp to a RAN function and wait for the node's answer.

        Raises SubscriptionRejected if no node advertises the function (no
        E2 traffic is generated) or the node refuses the subscription.
        """
        if xapp_id not in self.xapps:
            raise KeyError(f"unknown xApp {xapp_id}")
        conn = self._find_conn(function_id)
        if conn is None:
            raise SubscriptionRejected(1, f"no connected E2 node advertises function {function_id}")
        with self._lock:
            sub = SubscriptionState(next(self._sub_ids), xapp_id, function_id, report_period_ms)
            self.subscriptions[sub.sub_id] = sub
            self._sub_conn[sub.sub_id] = conn
        ev = conn.subscribe(sub)
        if not ev.wait(timeout):
            raise TimeoutError(f"subscription {sub.sub_id} not answered within {timeout} s")
        if sub.status is not SubStatus.ACTIVE:
            raise SubscriptionRejected(sub.reason_code, f"subscription {sub.sub_id} rejected (reason {sub.reason_code})")
        return sub.sub_id

    def xapp_unsubscribe(self, sub_id: int) -> None:
        conn = self._sub_conn.get(sub_id)
        if conn is not None:
            conn.unsubscribe(sub_id)

    def _deliver(self, xapp_id: int, indication: Indication) -> None:
        self.xapps[xapp_id].inbox.put(indication)

    def _end_stream(self, xapp_id: int, sub_id: int) -> None:
        self.xapps[xapp_id].inbox.put(("end", sub_id))

    def shutdown(self) -> None:
        if self._listener is not None:
            self._listener.close()
            self._listener = None
        for conn in list(self.connections):
            conn.stream.close()
            conn.thread.join(timeout=5)
        for handle in self.xapps.values():
            handle.inbox.put(END_OF_STREAM)

