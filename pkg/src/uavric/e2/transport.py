"""Reliable ordered byte streams: in-process pipes and TCP sockets.

Both expose the same small surface (``send``, ``recv_exact``,
``close_write``, ``close``) so the E2 endpoints never know which one
they are talking over.
"""

from __future__ import annotations

import socket
import threading
from collections import deque
from typing import Optional, Protocol


class ByteStream(Protocol):
    def send(self, data: bytes) -> None: ...

    def recv_exact(self, n: int) -> bytes: ...

    def close_write(self) -> None: ...

    def close(self) -> None: ...


class TransportError(ConnectionError):
    pass


class _Pipe:
    """One direction of an in-process stream with a bounded byte buffer.

    A writer blocks while the buffer is non-empty and the new chunk would
    push it past ``capacity``; nothing is ever dropped.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.chunks: deque[bytes] = deque()
        self.size = 0
        self.eof = False
        self.cond = threading.Condition()

    def write(self, data: bytes) -> None:
        with self.cond:
            if self.eof:
                raise TransportError("write on a closed pipe")
            while self.size and self.size + len(data) > self.capacity:
                self.cond.wait()
                if self.eof:
                    raise TransportError("write on a closed pipe")
            self.chunks.append(bytes(data))
            self.size += len(data)
            self.cond.notify_all()

    def read_exact(self, n: int) -> bytes:
        out = bytearray()
        with self.cond:
            while len(out) < n:
                while not self.chunks and not self.eof:
                    self.cond.wait()
                if not self.chunks:
                    break
                chunk = self.chunks.popleft()
                need = n - len(out)
                if len(chunk) > need:
                    self.chunks.appendleft(chunk[need:])
                    chunk = chunk[:need]
                out += chunk
                self.size -= len(chunk)
                self.cond.notify_all()
        return bytes(out)

    def close(self) -> None:
        with self.cond:
            self.eof = True
            self.cond.notify_all()


class PipeEnd:
    def __init__(self, rx: _Pipe, tx: _Pipe):
        self._rx = rx
        self._tx = tx

    def send(self, data: bytes) -> None:
        self._tx.write(data)

    def recv_exact(self, n: int) -> bytes:
        return self._rx.read_exact(n)

    def close_write(self) -> None:
        self._tx.close()

    def close(self) -> None:
        self._tx.close()
        self._rx.close()


def pipe_pair(capacity: int = 1 << 20) -> tuple[PipeEnd, PipeEnd]:
    a_to_b, b_to_a = _Pipe(capacity), _Pipe(capacity)
    return PipeEnd(b_to_a, a_to_b), PipeEnd(a_to_b, b_to_a)


class SocketStream:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._write_closed = False

    @classmethod
    def connect(cls, address: tuple[str, int], timeout: Optional[float] = 10.0) -> "SocketStream":
        try:
            sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock)

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not chunk:
                break
            buf += chunk
        return bytes(buf)

    def close_write(self) -> None:
        if not self._write_closed:
            self._write_closed = True
            try:
                self.sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    if int(port) > 65535:
        raise ValueError(f"port out of range in {text!r}")
    return host or "127.0.0.1", int(port)
