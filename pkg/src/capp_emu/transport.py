"""Byte transports between a host and a served device.

Every transport is a thin wrapper over a stream socket: an in-process
loopback is a ``socket.socketpair()``, TCP is a connected ``AF_INET`` socket.
No framing is added on top of the raw protocol bytes.
"""

import logging
import socket
import threading

from capp_emu.errors import TransportError
from capp_emu.protocol import Device, serve

logger = logging.getLogger(__name__)


class SocketTransport:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.closed = False

    def recv(self, n: int) -> bytes:
        return self.sock.recv(n)

    def send(self, data: bytes) -> None:
        self.sock.sendall(data)

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def loopback_pair() -> tuple[SocketTransport, SocketTransport]:
    """Return ``(host_end, device_end)`` of an in-process byte channel."""
    a, b = socket.socketpair()
    return SocketTransport(a), SocketTransport(b)


def parse_address(text: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        host, port = default_host, text
    try:
        port_num = int(port)
    except ValueError:
        raise ValueError(f"bad port in address {text!r}") from None
    if not 0 <= port_num <= 65535:
        raise ValueError(f"port out of range in {text!r}")
    return host or default_host, port_num


def connect_tcp(host: str, port: int, timeout: float | None = 10.0) -> SocketTransport:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketTransport(sock)


class TcpServer:
    """Serves one device over TCP, one connection at a time.

    The device persists across connections. ``address`` holds the bound
    ``(host, port)`` once the constructor returns, so port 0 may be used to
    pick a free port.
    """

    def __init__(self, device: Device, host: str = "127.0.0.1", port: int = 7312):
        self.device = device
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            self._sock.close()
            raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
        self._sock.listen(1)
        self.address = self._sock.getsockname()[:2]
        self.connections = 0
        self.last_error: TransportError | None = None
        self._stopping = False

    def serve_forever(self, max_connections: int | None = None) -> Device:
        while max_connections is None or self.connections < max_connections:
            try:
                conn, peer = self._sock.accept()
            except OSError:
                if self._stopping:
                    break
                raise
            self.connections += 1
            logger.info("connection %d from %s:%d", self.connections, *peer[:2])
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with SocketTransport(conn) as transport:
                try:
                    serve(self.device, transport)
                except TransportError as exc:
                    self.last_error = exc
                    logger.warning("connection %d dropped: %s", self.connections, exc)
        return self.device

    def start(self, max_connections: int | None = None) -> threading.Thread:
        thread = threading.Thread(
            target=self.serve_forever, args=(max_connections,), daemon=True
        )
        thread.start()
        return thread

    def close(self) -> None:
        self._stopping = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
