"""Socket transports for the telemetry bus.

Two listeners share one broker:

- Raw TCP (default port 7450): 4-byte big-endian length prefix + UTF-8 JSON
  per frame. Engine-side clients (tools, probes, the replayer) use this.
- HTTP (default port 7451): WebSocket endpoint /bus speaking the same JSON
  messages as text frames, /session/* control endpoints, and static assets
  for the browser console.

Message grammar, both transports, both directions:
  {"device_id", "seq", "timestamp_ms", "payload"}  envelope (client→server:
      publish; server→client: delivery)
  {"op": "sub", "devices": [...]}                  subscribe (empty = all)
  {"op": "err", "detail": "..."}                   server-side rejection

Ports and log directory come from TIMS_BUS_PORT, TIMS_HTTP_PORT, and
TIMS_LOG_DIR when set.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import mimetypes
import os
import queue
import socket
import statistics
import struct
import threading
import time
import warnings
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .bus import Broker, Envelope, dumps_canonical
from .schemas import SchemaError

DEFAULT_BUS_PORT = 7450
DEFAULT_HTTP_PORT = 7451
MAX_FRAME_BYTES = 16 * 1024 * 1024
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def env_bus_port() -> int:
    return int(os.environ.get("TIMS_BUS_PORT", DEFAULT_BUS_PORT))


def env_http_port() -> int:
    return int(os.environ.get("TIMS_HTTP_PORT", DEFAULT_HTTP_PORT))


def env_log_dir() -> Path:
    return Path(os.environ.get("TIMS_LOG_DIR", "logs"))


# ---------------------------------------------------------------------------
# Length-prefixed JSON framing (raw TCP)

def encode_frame(obj: dict) -> bytes:
    body = dumps_canonical(obj).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise ValueError(f"frame too large: {len(body)} bytes")
    return struct.pack(">I", len(body)) + body


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    """n bytes or None on clean EOF before the first byte."""
    chunks = []
    got = 0
    while got < n:
        try:
            chunk = sock.recv(n - got)
        except OSError:
            return None
        if not chunk:
            if got == 0:
                return None
            raise ConnectionError("socket closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Optional[dict]:
    """One decoded frame, or None when the peer closed cleanly."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise ValueError(f"frame too large: {length} bytes")
    body = _recv_exact(sock, length)
    if body is None:
        raise ConnectionError("socket closed mid-frame")
    return json.loads(body.decode("utf-8"))


# ---------------------------------------------------------------------------
# Shared per-connection logic

class _Connection:
    """One bus client on either transport; `send` is transport-specific."""

    def __init__(self, broker: Broker, send):
        self.broker = broker
        self._send = send
        self._send_lock = threading.Lock()
        self._sub = None
        self._forwarder: Optional[threading.Thread] = None
        self.closed = False

    def send_obj(self, obj: dict) -> None:
        with self._send_lock:
            self._send(obj)

    def handle_message(self, obj: dict) -> None:
        if not isinstance(obj, dict):
            self.send_obj({"op": "err", "detail": "message must be a JSON object"})
            return
        if "device_id" in obj:
            try:
                env = Envelope.from_obj(obj)
                self.broker.publish(env)
            except (SchemaError, KeyError, TypeError, ValueError) as e:
                self.send_obj({"op": "err", "detail": str(e)})
            return
        op = obj.get("op")
        if op == "sub":
            devices = obj.get("devices", [])
            if not isinstance(devices, list) or not all(isinstance(d, str) for d in devices):
                self.send_obj({"op": "err", "detail": "devices must be a list of strings"})
                return
            self._replace_subscription(devices)
        elif op == "ping":
            self.send_obj({"op": "pong"})
        else:
            self.send_obj({"op": "err", "detail": f"unknown op {op!r}"})

    def _replace_subscription(self, devices: list[str]) -> None:
        self._drop_subscription()
        sub = self.broker.subscribe(devices)
        self._sub = sub

        def pump():
            for env in sub:
                try:
                    self.send_obj(env.to_obj())
                except OSError:
                    break

        t = threading.Thread(target=pump, daemon=True, name="bus-forwarder")
        self._forwarder = t
        t.start()

    def _drop_subscription(self) -> None:
        if self._sub is not None:
            self.broker.unsubscribe(self._sub)
            self._sub = None

    def close(self) -> None:
        self.closed = True
        self._drop_subscription()


class TcpBusServer:
    """Frame-per-message bus listener for engine-side clients."""

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: Optional[int] = None):
        self.broker = broker
        self._listener = socket.create_server(
            (host, port if port is not None else env_bus_port()))
        self.host, self.port = self._listener.getsockname()[:2]
        self._clients: set[socket.socket] = set()
        self._clients_lock = threading.Lock()
        self._closing = False
        self._accept_thread = threading.Thread(
            target=self._accept_loop, daemon=True, name="bus-accept")
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            with self._clients_lock:
                self._clients.add(sock)
            threading.Thread(
                target=self._serve_client, args=(sock,), daemon=True,
                name="bus-client").start()

    def _serve_client(self, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn = _Connection(self.broker, lambda obj: sock.sendall(encode_frame(obj)))
        try:
            while True:
                try:
                    obj = read_frame(sock)
                except (ConnectionError, ValueError, json.JSONDecodeError):
                    break
                if obj is None:
                    break
                conn.handle_message(obj)
        finally:
            conn.close()
            with self._clients_lock:
                self._clients.discard(sock)
            try:
                sock.close()
            except OSError:
                pass

    def close(self) -> None:
        self._closing = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for sock in clients:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass


class BusClient:
    """Blocking TCP client: publish envelopes, receive subscribed traffic."""

    def __init__(self, host: str = "127.0.0.1", port: Optional[int] = None):
        self._sock = socket.create_connection(
            (host, port if port is not None else env_bus_port()))
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self.incoming: "queue.Queue[dict]" = queue.Queue()
        self.errors: list[str] = []
        self._reader = threading.Thread(
            target=self._read_loop, daemon=True, name="bus-client-reader")
        self._reader.start()

    def _read_loop(self) -> None:
        while True:
            try:
                obj = read_frame(self._sock)
            except (ConnectionError, ValueError, json.JSONDecodeError, OSError):
                return
            if obj is None:
                return
            if "device_id" in obj:
                self.incoming.put(obj)
            elif obj.get("op") == "err":
                self.errors.append(obj.get("detail", ""))

    def _send(self, obj: dict) -> None:
        with self._send_lock:
            self._sock.sendall(encode_frame(obj))

    def publish(self, env: Envelope) -> None:
        self._send(env.to_obj())

    def subscribe(self, devices: list[str]) -> None:
        self._send({"op": "sub", "devices": devices})

    def next_envelope(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        try:
            return Envelope.from_obj(self.incoming.get(timeout=timeout))
        except queue.Empty:
            return None

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# WebSocket (RFC 6455) support for the browser console

def _ws_accept_value(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(text: str) -> bytes:
    """Server-to-client text frame (FIN set, unmasked)."""
    body = text.encode("utf-8")
    n = len(body)
    if n < 126:
        header = bytes([0x81, n])
    elif n < 1 << 16:
        header = bytes([0x81, 126]) + struct.pack(">H", n)
    else:
        header = bytes([0x81, 127]) + struct.pack(">Q", n)
    return header + body


def _ws_encode_control(opcode: int, body: bytes = b"") -> bytes:
    return bytes([0x80 | opcode, len(body)]) + body


def ws_read_message(rfile) -> Optional[tuple[int, bytes]]:
    """(opcode, payload) for the next complete message; None at EOF.

    Reassembles continuation frames; unmasks client payloads (clients must
    mask per the protocol).
    """
    message = bytearray()
    message_opcode = None
    while True:
        head = rfile.read(2)
        if len(head) < 2:
            return None
        fin = bool(head[0] & 0x80)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            ext = rfile.read(2)
            if len(ext) < 2:
                return None
            (length,) = struct.unpack(">H", ext)
        elif length == 127:
            ext = rfile.read(8)
            if len(ext) < 8:
                return None
            (length,) = struct.unpack(">Q", ext)
        if length > MAX_FRAME_BYTES:
            raise ValueError(f"websocket frame too large: {length}")
        mask = rfile.read(4) if masked else b""
        if masked and len(mask) < 4:
            return None
        body = rfile.read(length) if length else b""
        if len(body) < length:
            return None
        if masked:
            body = bytes(b ^ mask[i % 4] for i, b in enumerate(body))
        if opcode in (0x8, 0x9, 0xA):
            # Control frames may interleave with a fragmented message.
            return (opcode, body)
        if opcode in (0x1, 0x2):
            message_opcode = opcode
            message.extend(body)
        elif opcode == 0x0:
            if message_opcode is None:
                raise ValueError("continuation frame without a start frame")
            message.extend(body)
        else:
            raise ValueError(f"unsupported websocket opcode {opcode}")
        if fin:
            return (message_opcode, bytes(message))


# ---------------------------------------------------------------------------
# HTTP server: /bus WebSocket, /session API, static console assets

class IdleController:
    """Session API backend used when no engine controller is wired in."""

    def state(self) -> dict:
        return {"state": "idle"}

    def start(self, config: dict) -> dict:
        raise RuntimeError("no session controller attached")

    def stop(self) -> dict:
        raise RuntimeError("no session running")

    def metrics(self) -> dict:
        raise RuntimeError("no completed session")


class _EngineHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "tims-engine"

    # set by EngineHttpServer subclassing machinery
    broker: Broker = None
    controller = None
    static_dir: Optional[Path] = None

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    # -- plain JSON helpers

    def _send_json(self, status: int, obj: dict) -> None:
        body = dumps_canonical(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ValueError(f"request body is not valid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise ValueError("request body must be a JSON object")
        return obj

    # -- routes

    def do_GET(self) -> None:
        if self.path == "/bus":
            self._upgrade_websocket()
            return
        if self.path == "/session/state":
            self._send_json(200, self.controller.state())
            return
        if self.path == "/session/metrics":
            try:
                self._send_json(200, self.controller.metrics())
            except RuntimeError as e:
                self._send_json(409, {"error": str(e)})
            return
        self._serve_static()

    def do_POST(self) -> None:
        if self.path == "/session/start":
            try:
                config = self._read_body_json()
                self._send_json(200, self.controller.start(config))
            except ValueError as e:
                self._send_json(400, {"error": str(e)})
            except RuntimeError as e:
                self._send_json(409, {"error": str(e)})
            return
        if self.path == "/session/stop":
            try:
                self._send_json(200, self.controller.stop())
            except RuntimeError as e:
                self._send_json(409, {"error": str(e)})
            return
        self._send_json(404, {"error": f"no such endpoint: {self.path}"})

    # -- static assets

    def _serve_static(self) -> None:
        if self.static_dir is None:
            self._send_json(404, {"error": "no static assets configured"})
            return
        rel = self.path.lstrip("/") or "index.html"
        root = self.static_dir.resolve()
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._send_json(404, {"error": f"not found: {self.path}"})
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # -- websocket bridge

    def _upgrade_websocket(self) -> None:
        key = self.headers.get("Sec-WebSocket-Key")
        upgrade = (self.headers.get("Upgrade") or "").lower()
        if upgrade != "websocket" or not key:
            self._send_json(400, {"error": "expected a websocket upgrade request"})
            return
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", _ws_accept_value(key))
        self.end_headers()
        self.close_connection = True

        sock = self.connection

        def send(obj: dict) -> None:
            sock.sendall(ws_encode_text(dumps_canonical(obj)))

        conn = _Connection(self.broker, send)
        try:
            while True:
                try:
                    msg = ws_read_message(self.rfile)
                except (ValueError, OSError):
                    break
                if msg is None:
                    break
                opcode, body = msg
                if opcode == 0x8:
                    try:
                        sock.sendall(_ws_encode_control(0x8, body[:2]))
                    except OSError:
                        pass
                    break
                if opcode == 0x9:
                    sock.sendall(_ws_encode_control(0xA, body))
                    continue
                if opcode == 0xA:
                    continue
                if opcode != 0x1:
                    continue
                try:
                    obj = json.loads(body.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    conn.send_obj({"op": "err", "detail": "frame is not valid JSON"})
                    continue
                conn.handle_message(obj)
        finally:
            conn.close()


class EngineHttpServer:
    """Console-facing HTTP listener bound to one broker and controller."""

    def __init__(
        self,
        broker: Broker,
        controller=None,
        static_dir: Optional[Path] = None,
        host: str = "127.0.0.1",
        port: Optional[int] = None,
    ):
        handler = type("BoundHandler", (_EngineHandler,), {
            "broker": broker,
            "controller": controller if controller is not None else IdleController(),
            "static_dir": Path(static_dir) if static_dir is not None else None,
        })
        self._httpd = ThreadingHTTPServer(
            (host, port if port is not None else env_http_port()), handler)
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, daemon=True, name="engine-http")
        self._thread.start()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


# ---------------------------------------------------------------------------
# Round-trip latency probe

@dataclass(frozen=True)
class LatencySummary:
    count: int
    timeouts: int
    min_ms: float
    median_ms: float
    p99_ms: float

    @classmethod
    def empty(cls) -> "LatencySummary":
        return cls(count=0, timeouts=0, min_ms=math.nan, median_ms=math.nan, p99_ms=math.nan)


def _percentile(sorted_vals: list[float], q: float) -> float:
    # Nearest-rank method; q in (0, 1].
    rank = max(1, math.ceil(q * len(sorted_vals)))
    return sorted_vals[rank - 1]


def measure_rtt(
    n: int,
    timeout_s: float = 1.0,
    injected_delay_ms: float = 0.0,
) -> LatencySummary:
    """Time n echo round trips over a private loopback bus.

    Each trip crosses the TCP transport four times: pinger publish, echo
    delivery, echo publish, pinger delivery. Timed-out echoes are excluded
    from the statistics, counted, and reported via a warning.
    injected_delay_ms adds a known pause at the echo side (calibration).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return LatencySummary.empty()

    broker = Broker(validate=True)
    server = TcpBusServer(broker, port=0)
    echo = BusClient(port=server.port)
    pinger = BusClient(port=server.port)
    stop = threading.Event()

    def echo_loop():
        echo.subscribe(["rtt_ping"])
        seq = 0
        while not stop.is_set():
            env = echo.next_envelope(timeout=0.1)
            if env is None:
                continue
            if injected_delay_ms > 0:
                time.sleep(injected_delay_ms / 1000.0)
            seq += 1
            echo.publish(Envelope(
                device_id="rtt_pong", seq=seq, timestamp_ms=env.timestamp_ms,
                payload=env.payload))

    echo_thread = threading.Thread(target=echo_loop, daemon=True, name="rtt-echo")
    echo_thread.start()

    samples_ms: list[float] = []
    timeouts = 0
    try:
        pinger.subscribe(["rtt_pong"])
        # Give both subscriptions time to land before the first ping.
        time.sleep(0.05)
        for i in range(1, n + 1):
            payload = {"schema": "tims/rtt/1", "nonce": i}
            t0 = time.monotonic()
            pinger.publish(Envelope(
                device_id="rtt_ping", seq=i, timestamp_ms=i, payload=payload))
            deadline = t0 + timeout_s
            got = False
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                env = pinger.next_envelope(timeout=remaining)
                if env is None:
                    break
                if env.payload.get("nonce") == i:
                    samples_ms.append((time.monotonic() - t0) * 1000.0)
                    got = True
                    break
            if not got:
                timeouts += 1
    finally:
        stop.set()
        echo_thread.join(timeout=2.0)
        pinger.close()
        echo.close()
        server.close()

    if timeouts:
        warnings.warn(f"{timeouts} of {n} echo round trips timed out and were excluded")
    if not samples_ms:
        return LatencySummary(count=0, timeouts=timeouts,
                              min_ms=math.nan, median_ms=math.nan, p99_ms=math.nan)
    ordered = sorted(samples_ms)
    return LatencySummary(
        count=len(ordered),
        timeouts=timeouts,
        min_ms=ordered[0],
        median_ms=statistics.median(ordered),
        p99_ms=_percentile(ordered, 0.99),
    )
