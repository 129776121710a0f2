"""In-process telemetry bus: envelopes, fanout, session logs, replay.

Every producer (leader arm, follower, haptics, scene, tactile display)
publishes envelopes under its own device id. The broker enforces strictly
increasing sequence numbers per device, keeps a latest-value cache, appends
to the session log, and fans out to subscribers over bounded queues.

Ordering contract: subscribers see each device's envelopes in publish order.
Slow subscribers lose oldest messages first and the loss is counted; they
never block a publisher.
"""

from __future__ import annotations

import json
import math
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

from .clocks import WallClock
from .schemas import validate_envelope_obj

SESSIONLOG_SCHEMA = "tims/sessionlog/1"
DEFAULT_QUEUE_CAPACITY = 1024


class ReplayError(ValueError):
    """Session log unreadable; message carries the 1-based line number."""


@dataclass(frozen=True)
class Envelope:
    device_id: str
    seq: int
    timestamp_ms: int
    payload: dict

    def to_obj(self) -> dict:
        return {
            "device_id": self.device_id,
            "seq": self.seq,
            "timestamp_ms": self.timestamp_ms,
            "payload": self.payload,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "Envelope":
        return cls(
            device_id=obj["device_id"],
            seq=int(obj["seq"]),
            timestamp_ms=int(obj["timestamp_ms"]),
            payload=obj["payload"],
        )


def dumps_canonical(obj: dict) -> str:
    """Single JSON form everywhere (sorted keys, no spaces) so logs are
    byte-comparable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class PublishResult:
    accepted: bool
    stale: bool = False


class Subscription:
    """Bounded FIFO handed to one consumer.

    Capacity overflow drops the oldest queued envelope and bumps
    ``dropped_count``; the publisher is never blocked.
    """

    def __init__(self, device_ids: tuple[str, ...], capacity: int = DEFAULT_QUEUE_CAPACITY):
        if capacity <= 0:
            raise ValueError(f"capacity must be > 0, got {capacity}")
        self.device_ids = device_ids
        self.capacity = capacity
        self.dropped_count = 0
        self._queue: deque[Envelope] = deque()
        self._cond = threading.Condition()
        self._closed = False
        self._last_pushed: dict[str, int] = {}

    def _push(self, env: Envelope) -> None:
        with self._cond:
            if self._closed:
                return
            # Guarantee: per device, the delivered stream is strictly
            # increasing in seq. Closes the seed-vs-fanout race at
            # subscribe time.
            if env.seq <= self._last_pushed.get(env.device_id, -1):
                return
            self._last_pushed[env.device_id] = env.seq
            if len(self._queue) >= self.capacity:
                self._queue.popleft()
                self.dropped_count += 1
            self._queue.append(env)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        """Next envelope, or None on timeout / after close drains dry."""
        with self._cond:
            deadline = None if timeout is None else time.monotonic() + timeout
            while not self._queue:
                if self._closed:
                    return None
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._cond.wait(remaining)
            return self._queue.popleft()

    def drain(self) -> list[Envelope]:
        with self._cond:
            items = list(self._queue)
            self._queue.clear()
            return items

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __iter__(self) -> Iterator[Envelope]:
        while True:
            env = self.get()
            if env is None:
                return
            yield env


@dataclass
class _DeviceChannel:
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_seq: int = -1
    latest: Optional[Envelope] = None
    stale_drops: int = 0
    accepted: int = 0


class SessionLog:
    """Append-only record of every accepted envelope, in arrival order.

    File form is JSONL: one header line, then one entry per envelope with
    the broker receive time. Canonical serialization keeps two identical
    runs byte-identical on disk.
    """

    def __init__(self, session_id: str, created_ms: int = 0, meta: Optional[dict] = None):
        self.session_id = session_id
        self.created_ms = created_ms
        self.meta = dict(meta or {})
        self.entries: list[tuple[int, Envelope]] = []
        self._lock = threading.Lock()

    def append(self, rx_ms: int, env: Envelope) -> None:
        with self._lock:
            self.entries.append((rx_ms, env))

    def __len__(self) -> int:
        with self._lock:
            return len(self.entries)

    def header_obj(self) -> dict:
        return {
            "schema": SESSIONLOG_SCHEMA,
            "session_id": self.session_id,
            "created_ms": self.created_ms,
            "meta": self.meta,
        }

    def write(self, path) -> None:
        with self._lock:
            entries = list(self.entries)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(self.header_obj()) + "\n")
            for rx_ms, env in entries:
                fh.write(dumps_canonical({"rx_ms": rx_ms, "env": env.to_obj()}) + "\n")

    @classmethod
    def read(cls, path) -> "SessionLog":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ReplayError(f"{path}:1: empty session log")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise ReplayError(f"{path}:1: bad header: {e}") from e
        if header.get("schema") != SESSIONLOG_SCHEMA:
            raise ReplayError(f"{path}:1: unsupported log schema {header.get('schema')!r}")
        log = cls(
            session_id=header.get("session_id", ""),
            created_ms=int(header.get("created_ms", 0)),
            meta=header.get("meta", {}),
        )
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                env = Envelope.from_obj(obj["env"])
                rx_ms = int(obj["rx_ms"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ReplayError(f"{path}:{lineno}: corrupt entry: {e}") from e
            log.entries.append((rx_ms, env))
        return log


class Broker:
    """Validates, sequences, caches, logs, and fans out envelopes."""

    def __init__(self, clock=None, log: Optional[SessionLog] = None, validate: bool = True):
        self.clock = clock if clock is not None else WallClock()
        self.log = log
        self.validate = validate
        self._channels: dict[str, _DeviceChannel] = {}
        self._subs: list[Subscription] = []
        self._registry_lock = threading.Lock()

    def _channel(self, device_id: str) -> _DeviceChannel:
        with self._registry_lock:
            ch = self._channels.get(device_id)
            if ch is None:
                ch = _DeviceChannel()
                self._channels[device_id] = ch
            return ch

    def publish(self, env: Envelope) -> PublishResult:
        """Accept or reject one envelope.

        Rejection (stale) happens when seq does not advance past the last
        accepted seq for that device. Acceptance updates the latest cache,
        appends to the session log, and enqueues to matching subscribers,
        all under the device lock so per-device order is preserved.
        """
        if self.validate:
            validate_envelope_obj(env.to_obj())
        ch = self._channel(env.device_id)
        with ch.lock:
            if env.seq <= ch.last_seq:
                ch.stale_drops += 1
                return PublishResult(accepted=False, stale=True)
            ch.last_seq = env.seq
            ch.latest = env
            ch.accepted += 1
            if self.log is not None:
                self.log.append(self.clock.now_ms(), env)
            with self._registry_lock:
                subs = [s for s in self._subs if not s.device_ids or env.device_id in s.device_ids]
            for sub in subs:
                sub._push(env)
        return PublishResult(accepted=True)

    def latest(self, device_id: str) -> Optional[Envelope]:
        ch = self._channels.get(device_id)
        if ch is None:
            return None
        with ch.lock:
            return ch.latest

    def latest_all(self) -> dict[str, Envelope]:
        with self._registry_lock:
            ids = list(self._channels)
        out = {}
        for device_id in ids:
            env = self.latest(device_id)
            if env is not None:
                out[device_id] = env
        return out

    def stale_drop_count(self, device_id: str) -> int:
        ch = self._channels.get(device_id)
        return 0 if ch is None else ch.stale_drops

    def accepted_count(self, device_id: str) -> int:
        ch = self._channels.get(device_id)
        return 0 if ch is None else ch.accepted

    def subscribe(
        self,
        device_ids: Iterable[str] = (),
        capacity: int = DEFAULT_QUEUE_CAPACITY,
        latest_first: bool = True,
    ) -> Subscription:
        """Register a consumer. Empty device_ids means all devices.

        With latest_first, the current cached value of each matching device
        is delivered before any newer traffic, so a late joiner starts from
        a complete picture. Registration holds the matching device locks one
        at a time, which keeps the seed value and subsequent stream gap-free.
        """
        ids = tuple(device_ids)
        sub = Subscription(ids, capacity=capacity)
        # Publishers snapshot the subscriber list under this same lock, so
        # seeding and registering as one critical section means no envelope
        # newer than the seed can slip past unseen; the per-device seq
        # filter in _push absorbs the one possible duplicate.
        with self._registry_lock:
            if latest_first:
                for device_id, ch in self._channels.items():
                    if (not ids or device_id in ids) and ch.latest is not None:
                        sub._push(ch.latest)
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._registry_lock:
            if sub in self._subs:
                self._subs.remove(sub)
        sub.close()

    def device_ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._channels)


def replay(
    log: SessionLog,
    broker: Broker,
    speed: float = 1.0,
    on_envelope: Optional[Callable[[int, Envelope], None]] = None,
) -> int:
    """Re-publish a session log into a broker. Returns envelopes published.

    speed scales recorded inter-arrival gaps (2.0 is twice as fast);
    math.inf (batch mode) publishes everything back-to-back with no sleeps.
    Envelopes keep their recorded seq numbers, so the target broker should
    be fresh, or replays of already-seen devices will be dropped as stale.
    """
    if not (speed > 0):
        raise ValueError(f"speed must be > 0, got {speed}")
    count = 0
    prev_rx: Optional[int] = None
    for rx_ms, env in log.entries:
        if prev_rx is not None and math.isfinite(speed):
            gap_s = (rx_ms - prev_rx) / 1000.0 / speed
            if gap_s > 0:
                time.sleep(gap_s)
        prev_rx = rx_ms
        broker.publish(env)
        if on_envelope is not None:
            on_envelope(rx_ms, env)
        count += 1
    return count
