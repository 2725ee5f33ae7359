"""In-process, topic-based message bus.

Decouples the pipeline stages (ingest -> segmentation -> transcription ->
document -> summarization) the same way an external AMQP broker would:
per-key FIFO ordering, consumer groups with at-least-once delivery, and
backpressure on publishers instead of message drop. Messages live for the
process lifetime only; an external broker can be swapped in behind the same
contract.
"""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, field

from .errors import BusShutdown, ValidationError

DEFAULT_BUFFER_SIZE = 1024


@dataclass(frozen=True)
class BusMessage:
    topic: str
    key: str
    payload: bytes
    enqueue_seq: int
    # Position in the topic log; acts as the delivery tag for ack/nack.
    offset: int


@dataclass
class _Group:
    name: str
    next_offset: int = 0
    redelivery: list[int] = field(default_factory=list)  # min-heap of offsets
    unacked: set[int] = field(default_factory=set)
    acked: set[int] = field(default_factory=set)

    def lag(self, log_len: int) -> int:
        return log_len - len(self.acked)


class _Topic:
    def __init__(self, name: str):
        self.name = name
        self.log: list[BusMessage] = []
        self.key_seq: dict[str, int] = {}
        self.groups: dict[str, _Group] = {}


class Subscription:
    """One consumer handle on a (topic, group) stream.

    Several Subscription objects may share a group; each message is then
    delivered to exactly one of them. ``get`` leases a message; it must be
    ``ack``ed, or ``nack``ed / ``requeue_unacked``ed to trigger redelivery.
    """

    def __init__(self, bus: Bus, topic: str, group: str):
        self._bus = bus
        self.topic = topic
        self.group = group

    def get(self, timeout: float | None = None) -> BusMessage | None:
        return self._bus._get(self.topic, self.group, timeout)

    def ack(self, msg: BusMessage) -> None:
        self._bus._ack(self.topic, self.group, msg.offset)

    def nack(self, msg: BusMessage) -> None:
        self._bus._nack(self.topic, self.group, [msg.offset])

    def requeue_unacked(self) -> int:
        """Return all leased-but-unacked messages to the queue (simulated crash)."""
        return self._bus._requeue_unacked(self.topic, self.group)


class Bus:
    """Thread-safe broker with per-(topic, key) enqueue sequence numbers."""

    def __init__(self, buffer_size: int = DEFAULT_BUFFER_SIZE):
        if buffer_size < 1:
            raise ValidationError("buffer_size must be >= 1")
        self.buffer_size = buffer_size
        self._topics: dict[str, _Topic] = {}
        self._cond = threading.Condition()
        self._closed = False

    def publish(self, topic: str, key: str, payload: bytes, timeout: float | None = None) -> int:
        if not topic or not topic.isascii():
            raise ValidationError(f"topic name must be non-empty ASCII, got {topic!r}")
        with self._cond:
            t = self._topics.setdefault(topic, _Topic(topic))
            # Backpressure: block while any consumer group lags a full buffer.
            while not self._closed and any(
                g.lag(len(t.log)) >= self.buffer_size for g in t.groups.values()
            ):
                if not self._cond.wait(timeout=timeout):
                    raise TimeoutError(f"publish to {topic!r} backpressured beyond timeout")
            if self._closed:
                raise BusShutdown("bus is shut down")
            seq = t.key_seq.get(key, 0) + 1
            t.key_seq[key] = seq
            msg = BusMessage(topic=topic, key=key, payload=bytes(payload),
                             enqueue_seq=seq, offset=len(t.log))
            t.log.append(msg)
            self._cond.notify_all()
            return seq

    def subscribe(self, topic: str, group: str) -> Subscription:
        with self._cond:
            t = self._topics.setdefault(topic, _Topic(topic))
            t.groups.setdefault(group, _Group(group))
        return Subscription(self, topic, group)

    def close(self) -> None:
        """Stop accepting publishes. Consumers may drain what remains."""
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed

    def pending(self, topic: str, group: str) -> int:
        """Messages the group has not yet received (excludes unacked leases)."""
        with self._cond:
            t = self._topics.get(topic)
            if t is None or group not in t.groups:
                return 0
            g = t.groups[group]
            return (len(t.log) - g.next_offset) + len(g.redelivery)

    # -- internals used by Subscription ------------------------------------

    def _get(self, topic: str, group: str, timeout: float | None) -> BusMessage | None:
        with self._cond:
            t = self._topics[topic]
            g = t.groups[group]
            while True:
                if g.redelivery:
                    offset = heapq.heappop(g.redelivery)
                    g.unacked.add(offset)
                    return t.log[offset]
                if g.next_offset < len(t.log):
                    offset = g.next_offset
                    g.next_offset += 1
                    g.unacked.add(offset)
                    return t.log[offset]
                if self._closed:
                    raise BusShutdown("bus is shut down and topic drained")
                if timeout == 0:
                    return None
                if not self._cond.wait(timeout=timeout):
                    return None

    def _ack(self, topic: str, group: str, offset: int) -> None:
        with self._cond:
            g = self._topics[topic].groups[group]
            g.unacked.discard(offset)
            g.acked.add(offset)
            self._cond.notify_all()

    def _nack(self, topic: str, group: str, offsets: list[int]) -> None:
        with self._cond:
            g = self._topics[topic].groups[group]
            for offset in offsets:
                if offset in g.unacked:
                    g.unacked.discard(offset)
                    heapq.heappush(g.redelivery, offset)
            self._cond.notify_all()

    def _requeue_unacked(self, topic: str, group: str) -> int:
        with self._cond:
            g = self._topics[topic].groups[group]
            requeued = len(g.unacked)
            for offset in list(g.unacked):
                heapq.heappush(g.redelivery, offset)
            g.unacked.clear()
            self._cond.notify_all()
            return requeued
