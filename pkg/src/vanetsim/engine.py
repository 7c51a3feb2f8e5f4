"""Deterministic discrete-event core: clock, event queue, broadcast channel.

A run is a pure function of (scenario, seed).  The channel delivers within
an inclusive radio range, optionally thinned by Nakagami-m fading, after a
fixed per-hop latency plus sub-millisecond jitter.  Control and data
transmissions draw jitter from separate substreams so the control plane of
a proactive protocol is bit-identical regardless of data load.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Optional

import numpy as np
from scipy.special import gammaincc

from .link_kinematics import Position
from .mobility import VehicleTrace

__all__ = [
    "BROADCAST",
    "EVENT_TIMER",
    "EVENT_ARRIVAL",
    "EVENT_TRACE_UPDATE",
    "EVENT_TRAFFIC",
    "Event",
    "EventQueue",
    "ChannelConfig",
    "Packet",
    "PacketRecord",
    "RouteRecord",
    "EventLog",
    "TrafficPlan",
    "Engine",
    "in_range",
    "reception_probability",
]

BROADCAST = -1

EVENT_TIMER = "timer"
EVENT_ARRIVAL = "packet-arrival"
EVENT_TRACE_UPDATE = "trace-update"
EVENT_TRAFFIC = "traffic-generation"

JITTER_SPAN = 0.001  # seconds; uniform [0, 1 ms) on top of per-hop latency


@dataclass(frozen=True)
class Event:
    time: float
    sequence: int
    kind: str
    payload: Any


class EventQueue:
    """Min-heap of events ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = itertools.count()

    def push(self, time: float, kind: str, payload: Any = None) -> Event:
        event = Event(time, next(self._seq), kind, payload)
        heapq.heappush(self._heap, (event.time, event.sequence, event))
        return event

    def pop(self) -> Optional[Event]:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass(frozen=True)
class ChannelConfig:
    """Broadcast channel: inclusive range, fading model, per-hop timing."""

    range_m: float = 300.0
    fading: str = "none"  # "none" or "nakagami"
    nakagami_m: float = 1.0
    threshold_ratio: float = 1.0
    per_hop_latency: float = 0.002

    def __post_init__(self) -> None:
        if self.range_m <= 0:
            raise ValueError(f"range must be positive, got {self.range_m}")
        if self.fading not in ("none", "nakagami"):
            raise ValueError(f"unknown fading model {self.fading!r}")
        if self.nakagami_m < 0.5:
            raise ValueError(f"nakagami shape must be >= 0.5, got {self.nakagami_m}")
        if self.threshold_ratio <= 0:
            raise ValueError("threshold_ratio must be positive")
        if self.per_hop_latency < 0:
            raise ValueError("per_hop_latency must be non-negative")


def in_range(a: Position, b: Position, range_m: float) -> bool:
    """True when the pair can hear each other; the boundary is inclusive."""
    return a.distance_to(b) <= range_m


def reception_probability(cfg: ChannelConfig, distance: float) -> float:
    """Probability that a frame sent over ``distance`` meters is received.

    Without fading this is the unit disk.  With Nakagami-m fading the
    received power is Gamma-distributed with mean following inverse-square
    distance; reception succeeds when power clears the threshold, giving
    the upper regularized incomplete gamma Q(m, m * q * (d / range)^2).
    """
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if distance > cfg.range_m:
        return 0.0
    if cfg.fading == "none":
        return 1.0
    x = cfg.nakagami_m * cfg.threshold_ratio * (distance / cfg.range_m) ** 2
    return float(gammaincc(cfg.nakagami_m, x))


@dataclass
class Packet:
    """One frame, data or control.  Data packets keep their identity across
    hops; control floods are re-instantiated per forwarding emission."""

    packet_id: int
    pclass: str  # "data" | "control"
    protocol: str
    src: int
    dst: int  # node id or BROADCAST
    created_at: float
    ttl: int
    size: int
    kind: str = ""
    payload: Any = None
    delivered_at: Optional[float] = None


@dataclass(frozen=True)
class PacketRecord:
    """One log row.  ``kind`` and ``note`` are in-memory detail only; the
    CSV export carries exactly the documented columns."""

    time: float
    event: str  # originate | send | recv | deliver | drop
    node: int
    packet_id: int
    pclass: str
    protocol: str
    src: int
    dst: int
    ttl: int
    size: int
    kind: str = ""
    note: str = ""


@dataclass(frozen=True)
class RouteRecord:
    """A resolved forwarding path for a traffic session, captured when the
    path first becomes available or changes."""

    time: float
    protocol: str
    src: int
    dst: int
    path: tuple[int, ...]


LOG_HEADER = "time_s,event,node,packet_id,class,protocol,src,dst,ttl,size_bytes"


class EventLog:
    """Append-only record of packet events and route establishments."""

    def __init__(self) -> None:
        self.records: list[PacketRecord] = []
        self.routes: list[RouteRecord] = []

    def add(self, record: PacketRecord) -> None:
        self.records.append(record)

    def add_route(self, record: RouteRecord) -> None:
        self.routes.append(record)

    def to_csv(self, fh: IO[str]) -> None:
        fh.write(LOG_HEADER + "\n")
        for r in self.records:
            fh.write(f"{r.time},{r.event},{r.node},{r.packet_id},{r.pclass},"
                     f"{r.protocol},{r.src},{r.dst},{r.ttl},{r.size}\n")

    def csv_text(self) -> str:
        lines = [LOG_HEADER]
        for r in self.records:
            lines.append(f"{r.time},{r.event},{r.node},{r.packet_id},{r.pclass},"
                         f"{r.protocol},{r.src},{r.dst},{r.ttl},{r.size}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrafficPlan:
    """Constant-bit-rate sessions: (src, dst) pairs emitting ``rate_pps``
    packets per second over [start, end]."""

    sessions: tuple[tuple[int, int], ...]
    rate_pps: float = 4.0
    packet_bytes: int = 1000
    start: float = 30.0
    end: float = 0.0  # set by the scenario builder
    data_ttl: int = 32
    stagger: float = 0.05  # session i starts at start + i * stagger

    def __post_init__(self) -> None:
        if self.rate_pps <= 0:
            raise ValueError("rate_pps must be positive")
        if self.packet_bytes <= 0:
            raise ValueError("packet_bytes must be positive")
        for src, dst in self.sessions:
            if src == dst:
                raise ValueError(f"session endpoints must differ, got {src}")


class Engine:
    """Single-threaded deterministic event loop over one scenario."""

    def __init__(self, traces: list[VehicleTrace], channel: ChannelConfig,
                 duration: float, seed: int) -> None:
        if not traces:
            raise ValueError("scenario needs at least one trace")
        self.channel = channel
        self.duration = duration
        self.clock = 0.0
        self.queue = EventQueue()
        self.log = EventLog()
        self.traces = {t.node: t for t in traces}
        self.node_ids = sorted(self.traces)
        self.positions: dict[int, Position] = {
            t.node: t.samples[0][1].position for t in traces}
        self.protocols: dict[int, Any] = {}
        self.traffic: Optional[TrafficPlan] = None

        self._jitter_control = np.random.default_rng([seed, 2, 1])
        self._jitter_data = np.random.default_rng([seed, 2, 2])
        self._fading = np.random.default_rng([seed, 2, 3])
        self._packet_ids = itertools.count()
        self._session_paths: dict[int, tuple[int, ...]] = {}

        self.data_sent = 0
        self.data_delivered = 0
        self.control_sent = 0

        # Trace updates scheduled up front so position refreshes precede any
        # same-instant timer or arrival.
        sample_times = traces[0].times()
        for idx, t in enumerate(sample_times):
            if t > 0.0:
                self.queue.push(t, EVENT_TRACE_UPDATE, idx)

    # -- wiring -----------------------------------------------------------

    def attach_protocols(self, factory: Callable[[int, "Engine"], Any]) -> None:
        for node in self.node_ids:
            self.protocols[node] = factory(node, self)

    def set_traffic(self, plan: TrafficPlan) -> None:
        self.traffic = plan

    def next_packet_id(self) -> int:
        return next(self._packet_ids)

    # -- scheduling -------------------------------------------------------

    def schedule_at(self, time: float, kind: str, payload: Any = None) -> Event:
        if time < self.clock:
            raise ValueError(f"cannot schedule at {time}, clock is {self.clock}")
        return self.queue.push(time, kind, payload)

    def schedule_timer(self, node: int, delay: float, tag: str,
                       payload: Any = None) -> None:
        if delay < 0:
            raise ValueError(f"cannot schedule {delay}s into the past")
        self.schedule_at(self.clock + delay, EVENT_TIMER, (node, tag, payload))

    # -- channel ----------------------------------------------------------

    def _jitter(self, pclass: str) -> float:
        rng = self._jitter_data if pclass == "data" else self._jitter_control
        return float(rng.random()) * JITTER_SPAN

    def _receives(self, distance: float) -> bool:
        p = reception_probability(self.channel, distance)
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        return float(self._fading.random()) < p

    def broadcast(self, sender: int, packet: Packet) -> set[int]:
        """Emit to every node currently in range; each receiver is drawn
        independently under fading.  Returns the receiving set."""
        self._log_packet("send", sender, packet)
        self._count_send(packet)
        origin = self.positions[sender]
        receivers: set[int] = set()
        for node in self.node_ids:
            if node == sender:
                continue
            d = origin.distance_to(self.positions[node])
            if d > self.channel.range_m:
                continue
            if not self._receives(d):
                continue
            delay = self.channel.per_hop_latency + self._jitter(packet.pclass)
            self.queue.push(self.clock + delay, EVENT_ARRIVAL,
                            (node, packet, sender))
            receivers.add(node)
        return receivers

    def unicast(self, sender: int, receiver: int, packet: Packet) -> bool:
        """Emit to one node.  False means the receiver was out of range at
        transmission time (the caller's link-break signal); channel loss
        under fading is absorbed here and logged as a drop for data."""
        d = self.positions[sender].distance_to(self.positions[receiver])
        if d > self.channel.range_m:
            return False
        self._log_packet("send", sender, packet)
        self._count_send(packet)
        if not self._receives(d):
            if packet.pclass == "data":
                self.drop(packet, sender, "channel-loss")
            return True
        delay = self.channel.per_hop_latency + self._jitter(packet.pclass)
        self.queue.push(self.clock + delay, EVENT_ARRIVAL,
                        (receiver, packet, sender))
        return True

    def drop(self, packet: Packet, node: int, reason: str) -> None:
        self._log_packet("drop", node, packet, note=reason)

    # -- bookkeeping ------------------------------------------------------

    def _count_send(self, packet: Packet) -> None:
        if packet.pclass == "control":
            self.control_sent += 1

    def _log_packet(self, event: str, node: int, packet: Packet,
                    note: str = "") -> None:
        self.log.add(PacketRecord(self.clock, event, node, packet.packet_id,
                                  packet.pclass, packet.protocol, packet.src,
                                  packet.dst, packet.ttl, packet.size,
                                  packet.kind, note))

    def resolve_path(self, src: int, dst: int) -> Optional[list[int]]:
        """Follow next hops across node tables; None when unresolved or
        looping."""
        path = [src]
        cur = src
        for _ in range(len(self.node_ids)):
            nxt = self.protocols[cur].route_next_hop(dst)
            if nxt is None:
                return None
            path.append(nxt)
            cur = nxt
            if cur == dst:
                return path
        return None

    def _record_session_path(self, session_idx: int, src: int, dst: int,
                             protocol: str) -> None:
        path = self.resolve_path(src, dst)
        if path is None:
            return
        tup = tuple(path)
        if self._session_paths.get(session_idx) != tup:
            self._session_paths[session_idx] = tup
            self.log.add_route(RouteRecord(self.clock, protocol, src, dst, tup))

    # -- event loop -------------------------------------------------------

    def run(self) -> EventLog:
        if self.traffic is not None:
            for idx in range(len(self.traffic.sessions)):
                first = self.traffic.start + idx * self.traffic.stagger
                if first <= self.traffic.end:
                    self.queue.push(first, EVENT_TRAFFIC, idx)
        for node in self.node_ids:
            self.protocols[node].start()

        while True:
            event = self.queue.pop()
            if event is None or event.time > self.duration + 1e-12:
                break
            if event.time < self.clock - 1e-12:
                raise RuntimeError(
                    f"causality violation: event at {event.time} after clock "
                    f"{self.clock}")
            self.clock = max(self.clock, event.time)
            self._dispatch(event)
        self.clock = self.duration
        return self.log

    def _dispatch(self, event: Event) -> None:
        if event.kind == EVENT_ARRIVAL:
            node, packet, prev = event.payload
            self._log_packet("recv", node, packet)
            if packet.pclass == "data":
                if node == packet.dst:
                    packet.delivered_at = self.clock
                    self.data_delivered += 1
                    self._log_packet("deliver", node, packet)
                else:
                    self.protocols[node].on_data(packet, prev)
            else:
                self.protocols[node].on_control(packet, prev)
        elif event.kind == EVENT_TIMER:
            node, tag, payload = event.payload
            self.protocols[node].on_timer(tag, payload)
        elif event.kind == EVENT_TRACE_UPDATE:
            idx = event.payload
            for node, trace in self.traces.items():
                self.positions[node] = trace.samples[idx][1].position
        elif event.kind == EVENT_TRAFFIC:
            self._generate_data(event.payload)
        else:
            raise RuntimeError(f"unknown event kind {event.kind!r}")

    def _generate_data(self, session_idx: int) -> None:
        plan = self.traffic
        assert plan is not None
        src, dst = plan.sessions[session_idx]
        proto = self.protocols[src]
        packet = Packet(self.next_packet_id(), "data", proto.name, src, dst,
                        created_at=self.clock, ttl=plan.data_ttl,
                        size=plan.packet_bytes, kind="cbr")
        self.data_sent += 1
        self._log_packet("originate", src, packet)
        self._record_session_path(session_idx, src, dst, proto.name)
        proto.send_data(packet)
        nxt = self.clock + 1.0 / plan.rate_pps
        if nxt <= plan.end + 1e-12:
            self.queue.push(nxt, EVENT_TRAFFIC, session_idx)
