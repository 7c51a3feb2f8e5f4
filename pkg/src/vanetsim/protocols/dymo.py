"""On-demand route discovery with expanding ring search.

Sources buffer data while a discovery runs.  Each discovery round floods a
route request with a TTL-bounded ring, starting at the initial ring and
widening by the configured increment (capped at the network diameter) when
the per-round wait timer expires, for at most the configured number of
rounds.  The target, or an intermediate node holding a valid route to it,
answers with a unicast route reply that installs bidirectional state hop
by hop.  Links are declared broken when a transmission finds its next hop
out of range; the detecting node invalidates every route through that hop
and floods a route error to upstream users.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from ..engine import Packet
from .base import DymoParams, ProtocolNode, RouteEntry, seq_newer

__all__ = ["DymoNode", "RouteRequest", "RouteReply", "RouteError"]

_RREQ_BYTES = 24
_RREP_BYTES = 24
_RERR_BYTES = 20


@dataclass(frozen=True)
class RouteRequest:
    origin: int
    origin_sequence: int
    request_id: int
    target: int
    hop_count: int


@dataclass(frozen=True)
class RouteReply:
    origin: int
    target: int
    target_sequence: int
    hop_count: int


@dataclass(frozen=True)
class RouteError:
    unreachable: tuple[int, ...]


@dataclass
class _Discovery:
    attempt: int
    request_id: int


class DymoNode(ProtocolNode):
    name = "dymo"

    def __init__(self, node_id, engine, params: DymoParams,
                 data_ttl: int = 32) -> None:
        super().__init__(node_id, engine)
        self.params = params
        self.data_ttl = data_ttl
        self.own_sequence = 0
        self.table: dict[int, RouteEntry] = {}
        self.buffered: dict[int, list[Packet]] = {}
        self.buffered_count = 0
        self.discoveries: dict[int, _Discovery] = {}
        self.seen_requests: set[tuple[int, int]] = set()
        self._request_ids = 0

    def start(self) -> None:
        pass  # purely reactive; nothing to do until traffic or packets arrive

    # -- data plane ----------------------------------------------------------

    def send_data(self, packet: Packet) -> None:
        next_hop = self.route_next_hop(packet.dst)
        if next_hop is not None:
            self._refresh(packet.dst)
            self.transmit_data(packet, next_hop)
            return
        self._buffer(packet)
        if packet.dst not in self.discoveries:
            self._start_discovery(packet.dst)

    def on_data(self, packet: Packet, prev: int) -> None:
        # Intermediate nodes do not buffer; a miss here is a drop.
        next_hop = self.route_next_hop(packet.dst)
        if next_hop is None:
            self.engine.drop(packet, self.node_id, "no-route")
            return
        self._refresh(packet.dst)
        self.transmit_data(packet, next_hop)

    def _buffer(self, packet: Packet) -> None:
        if self.buffered_count >= self.params.buffer_capacity:
            self.engine.drop(packet, self.node_id, "buffer-full")
            return
        self.buffered.setdefault(packet.dst, []).append(packet)
        self.buffered_count += 1

    def _flush(self, dst: int) -> None:
        for packet in self.buffered.pop(dst, []):
            self.buffered_count -= 1
            next_hop = self.route_next_hop(dst)
            if next_hop is None:
                self.engine.drop(packet, self.node_id, "no-route")
                continue
            self._refresh(dst)
            self.transmit_data(packet, next_hop)

    def _drop_buffered(self, dst: int) -> None:
        for packet in self.buffered.pop(dst, []):
            self.buffered_count -= 1
            self.engine.drop(packet, self.node_id, "discovery-failed")

    # -- discovery -------------------------------------------------------------

    def _start_discovery(self, target: int) -> None:
        self.discoveries[target] = _Discovery(attempt=0, request_id=0)
        self._next_ring(target)

    def _next_ring(self, target: int) -> None:
        state = self.discoveries[target]
        state.attempt += 1
        self._request_ids += 1
        state.request_id = self._request_ids
        self.own_sequence = (self.own_sequence + 1) % (1 << 16)
        ttl = min(self.params.ers_initial_ttl
                  + (state.attempt - 1) * self.params.ers_increment,
                  self.params.net_diameter)
        request = RouteRequest(self.node_id, self.own_sequence,
                               state.request_id, target, hop_count=0)
        self.seen_requests.add((self.node_id, state.request_id))
        self.broadcast_control("dymo-rreq", request, ttl=ttl, size=_RREQ_BYTES)
        self.engine.schedule_timer(self.node_id,
                                   self.params.rreq_wait_time_ms / 1000.0,
                                   "rreq-wait", (target, state.attempt))

    def on_timer(self, tag: str, payload: Any) -> None:
        if tag != "rreq-wait":
            return
        target, attempt = payload
        state = self.discoveries.get(target)
        if state is None or state.attempt != attempt:
            return  # a reply already resolved this discovery
        if state.attempt < self.params.rreq_tries:
            self._next_ring(target)
        else:
            del self.discoveries[target]
            self._drop_buffered(target)

    # -- control plane -----------------------------------------------------------

    def on_control(self, packet: Packet, prev: int) -> None:
        if packet.kind == "dymo-rreq":
            self._on_request(packet, prev)
        elif packet.kind == "dymo-rrep":
            self._on_reply(packet, prev)
        elif packet.kind == "dymo-rerr":
            self._on_error(packet, prev)

    def _on_request(self, packet: Packet, prev: int) -> None:
        req: RouteRequest = packet.payload
        if req.origin == self.node_id:
            return
        key = (req.origin, req.request_id)
        if key in self.seen_requests:
            return
        self.seen_requests.add(key)
        self._learn(req.origin, prev, req.hop_count + 1, req.origin_sequence)
        if self.node_id == req.target:
            self.own_sequence = (self.own_sequence + 1) % (1 << 16)
            self._send_reply(RouteReply(req.origin, self.node_id,
                                        self.own_sequence, hop_count=0))
            return
        route = self.table.get(req.target)
        if route is not None and self._is_valid(route):
            self._send_reply(RouteReply(req.origin, req.target,
                                        route.sequence, route.metric))
            return
        if packet.ttl > 1:
            forwarded = RouteRequest(req.origin, req.origin_sequence,
                                     req.request_id, req.target,
                                     req.hop_count + 1)
            self.broadcast_control("dymo-rreq", forwarded, ttl=packet.ttl - 1,
                                   size=_RREQ_BYTES)

    def _send_reply(self, reply: RouteReply) -> None:
        next_hop = self.route_next_hop(reply.origin)
        if next_hop is None:
            return
        self._refresh(reply.origin)
        self.unicast_control(next_hop, "dymo-rrep", reply, _RREP_BYTES,
                             dst=reply.origin)

    def _on_reply(self, packet: Packet, prev: int) -> None:
        reply: RouteReply = packet.payload
        self._learn(reply.target, prev, reply.hop_count + 1,
                    reply.target_sequence)
        if self.node_id == reply.origin:
            self.discoveries.pop(reply.target, None)
            self._flush(reply.target)
            return
        self._send_reply(RouteReply(reply.origin, reply.target,
                                    reply.target_sequence,
                                    reply.hop_count + 1))

    def _on_error(self, packet: Packet, prev: int) -> None:
        err: RouteError = packet.payload
        invalidated = []
        for dest in err.unreachable:
            entry = self.table.get(dest)
            if entry is not None and entry.valid and entry.next_hop == prev:
                entry.valid = False
                invalidated.append(dest)
        if invalidated:
            self.broadcast_control("dymo-rerr",
                                   RouteError(tuple(sorted(invalidated))),
                                   ttl=1, size=_RERR_BYTES)

    # -- table maintenance -----------------------------------------------------

    def _learn(self, dest: int, next_hop: int, metric: int, sequence: int) -> None:
        current = self.table.get(dest)
        accept = (current is None or not self._is_valid(current)
                  or seq_newer(sequence, current.sequence)
                  or (sequence == current.sequence and metric < current.metric))
        if accept:
            self.table[dest] = RouteEntry(
                dest, next_hop, metric, sequence,
                expires_at=self.engine.clock + self.params.route_lifetime)
        else:
            self._refresh(dest)

    def _refresh(self, dest: int) -> None:
        entry = self.table.get(dest)
        if entry is not None and entry.valid:
            entry.expires_at = self.engine.clock + self.params.route_lifetime

    def _is_valid(self, entry: RouteEntry) -> bool:
        return (entry.valid and entry.expires_at is not None
                and entry.expires_at >= self.engine.clock)

    def route_next_hop(self, dst: int) -> Optional[int]:
        entry = self.table.get(dst)
        if entry is None or not self._is_valid(entry):
            return None
        return entry.next_hop

    def on_link_failure(self, next_hop: int, packet: Packet) -> None:
        broken = []
        for dest in sorted(self.table):
            entry = self.table[dest]
            if entry.valid and entry.next_hop == next_hop:
                entry.valid = False
                broken.append(dest)
        if broken:
            self.broadcast_control("dymo-rerr", RouteError(tuple(broken)),
                                   ttl=1, size=_RERR_BYTES)
        self.engine.drop(packet, self.node_id, "link-break")
