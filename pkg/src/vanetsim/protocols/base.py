"""Shared routing-protocol plumbing: table entries, parameter profiles,
and the data plane common to all three control planes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..engine import Engine, Packet

__all__ = [
    "METRIC_INF",
    "RouteEntry",
    "seq_newer",
    "DsdvParams",
    "DymoParams",
    "OlsrParams",
    "profile_params",
    "profile_variants",
    "ProtocolNode",
]

METRIC_INF = 0xFFFF
_SEQ_SPAN = 1 << 16


def seq_newer(a: int, b: int) -> bool:
    """True when sequence number ``a`` is fresher than ``b`` under 16-bit
    wraparound ordering."""
    d = (a - b) % _SEQ_SPAN
    return 0 < d < _SEQ_SPAN // 2


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    metric: int
    sequence: int = 0
    expires_at: Optional[float] = None
    valid: bool = True


@dataclass(frozen=True)
class DsdvParams:
    full_dump_interval: float = 15.0
    triggered_update_min_interval: float = 1.0
    settling_time: float = 6.0

    def __post_init__(self) -> None:
        for name in ("full_dump_interval", "triggered_update_min_interval",
                     "settling_time"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DymoParams:
    net_diameter: int = 10
    rreq_wait_time_ms: float = 1000.0
    rreq_tries: int = 3
    ers_initial_ttl: int = 1
    ers_increment: int = 2
    route_lifetime: float = 5.0
    buffer_capacity: int = 64

    def __post_init__(self) -> None:
        if not 1 <= self.ers_initial_ttl <= self.net_diameter:
            raise ValueError("ers_initial_ttl must lie in [1, net_diameter]")
        if self.rreq_wait_time_ms <= 0:
            raise ValueError("rreq_wait_time_ms must be positive")
        if self.rreq_tries < 1 or self.ers_increment < 0:
            raise ValueError("invalid retry settings")
        if self.route_lifetime <= 0 or self.buffer_capacity < 1:
            raise ValueError("invalid route lifetime or buffer capacity")


@dataclass(frozen=True)
class OlsrParams:
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    neighbor_hold_time: float = 6.0
    topology_hold_time: float = 15.0

    def __post_init__(self) -> None:
        if self.hello_interval <= 0 or self.tc_interval <= 0:
            raise ValueError("intervals must be positive")
        if self.neighbor_hold_time < 3 * self.hello_interval:
            raise ValueError("neighbor_hold_time must be >= 3x hello_interval")
        if self.topology_hold_time < 3 * self.tc_interval:
            raise ValueError("topology_hold_time must be >= 3x tc_interval")


_PROFILES: dict[tuple[str, str], Any] = {
    ("dsdv", "default"): DsdvParams(),
    ("dymo", "default"): DymoParams(net_diameter=10, rreq_wait_time_ms=1000.0),
    ("dymo", "mod"): DymoParams(net_diameter=30, rreq_wait_time_ms=600.0),
    ("olsr", "default"): OlsrParams(hello_interval=2.0, tc_interval=5.0,
                                    neighbor_hold_time=6.0,
                                    topology_hold_time=15.0),
    ("olsr", "mod"): OlsrParams(hello_interval=1.0, tc_interval=3.0,
                                neighbor_hold_time=3.0,
                                topology_hold_time=9.0),
}


def profile_params(protocol: str, profile: str) -> Any:
    """Parameter struct for a (protocol, profile) pair.  DSDV ships only a
    default profile."""
    try:
        return _PROFILES[(protocol, profile)]
    except KeyError:
        raise ValueError(f"no profile {profile!r} for protocol {protocol!r}") from None


def profile_variants() -> list[tuple[str, str]]:
    """Every runnable (protocol, profile) combination, sweep order."""
    return [("dsdv", "default"), ("dymo", "default"), ("dymo", "mod"),
            ("olsr", "default"), ("olsr", "mod")]


class ProtocolNode:
    """Per-node protocol instance driven entirely by engine events.

    Subclasses own the control plane; the shared data plane lives here:
    look up a route, decrement TTL, transmit, and surface transmission-time
    link failures.  Proactive protocols drop on a route miss; DYMO
    overrides `send_data` to buffer and discover.
    """

    name = "?"

    def __init__(self, node_id: int, engine: Engine) -> None:
        self.node_id = node_id
        self.engine = engine

    # -- control plane hooks, overridden by subclasses ---------------------

    def start(self) -> None:
        raise NotImplementedError

    def on_timer(self, tag: str, payload: Any) -> None:
        raise NotImplementedError

    def on_control(self, packet: Packet, prev: int) -> None:
        raise NotImplementedError

    def route_next_hop(self, dst: int) -> Optional[int]:
        """Next hop of a currently valid route, or None.  Must be pure."""
        raise NotImplementedError

    # -- data plane --------------------------------------------------------

    def send_data(self, packet: Packet) -> None:
        self.forward_data(packet)

    def on_data(self, packet: Packet, prev: int) -> None:
        self.forward_data(packet)

    def forward_data(self, packet: Packet) -> None:
        next_hop = self.route_next_hop(packet.dst)
        if next_hop is None:
            self.engine.drop(packet, self.node_id, "no-route")
            return
        self.transmit_data(packet, next_hop)

    def transmit_data(self, packet: Packet, next_hop: int) -> None:
        if packet.ttl <= 0:
            self.engine.drop(packet, self.node_id, "ttl-exhausted")
            return
        packet.ttl -= 1
        if not self.engine.unicast(self.node_id, next_hop, packet):
            packet.ttl += 1  # transmission never happened
            self.on_link_failure(next_hop, packet)

    def on_link_failure(self, next_hop: int, packet: Packet) -> None:
        """Next hop out of range at transmission time.  Default: drop."""
        self.engine.drop(packet, self.node_id, "link-break")

    # -- control send helpers ----------------------------------------------

    def broadcast_control(self, kind: str, payload: Any, ttl: int,
                          size: int) -> set[int]:
        packet = Packet(self.engine.next_packet_id(), "control", self.name,
                        self.node_id, -1, created_at=self.engine.clock,
                        ttl=ttl, size=size, kind=kind, payload=payload)
        return self.engine.broadcast(self.node_id, packet)

    def unicast_control(self, next_hop: int, kind: str, payload: Any,
                        size: int, dst: int) -> bool:
        packet = Packet(self.engine.next_packet_id(), "control", self.name,
                        self.node_id, dst, created_at=self.engine.clock,
                        ttl=1, size=size, kind=kind, payload=payload)
        return self.engine.unicast(self.node_id, next_hop, packet)
