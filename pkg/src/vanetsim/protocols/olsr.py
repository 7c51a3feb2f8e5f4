"""Proactive link-state control plane with multipoint relays.

Hellos advertise heard and symmetric neighbors plus the sender's relay
choices; they are never forwarded.  Topology-control floods advertise the
set of neighbors that picked the originator as a relay, and only chosen
relays retransmit them.  Every node originates topology floods on its
timer regardless of relay status, so control cadence is a pure function of
the profile intervals.  Routes are hop-count shortest paths over the
neighbor, two-hop and advertised-topology sets, recomputed whenever any of
those change; ties always resolve toward the lowest node id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional

from ..engine import Packet
from .base import OlsrParams, ProtocolNode, seq_newer

__all__ = ["OlsrNode", "Hello", "TopologyControl", "select_mprs"]

_HELLO_BASE_BYTES = 20
_TC_BASE_BYTES = 20
_PER_ID_BYTES = 4
_TC_TTL = 255


@dataclass(frozen=True)
class Hello:
    sym_neighbors: tuple[int, ...]
    heard_neighbors: tuple[int, ...]
    relays: tuple[int, ...]


@dataclass(frozen=True)
class TopologyControl:
    originator: int
    selectors: tuple[int, ...]
    sequence: int


def select_mprs(one_hop: Iterable[int],
                two_hop: Mapping[int, Iterable[int]]) -> set[int]:
    """Greedy relay choice covering every strict two-hop neighbor.

    First picks neighbors that are the sole reach to some two-hop node,
    then repeatedly the neighbor covering the most still-uncovered two-hop
    nodes, lower id winning ties.  Two-hop nodes no neighbor can reach
    (stale advertisements) are ignored rather than looping forever.
    """
    neighbors = set(one_hop)
    coverage = {n: set(two_hop.get(n, ())) - neighbors for n in neighbors}
    uncovered = set()
    for reach in coverage.values():
        uncovered |= reach
    relays: set[int] = set()

    sole: dict[int, list[int]] = {}
    for n in neighbors:
        for node in coverage[n]:
            sole.setdefault(node, []).append(n)
    for node, reachers in sole.items():
        if len(reachers) == 1:
            relays.add(reachers[0])
    for r in relays:
        uncovered -= coverage[r]

    while uncovered:
        best = None
        best_gain = 0
        for n in sorted(neighbors - relays):
            gain = len(coverage[n] & uncovered)
            if gain > best_gain:
                best, best_gain = n, gain
        if best is None:
            break  # remaining two-hop nodes are unreachable from here
        relays.add(best)
        uncovered -= coverage[best]
    return relays


class OlsrNode(ProtocolNode):
    name = "olsr"

    def __init__(self, node_id, engine, params: OlsrParams,
                 data_ttl: int = 32) -> None:
        super().__init__(node_id, engine)
        self.params = params
        self.data_ttl = data_ttl
        self.heard: dict[int, float] = {}      # neighbor -> expiry
        self.symmetric: dict[int, float] = {}  # neighbor -> expiry
        self.two_hop: dict[int, tuple[frozenset[int], float]] = {}
        self.selectors: dict[int, float] = {}  # who picked us as relay
        self.topology: dict[int, tuple[frozenset[int], int, float]] = {}
        self.relays: set[int] = set()
        self.routes: dict[int, tuple[int, int]] = {}  # dest -> (next hop, hops)
        self.tc_sequence = 0
        self._seen_tc: dict[int, int] = {}  # originator -> freshest sequence

    def start(self) -> None:
        self.engine.schedule_timer(self.node_id, self.params.hello_interval,
                                   "hello")
        self.engine.schedule_timer(self.node_id, self.params.tc_interval, "tc")

    def on_timer(self, tag: str, payload: Any) -> None:
        if tag == "hello":
            if self._expire():
                self._recompute()
            self._send_hello()
            self.engine.schedule_timer(self.node_id,
                                       self.params.hello_interval, "hello")
        elif tag == "tc":
            self._send_tc()
            self.engine.schedule_timer(self.node_id, self.params.tc_interval,
                                       "tc")

    # -- emission ---------------------------------------------------------

    def _send_hello(self) -> None:
        sym = tuple(sorted(self.symmetric))
        heard_only = tuple(sorted(set(self.heard) - set(self.symmetric)))
        relays = tuple(sorted(self.relays))
        size = (_HELLO_BASE_BYTES
                + _PER_ID_BYTES * (len(sym) + len(heard_only) + len(relays)))
        self.broadcast_control("olsr-hello", Hello(sym, heard_only, relays),
                               ttl=1, size=size)

    def _send_tc(self) -> None:
        self.tc_sequence = (self.tc_sequence + 1) % (1 << 16)
        selectors = tuple(sorted(self.selectors))
        tc = TopologyControl(self.node_id, selectors, self.tc_sequence)
        self.broadcast_control("olsr-tc", tc, ttl=_TC_TTL,
                               size=_TC_BASE_BYTES
                               + _PER_ID_BYTES * len(selectors))

    # -- reception ----------------------------------------------------------

    def on_control(self, packet: Packet, prev: int) -> None:
        if packet.kind == "olsr-hello":
            self._on_hello(packet.payload, prev)
        elif packet.kind == "olsr-tc":
            self._on_tc(packet, prev)

    def _on_hello(self, hello: Hello, sender: int) -> None:
        now = self.engine.clock
        hold = now + self.params.neighbor_hold_time
        changed = sender not in self.heard
        self.heard[sender] = hold
        lists_us = (self.node_id in hello.sym_neighbors
                    or self.node_id in hello.heard_neighbors)
        if lists_us:
            changed |= sender not in self.symmetric
            self.symmetric[sender] = hold
        sym_set = frozenset(hello.sym_neighbors) - {self.node_id}
        old = self.two_hop.get(sender)
        if old is None or old[0] != sym_set:
            changed = True
        self.two_hop[sender] = (sym_set, hold)
        if self.node_id in hello.relays:
            self.selectors[sender] = hold
        else:
            self.selectors.pop(sender, None)
        if changed:
            self._recompute()

    def _on_tc(self, packet: Packet) -> None:
        tc: TopologyControl = packet.payload
        if tc.originator == self.node_id:
            return
        prev_hop = packet.src
        if prev_hop not in self.symmetric:
            return
        known = self._seen_tc.get(tc.originator)
        if known is not None and not seq_newer(tc.sequence, known):
            return
        self._seen_tc[tc.originator] = tc.sequence
        selectors = frozenset(tc.selectors)
        hold = self.engine.clock + self.params.topology_hold_time
        old = self.topology.get(tc.originator)
        self.topology[tc.originator] = (selectors, tc.sequence, hold)
        if old is None or old[0] != selectors:
            self._recompute_routes()
        # Retransmit exactly once per fresh flood, and only if the previous
        # hop chose this node as a relay.
        if prev_hop in self.selectors and packet.ttl > 1:
            self.broadcast_control("olsr-tc", tc, ttl=packet.ttl - 1,
                                   size=packet.size)

    # -- state maintenance -----------------------------------------------------

    def _expire(self) -> bool:
        now = self.engine.clock
        changed = False
        for store in (self.heard, self.symmetric, self.selectors):
            stale = [n for n, expiry in store.items() if expiry < now]
            for n in stale:
                del store[n]
                changed = True
        stale2 = [n for n, (_, expiry) in self.two_hop.items() if expiry < now]
        for n in stale2:
            del self.two_hop[n]
            changed = True
        stale3 = [n for n, (_, _, expiry) in self.topology.items()
                  if expiry < now]
        for n in stale3:
            del self.topology[n]
            changed = True
        return changed

    def _recompute(self) -> None:
        sym = set(self.symmetric)
        reach = {n: set(self.two_hop[n][0]) for n in sym if n in self.two_hop}
        self.relays = select_mprs(sym, reach)
        self._recompute_routes()

    def _recompute_routes(self) -> None:
        """Breadth-first shortest paths over everything this node knows:
        its symmetric neighbors, their advertised neighbor sets, and the
        relay-advertised topology."""
        routes: dict[int, tuple[int, int]] = {}
        dist = {self.node_id: 0}
        frontier = [self.node_id]
        hops = 0
        while frontier:
            hops += 1
            nxt: list[int] = []
            for node in frontier:
                for nbr in self._known_links(node):
                    if nbr in dist:
                        continue
                    dist[nbr] = hops
                    routes[nbr] = (nbr if node == self.node_id
                                   else routes[node][0], hops)
                    nxt.append(nbr)
            frontier = sorted(nxt)
        self.routes = routes

    def _known_links(self, node: int) -> list[int]:
        if node == self.node_id:
            return sorted(self.symmetric)
        linked: set[int] = set()
        if node in self.symmetric and node in self.two_hop:
            linked |= self.two_hop[node][0]
        entry = self.topology.get(node)
        if entry is not None:
            linked |= entry[0]
        linked.discard(self.node_id)
        return sorted(linked)

    def route_next_hop(self, dst: int) -> Optional[int]:
        entry = self.routes.get(dst)
        return entry[0] if entry is not None else None
