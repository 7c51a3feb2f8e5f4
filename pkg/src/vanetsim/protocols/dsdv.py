"""Destination-sequenced distance-vector control plane.

Every node owns an even sequence number it bumps on each periodic full
dump.  Receivers adopt advertised routes when the sequence is fresher, or
on an equal sequence when the metric strictly improves.  A fresher route
with a worse metric is parked for the settling time before it replaces a
working one; a fresher broken route applies immediately.  Route changes
are re-advertised through incremental triggered updates, rate limited per
node.  Broken links are detected at transmission time and by prolonged
neighbor silence; affected routes are advertised with an odd (broken)
sequence and an infinite metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from ..engine import Packet
from .base import METRIC_INF, DsdvParams, ProtocolNode, RouteEntry, seq_newer

__all__ = ["DsdvNode", "RouteAdvert"]

# Dumps missed before a silent neighbor is declared gone.
_SILENCE_DUMPS = 3

_ADVERT_HEADER_BYTES = 24
_ADVERT_ENTRY_BYTES = 8


@dataclass(frozen=True)
class RouteAdvert:
    destination: int
    metric: int
    sequence: int


class DsdvNode(ProtocolNode):
    name = "dsdv"

    def __init__(self, node_id, engine, params: DsdvParams,
                 data_ttl: int = 32) -> None:
        super().__init__(node_id, engine)
        self.params = params
        self.data_ttl = data_ttl
        self.own_sequence = 0
        self.table: dict[int, RouteEntry] = {
            node_id: RouteEntry(node_id, node_id, 0, 0)}
        self.pending: dict[int, tuple[RouteEntry, float]] = {}
        self.changed: set[int] = set()
        self.last_heard: dict[int, float] = {}
        self._last_advert_at = 0.0
        self._trigger_scheduled = False

    # -- timers -------------------------------------------------------------

    def start(self) -> None:
        self.engine.schedule_timer(self.node_id,
                                   self.params.full_dump_interval, "dump")

    def on_timer(self, tag: str, payload: Any) -> None:
        if tag == "dump":
            self._prune_silent_neighbors()
            self._full_dump()
            self.engine.schedule_timer(self.node_id,
                                       self.params.full_dump_interval, "dump")
        elif tag == "trigger":
            self._trigger_scheduled = False
            self._triggered_update()
        elif tag == "settle":
            self._install_settled(payload)

    def _full_dump(self) -> None:
        self.own_sequence = (self.own_sequence + 2) % (1 << 16)
        self.table[self.node_id].sequence = self.own_sequence
        adverts = self._adverts(sorted(self.table))
        self.changed.clear()
        self._last_advert_at = self.engine.clock
        self.broadcast_control(
            "dsdv-full-dump", adverts, ttl=1,
            size=_ADVERT_HEADER_BYTES + _ADVERT_ENTRY_BYTES * len(adverts))

    def _triggered_update(self) -> None:
        dests = sorted(d for d in self.changed if d in self.table)
        self.changed.clear()
        if not dests:
            return
        adverts = self._adverts(dests)
        self._last_advert_at = self.engine.clock
        self.broadcast_control(
            "dsdv-trigger", adverts, ttl=1,
            size=_ADVERT_HEADER_BYTES + _ADVERT_ENTRY_BYTES * len(adverts))

    def _adverts(self, dests) -> tuple[RouteAdvert, ...]:
        out = []
        for dest in dests:
            entry = self.table[dest]
            metric = entry.metric if entry.valid else METRIC_INF
            out.append(RouteAdvert(dest, metric, entry.sequence))
        return tuple(out)

    def _mark_changed(self, dest: int) -> None:
        self.changed.add(dest)
        if self._trigger_scheduled:
            return
        at = max(self.engine.clock,
                 self._last_advert_at + self.params.triggered_update_min_interval)
        self.engine.schedule_timer(self.node_id, at - self.engine.clock,
                                   "trigger")
        self._trigger_scheduled = True

    # -- advert processing ----------------------------------------------------

    def on_control(self, packet: Packet, prev: int) -> None:
        if packet.kind in ("dsdv-full-dump", "dsdv-trigger"):
            self.process_advert(packet.payload, prev)

    def process_advert(self, adverts, sender: int) -> None:
        """Fold a neighbor's advertisement into the table."""
        self.last_heard[sender] = self.engine.clock
        for advert in adverts:
            if not isinstance(advert, RouteAdvert) or advert.metric < 0:
                continue  # malformed entries are skipped
            self._consider(advert, sender)

    def _consider(self, advert: RouteAdvert, sender: int) -> None:
        dest = advert.destination
        if dest == self.node_id:
            return
        broken = advert.metric >= METRIC_INF
        metric = METRIC_INF if broken else advert.metric + 1
        candidate = RouteEntry(dest, sender, metric, advert.sequence,
                               valid=not broken)
        current = self.table.get(dest)
        if current is None:
            if not broken:
                self._install(candidate)
            return
        if seq_newer(advert.sequence, current.sequence):
            better = metric <= current.metric or not current.valid
            if broken or better:
                self.pending.pop(dest, None)
                self._install(candidate)
            else:
                self._hold_for_settling(candidate)
        elif advert.sequence == current.sequence and metric < current.metric:
            self.pending.pop(dest, None)
            self._install(candidate)

    def _install(self, entry: RouteEntry) -> None:
        current = self.table.get(entry.destination)
        route_changed = (current is None or current.next_hop != entry.next_hop
                         or current.metric != entry.metric
                         or current.valid != entry.valid)
        self.table[entry.destination] = entry
        if route_changed:
            self._mark_changed(entry.destination)

    def _hold_for_settling(self, entry: RouteEntry) -> None:
        held = self.pending.get(entry.destination)
        if held is not None:
            held_entry, install_at = held
            # Keep the better candidate; the settle timer is already running.
            if seq_newer(entry.sequence, held_entry.sequence) or (
                    entry.sequence == held_entry.sequence
                    and entry.metric < held_entry.metric):
                self.pending[entry.destination] = (entry, install_at)
            return
        install_at = self.engine.clock + self.params.settling_time
        self.pending[entry.destination] = (entry, install_at)
        self.engine.schedule_timer(self.node_id, self.params.settling_time,
                                   "settle", entry.destination)

    def _install_settled(self, dest: int) -> None:
        held = self.pending.pop(dest, None)
        if held is None:
            return
        entry, _ = held
        current = self.table.get(dest)
        if current is None or seq_newer(entry.sequence, current.sequence):
            self._install(entry)

    # -- link failure ---------------------------------------------------------

    def _prune_silent_neighbors(self) -> None:
        silence = _SILENCE_DUMPS * self.params.full_dump_interval
        for nbr, heard in sorted(self.last_heard.items()):
            if self.engine.clock - heard > silence:
                del self.last_heard[nbr]
                self._break_routes_via(nbr)

    def _break_routes_via(self, next_hop: int) -> None:
        for dest in sorted(self.table):
            entry = self.table[dest]
            if entry.valid and dest != self.node_id and entry.next_hop == next_hop:
                entry.valid = False
                entry.metric = METRIC_INF
                entry.sequence = (entry.sequence + 1) % (1 << 16)
                self._mark_changed(dest)

    def on_link_failure(self, next_hop: int, packet: Packet) -> None:
        self._break_routes_via(next_hop)
        self.engine.drop(packet, self.node_id, "link-break")

    # -- data plane -------------------------------------------------------------

    def route_next_hop(self, dst: int) -> Optional[int]:
        entry = self.table.get(dst)
        if entry is None or not entry.valid or entry.metric >= METRIC_INF:
            return None
        return entry.next_hop
