"""Seedable vehicle traces on a synthetic Manhattan road grid.

Vehicles run at a single configured speed along grid segments and pick a
uniformly random permitted turn at each intersection (no immediate U-turn
unless the intersection is a dead end).  Turns are decided only at sample
instants: a vehicle reaching an intersection mid-interval waits there for
the remainder of the interval, so every sampled interval is a straight
run along one segment and linear interpolation between samples never
leaves the road network.

Each vehicle draws from its own random substream keyed by (seed, node id),
so a node's trace does not depend on how many other nodes the scenario has.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .link_kinematics import KinematicState, Position

__all__ = [
    "RoadGrid",
    "MobilityConfig",
    "VehicleTrace",
    "build_grid",
    "generate_traces",
    "state_at",
    "constant_velocity_trace",
    "save_traces",
    "load_traces",
]

# Candidate travel directions in canonical order: east, north, west, south.
_DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass(frozen=True)
class RoadGrid:
    """Axis-aligned road grid: ``rows`` horizontal and ``cols`` vertical
    roads with uniform ``spacing`` meters between adjacent parallel roads."""

    rows: int
    cols: int
    spacing: float

    def __post_init__(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid needs at least 2x2 roads, got "
                             f"{self.rows}x{self.cols}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.cols - 1) * self.spacing, (self.rows - 1) * self.spacing)

    @property
    def intersection_count(self) -> int:
        return self.rows * self.cols

    @property
    def segment_count(self) -> int:
        return self.rows * (self.cols - 1) + self.cols * (self.rows - 1)

    def intersection(self, col: int, row: int) -> Position:
        return Position(col * self.spacing, row * self.spacing)

    def permitted_directions(self, col: int, row: int) -> list[tuple[int, int]]:
        """Outgoing travel directions that stay on the grid."""
        out = []
        for dx, dy in _DIRECTIONS:
            if 0 <= col + dx < self.cols and 0 <= row + dy < self.rows:
                out.append((dx, dy))
        return out


@dataclass(frozen=True)
class MobilityConfig:
    node_count: int
    speed: float
    seed: int
    duration: float
    sample_interval: float = 1.0

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ValueError(f"need at least 2 nodes, got {self.node_count}")
        if self.speed <= 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")


@dataclass
class VehicleTrace:
    """Time-ordered kinematic samples of one vehicle."""

    node: int
    samples: list[tuple[float, KinematicState]] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return self.samples[-1][0] if self.samples else 0.0

    def times(self) -> list[float]:
        return [t for t, _ in self.samples]

    def position_array(self) -> np.ndarray:
        """(n, 2) array of sampled positions, for vectorized pair scans."""
        return np.array([[s.position.x, s.position.y] for _, s in self.samples])


def build_grid(rows: int, cols: int, spacing: float) -> RoadGrid:
    """Validated road grid; see RoadGrid for the counting conventions."""
    return RoadGrid(rows=rows, cols=cols, spacing=spacing)


def generate_traces(grid: RoadGrid, cfg: MobilityConfig) -> list[VehicleTrace]:
    """One deterministic trace per node, sampled every ``sample_interval``."""
    steps = int(math.floor(cfg.duration / cfg.sample_interval + 1e-9))
    return [_walk_one(grid, cfg, node, steps) for node in range(cfg.node_count)]


def _walk_one(grid: RoadGrid, cfg: MobilityConfig, node: int,
              steps: int) -> VehicleTrace:
    rng = np.random.default_rng([cfg.seed, 1, node])
    dt = cfg.sample_interval

    col = int(rng.integers(grid.cols))
    row = int(rng.integers(grid.rows))
    options = grid.permitted_directions(col, row)
    direction = options[int(rng.integers(len(options)))]
    travelled = 0.0  # meters along the current segment, from (col, row)
    at_node = False  # True when parked on an intersection awaiting a turn

    samples: list[tuple[float, KinematicState]] = []
    for k in range(steps + 1):
        if at_node:
            options = grid.permitted_directions(col, row)
            reverse = (-direction[0], -direction[1])
            forward = [d for d in options if d != reverse]
            choices = forward if forward else options
            direction = choices[int(rng.integers(len(choices)))]
            at_node = False

        base = grid.intersection(col, row)
        pos = Position(base.x + direction[0] * travelled,
                       base.y + direction[1] * travelled)
        vel = (direction[0] * cfg.speed, direction[1] * cfg.speed)
        samples.append((k * dt, KinematicState(pos, vel)))
        if k == steps:
            break

        to_next = grid.spacing - travelled
        move = min(cfg.speed * dt, to_next)
        travelled += move
        if to_next - move <= 1e-9 * grid.spacing:
            col += direction[0]
            row += direction[1]
            travelled = 0.0
            at_node = True
    return VehicleTrace(node=node, samples=samples)


def state_at(trace: VehicleTrace, t: float) -> KinematicState:
    """State at time ``t`` by linear interpolation between samples.

    Exactly at a sample instant the stored sample is returned; inside an
    interval the velocity is the interval's average motion, which matches
    the interpolated positions.
    """
    times = trace.times()
    if not times:
        raise ValueError(f"trace for node {trace.node} has no samples")
    if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        raise ValueError(f"time {t} outside trace span "
                         f"[{times[0]}, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    idx = bisect_right(times, t) - 1
    if idx >= len(times) - 1:
        return trace.samples[-1][1]
    t0, s0 = trace.samples[idx]
    t1, s1 = trace.samples[idx + 1]
    if t == t0:
        return s0
    span = t1 - t0
    u = (t - t0) / span
    vx = (s1.position.x - s0.position.x) / span
    vy = (s1.position.y - s0.position.y) / span
    pos = Position(s0.position.x + vx * (t - t0),
                   s0.position.y + vy * (t - t0))
    return KinematicState(pos, (vx, vy))


def constant_velocity_trace(node: int, start: Position,
                            velocity: tuple[float, float], duration: float,
                            sample_interval: float = 1.0) -> VehicleTrace:
    """Synthetic straight-line trace; handy for static and hand-built
    scenarios (velocity (0, 0) gives a parked vehicle)."""
    steps = int(math.floor(duration / sample_interval + 1e-9))
    samples = []
    for k in range(steps + 1):
        t = k * sample_interval
        pos = Position(start.x + velocity[0] * t, start.y + velocity[1] * t)
        samples.append((t, KinematicState(pos, velocity)))
    return VehicleTrace(node=node, samples=samples)


_TRACE_HEADER = ["time_s", "node", "x_m", "y_m", "vx_mps", "vy_mps"]


def save_traces(traces: Iterable[VehicleTrace], fh: IO[str]) -> None:
    """Write traces as CSV: time_s,node,x_m,y_m,vx_mps,vy_mps."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_TRACE_HEADER)
    for trace in traces:
        for t, state in trace.samples:
            writer.writerow([t, trace.node, state.position.x, state.position.y,
                             state.velocity[0], state.velocity[1]])


def load_traces(fh: IO[str]) -> list[VehicleTrace]:
    """Read traces written by `save_traces`."""
    reader = csv.reader(fh)
    header = next(reader)
    if header != _TRACE_HEADER:
        raise ValueError(f"unexpected trace header: {header}")
    by_node: dict[int, VehicleTrace] = {}
    for rec in reader:
        t, node = float(rec[0]), int(rec[1])
        state = KinematicState(Position(float(rec[2]), float(rec[3])),
                               (float(rec[4]), float(rec[5])))
        by_node.setdefault(node, VehicleTrace(node=node)).samples.append((t, state))
    return [by_node[n] for n in sorted(by_node)]
