"""Planar link geometry for vehicle pairs sharing a radio channel.

A single mobility step of two vehicles A and B is described by their
separation at the start of the step, the straight-line displacement each
covers during the step, and the heading of each displacement measured from
the A-B sight line: ``angle_a`` at A from the ray A->B, ``angle_b`` at B
from the ray B->A, both displacements on the same side of the line.
All angles are degrees; distances are meters; durations are seconds.

Two routes compute the end-of-step separation: an exact cosine/sine-law
chain (`displaced_distance_exact`, cross-checked coordinate-wise by
`displaced_distance_coords`) and the four per-heading-case projection
formulas (`displaced_distance_case`).  The projection formulas are kept
verbatim for diagnostic comparison; the exact form is authoritative.  The
acute/acute projection is known to degenerate (it can produce negative
separations) and is deliberately not "fixed".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

__all__ = [
    "GeometryError",
    "LinkBrokenError",
    "Position",
    "KinematicState",
    "StepGeometry",
    "AngleCase",
    "CrossDistances",
    "LinkEpisode",
    "classify_case",
    "cross_distance",
    "cross_angle",
    "cross_distances",
    "displacement_endpoints",
    "displaced_distance_coords",
    "displaced_distance_exact",
    "displaced_distance_case",
    "residual_range",
    "link_duration",
    "exact_link_expiry",
    "path_stability",
    "relative_speed",
]

# Mutual-agreement guard between the two cosine-law evaluations inside
# displaced_distance_exact.  Looser than the test tolerance on purpose:
# exceeding it means the inputs left the regime where the principal-value
# sine law is a faithful reconstruction.
_EXACT_AGREEMENT_RTOL = 1e-6


class GeometryError(ValueError):
    """Inputs describe an impossible or inconsistent planar configuration."""


class LinkBrokenError(ValueError):
    """Separation already exceeds the radio range."""


@dataclass(frozen=True)
class Position:
    """A point in the plane, meters."""

    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position coordinates must be finite, got {self}")


@dataclass(frozen=True)
class KinematicState:
    """Position plus instantaneous velocity of one vehicle."""

    position: Position
    velocity: tuple[float, float]

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])

    def __post_init__(self) -> None:
        vx, vy = self.velocity
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise ValueError(f"velocity must be finite, got {self.velocity}")

    def position_at(self, dt: float) -> Position:
        """Position after coasting for ``dt`` seconds at constant velocity."""
        return Position(self.position.x + self.velocity[0] * dt,
                        self.position.y + self.velocity[1] * dt)


@dataclass(frozen=True)
class StepGeometry:
    """One mobility step of a vehicle pair.

    ``separation`` is the A-B distance at the start of the step;
    ``disp_a``/``disp_b`` are the straight-line displacements each vehicle
    covers; ``angle_a``/``angle_b`` are the displacement headings in degrees,
    measured from the ray A->B at A and from the ray B->A at B, strictly
    inside (0, 180).
    """

    separation: float
    disp_a: float
    angle_a: float
    disp_b: float
    angle_b: float

    def __post_init__(self) -> None:
        if not (self.separation > 0 and math.isfinite(self.separation)):
            raise ValueError(f"separation must be positive, got {self.separation}")
        if self.disp_a < 0 or self.disp_b < 0:
            raise ValueError("displacements must be non-negative")
        for name, angle in (("angle_a", self.angle_a), ("angle_b", self.angle_b)):
            if not 0.0 < angle < 180.0:
                raise ValueError(f"{name} must lie strictly in (0, 180), got {angle}")


class AngleCase(Enum):
    """Heading-angle class of one step: obtuse/acute per vehicle."""

    OBTUSE_OBTUSE = "obtuse-obtuse"
    ACUTE_ACUTE = "acute-acute"
    ACUTE_OBTUSE = "acute-obtuse"
    OBTUSE_ACUTE = "obtuse-acute"


@dataclass(frozen=True)
class CrossDistances:
    """Cross diagonals and sight-line shift angles of one step.

    ``a_start_b_end`` is the distance from A's start to B's end,
    ``b_start_a_end`` from B's start to A's end.  ``shift_at_a`` is the
    rotation, seen from A's start, between the sight lines to B's start
    and B's end (principal value, degrees in [0, 90]); ``shift_at_b``
    likewise at B's start toward A.
    """

    a_start_b_end: float
    b_start_a_end: float
    shift_at_a: float
    shift_at_b: float


@dataclass(frozen=True)
class LinkEpisode:
    """A maximal interval during which two nodes stay within radio range."""

    node_a: int
    node_b: int
    start: float
    end: float
    predicted_duration: float
    measured_duration: float

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"episode ends before it starts: {self}")
        if abs(self.measured_duration - (self.end - self.start)) > 1e-9:
            raise ValueError("measured_duration must equal end - start")
        if self.predicted_duration < 0:
            raise ValueError("predicted_duration must be non-negative")


def classify_case(angle_a: float, angle_b: float) -> AngleCase:
    """Class of a step by its two heading angles (degrees).

    An angle of exactly 90 degrees counts as acute so the four cases tile
    the whole (0, 180) x (0, 180) square.
    """
    for name, angle in (("angle_a", angle_a), ("angle_b", angle_b)):
        if not 0.0 < angle < 180.0:
            raise ValueError(f"{name} must lie strictly in (0, 180), got {angle}")
    a_obtuse = angle_a > 90.0
    b_obtuse = angle_b > 90.0
    if a_obtuse and b_obtuse:
        return AngleCase.OBTUSE_OBTUSE
    if not a_obtuse and not b_obtuse:
        return AngleCase.ACUTE_ACUTE
    if not a_obtuse:
        return AngleCase.ACUTE_OBTUSE
    return AngleCase.OBTUSE_ACUTE


def cross_distance(separation: float, disp: float, angle: float) -> float:
    """Third side of the start/displacement triangle, by the cosine law.

    With one vehicle fixed, the other moves ``disp`` meters at ``angle``
    degrees off the sight line; the result is the fixed vehicle's distance
    to the moved endpoint.
    """
    if separation <= 0:
        raise ValueError(f"separation must be positive, got {separation}")
    if disp < 0:
        raise ValueError(f"displacement must be non-negative, got {disp}")
    return math.sqrt(separation * separation + disp * disp
                     - 2.0 * separation * disp * math.cos(math.radians(angle)))


def cross_angle(disp: float, angle: float, cross: float) -> float:
    """Sight-line shift opposite ``disp`` in the same triangle, by the sine law.

    Returns the principal value in degrees, [0, 90].  Raises GeometryError
    when the sine-law argument exceeds 1, i.e. when ``cross`` cannot be the
    side opposite ``angle``.
    """
    if cross <= 0:
        raise ValueError(f"cross distance must be positive, got {cross}")
    if disp < 0:
        raise ValueError(f"displacement must be non-negative, got {disp}")
    arg = disp * math.sin(math.radians(angle)) / cross
    if arg > 1.0 + 1e-9:
        raise GeometryError(
            f"sine-law argument {arg} exceeds 1; triangle sides are inconsistent")
    return math.degrees(math.asin(min(arg, 1.0)))


def cross_distances(geometry: StepGeometry) -> CrossDistances:
    """Both cross diagonals and shift angles of one step."""
    a_start_b_end = cross_distance(geometry.separation, geometry.disp_b,
                                   geometry.angle_b)
    b_start_a_end = cross_distance(geometry.separation, geometry.disp_a,
                                   geometry.angle_a)
    shift_at_a = cross_angle(geometry.disp_b, geometry.angle_b, a_start_b_end)
    shift_at_b = cross_angle(geometry.disp_a, geometry.angle_a, b_start_a_end)
    return CrossDistances(a_start_b_end, b_start_a_end, shift_at_a, shift_at_b)


def displacement_endpoints(geometry: StepGeometry) -> tuple[Position, Position]:
    """End-of-step positions with A's start at the origin and B's start at
    (separation, 0); both displacements are applied toward positive y."""
    a_rad = math.radians(geometry.angle_a)
    b_rad = math.radians(geometry.angle_b)
    a_end = Position(geometry.disp_a * math.cos(a_rad),
                     geometry.disp_a * math.sin(a_rad))
    b_end = Position(geometry.separation - geometry.disp_b * math.cos(b_rad),
                     geometry.disp_b * math.sin(b_rad))
    return a_end, b_end


def displaced_distance_coords(geometry: StepGeometry) -> float:
    """End-of-step separation by direct coordinate placement."""
    a_end, b_end = displacement_endpoints(geometry)
    return a_end.distance_to(b_end)


def displaced_distance_exact(geometry: StepGeometry) -> float:
    """End-of-step separation via the cosine-law chain.

    Evaluates the chain from both endpoints (via A's displacement against
    the cross diagonal to B's end, and symmetrically from B) and requires
    the two to agree; disagreement means the step left the regime where the
    principal-value shift angles are faithful and raises GeometryError.
    """
    cd = cross_distances(geometry)
    from_a = _law_of_cosines(geometry.disp_a, cd.a_start_b_end,
                             geometry.angle_a - cd.shift_at_a)
    from_b = _law_of_cosines(geometry.disp_b, cd.b_start_a_end,
                             geometry.angle_b - cd.shift_at_b)
    scale = max(from_a, from_b, 1.0)
    if abs(from_a - from_b) > _EXACT_AGREEMENT_RTOL * scale:
        raise GeometryError(
            f"cosine-law evaluations disagree ({from_a} vs {from_b}); "
            "geometry outside the principal-value regime")
    return from_a


def _law_of_cosines(side_a: float, side_b: float, angle_deg: float) -> float:
    return math.sqrt(side_a * side_a + side_b * side_b
                     - 2.0 * side_a * side_b * math.cos(math.radians(angle_deg)))


def displaced_distance_case(case: AngleCase, geometry: StepGeometry,
                            cd: CrossDistances) -> float:
    """End-of-step separation by the per-case projection formula, verbatim.

    These are the diagnostic formulas, not the authoritative separation:
    they project each displacement onto the sight line and are exact only
    for collinear motion.  The acute/acute variant is known to degenerate
    (it flips sign for symmetric closing motion); it is evaluated literally
    and compared against `displaced_distance_exact` elsewhere.
    """
    if case is not classify_case(geometry.angle_a, geometry.angle_b):
        raise ValueError(f"case {case} does not match geometry angles "
                         f"({geometry.angle_a}, {geometry.angle_b})")
    sep = geometry.separation
    if case is AngleCase.OBTUSE_OBTUSE:
        return (sep
                + geometry.disp_a * _cos_deg(180.0 - geometry.angle_a)
                + geometry.disp_b * _cos_deg(180.0 - geometry.angle_b))
    if case is AngleCase.ACUTE_ACUTE:
        return (sep
                + cd.a_start_b_end * _cos_deg(180.0 - cd.shift_at_a)
                + cd.b_start_a_end * _cos_deg(180.0 - cd.shift_at_b))
    if case is AngleCase.ACUTE_OBTUSE:
        return (sep
                - geometry.disp_a * _cos_deg(geometry.angle_a)
                + geometry.disp_b * _cos_deg(180.0 - geometry.angle_b))
    return (sep
            + geometry.disp_a * _cos_deg(180.0 - geometry.angle_a)
            - geometry.disp_b * _cos_deg(geometry.angle_b))


def _cos_deg(angle_deg: float) -> float:
    return math.cos(math.radians(angle_deg))


def residual_range(radio_range: float, separation: float) -> float:
    """Remaining distance budget before the pair leaves radio range."""
    if radio_range <= 0:
        raise ValueError(f"radio range must be positive, got {radio_range}")
    if separation > radio_range:
        raise LinkBrokenError(
            f"separation {separation} already exceeds range {radio_range}")
    return radio_range - separation


def link_duration(distance: float, speed: float, horizon: float) -> float:
    """Predicted time to consume ``distance`` at relative ``speed``.

    Capped at ``horizon`` so a non-separating pair yields a finite,
    comparable duration instead of infinity.
    """
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if speed < 0:
        raise ValueError(f"speed must be non-negative, got {speed}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if speed == 0.0:
        return horizon
    return min(distance / speed, horizon)


def exact_link_expiry(a: KinematicState, b: KinematicState,
                      radio_range: float, horizon: float) -> float:
    """First time the pair's separation exceeds the range, assuming both
    keep their current velocities.

    Solves the quadratic |relative position + t * relative velocity| = range
    for its larger root; returns ``horizon`` when the pair never separates
    beyond the range within the horizon.
    """
    if radio_range <= 0:
        raise ValueError(f"radio range must be positive, got {radio_range}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    px = a.position.x - b.position.x
    py = a.position.y - b.position.y
    vx = a.velocity[0] - b.velocity[0]
    vy = a.velocity[1] - b.velocity[1]
    sep_sq = px * px + py * py
    if sep_sq > radio_range * radio_range * (1.0 + 1e-12):
        raise LinkBrokenError(
            f"pair starts out of range (separation {math.sqrt(sep_sq)}, "
            f"range {radio_range})")
    quad = vx * vx + vy * vy
    if quad == 0.0:
        return horizon
    half_lin = px * vx + py * vy
    const = sep_sq - radio_range * radio_range
    disc = half_lin * half_lin - quad * const
    root = math.sqrt(max(disc, 0.0))
    # Larger root of quad*t^2 + 2*half_lin*t + const = 0, picked in the
    # cancellation-free form for either sign of the linear term.
    if half_lin <= 0.0:
        expiry = (-half_lin + root) / quad
    else:
        denom = -half_lin - root
        expiry = const / denom if denom != 0.0 else 0.0
    expiry = max(expiry, 0.0)
    return min(expiry, horizon)


def path_stability(links: Sequence[LinkEpisode]) -> float:
    """Bottleneck predicted duration along a multi-hop path."""
    if not links:
        raise ValueError("path stability of an empty path is undefined")
    for prev, cur in zip(links, links[1:]):
        if not {prev.node_a, prev.node_b} & {cur.node_a, cur.node_b}:
            raise ValueError(
                f"links {prev} and {cur} do not share an endpoint; not a path")
    return min(link.predicted_duration for link in links)


def relative_speed(a: KinematicState, b: KinematicState) -> float:
    """Magnitude of the velocity difference of two vehicles."""
    return math.hypot(a.velocity[0] - b.velocity[0],
                      a.velocity[1] - b.velocity[1])
