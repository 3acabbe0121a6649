"""Cavity contours, ground split, material constants and the initial stress.

Points in the physical plane are plain Python/numpy complex numbers
``z = x + iy`` with the ground surface on the real axis and the
geomaterial below it (``y <= 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import (
    AboveGround,
    DensityTooLow,
    FilletTooLarge,
    GeometryError,
    OpenContour,
)

CLOSURE_TOL = 1e-9
TANGENT_TOL = 1e-6
DEFAULT_FILLET_RADIUS = 0.5


def _wrap(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class Line:
    start: complex
    end: complex

    def __post_init__(self):
        object.__setattr__(self, "start", complex(self.start))
        object.__setattr__(self, "end", complex(self.end))
        if abs(self.end - self.start) == 0.0:
            raise GeometryError("line segment has zero length")

    @property
    def length(self) -> float:
        return abs(self.end - self.start)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.start + (self.end - self.start) * t

    def tangent(self, t):
        d = (self.end - self.start) / self.length
        return np.full(np.shape(t), d, dtype=complex)

    def reversed(self) -> "Line":
        return Line(self.end, self.start)

    def green_term(self) -> float:
        a, b = self.start, self.end
        return 0.5 * (a.real * b.imag - a.imag * b.real)

    def max_imag(self) -> float:
        return max(self.start.imag, self.end.imag)


@dataclass(frozen=True)
class Arc:
    """Circular arc ``center + radius * exp(i*theta)``.

    ``sweep`` is signed: positive for counterclockwise travel.
    """

    center: complex
    radius: float
    start_angle: float
    sweep: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.radius > 0:
            raise GeometryError("arc radius must be positive")
        if self.sweep == 0:
            raise GeometryError("arc has zero sweep")

    @classmethod
    def through(cls, center, radius, start, end, ccw=True) -> "Arc":
        """Arc from point ``start`` to ``end`` around ``center``."""
        a0 = math.atan2((start - center).imag, (start - center).real)
        a1 = math.atan2((end - center).imag, (end - center).real)
        sweep = (a1 - a0) % (2 * math.pi)
        if not ccw:
            sweep -= 2 * math.pi
        return cls(center, radius, a0, sweep)

    @property
    def end_angle(self) -> float:
        return self.start_angle + self.sweep

    @property
    def sweep_sign(self) -> int:
        return 1 if self.sweep > 0 else -1

    @property
    def start(self) -> complex:
        return self.center + self.radius * complex(math.cos(self.start_angle), math.sin(self.start_angle))

    @property
    def end(self) -> complex:
        return self.center + self.radius * complex(math.cos(self.end_angle), math.sin(self.end_angle))

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point(self, t):
        th = self.start_angle + self.sweep * np.asarray(t, dtype=float)
        return self.center + self.radius * np.exp(1j * th)

    def tangent(self, t):
        th = self.start_angle + self.sweep * np.asarray(t, dtype=float)
        return 1j * self.sweep_sign * np.exp(1j * th)

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.end_angle, -self.sweep)

    def green_term(self) -> float:
        c, r = self.center, self.radius
        e0 = np.exp(1j * self.start_angle)
        e1 = np.exp(1j * self.end_angle)
        return 0.5 * ((r * c.conjugate() * (e1 - e0)).imag + r * r * self.sweep)

    def max_imag(self) -> float:
        lo, hi = sorted((self.start_angle, self.end_angle))
        # any angle pi/2 + 2k*pi inside the swept interval is the arc's top
        k = math.ceil((lo - math.pi / 2) / (2 * math.pi))
        if math.pi / 2 + 2 * math.pi * k <= hi:
            return self.center.imag + self.radius
        return max(self.start.imag, self.end.imag)


Segment = Union[Line, Arc]


def _turn(seg_a: Segment, seg_b: Segment) -> float:
    ta = complex(seg_a.tangent(1.0))
    tb = complex(seg_b.tangent(0.0))
    return float(np.angle(tb / ta))


def _check_closed(segments: Sequence[Segment]) -> None:
    n = len(segments)
    for i, seg in enumerate(segments):
        gap = abs(seg.end - segments[(i + 1) % n].start)
        if gap > CLOSURE_TOL:
            raise OpenContour(f"segment {i} ends {gap:.3e} m away from the next start")


def _polyline(segments: Sequence[Segment], per_segment: int = 64) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_segment, endpoint=False)
    return np.concatenate([seg.point(t) for seg in segments])


def _is_simple(poly: np.ndarray) -> bool:
    a = poly
    b = np.roll(poly, -1)
    n = len(a)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    dx, dy = bx - ax, by - ay

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    o1 = orient(ax[i], ay[i], bx[i], by[i], ax[j], ay[j])
    o2 = orient(ax[i], ay[i], bx[i], by[i], bx[j], by[j])
    o3 = orient(ax[j], ay[j], bx[j], by[j], ax[i], ay[i])
    o4 = orient(ax[j], ay[j], bx[j], by[j], bx[i], by[i])
    del dx, dy
    return not np.any((o1 * o2 < 0) & (o3 * o4 < 0))


@dataclass(frozen=True)
class StageBoundary:
    """Closed, tangent-continuous cavity contour of one excavation stage.

    Segments are stored counterclockwise; construction reverses a clockwise
    input. Use :meth:`clockwise_segments` where the integration direction
    requires it.
    """

    segments: tuple
    stage_index: int = 1

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise GeometryError("a stage boundary needs at least one segment")
        _check_closed(segs)
        area = sum(s.green_term() for s in segs)
        if area < 0:
            segs = tuple(s.reversed() for s in reversed(segs))
        n = len(segs)
        for i in range(n):
            turn = _turn(segs[i], segs[(i + 1) % n])
            if abs(turn) >= TANGENT_TOL:
                raise GeometryError(
                    f"sharp corner of {math.degrees(turn):.3f} deg after segment {i}; fillet it first"
                )
        if max(s.max_imag() for s in segs) >= 0.0:
            raise GeometryError("cavity contour must lie strictly below the ground surface")
        if not _is_simple(_polyline(segs)):
            raise GeometryError("cavity contour intersects itself")
        if self.stage_index < 1:
            raise GeometryError("stage_index starts at 1")
        object.__setattr__(self, "segments", segs)

    @property
    def perimeter(self) -> float:
        return sum(s.length for s in self.segments)

    def clockwise_segments(self) -> tuple:
        return tuple(s.reversed() for s in reversed(self.segments))

    def point_at(self, s):
        """Point and unit ccw tangent at arclength ``s`` from the first segment start."""
        s = np.atleast_1d(np.asarray(s, dtype=float)) % self.perimeter
        lengths = np.array([seg.length for seg in self.segments])
        edges = np.concatenate([[0.0], np.cumsum(lengths)])
        idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(lengths) - 1)
        pts = np.empty(s.shape, dtype=complex)
        tan = np.empty(s.shape, dtype=complex)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                t = (s[m] - edges[k]) / lengths[k]
                pts[m] = seg.point(t)
                tan[m] = seg.tangent(t)
        return pts, tan

    def bounds(self):
        poly = _polyline(self.segments, 256)
        return poly.real.min(), poly.real.max(), poly.imag.min(), poly.imag.max()

    @property
    def crown_depth(self) -> float:
        return -max(s.max_imag() for s in self.segments)

    def centroid(self) -> complex:
        poly = _polyline(self.segments, 256)
        nxt = np.roll(poly, -1)
        cross = poly.real * nxt.imag - nxt.real * poly.imag
        a = cross.sum() / 2
        cx = ((poly.real + nxt.real) * cross).sum() / (6 * a)
        cy = ((poly.imag + nxt.imag) * cross).sum() / (6 * a)
        return complex(cx, cy)

    def contains(self, z) -> bool:
        poly = _polyline(self.segments, 256)
        x, y = complex(z).real, complex(z).imag
        xs, ys = poly.real, poly.imag
        xn, yn = np.roll(xs, -1), np.roll(ys, -1)
        crosses = ((ys > y) != (yn > y)) & (x < (xn - xs) * (y - ys) / (yn - ys + 1e-300) + xs)
        return bool(np.count_nonzero(crosses) % 2)


@dataclass(frozen=True)
class GroundSplit:
    """Free ground segment ``[-x0, x0]``; the rest of the surface is fixed."""

    x0: float

    def __post_init__(self):
        if not self.x0 > 0:
            raise GeometryError("x0 must be positive")

    @property
    def T1(self) -> complex:
        return complex(-self.x0, 0.0)

    @property
    def T2(self) -> complex:
        return complex(self.x0, 0.0)

    def check_spans(self, boundary: StageBoundary) -> None:
        xmin, xmax, _, _ = boundary.bounds()
        if not self.x0 > max(abs(xmin), abs(xmax)):
            raise GeometryError(
                f"x0 = {self.x0} does not span the cavity (|x| up to {max(abs(xmin), abs(xmax)):.3f})"
            )


@dataclass(frozen=True)
class Material:
    """Unit weight ``gamma`` (kN/m^3), lateral coefficient ``kx``,
    Young's modulus ``E`` (kPa) and Poisson ratio ``nu``; plane strain."""

    gamma: float = 20.0
    kx: float = 0.8
    E: float = 20e3
    nu: float = 0.3

    def __post_init__(self):
        if self.gamma < 0:
            raise GeometryError("gamma must be non-negative")
        if not self.kx > 0:
            raise GeometryError("kx must be positive")
        if not self.E > 0:
            raise GeometryError("E must be positive")
        if not 0 < self.nu < 0.5:
            raise GeometryError("nu must lie in (0, 0.5)")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def kappa(self) -> float:
        return 3.0 - 4.0 * self.nu


# --------------------------------------------------------------------------
# fillets


def _fillet_lines(a: Line, b: Line, r: float):
    d1 = (a.end - a.start) / a.length
    d2 = (b.end - b.start) / b.length
    turn = float(np.angle(d2 / d1))
    setback = r * math.tan(abs(turn) / 2)
    corner = a.end
    p1 = corner - setback * d1
    p2 = corner + setback * d2
    normal = 1j * d1 if turn > 0 else -1j * d1
    center = p1 + r * normal
    start_angle = math.atan2((p1 - center).imag, (p1 - center).real)
    return setback, Arc(center, r, start_angle, turn)


def fillet_corners(raw_segments: Sequence[Segment], radius_per_corner=None, stage_index: int = 1) -> StageBoundary:
    """Round the sharp junctions of a closed arc/line loop.

    ``radius_per_corner`` holds one entry per junction (junction ``i`` joins
    segment ``i`` to segment ``i+1``); ``None`` or ``0`` leaves a junction
    alone. A scalar applies to every sharp junction; ``None`` for the whole
    argument means the default 0.5 m. Only line-line corners can be rounded.
    """
    segs = list(raw_segments)
    if not segs:
        raise GeometryError("no segments given")
    _check_closed(segs)
    n = len(segs)
    sharp = [abs(_turn(segs[i], segs[(i + 1) % n])) >= TANGENT_TOL for i in range(n)]
    if radius_per_corner is None:
        radii = [DEFAULT_FILLET_RADIUS if s else None for s in sharp]
    elif np.isscalar(radius_per_corner):
        radii = [float(radius_per_corner) if s else None for s in sharp]
    else:
        radii = list(radius_per_corner)
        if len(radii) == 0:
            radii = [None] * n
        if len(radii) != n:
            raise GeometryError(f"expected {n} corner radii, got {len(radii)}")

    trim_start = [0.0] * n
    trim_end = [0.0] * n
    arcs = [None] * n
    for i, r in enumerate(radii):
        if not r:
            continue
        a, b = segs[i], segs[(i + 1) % n]
        if not sharp[i]:
            continue
        if not (isinstance(a, Line) and isinstance(b, Line)):
            raise GeometryError(f"junction {i}: only line-line corners can be filleted")
        setback, arc = _fillet_lines(a, b, r)
        trim_end[i] = setback
        trim_start[(i + 1) % n] = setback
        arcs[i] = arc

    out = []
    for i, seg in enumerate(segs):
        if isinstance(seg, Line):
            used = trim_start[i] + trim_end[i]
            if used > seg.length + 1e-12:
                raise FilletTooLarge(
                    f"segment {i} has length {seg.length:.4f} m but its fillets need {used:.4f} m"
                )
            d = (seg.end - seg.start) / seg.length
            if seg.length - used > 1e-12:
                out.append(Line(seg.start + trim_start[i] * d, seg.end - trim_end[i] * d))
        else:
            out.append(seg)
        if arcs[i] is not None:
            out.append(arcs[i])
    # snap consecutive endpoints together so closure holds to rounding
    for i in range(len(out)):
        nxt = out[(i + 1) % len(out)]
        if isinstance(nxt, Line) and abs(nxt.start - out[i].end) > 0:
            out[(i + 1) % len(out)] = Line(out[i].end, nxt.end)
    return StageBoundary(tuple(out), stage_index=stage_index)


# --------------------------------------------------------------------------
# collocation


@dataclass(frozen=True)
class DensitySpec:
    """Collocation counts: per quarter-turn of arc (small/large radius) and per line."""

    small_arc: int = 30
    large_arc: int = 90
    line: int = 60
    small_arc_radius: float = 1.0

    def count(self, seg: Segment) -> int:
        if isinstance(seg, Line):
            n = self.line
        else:
            per_quarter = self.small_arc if seg.radius <= self.small_arc_radius else self.large_arc
            n = int(round(per_quarter * abs(seg.sweep) / (math.pi / 2)))
        if n < 3:
            raise DensityTooLow(f"segment needs at least 3 collocation points, density gives {n}")
        return n


MAX_TURN_DEG = 10.0
MAX_CHORD_SHARE = 1e-2


def density_report(points) -> tuple:
    """Largest chord-direction change (deg) and largest chord share of a closed point loop."""
    p = np.asarray(points, dtype=complex)
    chords = np.roll(p, -1) - p
    if np.any(np.abs(chords) == 0):
        raise DensityTooLow("coincident consecutive collocation points")
    turn = np.degrees(np.abs(np.angle(np.roll(chords, -1) / chords)))
    share = np.abs(chords) / np.abs(chords).sum()
    return float(turn.max()), float(share.max())


def check_density(points, max_turn_deg=MAX_TURN_DEG, max_share=MAX_CHORD_SHARE) -> None:
    turn, share = density_report(points)
    if turn > max_turn_deg:
        raise DensityTooLow(f"turning angle {turn:.2f} deg between chords exceeds {max_turn_deg} deg")
    if share > max_share:
        raise DensityTooLow(f"chord share {share:.3e} of the perimeter exceeds {max_share:.0e}")


def collocation_points(boundary, density: Optional[DensitySpec] = None, check: bool = True) -> np.ndarray:
    """Counterclockwise collocation points, uniform within each segment.

    ``boundary`` may also be a circle given as ``(center, radius, n)``.
    """
    if isinstance(boundary, tuple):
        center, radius, n = boundary
        pts = complex(center) + radius * np.exp(2j * np.pi * np.arange(int(n)) / int(n))
    else:
        density = density or DensitySpec()
        chunks = []
        for seg in boundary.segments:
            n = density.count(seg)
            chunks.append(seg.point(np.arange(n) / n))
        pts = np.concatenate(chunks)
    if check:
        check_density(pts)
    return pts


# --------------------------------------------------------------------------
# areas and initial state


def region_area(boundary: StageBoundary) -> float:
    return abs(sum(s.green_term() for s in boundary.segments))


def initial_stress_at(z, mat: Material):
    """Geostatic stresses (sigma_x, sigma_y, tau_xy) in kPa, tension positive."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag > 0):
        raise AboveGround("initial stress requested above the ground surface")
    y = z.imag
    sy = mat.gamma * y
    return mat.kx * sy, sy, np.zeros_like(sy)


def initial_traction(boundary: StageBoundary, s, mat: Material):
    """Initial-field traction (X_b, Y_b) on the cavity wall at arclength ``s``.

    The normal points out of the excavated region into the ground, i.e. it
    is ``(dy/dS, -dx/dS)`` for clockwise travel along the contour.
    """
    z, tan = boundary.point_at(s)
    sx, sy, txy = initial_stress_at(z, mat)
    n = -1j * tan  # right-hand normal of ccw travel
    xb = sx * n.real + txy * n.imag
    yb = txy * n.real + sy * n.imag
    return xb, yb


# --------------------------------------------------------------------------
# four-stage benchmark


def _dome(half: bool = True) -> Arc:
    c = complex(0.0, -10.0)
    if half:
        return Arc(c, 5.0, 0.0, math.pi)
    return Arc(c, 5.0, math.pi / 2, math.pi / 2)


def _loop(points, head: Arc):
    segs = [head]
    for a, b in zip(points[:-1], points[1:]):
        segs.append(Line(a, b))
    return segs


def benchmark_raw(stage: int):
    """Sharp-cornered loop for a benchmark stage, dome first, counterclockwise."""
    if stage == 1:
        pts = [-5 - 10j, -5 - 10.5j, 0.5 - 10.5j, 0.5 - 5j, 0 - 5j]
        return _loop(pts, _dome(half=False))
    if stage == 2:
        pts = [-5 - 10j, -5 - 10.5j, 5 - 10.5j, 5 - 10j]
        return _loop(pts, _dome())
    if stage == 3:
        pts = [-5 - 10j, -5 - 15j, 0.5 - 15j, 0.5 - 10.5j, 5 - 10.5j, 5 - 10j]
        return _loop(pts, _dome())
    if stage == 4:
        pts = [-5 - 10j, -5 - 15j, 5 - 15j, 5 - 10j]
        return _loop(pts, _dome())
    raise GeometryError(f"benchmark has stages 1-4, got {stage}")


def benchmark_stage(stage: int, corner_radius: Optional[float] = None) -> StageBoundary:
    """Filleted benchmark contour.

    ``corner_radius`` only applies to stage 3, where it sets the radius of the
    two drift-floor corners and the concave corner; the corner at
    ``(5, -10.5)`` keeps the default radius.
    """
    raw = benchmark_raw(stage)
    n = len(raw)
    radii = [DEFAULT_FILLET_RADIUS] * n
    if corner_radius is not None:
        if stage != 3:
            raise GeometryError("corner_radius is only defined for stage 3")
        # junctions: 1 -> (-5,-15), 2 -> (0.5,-15), 3 -> (0.5,-10.5)
        for j in (1, 2, 3):
            radii[j] = float(corner_radius)
    return fillet_corners(raw, radii, stage_index=stage)
