"""X-ray rule-based measurements: acetabular index, Wiberg angle, IHDI grade.

Each hip side is segmented as a triangle whose corners are the inner
(medial, on Hilgenreiner's line), outer (lateral acetabular margin) and h
(inferior) landmarks. Reference lines follow the standard radiographic
constructions: Hilgenreiner through both inner points, Perkin perpendicular
through each outer point, and a 45-degree inferolateral diagonal from each
Hilgenreiner-Perkin intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import AmbiguousCorners, DegenerateTriangle, EmptyMask, IoError
from .geometry import (
    Contour,
    Line2,
    Point2,
    angle_between_deg,
    intersect_lines,
    signed_distance,
)
from .raster import LabelMask, largest_component, select_label, trace_contour

LEFT_STRUCTURE = "left_triangle"
RIGHT_STRUCTURE = "right_triangle"
DEFAULT_XRAY_LABEL_MAP = {1: LEFT_STRUCTURE, 2: RIGHT_STRUCTURE}


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class XrayConfig:
    ambiguity_margin_px: float = 2.0
    min_triangle_area_px2: float = 1.0
    min_image_size: int = 128


@dataclass(frozen=True)
class SideLandmarks:
    side: Side
    inner: Point2
    outer: Point2
    h_point: Point2


@dataclass(frozen=True)
class PelvisConstruction:
    """Reference lines derived from both sides' landmarks."""

    hilgenreiner: Line2
    perkin_left: Line2
    perkin_right: Line2
    diagonal_left: Line2
    diagonal_right: Line2

    def perkin(self, side: Side) -> Line2:
        return self.perkin_left if side is Side.LEFT else self.perkin_right

    def diagonal(self, side: Side) -> Line2:
        return self.diagonal_left if side is Side.LEFT else self.diagonal_right


@dataclass(frozen=True)
class SideMeasurements:
    status: int
    acetabular_index_deg: Optional[float] = None
    wiberg_deg: Optional[float] = None
    ihdi_grade: Optional[int] = None
    diagnostic: Optional[str] = None


@dataclass(frozen=True)
class XrayMeasurements:
    left: SideMeasurements
    right: SideMeasurements
    experimental: bool = True

    @property
    def status(self) -> int:
        return 1 if self.left.status == 1 and self.right.status == 1 else 0


@dataclass(frozen=True)
class XrayCaseResult:
    measurements: XrayMeasurements
    landmarks: dict  # Side -> SideLandmarks for sides that resolved
    construction: Optional[PelvisConstruction] = None


def triangle_corners(contour: Contour,
                     min_area_px2: float = 1.0) -> tuple[Point2, Point2, Point2]:
    """The three convex-hull vertices spanning the maximum-area triangle.

    Exhaustive search over hull vertices; ties resolve to the lexically
    smallest hull-index triple. Raises DegenerateTriangle when even the best
    triangle stays below ``min_area_px2``.
    """
    hull = _convex_hull(np.array(contour.vertices, dtype=float))
    m = hull.shape[0]
    if m < 3:
        raise DegenerateTriangle("hull has fewer than 3 vertices")
    best, best_area = None, -1.0
    for i in range(m - 2):
        for j in range(i + 1, m - 1):
            ij = hull[j] - hull[i]
            ks = hull[j + 1:]
            areas = 0.5 * np.abs(ij[0] * (ks[:, 1] - hull[i][1])
                                 - ij[1] * (ks[:, 0] - hull[i][0]))
            k_rel = int(np.argmax(areas))
            if areas[k_rel] > best_area + 1e-12:
                best_area = float(areas[k_rel])
                best = (hull[i], hull[j], ks[k_rel])
    if best is None or best_area < min_area_px2:
        raise DegenerateTriangle(f"max triangle area {best_area:.3f} px^2")
    return tuple(Point2(float(p[0]), float(p[1])) for p in best)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise on screen."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def classify_corners(tri, side: Side, medial_direction) -> SideLandmarks:
    """Name the triangle corners: inner (most medial), h (most inferior of
    the rest), outer (the remaining one).

    ``medial_direction`` must point from this triangle toward the
    contralateral one. If the two best medial scores differ by less than
    2 px the classification is ambiguous and the side fails.
    """
    pts = [p if isinstance(p, Point2) else Point2(p[0], p[1]) for p in tri]
    if len(pts) != 3:
        raise ValueError("classify_corners needs exactly three points")
    mx, my = float(medial_direction[0]), float(medial_direction[1])
    norm = math.hypot(mx, my)
    if norm < 1e-12:
        raise ValueError("medial_direction has zero length")
    mx, my = mx / norm, my / norm
    scores = sorted(((p.x * mx + p.y * my, i) for i, p in enumerate(pts)),
                    reverse=True)
    if scores[0][0] - scores[1][0] < 2.0:
        raise AmbiguousCorners(
            f"medial scores differ by {scores[0][0] - scores[1][0]:.2f} px")
    inner = pts[scores[0][1]]
    rest = [pts[scores[1][1]], pts[scores[2][1]]]
    if rest[0].y == rest[1].y:
        raise AmbiguousCorners("h point and outer point at equal height")
    rest.sort(key=lambda p: p.y, reverse=True)
    h_point, outer = rest[0], rest[1]
    return SideLandmarks(side, inner, outer, h_point)


def build_pelvis_construction(left: SideLandmarks,
                              right: SideLandmarks) -> PelvisConstruction:
    """Hilgenreiner, Perkin and diagonal lines from both sides' landmarks."""
    hilgenreiner = Line2.through(left.inner, right.inner)
    lines = {}
    for lm, other in ((left, right), (right, left)):
        lateral = _lateral_unit(hilgenreiner, lm, other)
        inferior = _inferior_unit(hilgenreiner)
        perkin = Line2(lm.outer, inferior)
        meet = intersect_lines(hilgenreiner, perkin)
        diag_dir = ((lateral[0] + inferior[0]) / math.sqrt(2.0),
                    (lateral[1] + inferior[1]) / math.sqrt(2.0))
        lines[lm.side] = (perkin, Line2(meet, diag_dir))
    return PelvisConstruction(
        hilgenreiner=hilgenreiner,
        perkin_left=lines[Side.LEFT][0],
        perkin_right=lines[Side.RIGHT][0],
        diagonal_left=lines[Side.LEFT][1],
        diagonal_right=lines[Side.RIGHT][1],
    )


def _lateral_unit(hilgenreiner: Line2, lm: SideLandmarks,
                  other: SideLandmarks) -> tuple[float, float]:
    """Unit vector along Hilgenreiner pointing away from the other side."""
    dx, dy = hilgenreiner.direction
    toward = (other.inner.x - lm.inner.x) * dx + (other.inner.y - lm.inner.y) * dy
    if toward > 0:
        dx, dy = -dx, -dy
    return (dx, dy)


def _inferior_unit(hilgenreiner: Line2) -> tuple[float, float]:
    """Hilgenreiner normal pointing toward image-inferior (+y)."""
    nx, ny = hilgenreiner.normal()
    if ny < 0:
        nx, ny = -nx, -ny
    return (nx, ny)


def acetabular_index(lm: SideLandmarks, h_line: Line2) -> float:
    """Acute angle between Hilgenreiner's line and the inner->outer roof line."""
    return angle_between_deg(h_line, Line2.through(lm.inner, lm.outer))


def wiberg_angle(lm: SideLandmarks, h_line: Line2) -> float:
    """Signed lateral-coverage angle at the h point.

    Angle between the perpendicular to Hilgenreiner through h and the line
    h->outer, positive when the outer point lies lateral to that
    perpendicular, negative when medial. The h point stands in for the
    femoral head center, which the triangle landmarks do not contain.
    """
    inferior = _inferior_unit(h_line)
    superior = (-inferior[0], -inferior[1])
    dx, dy = h_line.direction
    along = (lm.outer.x - lm.inner.x) * dx + (lm.outer.y - lm.inner.y) * dy
    lateral = (dx, dy) if along > 0 else (-dx, -dy)
    v = (lm.outer.x - lm.h_point.x, lm.outer.y - lm.h_point.y)
    lat_comp = v[0] * lateral[0] + v[1] * lateral[1]
    sup_comp = v[0] * superior[0] + v[1] * superior[1]
    return math.degrees(math.atan2(lat_comp, sup_comp))


def ihdi_grade(lm: SideLandmarks, pc: PelvisConstruction) -> int:
    """IHDI grade 1-4 from the h point's position in the reference grid.

    Checked in grade order so boundary points take the lower grade:
    at-or-medial to Perkin is 1; otherwise superior to Hilgenreiner is 4;
    otherwise at-or-inferomedial of the diagonal is 2; the rest is 3.
    """
    h = lm.h_point
    other_inner_dir = _medial_normal(pc, lm)
    medial_of_perkin = signed_distance(h, pc.perkin(lm.side), other_inner_dir)
    if medial_of_perkin >= 0:
        return 1
    inferior = _inferior_unit(pc.hilgenreiner)
    below_h_line = signed_distance(h, pc.hilgenreiner, inferior)
    if below_h_line < 0:
        return 4
    diag = pc.diagonal(lm.side)
    inf_med_normal = _diagonal_inferomedial_normal(diag, other_inner_dir, inferior)
    if signed_distance(h, diag, inf_med_normal) >= 0:
        return 2
    return 3


def _medial_normal(pc: PelvisConstruction, lm: SideLandmarks):
    """Perkin-line normal pointing medially (toward the contralateral side)."""
    perkin = pc.perkin(lm.side)
    nx, ny = perkin.normal()
    other = pc.perkin(Side.RIGHT if lm.side is Side.LEFT else Side.LEFT)
    toward = (other.anchor.x - perkin.anchor.x) * nx \
        + (other.anchor.y - perkin.anchor.y) * ny
    if toward < 0:
        nx, ny = -nx, -ny
    return (nx, ny)


def _diagonal_inferomedial_normal(diag: Line2, medial, inferior):
    """Diagonal normal pointing to the inferomedial half-plane."""
    nx, ny = diag.normal()
    score = nx * (medial[0] + inferior[0]) + ny * (medial[1] + inferior[1])
    if score < 0:
        nx, ny = -nx, -ny
    return (nx, ny)


def analyze_xray(mask: LabelMask, config: XrayConfig = XrayConfig(),
                 label_map: Optional[dict] = None) -> XrayCaseResult:
    """Full X-ray pipeline: per-side triangles to grades and indices.

    A failure on one side only zeroes that side, except that a missing inner
    point leaves Hilgenreiner's line unconstructible and fails the case.
    """
    if mask.width < config.min_image_size or mask.height < config.min_image_size:
        raise IoError(
            f"mask {mask.width}x{mask.height} below minimum "
            f"{config.min_image_size}x{config.min_image_size}")
    labels = _resolve_xray_labels(label_map)

    corners: dict[Side, tuple] = {}
    notes: dict[Side, str] = {}
    for side, structure in ((Side.LEFT, LEFT_STRUCTURE),
                            (Side.RIGHT, RIGHT_STRUCTURE)):
        try:
            bits = largest_component(select_label(mask, labels[structure]))
            tri = triangle_corners(trace_contour(bits), config.min_triangle_area_px2)
            corners[side] = tri
        except (EmptyMask, DegenerateTriangle) as exc:
            notes[side] = str(exc)

    if len(corners) < 2:
        msg = "; ".join(f"{s.value}: {m}" for s, m in notes.items())
        failed = SideMeasurements(status=0, diagnostic=f"hilgenreiner undefined ({msg})")
        return XrayCaseResult(XrayMeasurements(left=failed, right=failed), {})

    centroids = {s: _centroid(corners[s]) for s in corners}
    landmarks: dict[Side, SideLandmarks] = {}
    for side in (Side.LEFT, Side.RIGHT):
        other = Side.RIGHT if side is Side.LEFT else Side.LEFT
        c, oc = centroids[side], centroids[other]
        medial = (oc.x - c.x, oc.y - c.y)
        try:
            landmarks[side] = classify_corners(corners[side], side, medial)
        except AmbiguousCorners as exc:
            notes[side] = str(exc)

    if len(landmarks) < 2:
        msg = "; ".join(f"{s.value}: {m}" for s, m in notes.items())
        failed = SideMeasurements(status=0, diagnostic=f"hilgenreiner undefined ({msg})")
        return XrayCaseResult(XrayMeasurements(left=failed, right=failed), dict(landmarks))

    pc = build_pelvis_construction(landmarks[Side.LEFT], landmarks[Side.RIGHT])
    sides = {}
    for side in (Side.LEFT, Side.RIGHT):
        lm = landmarks[side]
        sides[side] = SideMeasurements(
            status=1,
            acetabular_index_deg=acetabular_index(lm, pc.hilgenreiner),
            wiberg_deg=wiberg_angle(lm, pc.hilgenreiner),
            ihdi_grade=ihdi_grade(lm, pc),
        )
    return XrayCaseResult(
        XrayMeasurements(left=sides[Side.LEFT], right=sides[Side.RIGHT]),
        dict(landmarks), pc)


def _centroid(tri) -> Point2:
    xs = sum(p.x for p in tri) / 3.0
    ys = sum(p.y for p in tri) / 3.0
    return Point2(xs, ys)


def _resolve_xray_labels(label_map: Optional[dict]) -> dict:
    if label_map is None:
        label_map = DEFAULT_XRAY_LABEL_MAP
    by_structure = {str(s): int(l) for l, s in label_map.items()}
    missing = {LEFT_STRUCTURE, RIGHT_STRUCTURE} - set(by_structure)
    if missing:
        raise IoError(f"label map lacks structures: {sorted(missing)}")
    return by_structure
