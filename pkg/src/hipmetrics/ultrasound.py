"""Ultrasound rule-based measurements: alpha angle and femoral head coverage.

Input is a label mask with the ilium+acetabulum as one structure and the
femoral head as another. Landmark derivation follows the classical Graf
construction: the acetabular rim is the sharpest convex turn of the bone
contour, the baseline runs from the superior ilium end through the rim, and
the bony roof runs from the rim to the deepest acetabular point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyMask, IoError, LandmarkFailure, TooFewVertices
from .geometry import (
    Circle2,
    Contour,
    Line2,
    Point2,
    angle_between_deg,
    corner_of_max_curvature,
    fit_circle,
    fit_line_tls,
    line_angle_from_horizontal_deg,
    signed_distance,
    turning_angles_deg,
)
from .raster import LabelMask, largest_component, select_label, trace_contour

ILIUM_STRUCTURE = "ilium_acetabulum"
HEAD_STRUCTURE = "femoral_head"
DEFAULT_US_LABEL_MAP = {1: ILIUM_STRUCTURE, 2: HEAD_STRUCTURE}

GRAF_CLASS_I = "I"
GRAF_CLASS_IIAB = "IIa/b"
GRAF_CLASS_IICD = "IIc/D"
GRAF_CLASS_III_IV = "III/IV"


@dataclass(frozen=True)
class UsConfig:
    """Tunables for the ultrasound pipeline (defaults match the CLI)."""

    curvature_window: int = 7
    branch_stop_turn_deg: float = 15.0
    min_contour_vertices: int = 15
    min_branch_angle_deg: float = 10.0
    max_branch_angle_deg: float = 88.0
    min_apex_distance_px: float = 2.0
    min_image_size: int = 128
    coverage_mode: str = "diameter"  # or "area"
    graf_class_enabled: bool = False
    roof_fit: str = "two_point"  # or "tls"


@dataclass(frozen=True)
class UsLandmarks:
    """The five ultrasound landmarks plus the fitted head radius."""

    baseline_superior: Point2
    rim: Point2
    apex: Point2
    head_center: Point2
    head_lateral: Point2
    head_radius: float


@dataclass(frozen=True)
class UsMeasurements:
    status: int  # 0 = processing error, 1 = ok
    alpha_deg: Optional[float] = None
    coverage: Optional[float] = None
    graf_class: Optional[str] = None
    diagnostic: Optional[str] = None
    experimental: bool = True


@dataclass(frozen=True)
class UsCaseResult:
    measurements: UsMeasurements
    landmarks: Optional[UsLandmarks] = None
    baseline: Optional[Line2] = None
    roof: Optional[Line2] = None
    bone_contour: Optional[Contour] = None


def _split_branches(contour: Contour, rim_idx: int, cfg: UsConfig):
    """Walk both ways from the rim, each branch ending at the next corner.

    A branch ends at the first vertex whose windowed turning reaches the
    stop threshold (refined to the local turning maximum), or after half the
    contour when no such corner exists. Returns two vertex index lists, each
    beginning at the rim.
    """
    turns = turning_angles_deg(contour, cfg.curvature_window)
    n = len(contour)
    half = (n - 1) // 2
    w = cfg.curvature_window

    def walk(step: int) -> list[int]:
        indices = [rim_idx]
        stop_at = None
        for offset in range(1, half + 1):
            j = (rim_idx + step * offset) % n
            indices.append(j)
            if abs(turns[j]) >= cfg.branch_stop_turn_deg and offset > w:
                stop_at = offset
                break
        if stop_at is None:
            return indices
        # refine: extend to the strongest turning within one window past the hit
        best_off, best_turn = stop_at, abs(turns[indices[-1]])
        for offset in range(stop_at + 1, min(stop_at + w, half) + 1):
            j = (rim_idx + step * offset) % n
            if abs(turns[j]) > best_turn:
                best_off, best_turn = offset, abs(turns[j])
        return [(rim_idx + step * o) % n for o in range(best_off + 1)]

    return walk(+1), walk(-1)


def derive_us_landmarks(ilium_contour: Contour, head: Circle2,
                        config: UsConfig = UsConfig()) -> UsLandmarks:
    """Locate the five landmarks on the bone contour and head circle.

    The rim is the contour vertex of maximal curvature; the contour is split
    there into an ilium branch (the one whose total-least-squares fit lies
    closer to horizontal) and an acetabular branch. The baseline's superior
    anchor is the ilium-branch endpoint farthest from the rim, the apex is
    the acetabular-branch point farthest from the baseline, and the two head
    landmarks come from the fitted circle.

    Raises LandmarkFailure when the contour is too short, the branches are
    nearly parallel (no acetabular bend), the bend is too close to a right
    angle to be a Graf roof, or the apex sits on the baseline.
    """
    lm, _ = _derive_with_fits(ilium_contour, head, config)
    return lm


def _derive_with_fits(ilium_contour: Contour, head: Circle2,
                      config: UsConfig):
    """derive_us_landmarks plus the acetabular-branch TLS fit, which the
    optional roof_fit="tls" mode needs."""
    n = len(ilium_contour)
    if n < config.min_contour_vertices:
        raise LandmarkFailure(f"contour has {n} vertices, "
                              f"need {config.min_contour_vertices}")
    try:
        rim_idx = corner_of_max_curvature(ilium_contour, config.curvature_window)
    except TooFewVertices as exc:
        raise LandmarkFailure(str(exc)) from exc

    branch_a, branch_b = _split_branches(ilium_contour, rim_idx, config)
    if min(len(branch_a), len(branch_b)) < max(5, config.curvature_window):
        raise LandmarkFailure("a contour branch is too short to fit")

    verts = ilium_contour.vertices
    pts_a, pts_b = verts[branch_a], verts[branch_b]
    w = config.curvature_window
    fit_a = fit_line_tls(_trim(pts_a, w))
    fit_b = fit_line_tls(_trim(pts_b, w))

    split = angle_between_deg(fit_a, fit_b)
    if split < config.min_branch_angle_deg:
        raise LandmarkFailure(
            f"branches differ by {split:.1f} deg; no acetabular branch")
    if split > config.max_branch_angle_deg:
        raise LandmarkFailure(
            f"branch angle {split:.1f} deg is not a bony roof bend")

    if line_angle_from_horizontal_deg(fit_a) <= line_angle_from_horizontal_deg(fit_b):
        ilium_pts, acet_pts = pts_a, pts_b
        ilium_fit, acet_fit = fit_a, fit_b
    else:
        ilium_pts, acet_pts = pts_b, pts_a
        ilium_fit, acet_fit = fit_b, fit_a

    rim = ilium_contour[rim_idx]
    rim_arr = np.array([rim.x, rim.y])
    far = ilium_pts[int(np.argmax(np.sum((ilium_pts - rim_arr) ** 2, axis=1)))]
    # snap the endpoint onto the branch fit: cancels the +-1 vertex jitter of
    # the walk's stopping corner
    baseline_superior = ilium_fit.project(Point2(float(far[0]), float(far[1])))
    if baseline_superior.distance_to(rim) < 1e-9:
        raise LandmarkFailure("ilium branch collapsed onto the rim")
    baseline = Line2.through(baseline_superior, rim)

    nx, ny = baseline.normal()
    dists = (acet_pts[:, 0] - rim.x) * nx + (acet_pts[:, 1] - rim.y) * ny
    apex_i = int(np.argmax(np.abs(dists)))
    apex = acet_fit.project(Point2(float(acet_pts[apex_i, 0]),
                                   float(acet_pts[apex_i, 1])))
    if abs(dists[apex_i]) < config.min_apex_distance_px:
        raise LandmarkFailure("acetabular apex is on the baseline")

    deep = _deep_normal(baseline, acet_pts)
    head_lateral = Point2(head.center.x - head.radius * deep[0],
                          head.center.y - head.radius * deep[1])
    lm = UsLandmarks(baseline_superior, rim, apex,
                     head.center, head_lateral, head.radius)
    return lm, acet_fit


def _trim(pts: np.ndarray, window: int) -> np.ndarray:
    """Drop the corner-bend vertices at both branch ends before fitting."""
    if pts.shape[0] >= 2 * window + 5:
        return pts[window:-window]
    return pts


def _deep_normal(baseline: Line2, acet_pts: np.ndarray):
    """Baseline unit normal pointing toward the acetabular branch centroid."""
    nx, ny = baseline.normal()
    cx, cy = acet_pts.mean(axis=0)
    side = (cx - baseline.anchor.x) * nx + (cy - baseline.anchor.y) * ny
    if side < 0:
        nx, ny = -nx, -ny
    return (nx, ny)


def alpha_angle(lm: UsLandmarks, config: UsConfig = UsConfig(),
                acet_fit: Optional[Line2] = None) -> float:
    """Acute angle between the baseline and the bony roof line.

    The roof is the two-point line rim->apex; an optional TLS fit of the
    acetabular branch can replace it via ``config.roof_fit = "tls"``.
    """
    baseline = Line2.through(lm.baseline_superior, lm.rim)
    if config.roof_fit == "tls" and acet_fit is not None:
        roof = acet_fit
    else:
        roof = Line2.through(lm.rim, lm.apex)
    return angle_between_deg(baseline, roof)


def coverage(head: Circle2, baseline: Line2, acetabular_normal) -> float:
    """Fraction of the femoral head deep to the baseline, clamped to [0, 1].

    With s the signed depth of the head center and r its radius this is the
    diameter fraction (r + s) / 2r.
    """
    s = signed_distance(head.center, baseline, acetabular_normal)
    return float(min(1.0, max(0.0, (head.radius + s) / (2.0 * head.radius))))


def coverage_area(head: Circle2, baseline: Line2, acetabular_normal) -> float:
    """Area-fraction variant: fraction of the disk area deep to the baseline."""
    s = signed_distance(head.center, baseline, acetabular_normal)
    r = head.radius
    if s <= -r:
        return 0.0
    if s >= r:
        return 1.0
    # area of the circular segment on the deep side
    h = r + s
    seg = r * r * math.acos((r - h) / r) - (r - h) * math.sqrt(2 * r * h - h * h)
    return float(seg / (math.pi * r * r))


def graf_class_from_alpha(alpha_deg: float) -> str:
    """Standard Graf cutoffs; experimental output, off by default."""
    if alpha_deg >= 60.0:
        return GRAF_CLASS_I
    if alpha_deg >= 50.0:
        return GRAF_CLASS_IIAB
    if alpha_deg >= 43.0:
        return GRAF_CLASS_IICD
    return GRAF_CLASS_III_IV


def analyze_us(mask: LabelMask, config: UsConfig = UsConfig(),
               label_map: Optional[dict] = None) -> UsCaseResult:
    """Full ultrasound pipeline from label mask to measurements.

    Content problems (missing structures, landmark failures) come back as
    status 0 with a diagnostic instead of raising; unreadable input sizes
    are hard errors.
    """
    if mask.width < config.min_image_size or mask.height < config.min_image_size:
        raise IoError(
            f"mask {mask.width}x{mask.height} below minimum "
            f"{config.min_image_size}x{config.min_image_size}")
    labels = _resolve_us_labels(label_map)

    def fail(msg: str) -> UsCaseResult:
        return UsCaseResult(UsMeasurements(status=0, diagnostic=msg))

    try:
        bone_bits = largest_component(select_label(mask, labels[ILIUM_STRUCTURE]))
    except EmptyMask:
        return fail("ilium/acetabulum structure is empty")
    try:
        head_bits = largest_component(select_label(mask, labels[HEAD_STRUCTURE]))
    except EmptyMask:
        return fail("femoral head structure is empty")

    bone_contour = trace_contour(bone_bits)
    head_contour = trace_contour(head_bits)
    try:
        head = fit_circle(head_contour.vertices)
    except Exception as exc:  # degenerate head blobs become status 0
        return fail(f"femoral head circle fit failed: {exc}")

    try:
        lm, acet_fit = _derive_with_fits(bone_contour, head, config)
    except LandmarkFailure as exc:
        return fail(str(exc))

    baseline = Line2.through(lm.baseline_superior, lm.rim)
    deep = _deep_normal_from_landmarks(baseline, lm)
    alpha = alpha_angle(lm, config, acet_fit)
    if config.coverage_mode == "area":
        cov = coverage_area(Circle2(lm.head_center, lm.head_radius), baseline, deep)
    else:
        cov = coverage(Circle2(lm.head_center, lm.head_radius), baseline, deep)
    graf = graf_class_from_alpha(alpha) if config.graf_class_enabled else None
    if config.roof_fit == "tls":
        roof = Line2(lm.rim, acet_fit.direction)
    else:
        roof = Line2.through(lm.rim, lm.apex)
    meas = UsMeasurements(status=1, alpha_deg=alpha, coverage=cov, graf_class=graf)
    return UsCaseResult(meas, lm, baseline, roof, bone_contour)


def _deep_normal_from_landmarks(baseline: Line2, lm: UsLandmarks):
    nx, ny = baseline.normal()
    side = (lm.apex.x - baseline.anchor.x) * nx + (lm.apex.y - baseline.anchor.y) * ny
    if side < 0:
        nx, ny = -nx, -ny
    return (nx, ny)


def _resolve_us_labels(label_map: Optional[dict]) -> dict:
    if label_map is None:
        label_map = DEFAULT_US_LABEL_MAP
    by_structure = {}
    for label, structure in label_map.items():
        by_structure[str(structure)] = int(label)
    missing = {ILIUM_STRUCTURE, HEAD_STRUCTURE} - set(by_structure)
    if missing:
        raise IoError(f"label map lacks structures: {sorted(missing)}")
    return by_structure
