"""Synthetic label masks with analytically known ground truth.

These phantoms are the verification oracle for both pipelines: every
landmark and measurement is constructed in closed form before the mask is
rasterized, so pipeline output can be compared against exact values.

Ultrasound phantom geometry
---------------------------
The bone (ilium + acetabulum) is the intersection of a disk with a wedge
whose tip is the acetabular rim. The two wedge rays are exactly the
baseline segment (rim to superior ilium end) and the bony-roof segment
(rim to apex), which meet at the requested alpha angle. The disk is sized
so the boundary leaves each ray at a fixed shallow junction turn and closes
around the far side as one large smooth arc. The sharpest convex corner of
the resulting contour is therefore the rim, the next-sharpest features are
the two ray-arc junctions, and the branch walk of the ultrasound pipeline
terminates exactly at the constructed baseline/roof endpoints. The femoral
head is a separate disk placed beyond the rim at the signed depth that
realizes the requested diameter-fraction coverage.

X-ray phantom geometry
----------------------
Two filled triangles. Inner points sit on a horizontal construction line
(Hilgenreiner), outer points realize the requested acetabular indices, and
h points realize the requested Wiberg angles at a distance chosen so the
point falls inside the requested IHDI region with a safety margin.

Rasterization uses the pixel-center inclusion rule: a pixel belongs to a
region exactly when its center does. Generation is deterministic per seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import InfeasibleSpec, SpecOutOfBounds
from .geometry import Point2
from .raster import LabelMask
from .ultrasound import DEFAULT_US_LABEL_MAP
from .xray import DEFAULT_XRAY_LABEL_MAP

_JUNCTION_TURN_DEG = 24.0  # boundary turn where a wedge ray meets the arc
_MARGIN = 12.0


@dataclass(frozen=True)
class UsPhantomSpec:
    alpha_deg: float
    coverage: float
    head_radius: float = 46.0
    image_size: int = 512
    rotation_deg: float = 0.0
    mirrored: bool = False
    arm_length: Optional[float] = None  # None = auto-fit to the canvas
    offset_px: tuple = (0.0, 0.0)  # translation applied after centering
    noise_px: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 35.0 <= self.alpha_deg <= 80.0:
            raise SpecOutOfBounds(f"alpha {self.alpha_deg} outside [35, 80]")
        if not 0.1 <= self.coverage <= 0.95:
            raise SpecOutOfBounds(f"coverage {self.coverage} outside [0.1, 0.95]")
        if self.head_radius < 10:
            raise SpecOutOfBounds("head radius below 10 px")
        if self.image_size < 128:
            raise SpecOutOfBounds("image size below 128 px")


@dataclass(frozen=True)
class UsPhantomTruth:
    spec: UsPhantomSpec
    alpha_deg: float
    coverage: float
    baseline_superior: Point2
    rim: Point2
    apex: Point2
    head_center: Point2
    head_lateral: Point2
    head_radius: float
    arm_length: float = 0.0  # realized ray length (auto-fit result)
    label_map: dict = field(default_factory=lambda: dict(DEFAULT_US_LABEL_MAP))

    def to_json_dict(self) -> dict:
        return {
            "modality": "ultrasound",
            "alpha_deg": round(self.alpha_deg, 4),
            "coverage": round(self.coverage, 5),
            "landmarks": {
                "baseline_superior": [self.baseline_superior.x, self.baseline_superior.y],
                "rim": [self.rim.x, self.rim.y],
                "apex": [self.apex.x, self.apex.y],
                "head_center": [self.head_center.x, self.head_center.y],
                "head_lateral": [self.head_lateral.x, self.head_lateral.y],
                "head_radius": self.head_radius,
            },
            "spec": {
                "alpha_deg": self.spec.alpha_deg,
                "coverage": self.spec.coverage,
                "head_radius": self.spec.head_radius,
                "image_size": self.spec.image_size,
                "rotation_deg": self.spec.rotation_deg,
                "mirrored": self.spec.mirrored,
                "noise_px": self.spec.noise_px,
                "seed": self.spec.seed,
            },
            "label_map": {str(k): v for k, v in self.label_map.items()},
        }


def _us_construction(spec: UsPhantomSpec, arm: float):
    """All constructed points for a given arm length, rim at the origin."""
    theta = math.radians(spec.rotation_deg)
    flip = -1.0 if spec.mirrored else 1.0
    fx, fy = flip * math.cos(theta), flip * math.sin(theta)  # B -> rim direction
    # deep-side normal: +90 deg on screen from (cos, sin), independent of flip
    nx, ny = -math.sin(theta), math.cos(theta)

    alpha = math.radians(spec.alpha_deg)
    e_a = (-fx, -fy)  # rim -> baseline superior
    e_u = (math.cos(alpha) * fx + math.sin(alpha) * nx,
           math.cos(alpha) * fy + math.sin(alpha) * ny)  # rim -> apex

    psi = math.pi - alpha  # wedge angle at the rim
    tau = math.radians(_JUNCTION_TURN_DEG)
    denom = math.cos(psi / 2.0 - tau)
    if denom <= 1e-9:
        raise SpecOutOfBounds("junction geometry degenerates at this alpha")
    m = arm * math.cos(tau) / denom
    bis = _normalize((e_a[0] + e_u[0], e_a[1] + e_u[1]))
    cx, cy = m * bis[0], m * bis[1]  # disk center, rim at origin
    bx, by = arm * e_a[0], arm * e_a[1]
    rho = math.hypot(cx - bx, cy - by)

    r = spec.head_radius
    s = (2.0 * spec.coverage - 1.0) * r
    sin_a = math.sin(alpha)
    standoff = max(r + 10.0, (r + 6.0 + s * math.cos(alpha)) / sin_a + 3.0)
    hx = standoff * fx + s * nx
    hy = standoff * fy + s * ny

    return {
        "f": (fx, fy), "n": (nx, ny), "e_a": e_a, "e_u": e_u,
        "B": (bx, by), "apex": (arm * e_u[0], arm * e_u[1]),
        "disk_center": (cx, cy), "disk_radius": rho,
        "head_center": (hx, hy), "head_radius": r, "depth": s,
    }


def _us_bbox(c: dict) -> tuple[float, float, float, float]:
    xs = [c["disk_center"][0] - c["disk_radius"], c["disk_center"][0] + c["disk_radius"],
          c["head_center"][0] - c["head_radius"], c["head_center"][0] + c["head_radius"],
          0.0]
    ys = [c["disk_center"][1] - c["disk_radius"], c["disk_center"][1] + c["disk_radius"],
          c["head_center"][1] - c["head_radius"], c["head_center"][1] + c["head_radius"],
          0.0]
    return min(xs), min(ys), max(xs), max(ys)


def gen_us_phantom(spec: UsPhantomSpec) -> tuple[LabelMask, UsPhantomTruth]:
    """Rasterize an ultrasound phantom and return it with its ground truth."""
    roof_sign = -1.0 if spec.mirrored else 1.0
    folded_base = _fold_deg(spec.rotation_deg)
    folded_roof = _fold_deg(spec.rotation_deg + roof_sign * spec.alpha_deg)
    if folded_base + 3.0 >= folded_roof:
        raise SpecOutOfBounds(
            "rotation makes the roof more horizontal than the baseline; "
            "landmark recovery is undefined for this pose")

    size = spec.image_size
    usable = size - 2.0 * _MARGIN
    if spec.arm_length is not None:
        arm = float(spec.arm_length)
        c = _us_construction(spec, arm)
        x0, y0, x1, y1 = _us_bbox(c)
        if max(x1 - x0, y1 - y0) > usable:
            raise SpecOutOfBounds("requested arm length does not fit the canvas")
    else:
        arm = 0.40 * size
        for _ in range(8):
            c = _us_construction(spec, arm)
            x0, y0, x1, y1 = _us_bbox(c)
            extent = max(x1 - x0, y1 - y0)
            if extent <= usable:
                break
            arm *= usable / extent * 0.985
            if arm < 60.0:
                raise SpecOutOfBounds("construction cannot fit the canvas")
        else:
            raise SpecOutOfBounds("construction cannot fit the canvas")

    # shift the rim so the construction is centered on the canvas
    x0, y0, x1, y1 = _us_bbox(c)
    ox = (size - 1) / 2.0 - (x0 + x1) / 2.0 + float(spec.offset_px[0])
    oy = (size - 1) / 2.0 - (y0 + y1) / 2.0 + float(spec.offset_px[1])
    if not (x0 + ox >= 4 and y0 + oy >= 4
            and x1 + ox <= size - 5 and y1 + oy <= size - 5):
        raise SpecOutOfBounds("offset pushes the construction off the canvas")

    rim = Point2(ox, oy)
    b_sup = Point2(c["B"][0] + ox, c["B"][1] + oy)
    apex = Point2(c["apex"][0] + ox, c["apex"][1] + oy)
    head_center = Point2(c["head_center"][0] + ox, c["head_center"][1] + oy)
    disk_center = (c["disk_center"][0] + ox, c["disk_center"][1] + oy)
    nx, ny = c["n"]
    head_lateral = Point2(head_center.x - spec.head_radius * nx,
                          head_center.y - spec.head_radius * ny)

    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    rng = np.random.default_rng(spec.seed)
    if spec.noise_px > 0:
        def jitter():
            # smooth boundary displacement field, amplitude +-noise_px
            raw = ndimage.gaussian_filter(rng.standard_normal((size, size)), 6.0)
            return spec.noise_px * raw / max(float(np.abs(raw).max()), 1e-12)
    else:
        def jitter():
            return 0.0

    # bone region: the rim-tip triangle plus the disk part beyond the
    # B-apex chord; together they are exactly the area enclosed by the two
    # wedge rays and the big boundary arc
    in_tip = _half_plane(xx, yy, rim, b_sup, apex, jitter) \
        & _half_plane(xx, yy, apex, rim, b_sup, jitter) \
        & _half_plane(xx, yy, b_sup, apex, rim, lambda: 0.0)
    dx, dy = xx - disk_center[0], yy - disk_center[1]
    in_disk = np.hypot(dx, dy) <= c["disk_radius"] + jitter()
    bis = _normalize((c["e_a"][0] + c["e_u"][0], c["e_a"][1] + c["e_u"][1]))
    beyond_chord = (xx - b_sup.x) * bis[0] + (yy - b_sup.y) * bis[1] >= 0
    bone = in_tip | (in_disk & beyond_chord)

    hx, hy = xx - head_center.x, yy - head_center.y
    head = np.hypot(hx, hy) <= spec.head_radius + jitter()

    if not bone.any() or not head.any():
        raise SpecOutOfBounds("a structure rasterized to nothing")
    if (ndimage.binary_dilation(head, iterations=3) & bone).any():
        raise SpecOutOfBounds("femoral head is too close to the bone")

    pixels = np.zeros((size, size), dtype=np.uint8)
    pixels[bone] = 1
    pixels[head] = 2
    truth = UsPhantomTruth(
        spec=spec, alpha_deg=spec.alpha_deg, coverage=spec.coverage,
        baseline_superior=b_sup, rim=rim, apex=apex,
        head_center=head_center, head_lateral=head_lateral,
        head_radius=spec.head_radius, arm_length=arm)
    return LabelMask(pixels), truth


def _half_plane(xx, yy, a: Point2, b: Point2, interior: Point2, jitter):
    """True where pixel centers lie on ``interior``'s side of line a-b."""
    ex, ey = b.x - a.x, b.y - a.y
    norm = math.hypot(ex, ey)
    side = (ex * (yy - a.y) - ey * (xx - a.x)) / norm
    ref = (ex * (interior.y - a.y) - ey * (interior.x - a.x)) / norm
    if ref < 0:
        side = -side
    return side + jitter() >= 0


def _fold_deg(angle: float) -> float:
    """Fold an angle onto [0, 90]: the acute inclination to horizontal."""
    a = abs(angle) % 180.0
    return min(a, 180.0 - a)


def _normalize(v):
    n = math.hypot(v[0], v[1])
    return (v[0] / n, v[1] / n)


@dataclass(frozen=True)
class XraySideSpec:
    acetabular_index_deg: float
    wiberg_deg: float
    ihdi_grade: int

    def __post_init__(self):
        if not 5.0 <= self.acetabular_index_deg <= 45.0:
            raise SpecOutOfBounds("acetabular index outside [5, 45]")
        if not -80.0 <= self.wiberg_deg <= 80.0:
            raise SpecOutOfBounds("wiberg outside [-80, 80]")
        if self.ihdi_grade not in (1, 2, 3, 4):
            raise SpecOutOfBounds("ihdi grade must be 1..4")


@dataclass(frozen=True)
class XrayPhantomSpec:
    left: XraySideSpec
    right: XraySideSpec
    image_width: int = 1900
    image_height: int = 1400
    pelvis_span: float = 700.0
    roof_width: float = 320.0
    rotation_deg: float = 0.0
    region_margin_px: float = 8.0
    h_distance_range: tuple = (60.0, 320.0)
    seed: int = 0

    def __post_init__(self):
        if self.image_width < 256 or self.image_height < 256:
            raise SpecOutOfBounds("canvas too small")
        if self.pelvis_span < 4 * self.roof_width / 3:
            raise SpecOutOfBounds("triangles would overlap")
        lo, hi = self.h_distance_range
        if not 0 < lo < hi:
            raise SpecOutOfBounds("bad h_distance_range")


@dataclass(frozen=True)
class XraySideTruth:
    inner: Point2
    outer: Point2
    h_point: Point2
    acetabular_index_deg: float
    wiberg_deg: float
    ihdi_grade: int
    region_margin_px: float


@dataclass(frozen=True)
class XrayPhantomTruth:
    spec: XrayPhantomSpec
    left: XraySideTruth
    right: XraySideTruth
    label_map: dict = field(default_factory=lambda: dict(DEFAULT_XRAY_LABEL_MAP))

    def to_json_dict(self) -> dict:
        def side(s: XraySideTruth) -> dict:
            return {
                "inner": [s.inner.x, s.inner.y],
                "outer": [s.outer.x, s.outer.y],
                "h_point": [s.h_point.x, s.h_point.y],
                "acetabular_index_deg": round(s.acetabular_index_deg, 4),
                "wiberg_deg": round(s.wiberg_deg, 4),
                "ihdi_grade": s.ihdi_grade,
                "region_margin_px": s.region_margin_px,
            }
        return {
            "modality": "xray",
            "left": side(self.left),
            "right": side(self.right),
            "spec": {
                "rotation_deg": self.spec.rotation_deg,
                "pelvis_span": self.spec.pelvis_span,
                "roof_width": self.spec.roof_width,
                "image_width": self.spec.image_width,
                "image_height": self.spec.image_height,
                "seed": self.spec.seed,
            },
            "label_map": {str(k): v for k, v in self.label_map.items()},
        }


def _feasible_h_distances(side: XraySideSpec, roof_width: float,
                          margin: float, dist_range) -> list[float]:
    """All h-point distances whose region test passes with margin, descending.

    Works in the side-local frame: lateral coordinate a(R) = -R sin(w) of h
    relative to the Perkin line, depth d(R) = R cos(w) - T below
    Hilgenreiner, with T the outer point's height above the line.
    """
    w = math.radians(side.wiberg_deg)
    t = roof_width * math.tan(math.radians(side.acetabular_index_deg))
    sqrt2 = math.sqrt(2.0)
    lo, hi = dist_range
    feasible = []
    for r in np.linspace(lo, hi, max(2, int(2 * (hi - lo)) + 1)):
        a = -r * math.sin(w)          # >0 means lateral of Perkin
        d = r * math.cos(w) - t       # >0 means inferior to Hilgenreiner
        if side.ihdi_grade == 1:
            ok = -a >= margin
        elif side.ihdi_grade == 2:
            ok = a >= margin and (d - a) / sqrt2 >= margin and d >= margin
        elif side.ihdi_grade == 3:
            ok = (a - d) / sqrt2 >= margin and d >= margin
        else:
            ok = -d >= margin and a >= margin
        # keep h clearly a distinct, classifiable corner
        ok = ok and (roof_width - max(0.0, -a)) >= 25.0
        if ok:
            feasible.append(float(r))
    if not feasible:
        raise InfeasibleSpec(
            f"no h point realizes wiberg {side.wiberg_deg} with grade "
            f"{side.ihdi_grade} (AI {side.acetabular_index_deg})")
    return feasible[::-1]


def gen_xray_phantom(spec: XrayPhantomSpec) -> tuple[LabelMask, XrayPhantomTruth]:
    """Rasterize a two-triangle pelvis phantom with its ground truth."""
    w_img, h_img = spec.image_width, spec.image_height
    cx, cy = (w_img - 1) / 2.0, (h_img - 1) * 0.42
    pivot = (cx, (h_img - 1) / 2.0)
    rot = math.radians(spec.rotation_deg)
    cr, sr = math.cos(rot), math.sin(rot)

    def xform(p):
        dx, dy = p[0] - pivot[0], p[1] - pivot[1]
        return (pivot[0] + cr * dx - sr * dy, pivot[1] + sr * dx + cr * dy)

    def in_canvas(p):
        return (_MARGIN <= p[0] <= w_img - 1 - _MARGIN
                and _MARGIN <= p[1] <= h_img - 1 - _MARGIN)

    sides = {}
    for name, sign, sspec in (("left", -1.0, spec.left), ("right", +1.0, spec.right)):
        inner = (cx + sign * spec.pelvis_span / 2.0, cy)
        lat = (sign * 1.0, 0.0)  # away from the contralateral side
        t = spec.roof_width * math.tan(math.radians(sspec.acetabular_index_deg))
        outer = (inner[0] + lat[0] * spec.roof_width, cy - t)
        if not (in_canvas(xform(inner)) and in_canvas(xform(outer))):
            raise SpecOutOfBounds(f"{name} roof leaves the canvas at this pose")
        w = math.radians(sspec.wiberg_deg)
        # largest region-feasible h distance whose rotated point still fits;
        # larger distances give better angle recovery
        h_point = None
        for r_h in _feasible_h_distances(sspec, spec.roof_width,
                                         spec.region_margin_px,
                                         spec.h_distance_range):
            cand = (outer[0] - r_h * math.sin(w) * lat[0],
                    outer[1] + r_h * math.cos(w))
            if in_canvas(xform(cand)):
                h_point = cand
                break
        if h_point is None:
            raise SpecOutOfBounds(f"{name} h point leaves the canvas at this pose")
        sides[name] = (inner, outer, h_point, sspec)

    pixels = np.zeros((h_img, w_img), dtype=np.uint8)
    truths = {}
    for label, name in ((1, "left"), (2, "right")):
        inner, outer, h_point, sspec = sides[name]
        tri = [xform(inner), xform(outer), xform(h_point)]
        inside = _fill_triangle_patch(pixels.shape, tri)
        if not inside[2].any():
            raise SpecOutOfBounds(f"{name} triangle rasterized to nothing")
        sl_y, sl_x, patch = inside
        if (pixels[sl_y, sl_x][patch] != 0).any():
            raise SpecOutOfBounds("triangles overlap after rotation")
        region = pixels[sl_y, sl_x]
        region[patch] = label
        pixels[sl_y, sl_x] = region
        truths[name] = XraySideTruth(
            inner=Point2(*tri[0]), outer=Point2(*tri[1]), h_point=Point2(*tri[2]),
            acetabular_index_deg=sspec.acetabular_index_deg,
            wiberg_deg=sspec.wiberg_deg, ihdi_grade=sspec.ihdi_grade,
            region_margin_px=spec.region_margin_px)

    truth = XrayPhantomTruth(spec=spec, left=truths["left"], right=truths["right"])
    return LabelMask(pixels), truth


def _fill_triangle_patch(shape, tri):
    """Pixel-center inclusion test evaluated only inside the triangle's
    bounding box. Returns (row_slice, col_slice, bool_patch)."""
    (x0, y0), (x1, y1), (x2, y2) = tri
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if abs(area) < 1e-9:
        raise SpecOutOfBounds("degenerate triangle corners")
    if area < 0:
        (x1, y1), (x2, y2) = (x2, y2), (x1, y1)
    h, w = shape
    rmin = max(0, int(math.floor(min(y0, y1, y2))))
    rmax = min(h - 1, int(math.ceil(max(y0, y1, y2))))
    cmin = max(0, int(math.floor(min(x0, x1, x2))))
    cmax = min(w - 1, int(math.ceil(max(x0, x1, x2))))
    yy, xx = np.mgrid[rmin:rmax + 1, cmin:cmax + 1].astype(float)
    e0 = (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)
    e1 = (x2 - x1) * (yy - y1) - (y2 - y1) * (xx - x1)
    e2 = (x0 - x2) * (yy - y2) - (y0 - y2) * (xx - x2)
    patch = (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
    return slice(rmin, rmax + 1), slice(cmin, cmax + 1), patch


def write_truth_json(truth, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(truth.to_json_dict(), indent=2, sort_keys=True) + "\n"
    path.write_text(payload, encoding="utf-8")


def sample_us_spec(seed: int, image_size: int = 512) -> UsPhantomSpec:
    """Random but always-feasible ultrasound spec, deterministic per seed.

    Rotation is drawn so the ilium stays the more horizontal branch (the
    rule the pipeline uses to tell the branches apart); mirrored cases get
    the negated range.
    """
    rng = np.random.default_rng(seed)
    alpha = float(rng.uniform(40.0, 75.0))
    cov = float(rng.uniform(0.2, 0.9))
    radius = float(rng.uniform(40.0, 52.0))
    mirrored = bool(rng.integers(0, 2))
    rot = float(rng.uniform(-12.0, 30.0))
    if mirrored:
        rot = -rot
    return UsPhantomSpec(alpha_deg=alpha, coverage=cov, head_radius=radius,
                         image_size=image_size, rotation_deg=rot,
                         mirrored=mirrored, seed=seed)


_XRAY_GRADE_RANGES = {
    # grade: (acetabular index range, wiberg range) kept jointly feasible
    1: ((14.0, 30.0), (8.0, 35.0)),
    2: ((18.0, 26.0), (-18.0, -6.0)),
    3: ((25.0, 36.0), (-34.0, -20.0)),
    4: ((33.0, 42.0), (-35.0, -10.0)),
}


def sample_xray_spec(seed: int) -> XrayPhantomSpec:
    """Random feasible two-sided X-ray spec, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def side() -> XraySideSpec:
        grade = int(rng.choice([1, 1, 2, 3, 4]))
        (ai_lo, ai_hi), (w_lo, w_hi) = _XRAY_GRADE_RANGES[grade]
        return XraySideSpec(acetabular_index_deg=float(rng.uniform(ai_lo, ai_hi)),
                            wiberg_deg=float(rng.uniform(w_lo, w_hi)),
                            ihdi_grade=grade)

    left, right = side(), side()
    rot = float(rng.uniform(-18.0, 18.0))
    return XrayPhantomSpec(left=left, right=right, rotation_deg=rot, seed=seed)
