"""2D primitives and fitting shared by the ultrasound and X-ray pipelines.

Image coordinate convention throughout the package: x grows rightward
(columns), y grows downward (rows). "Counter-clockwise" always means
counter-clockwise as displayed on screen with the y axis pointing down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadNormal, DegenerateInput, TooFewVertices

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Point2:
    """Point in image coordinates (pixels)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Line2:
    """Undirected line stored as anchor point plus unit direction."""

    anchor: Point2
    direction: tuple[float, float]

    def __post_init__(self):
        dx, dy = self.direction
        norm = math.hypot(dx, dy)
        if norm < _UNIT_TOL:
            raise DegenerateInput("line direction has zero length")
        if abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "direction", (dx / norm, dy / norm))

    @staticmethod
    def through(a: Point2, b: Point2) -> "Line2":
        dx, dy = b.x - a.x, b.y - a.y
        if math.hypot(dx, dy) < _UNIT_TOL:
            raise DegenerateInput("cannot build a line through coincident points")
        return Line2(a, (dx, dy))

    def normal(self) -> tuple[float, float]:
        """One of the two unit normals (rotate direction by +90 deg on screen)."""
        dx, dy = self.direction
        return (-dy, dx)

    def project(self, p: Point2) -> Point2:
        dx, dy = self.direction
        t = (p.x - self.anchor.x) * dx + (p.y - self.anchor.y) * dy
        return Point2(self.anchor.x + t * dx, self.anchor.y + t * dy)


@dataclass(frozen=True)
class Circle2:
    """Circle with positive radius in pixels."""

    center: Point2
    radius: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError("circle radius must be positive")


class Contour:
    """Closed polyline of ordered vertices, CCW in image coordinates.

    The closing edge (last vertex back to the first) is implicit. Vertices
    produced by mask tracing are pixel centers; arbitrary float vertices are
    accepted for synthetic contours. Degenerate (zero-area) contours from
    1-pixel-wide structures are tolerated, clockwise ones are not.
    """

    def __init__(self, vertices):
        arr = np.asarray(
            [(v.x, v.y) if isinstance(v, Point2) else (v[0], v[1]) for v in vertices],
            dtype=float,
        )
        if arr.ndim != 2 or arr.shape[0] < 3:
            raise ValueError("a contour needs at least 3 vertices")
        if not np.all(np.isfinite(arr)):
            raise ValueError("contour vertices must be finite")
        closed = np.vstack([arr, arr[:1]])
        if np.any(np.all(np.diff(closed, axis=0) == 0, axis=1)):
            raise ValueError("consecutive contour vertices may not repeat")
        self._v = arr
        if self.signed_area() < 0:
            raise ValueError("contour must be counter-clockwise in image coordinates")

    def __len__(self) -> int:
        return self._v.shape[0]

    def __getitem__(self, idx) -> Point2:
        x, y = self._v[idx % len(self)]
        return Point2(float(x), float(y))

    @property
    def vertices(self) -> np.ndarray:
        """Vertex array of shape (n, 2), read-only view."""
        v = self._v.view()
        v.flags.writeable = False
        return v

    def signed_area(self) -> float:
        """Enclosed area, positive for on-screen CCW order (y-down axes)."""
        x, y = self._v[:, 0], self._v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        return 0.5 * float(np.sum(xn * y - x * yn))

    def centroid(self) -> Point2:
        cx, cy = self._v.mean(axis=0)
        return Point2(float(cx), float(cy))


def fit_line_tls(points) -> Line2:
    """Total-least-squares line: principal axis through the centroid.

    Minimizes orthogonal residuals; the result does not depend on the input
    ordering. Raises DegenerateInput for fewer than 2 points or when all
    points coincide.
    """
    arr = _as_array(points)
    if arr.shape[0] < 2:
        raise DegenerateInput("need at least 2 points to fit a line")
    centroid = arr.mean(axis=0)
    centered = arr - centroid
    if float(np.max(np.abs(centered))) < 1e-12:
        raise DegenerateInput("all points coincide")
    # principal axis of the 2x2 scatter matrix
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    direction = eigvecs[:, int(np.argmax(eigvals))]
    return Line2(Point2(float(centroid[0]), float(centroid[1])),
                 (float(direction[0]), float(direction[1])))


def fit_circle(points) -> Circle2:
    """Algebraic least-squares circle (Kasa normal equations).

    Exact for noise-free co-circular points. The normal equations are solved
    after shifting to the centroid for conditioning; a determinant below 1e-9
    signals (near-)collinear input.
    """
    arr = _as_array(points)
    if arr.shape[0] < 3:
        raise DegenerateInput("need at least 3 points to fit a circle")
    centroid = arr.mean(axis=0)
    u = arr[:, 0] - centroid[0]
    v = arr[:, 1] - centroid[1]
    suu, svv, suv = np.dot(u, u), np.dot(v, v), np.dot(u, v)
    suuu, svvv = np.dot(u, u * u), np.dot(v, v * v)
    suvv, svuu = np.dot(u, v * v), np.dot(v, u * u)
    a = np.array([[suu, suv], [suv, svv]])
    scale = max(float(suu + svv), 1e-30)
    det = float(np.linalg.det(a)) / (scale * scale / 4.0)
    if abs(det) < 1e-9:
        raise DegenerateInput("points are collinear within tolerance")
    b = np.array([(suuu + suvv) / 2.0, (svvv + svuu) / 2.0])
    uc, vc = np.linalg.solve(a, b)
    radius = math.sqrt(uc * uc + vc * vc + (suu + svv) / arr.shape[0])
    return Circle2(Point2(float(uc + centroid[0]), float(vc + centroid[1])), radius)


def angle_between_deg(a: Line2, b: Line2) -> float:
    """Acute angle in degrees between two undirected lines, in [0, 90].

    atan2 of |cross| and |dot| is exact at 0 and 90 and well conditioned
    everywhere, unlike the acos of a near-unit dot product.
    """
    ax, ay = a.direction
    bx, by = b.direction
    cross = ax * by - ay * bx
    dot = ax * bx + ay * by
    return math.degrees(math.atan2(abs(cross), abs(dot)))


def line_angle_from_horizontal_deg(line: Line2) -> float:
    """Acute angle between a line and the image x axis, in [0, 90]."""
    return angle_between_deg(line, Line2(Point2(0.0, 0.0), (1.0, 0.0)))


def signed_distance(p: Point2, line: Line2, positive_normal) -> float:
    """Distance of p from the line, positive on the positive_normal side.

    ``positive_normal`` must be a unit vector orthogonal to the line
    direction within 1e-9, otherwise BadNormal is raised.
    """
    nx, ny = float(positive_normal[0]), float(positive_normal[1])
    norm = math.hypot(nx, ny)
    if abs(norm - 1.0) > 1e-9:
        raise BadNormal("positive_normal must be a unit vector")
    dx, dy = line.direction
    if abs(nx * dx + ny * dy) > 1e-9:
        raise BadNormal("positive_normal must be orthogonal to the line")
    return (p.x - line.anchor.x) * nx + (p.y - line.anchor.y) * ny


def intersect_lines(a: Line2, b: Line2) -> Point2:
    """Intersection point of two non-parallel lines."""
    ax, ay = a.direction
    bx, by = b.direction
    det = ax * (-by) - (-bx) * ay
    if abs(det) < 1e-12:
        raise DegenerateInput("lines are parallel")
    rx = b.anchor.x - a.anchor.x
    ry = b.anchor.y - a.anchor.y
    t = (rx * (-by) + bx * ry) / det
    return Point2(a.anchor.x + t * ax, a.anchor.y + t * ay)


def turning_angles_deg(contour: Contour, window: int) -> np.ndarray:
    """Signed discrete turning angle at every vertex.

    The turning at vertex i is the angle between the chords
    (v[i] - v[i-window]) and (v[i+window] - v[i]), cyclic, signed so that
    convex corners of a CCW contour are positive. Straight runs give ~0.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    v = contour.vertices
    n = v.shape[0]
    if n < 2 * window + 1:
        raise TooFewVertices(f"need at least {2 * window + 1} vertices, got {n}")
    before = np.roll(v, window, axis=0)
    after = np.roll(v, -window, axis=0)
    a = v - before
    b = after - v
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    # y-down axes: convex turns of a CCW (on-screen) loop have negative cross
    return np.degrees(np.arctan2(-cross, dot))


def corner_of_max_curvature(contour: Contour, window: int = 7) -> int:
    """Index of the vertex with the largest signed turning angle.

    Ties resolve to the lowest index; turnings are quantized to 1e-9 degrees
    first so that analytically equal corners tie despite float noise. Raises
    TooFewVertices when the contour is shorter than 2*window + 1 vertices.
    """
    return int(np.argmax(np.round(turning_angles_deg(contour, window), 9)))


def rotate_point(p: Point2, pivot: Point2, angle_deg: float) -> Point2:
    """Rotate p about pivot by angle_deg (positive turns +x toward +y)."""
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    dx, dy = p.x - pivot.x, p.y - pivot.y
    return Point2(pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy)


def _as_array(points) -> np.ndarray:
    if isinstance(points, Contour):
        return np.array(points.vertices, dtype=float)
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=float).reshape(-1, 2)
    return np.asarray(
        [(p.x, p.y) if isinstance(p, Point2) else (p[0], p[1]) for p in points],
        dtype=float,
    )
