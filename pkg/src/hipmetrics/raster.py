"""Label masks, connected components, and boundary tracing.

Bridges segmentation output (8-bit label PNGs) to the geometric pipeline.
Foreground is 8-connected, background 4-connected (the standard pairing for
Moore-neighbor tracing).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyMask, IoError
from .geometry import Contour, Point2


@dataclass(frozen=True)
class LabelMask:
    """8-bit label image; 0 is background."""

    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError("label mask must be a 2D array")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def labels_present(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.pixels) if v != 0)


@dataclass(frozen=True)
class BitMask:
    """Binary mask with the same dimensions as its source LabelMask."""

    bits: np.ndarray  # (height, width) bool

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError("bit mask must be a 2D array")
        if arr.dtype != bool:
            arr = arr.astype(bool)
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


def load_label_mask(path) -> LabelMask:
    """Load an 8-bit single-channel PNG as a LabelMask."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P"):
                img = img.convert("L")
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read mask {path}: {exc}") from exc
    return LabelMask(arr)


def save_label_mask(mask: LabelMask, path) -> None:
    """Write a LabelMask as a non-interlaced 8-bit grayscale PNG."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(mask.pixels, mode="L").save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise IoError(f"cannot write mask {path}: {exc}") from exc


def select_label(mask: LabelMask, label: int) -> BitMask:
    """Bits set exactly where the pixel label matches. Empty results are fine."""
    if not 1 <= int(label) <= 255:
        raise ValueError("label must be in 1..255")
    return BitMask(mask.pixels == int(label))


_EIGHT = np.ones((3, 3), dtype=int)


def largest_component(mask: BitMask) -> BitMask:
    """Largest 8-connected component; ties go to the component whose
    lexically smallest (row, column) pixel comes first."""
    if not mask.bits.any():
        raise EmptyMask("no set bits")
    labeled, n = ndimage.label(mask.bits, structure=_EIGHT)
    if n == 1:
        return BitMask(mask.bits.copy())
    counts = np.bincount(labeled.ravel())[1:]
    best = np.flatnonzero(counts == counts.max()) + 1
    if len(best) == 1:
        keep = int(best[0])
    else:
        # raster order scan hits the smallest (row, col) pixel first
        flat = labeled.ravel()
        candidates = np.isin(flat, best)
        keep = int(flat[np.flatnonzero(candidates)[0]])
    return BitMask(labeled == keep)


# Moore neighborhood in on-screen counter-clockwise order, as (drow, dcol):
# W, SW, S, SE, E, NE, N, NW
_RING = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))


def trace_contour(mask: BitMask) -> Contour:
    """Outer boundary of the mask's single component via Moore tracing.

    Vertices are pixel centers in on-screen CCW order; the first vertex is
    the top-left-most boundary pixel (smallest row, then column). Pixels the
    walk revisits (out-and-back runs on 1-pixel-wide structures) are emitted
    once, so the vertex count equals the boundary pixel count.

    Special case: a single-pixel mask yields a degenerate 4-vertex unit
    diamond around the pixel center, since one pixel has no polyline border.
    """
    bits = mask.bits
    if not bits.any():
        raise EmptyMask("no set bits")
    if bits.sum() == 1:
        r, c = (int(v[0]) for v in np.nonzero(bits))
        x, y = float(c), float(r)
        return Contour([
            Point2(x, y - 0.5), Point2(x - 0.5, y),
            Point2(x, y + 0.5), Point2(x + 0.5, y),
        ])

    rows, cols = np.nonzero(bits)
    start = (int(rows[0]), int(cols[0]))  # raster order: min (row, col)
    h, w = bits.shape
    ring = _RING
    ring_index = {off: i for i, off in enumerate(ring)}

    # walk until the (pixel, backtrack) state repeats; the walk is a
    # deterministic map, so the first repeat closes the boundary cycle
    path: list[tuple[int, int]] = []
    emitted: set[tuple[int, int]] = set()
    states: set[tuple[tuple[int, int], int]] = set()
    current = start
    back_dir = 0  # backtrack to the west, matching the raster-scan entry
    while (current, back_dir) not in states:
        states.add((current, back_dir))
        if current not in emitted:
            emitted.add(current)
            path.append(current)
        r0, c0 = current
        for k in range(1, 9):
            d = (back_dir + k) & 7
            dr, dc = ring[d]
            nr, nc = r0 + dr, c0 + dc
            if 0 <= nr < h and 0 <= nc < w and bits[nr, nc]:
                prev = (back_dir + k - 1) & 7
                pr, pc = ring[prev]
                back_dir = ring_index[(r0 + pr - nr, c0 + pc - nc)]
                current = (nr, nc)
                break
        else:
            break  # no foreground neighbor: fully walked
    vertices = [Point2(float(c), float(r)) for r, c in path]
    return Contour(vertices)


def boundary_pixels(mask: BitMask) -> np.ndarray:
    """(n, 2) array of x, y pixel centers having an unset 8-neighbor or
    lying on the frame edge. Used by tests and circle fitting."""
    bits = mask.bits
    padded = np.pad(bits, 1, constant_values=False)
    interior = np.ones_like(bits)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            interior &= padded[1 + dr:1 + dr + bits.shape[0],
                               1 + dc:1 + dc + bits.shape[1]]
    rows, cols = np.nonzero(bits & ~interior)
    return np.column_stack([cols, rows]).astype(float)
