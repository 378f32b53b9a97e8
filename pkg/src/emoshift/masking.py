"""Half-face and full-face (convex-hull) masking and pose-prior assembly.

The half strategy zeroes the lower half of each frame; the full strategy
zeroes the convex hull of the face-boundary landmarks, concealing all
expression information in the pose prior. Masked pixels are set to zero,
everything outside the mask is left bitwise untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .facegen import BOUNDARY_INDICES

MASK_KINDS = ("half", "full")


@dataclass(frozen=True)
class MaskStrategy:
    kind: str
    boundary_indices: tuple[int, ...] = tuple(BOUNDARY_INDICES)

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise DataError(f"unknown mask kind {self.kind!r}, expected one of {MASK_KINDS}")


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Convex hull via Andrew's monotone chain.

    Returns hull vertices in counterclockwise order (y-down image
    coordinates use the same cross-product convention). Vertices are a
    subset of the input points; collinear boundary points are dropped.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DataError("convex_hull needs at least 3 two-dimensional points")
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    if len(uniq) < 3:
        raise DataError("convex_hull needs at least 3 distinct points")

    lower: list[tuple[float, float]] = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DataError("input points are collinear; hull is degenerate")
    return np.asarray(hull, dtype=np.float64)


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area (positive for counterclockwise order)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def rasterize_mask(poly: np.ndarray, H: int, W: int) -> np.ndarray:
    """Boolean [H, W] mask, true where the pixel center (x=col, y=row)
    lies inside or on the convex polygon."""
    poly = np.asarray(poly, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[0] < 3:
        raise DataError("rasterize_mask needs a polygon with >= 3 vertices")
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    ys = np.arange(H, dtype=np.float64)[:, None]
    xs = np.arange(W, dtype=np.float64)[None, :]
    mask = np.ones((H, W), dtype=bool)
    n = poly.shape[0]
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        side = (x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0)
        mask &= side >= -1e-9
    return mask


def apply_mask(frame: np.ndarray, strategy: MaskStrategy, landmarks: np.ndarray | None = None) -> np.ndarray:
    """Zero out the masked region of one frame [H, W, C] (or [H, W]).

    half: rows >= floor(H/2). full: the convex hull of the boundary
    landmarks. Idempotent; unmasked pixels are bitwise unchanged.
    """
    frame = np.asarray(frame)
    H = frame.shape[0]
    out = frame.copy()
    if strategy.kind == "half":
        out[H // 2 :] = 0.0
        return out
    if landmarks is None:
        raise DataError("full masking requires landmarks")
    landmarks = np.asarray(landmarks, dtype=np.float64)
    idx = [i for i in strategy.boundary_indices if i < landmarks.shape[0]]
    if len(idx) < 3:
        raise DataError("full masking needs at least 3 boundary landmarks")
    hull = convex_hull(landmarks[idx])
    mask = rasterize_mask(hull, H, frame.shape[1])
    out[mask] = 0.0
    return out


def apply_mask_window(frames: np.ndarray, strategy: MaskStrategy, landmarks: np.ndarray | None = None) -> np.ndarray:
    """Apply :func:`apply_mask` to every frame of a [T, H, W, C] window."""
    lm = landmarks if landmarks is not None else [None] * frames.shape[0]
    return np.stack([apply_mask(f, strategy, l) for f, l in zip(frames, lm)])


def build_generator_input(
    reference: np.ndarray,
    pose_source: np.ndarray,
    strategy: MaskStrategy,
    landmarks: np.ndarray | None = None,
) -> np.ndarray:
    """Channel-concatenate the reference window with the masked pose prior.

    Input windows are [T, H, W, C]; the result is [T, H, W, 2C] with the
    reference first. With full masking the pose prior carries no pixels
    inside the face hull.
    """
    reference = np.asarray(reference)
    pose_source = np.asarray(pose_source)
    if reference.shape != pose_source.shape:
        raise DataError(
            f"reference shape {reference.shape} != pose source shape {pose_source.shape}"
        )
    masked = apply_mask_window(pose_source, strategy, landmarks)
    return np.concatenate([reference, masked], axis=-1)
