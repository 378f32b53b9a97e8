"""Convex hull against a brute-force oracle, rasterization against the
shoelace formula, and the masking contracts."""

import itertools

import numpy as np
import pytest

from emoshift.errors import DataError, NoFaceError
from emoshift.facegen import BOUNDARY_INDICES, FaceParams, render_frame
from emoshift.masking import (
    MaskStrategy,
    apply_mask,
    build_generator_input,
    convex_hull,
    polygon_area,
    rasterize_mask,
)


def cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def brute_force_hull(points: np.ndarray) -> set:
    """A point is a hull vertex iff it is not strictly inside any triangle
    formed by three other points. O(n^4), oracle only."""

    def strictly_inside(p, a, b, c) -> bool:
        d1 = cross2(b - a, p - a)
        d2 = cross2(c - b, p - b)
        d3 = cross2(a - c, p - c)
        return (d1 > 1e-12 and d2 > 1e-12 and d3 > 1e-12) or (
            d1 < -1e-12 and d2 < -1e-12 and d3 < -1e-12
        )

    keep = set()
    n = len(points)
    for i in range(n):
        inside = False
        others = [j for j in range(n) if j != i]
        for a, b, c in itertools.combinations(others, 3):
            if strictly_inside(points[i], points[a], points[b], points[c]):
                inside = True
                break
        if not inside:
            keep.add((float(points[i][0]), float(points[i][1])))
    return keep


class TestConvexHull:
    def test_triangle_is_its_own_hull(self):
        pts = [(0, 0), (1, 0), (0, 1)]
        hull = convex_hull(pts)
        assert {tuple(p) for p in hull} == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)}

    def test_interior_point_excluded(self):
        pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
        hull = convex_hull(pts)
        assert {tuple(p) for p in hull} == {(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)}

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(5, 18))
            pts = rng.random((n, 2)) * 10
            hull = convex_hull(pts)
            assert {tuple(p) for p in hull} == brute_force_hull(pts)

    def test_counterclockwise_and_convex(self, rng):
        pts = rng.random((30, 2))
        hull = convex_hull(pts)
        assert polygon_area(hull) > 0
        n = len(hull)
        for i in range(n):
            o, a, b = hull[i], hull[(i + 1) % n], hull[(i + 2) % n]
            assert cross2(a - o, b - o) > 0

    def test_contains_all_inputs(self, rng):
        pts = rng.random((40, 2))
        hull = convex_hull(pts)
        n = len(hull)
        for p in pts:
            for i in range(n):
                a, b = hull[i], hull[(i + 1) % n]
                assert cross2(b - a, p - a) >= -1e-9

    def test_rejects_degenerate(self):
        with pytest.raises(DataError):
            convex_hull([(0, 0), (1, 1)])
        with pytest.raises(DataError):
            convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)])


class TestRasterizeMask:
    def test_axis_aligned_rectangle(self):
        poly = np.array([(2.0, 2.0), (5.0, 2.0), (5.0, 5.0), (2.0, 5.0)])
        mask = rasterize_mask(poly, 8, 8)
        assert int(mask.sum()) == 16
        assert mask[2:6, 2:6].all()

    def test_polygon_outside_frame(self):
        poly = np.array([(100.0, 100.0), (110.0, 100.0), (105.0, 110.0)])
        assert not rasterize_mask(poly, 16, 16).any()

    def test_area_matches_shoelace(self, rng):
        for _ in range(20):
            pts = rng.random((12, 2)) * 40 + 5
            hull = convex_hull(pts)
            area = abs(polygon_area(hull))
            n = len(hull)
            perimeter = sum(np.linalg.norm(hull[i] - hull[(i + 1) % n]) for i in range(n))
            count = int(rasterize_mask(hull, 50, 50).sum())
            assert abs(count - area) <= 2 * perimeter


class TestApplyMask:
    def test_half_on_all_ones(self):
        frame = np.ones((64, 64, 3), dtype=np.float32)
        out = apply_mask(frame, MaskStrategy("half"))
        assert (out[32:] == 0).all()
        assert (out[:32] == 1).all()

    def test_half_odd_height_splits_at_floor(self):
        frame = np.ones((7, 4, 1), dtype=np.float32)
        out = apply_mask(frame, MaskStrategy("half"))
        assert (out[3:] == 0).all() and (out[:3] == 1).all()

    def test_full_hull_covering_whole_frame(self):
        frame = np.ones((16, 16, 3), dtype=np.float32)
        landmarks = np.array([(-5.0, -5.0), (25.0, -5.0), (25.0, 25.0), (-5.0, 25.0)])
        out = apply_mask(frame, MaskStrategy("full", boundary_indices=(0, 1, 2, 3)), landmarks)
        assert (out == 0).all()

    def test_full_mask_hides_face_from_scorer(self, rng):
        from emoshift.scorers import AnalyticEmotionScorer

        frame, landmarks, _ = render_frame(FaceParams(identity_seed=3), (48, 48))
        masked = apply_mask(frame, MaskStrategy("full"), landmarks)
        scorer = AnalyticEmotionScorer((48, 48))
        with pytest.raises(NoFaceError):
            scorer.logits(masked)

    def test_full_without_landmarks_rejected(self):
        with pytest.raises(DataError):
            apply_mask(np.ones((8, 8, 3)), MaskStrategy("full"))

    def test_idempotent(self, rng):
        frame = rng.random((48, 48, 3)).astype(np.float32)
        _, landmarks, _ = render_frame(FaceParams(), (48, 48))
        for strategy in (MaskStrategy("half"), MaskStrategy("full")):
            once = apply_mask(frame, strategy, landmarks)
            twice = apply_mask(once, strategy, landmarks)
            assert np.array_equal(once, twice)

    def test_complement_bitwise_preserved(self, rng):
        frame = rng.random((48, 48, 3)).astype(np.float32)
        _, landmarks, _ = render_frame(FaceParams(), (48, 48))
        half = apply_mask(frame, MaskStrategy("half"), landmarks)
        assert np.array_equal(half[:24], frame[:24])
        full = apply_mask(frame, MaskStrategy("full"), landmarks)
        from emoshift.masking import convex_hull as hull_fn

        mask = rasterize_mask(hull_fn(landmarks[list(BOUNDARY_INDICES)]), 48, 48)
        assert np.array_equal(full[~mask], frame[~mask])

    def test_hull_monotonicity(self, rng):
        for _ in range(10):
            pts = rng.random((10, 2)) * 40
            base = rasterize_mask(convex_hull(pts), 48, 48).sum()
            extra = np.vstack([pts, rng.random((1, 2)) * 40])
            grown = rasterize_mask(convex_hull(extra), 48, 48).sum()
            assert grown >= base


class TestBuildGeneratorInput:
    def _window(self, rng):
        frames = np.stack([render_frame(FaceParams(identity_seed=i), (48, 48))[0] for i in range(3)])
        landmarks = np.stack([render_frame(FaceParams(identity_seed=i), (48, 48))[1] for i in range(3)])
        return frames, landmarks

    def test_channel_concat(self, rng):
        frames, landmarks = self._window(rng)
        out = build_generator_input(frames, frames, MaskStrategy("half"), landmarks)
        assert out.shape == (3, 48, 48, 6)
        assert np.array_equal(out[..., :3], frames)

    def test_full_mask_zero_energy_inside_hull(self, rng):
        frames, landmarks = self._window(rng)
        out = build_generator_input(frames, frames, MaskStrategy("full"), landmarks)
        for t in range(3):
            mask = rasterize_mask(convex_hull(landmarks[t][list(BOUNDARY_INDICES)]), 48, 48)
            assert np.abs(out[t][mask][:, 3:]).sum() == 0.0

    def test_shape_mismatch_rejected(self, rng):
        frames, landmarks = self._window(rng)
        with pytest.raises(DataError):
            build_generator_input(frames, frames[:2], MaskStrategy("half"))
