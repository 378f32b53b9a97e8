"""Differentiable greyscale face measurement.

Recovers the renderer's expression controls (mouth opening, mouth
curvature, brow height) from pixels alone via soft template matching on
the dark facial features. Every step is a smooth tensor op, so the
measurements can serve as a frozen training objective with gradients
flowing back into generated frames.

The pipeline: greyscale -> soft dark-pixel mass -> split the mass at its
vertical centroid into brow (upper) and mouth (lower) clusters -> moment
features. A per-frame-size affine calibration (solved once against probe
renders in ``scorers``) maps the raw moment features to parameter units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .facegen import GREY_WEIGHTS

# Luminance threshold separating feature pixels (brows, mouth) from skin
# and background; renderer color choices guarantee a wide margin. The
# small floor is subtracted so the sigmoid tail over the (large, bright)
# skin and background areas contributes exactly zero mass.
DARK_TAU = 0.38
DARK_STEEP = 16.0
DARK_FLOOR = 0.03
_EPS = 1e-6

# A frame is "no face" when the dark fraction is implausible (a zeroed
# hull floods the detector) or the mouth mass is missing.
MAX_DARK_FRACTION = 0.18
MIN_MOUTH_MASS = 4.0
MIN_FRAME_STD = 1e-5


@dataclass
class RawFeatures:
    """Raw moment features per frame, all tensors of shape [N]."""

    open_raw: torch.Tensor
    curve_raw: torch.Tensor
    brow_raw: torch.Tensor
    mouth_mass: torch.Tensor
    dark_fraction: torch.Tensor
    frame_std: torch.Tensor

    def stacked(self) -> torch.Tensor:
        # The curve regression slope compresses as the mouth opens (the
        # u-basis is estimated from the mass spread); the product features
        # let the affine calibration absorb that coupling, which is
        # stronger than bilinear when the mouth is nearly closed.
        return torch.stack(
            [
                self.open_raw,
                self.curve_raw,
                self.brow_raw,
                self.curve_raw * self.open_raw,
                self.curve_raw * self.open_raw**2,
            ],
            dim=-1,
        )


def to_greyscale(frames: torch.Tensor) -> torch.Tensor:
    """[..., H, W, 3] -> [..., H, W] luminance."""
    w = torch.as_tensor(GREY_WEIGHTS, dtype=frames.dtype, device=frames.device)
    return frames @ w


def as_frame_batch(frames) -> torch.Tensor:
    """Coerce numpy/torch input of shape [H,W,3] or [N,H,W,3] to [N,H,W,3]."""
    t = torch.as_tensor(frames)
    if t.dtype not in (torch.float32, torch.float64):
        t = t.float()
    if t.ndim == 3:
        t = t.unsqueeze(0)
    if t.ndim != 4 or t.shape[-1] != 3:
        raise ValueError(f"expected [N, H, W, 3] frames, got shape {tuple(t.shape)}")
    return t


def measure_raw(grey: torch.Tensor, tau: float = DARK_TAU, steep: float = DARK_STEEP) -> RawFeatures:
    """Moment features from greyscale frames [N, H, W].

    ``tau``/``steep`` are expressed in the same units as ``grey``; callers
    that normalize their input first must transform the constants with the
    same affine map (the measurement itself is then identical).
    """
    if grey.ndim != 3:
        raise ValueError(f"expected [N, H, W] greyscale, got {tuple(grey.shape)}")
    N, H, W = grey.shape
    ys = torch.arange(H, dtype=grey.dtype, device=grey.device).view(1, H, 1)
    xs = torch.arange(W, dtype=grey.dtype, device=grey.device).view(1, 1, W)

    dark = torch.clamp(torch.sigmoid(steep * (tau - grey)) - DARK_FLOOR, min=0.0) / (1.0 - DARK_FLOOR)
    mass_all = dark.sum(dim=(1, 2))
    y_all = (dark * ys).sum(dim=(1, 2)) / (mass_all + _EPS)

    # Split dark mass into brow (above centroid) and mouth (below) clusters.
    # The split must be sharp: a stray fraction of brow mass has ~20 px of
    # vertical leverage on the mouth-curve regression.
    rel = ys - y_all.view(N, 1, 1)
    low = dark * torch.sigmoid(rel / 0.5)
    up = dark - low

    m_col = low.sum(dim=1)  # [N, W]
    mouth_mass = m_col.sum(dim=1)
    x_bar = (m_col * xs[:, 0, :]).sum(dim=1) / (mouth_mass + _EPS)
    var_x = (m_col * (xs[:, 0, :] - x_bar[:, None]) ** 2).sum(dim=1) / (mouth_mass + _EPS)
    half_w = torch.sqrt(3.0 * var_x + _EPS)
    u = (xs[:, 0, :] - x_bar[:, None]) / (half_w[:, None] + _EPS)  # [N, W]

    y_col = (low * ys).sum(dim=1) / (m_col + _EPS)  # [N, W]
    y_mouth = (m_col * y_col).sum(dim=1) / (mouth_mass + _EPS)

    # Weighted regression of the per-column mouth height on u^2 picks up
    # the parabola the renderer draws; its slope is affine in mouth_curve.
    b = u**2 - ((m_col * u**2).sum(dim=1) / (mouth_mass + _EPS))[:, None]
    num = (m_col * (y_col - y_mouth[:, None]) * b).sum(dim=1)
    den = (m_col * b**2).sum(dim=1)
    curve_raw = -num / (den + _EPS)

    # Central-column vertical spread tracks the mouth opening and is
    # invariant to overall contrast (mass-normalized).
    mad = (low * (ys - y_col[:, None, :]).abs()).sum(dim=1) / (m_col + _EPS)
    g = torch.exp(-3.0 * u**2)
    open_raw = (m_col * g * mad).sum(dim=1) / ((m_col * g).sum(dim=1) + _EPS)

    brow_mass = up.sum(dim=(1, 2))
    y_brow = (up * ys).sum(dim=(1, 2)) / (brow_mass + _EPS)
    brow_raw = y_mouth - y_brow

    return RawFeatures(
        open_raw=open_raw,
        curve_raw=curve_raw,
        brow_raw=brow_raw,
        mouth_mass=mouth_mass,
        dark_fraction=mass_all / float(H * W),
        frame_std=grey.reshape(N, -1).std(dim=1),
    )


@dataclass
class Calibration:
    """Affine map from raw moment features to renderer parameter units.

    estimate = raw @ weight + bias, ordered (mouth_open, mouth_curve,
    brow_angle). Solved by least squares over probe renders.
    """

    weight: np.ndarray  # [n_features, 3]
    bias: np.ndarray  # [3]
    frame_size: tuple[int, int]

    def apply(self, feats: RawFeatures) -> torch.Tensor:
        w = torch.as_tensor(self.weight, dtype=feats.open_raw.dtype)
        b = torch.as_tensor(self.bias, dtype=feats.open_raw.dtype)
        return feats.stacked() @ w + b

    @staticmethod
    def solve(raw: np.ndarray, targets: np.ndarray, frame_size) -> "Calibration":
        design = np.concatenate([raw, np.ones((raw.shape[0], 1))], axis=1)
        coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
        return Calibration(weight=coef[:-1], bias=coef[-1], frame_size=tuple(frame_size))


def face_present(feats: RawFeatures) -> torch.Tensor:
    """Boolean [N]: frame has a usable face for the analytic scorers."""
    return (
        (feats.frame_std > MIN_FRAME_STD)
        & (feats.dark_fraction < MAX_DARK_FRACTION)
        & (feats.mouth_mass > MIN_MOUTH_MASS)
    )
