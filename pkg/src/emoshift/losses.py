"""Training objectives: reconstruction, sync, adversarial, emotion.

All functions take and return torch tensors and are differentiable, so
analytic gradients can be checked against finite differences. Reductions
run in fixed order for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import DataError, NumericalError

# Probabilities and discriminator scores are floored before any log so the
# losses stay finite; cosine similarity can be negative otherwise.
P_FLOOR = 1e-7
DEFAULT_EPS = 1e-8

GRAD_CLAMP_LO = 1e-2
GRAD_CLAMP_HI = 1e10


@dataclass(frozen=True)
class LossWeights:
    """Weights of the generator objective terms (reconstruction, sync,
    visual quality, emotion)."""

    s_r: float = 0.8
    s_w: float = 0.03
    s_g: float = 0.07
    s_e: float = 0.1

    def __post_init__(self):
        for name in ("s_r", "s_w", "s_g", "s_e"):
            if getattr(self, name) < 0:
                raise DataError(f"loss weight {name} must be non-negative")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.s_r, self.s_w, self.s_g, self.s_e)


# Default mixing weights; the emotion-objective-only strategy trades
# reconstruction weight for a larger emotion term.
DEFAULT_WEIGHTS = LossWeights(0.8, 0.03, 0.07, 0.1)
EMO_ONLY_WEIGHTS = LossWeights(0.6, 0.03, 0.07, 0.3)


@dataclass
class LossBreakdown:
    L_r: float = 0.0
    E_s: float = 0.0
    L_g: float = 0.0
    L_d: float = 0.0
    L_e: float = 0.0
    L_total: float = 0.0

    CSV_HEADER = "step,L_r,E_s,L_g,L_d,L_e,L_total"

    def csv_row(self, step: int) -> str:
        return (
            f"{step},{self.L_r:.8g},{self.E_s:.8g},{self.L_g:.8g},"
            f"{self.L_d:.8g},{self.L_e:.8g},{self.L_total:.8g}"
        )


def l1_reconstruction(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over windows of the per-window sum of absolute differences."""
    if generated.shape != target.shape:
        raise DataError(f"shape mismatch {tuple(generated.shape)} vs {tuple(target.shape)}")
    if generated.shape[0] < 1:
        raise DataError("need at least one window")
    n = generated.shape[0]
    return (generated - target).abs().reshape(n, -1).sum(dim=1).mean()


def sync_prob(v: torch.Tensor, s: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Eps-guarded cosine similarity, floored into (0, 1] for the log."""
    if eps <= 0:
        raise DataError(f"eps must be positive, got {eps}")
    if v.shape != s.shape:
        raise DataError(f"shape mismatch {tuple(v.shape)} vs {tuple(s.shape)}")
    if v.ndim == 1:
        v, s = v.unsqueeze(0), s.unsqueeze(0)
    denom = torch.clamp(v.norm(dim=1) * s.norm(dim=1), min=eps)
    p = (v * s).sum(dim=1) / denom
    return p.clamp(P_FLOOR, 1.0)


def sync_loss(probs: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy against the all-synchronized label: mean -log P."""
    probs = probs.reshape(-1)
    if (probs <= 0).any():
        raise DataError("sync probabilities must be in (0, 1]; clamp first")
    return (-torch.log(probs)).mean()


def gan_losses(d_real: torch.Tensor, d_fake: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Adversarial objectives.

    L_g = E[log(1 - D(fake))] is the generator's term; the discriminator
    ascends L_d = E[log D(real)] + L_g. Scores are floored away from
    {0, 1} before the logs.
    """
    d_real, d_fake = d_real.reshape(-1), d_fake.reshape(-1)
    for name, t in (("d_real", d_real), ("d_fake", d_fake)):
        if ((t <= 0) | (t >= 1)).any():
            raise DataError(f"{name} scores must lie strictly in (0, 1)")
    l_g = torch.log((1.0 - d_fake).clamp(min=P_FLOOR)).mean()
    l_d = torch.log(d_real.clamp(min=P_FLOOR)).mean() + l_g
    return l_g, l_d


def emotion_softmax(logits: torch.Tensor) -> torch.Tensor:
    """Stable softmax over the class axis (last dim)."""
    z = logits - logits.max(dim=-1, keepdim=True).values
    e = torch.exp(z)
    return e / e.sum(dim=-1, keepdim=True)


def emotion_loss(probs: torch.Tensor, desired: int) -> torch.Tensor:
    """Mean deviation of the desired class likelihood from 1."""
    if probs.ndim == 1:
        probs = probs.unsqueeze(0)
    if not 0 <= desired < probs.shape[-1]:
        raise DataError(f"class index {desired} out of range for {probs.shape[-1]} classes")
    return (1.0 - probs[:, desired]).mean()


def total_loss(breakdown_or_components, weights: LossWeights) -> torch.Tensor:
    """Exact weighted sum s_r*L_r + s_w*E_s + s_g*L_g + s_e*L_e.

    Accepts a LossBreakdown or an (L_r, E_s, L_g, L_e) tuple of tensors.
    """
    if isinstance(breakdown_or_components, LossBreakdown):
        b = breakdown_or_components
        comps = (b.L_r, b.E_s, b.L_g, b.L_e)
    else:
        comps = breakdown_or_components
    l_r, e_s, l_g, l_e = (torch.as_tensor(c, dtype=torch.float64) if not torch.is_tensor(c) else c for c in comps)
    return weights.s_r * l_r + weights.s_w * e_s + weights.s_g * l_g + weights.s_e * l_e


def clamp_grad_norm(grads, lo: float = GRAD_CLAMP_LO, hi: float = GRAD_CLAMP_HI):
    """Rescale a gradient list so its global L2 norm lies in [lo, hi].

    Direction is preserved; an all-zero gradient is returned unchanged
    (there is no direction to rescale).
    """
    if not (0 < lo < hi):
        raise DataError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    grads = [g for g in grads]
    total = torch.sqrt(sum((g.detach() ** 2).sum() for g in grads))
    if not torch.isfinite(total):
        raise NumericalError("gradient norm is not finite")
    n = float(total)
    if n == 0.0:
        return grads
    scale = 1.0
    if n < lo:
        scale = lo / n
    elif n > hi:
        scale = hi / n
    if scale != 1.0:
        grads = [g * scale for g in grads]
    return grads


def clamp_grad_norm_(params, lo: float = GRAD_CLAMP_LO, hi: float = GRAD_CLAMP_HI) -> float:
    """In-place variant over parameters carrying ``.grad``; returns the
    pre-clamp norm."""
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    if not (0 < lo < hi):
        raise DataError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    total = torch.sqrt(sum((g.detach() ** 2).sum() for g in grads))
    if not torch.isfinite(total):
        raise NumericalError("gradient norm is not finite")
    n = float(total)
    if n == 0.0:
        return n
    if n < lo:
        for g in grads:
            g.mul_(lo / n)
    elif n > hi:
        for g in grads:
            g.mul_(hi / n)
    return n
