"""Generator and full-frame visual-quality discriminator.

Desk-scale encoder/decoder: an identity encoder over the stacked
(reference, masked pose prior) input, a 2D-conv speech encoder whose
embedding is broadcast into the bottleneck, and a skip-connected
upsampling decoder with a bounded output. The discriminator scores whole
frames through stride-2 stages with identity-shortcut residual blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import DataError


@dataclass
class ModelConfig:
    frame_size: int = 64
    channels: int = 3
    window: int = 5
    audio_steps_per_frame: int = 4
    mel_bands: int = 16
    base_width: int = 16
    enc_stages: int = 4
    audio_embed: int = 64
    use_residual: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @property
    def widths(self) -> list[int]:
        return [min(self.base_width * (2**i), 128) for i in range(self.enc_stages)]


class _AudioEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv2d(1, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
        )
        steps = cfg.window * cfg.audio_steps_per_frame
        h = (steps + 7) // 8
        w = (cfg.mel_bands + 7) // 8
        self.proj = nn.Linear(64 * h * w, cfg.audio_embed)

    def forward(self, audio: torch.Tensor) -> torch.Tensor:
        h = self.convs(audio.unsqueeze(1))
        return self.proj(h.flatten(1))


class Generator(nn.Module):
    """Identity encoder + speech encoder + skip-connected face decoder.

    forward(stacked, audio): stacked is [B, T, H, W, 2C] (reference frames
    concatenated with the masked pose prior on channels), audio is
    [B, T*steps_per_frame, mel_bands]. Output is [B, T, H, W, C] in (0, 1).
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.frame_size % (2**cfg.enc_stages):
            raise DataError(
                f"frame_size {cfg.frame_size} must be divisible by 2^{cfg.enc_stages}"
            )
        self.cfg = cfg
        widths = cfg.widths
        enc = []
        prev = 2 * cfg.channels
        for w in widths:
            enc.append(
                nn.Sequential(
                    nn.Conv2d(prev, w, 3, stride=2, padding=1),
                    nn.ReLU(),
                    nn.Conv2d(w, w, 3, padding=1),
                    nn.ReLU(),
                )
            )
            prev = w
        self.encoder = nn.ModuleList(enc)
        self.audio_encoder = _AudioEncoder(cfg)
        self.fuse = nn.Conv2d(prev + cfg.audio_embed, prev, 1)

        dec = []
        skip_widths = widths[::-1]
        for i, w in enumerate(skip_widths):
            in_ch = prev + (skip_widths[i] if i > 0 else 0)
            out_ch = skip_widths[i + 1] if i + 1 < len(skip_widths) else cfg.base_width
            dec.append(
                nn.Sequential(
                    nn.Upsample(scale_factor=2, mode="nearest"),
                    nn.Conv2d(in_ch, out_ch, 3, padding=1),
                    nn.ReLU(),
                )
            )
            prev = out_ch
        self.decoder = nn.ModuleList(dec)
        self.head = nn.Conv2d(cfg.base_width, cfg.channels, 3, padding=1)

    def forward(self, stacked: torch.Tensor, audio: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        B, T, H, W, C2 = stacked.shape
        x = stacked.permute(0, 1, 4, 2, 3).reshape(B * T, C2, H, W)
        skips = []
        for stage in self.encoder:
            x = stage(x)
            skips.append(x)

        a = self.audio_encoder(audio)
        a = a.repeat_interleave(T, dim=0)
        a = a[:, :, None, None].expand(-1, -1, x.shape[2], x.shape[3])
        x = self.fuse(torch.cat([x, a], dim=1))

        for i, stage in enumerate(self.decoder):
            if i > 0:
                x = torch.cat([x, skips[len(self.decoder) - 1 - i]], dim=1)
            x = stage(x)
        out = torch.sigmoid(self.head(x))
        return out.reshape(B, T, cfg.channels, H, W).permute(0, 1, 3, 4, 2)


class _ResidualBlock(nn.Module):
    """Shape-preserving conv block with an identity shortcut that can be
    switched off to ablate the residual wiring."""

    def __init__(self, ch: int, use_residual: bool):
        super().__init__()
        self.use_residual = use_residual
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        h = self.conv2(self.act(self.conv1(x)))
        if self.use_residual:
            h = h + x
        return self.act(h)


class QualityDiscriminator(nn.Module):
    """Full-frame realism score in the open interval (0, 1).

    Scores each frame of the window and averages; one residual block per
    stride-2 stage mirrors the retrained discriminator wiring.
    """

    SCORE_EPS = 1e-6

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        stages = []
        prev = cfg.channels
        for w in cfg.widths:
            stages.append(
                nn.Sequential(
                    nn.Conv2d(prev, w, 3, stride=2, padding=1),
                    nn.LeakyReLU(0.2),
                    _ResidualBlock(w, cfg.use_residual),
                )
            )
            prev = w
        self.stages = nn.Sequential(*stages)
        self.head = nn.Linear(prev, 1)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """[B, T, H, W, C] -> [B] scores in (0, 1), mean over the window."""
        B, T, H, W, C = frames.shape
        x = frames.permute(0, 1, 4, 2, 3).reshape(B * T, C, H, W)
        h = self.stages(x).mean(dim=(2, 3))
        score = torch.sigmoid(self.head(h)).squeeze(1)
        score = score.clamp(self.SCORE_EPS, 1.0 - self.SCORE_EPS)
        return score.reshape(B, T).mean(dim=1)


def init_params(cfg: ModelConfig, seed: int = 0) -> tuple[Generator, QualityDiscriminator]:
    """Deterministically initialized generator/discriminator pair."""
    torch.manual_seed(seed)
    return Generator(cfg), QualityDiscriminator(cfg)


def _check_finite_params(module: nn.Module, name: str) -> None:
    for pname, p in module.named_parameters():
        if not torch.isfinite(p).all():
            raise DataError(f"{name} parameter {pname} contains non-finite values")


def generator_forward(gen: Generator, stacked, audio) -> torch.Tensor:
    """Validated single-window or batched generator forward.

    Accepts [T, H, W, 2C] or [B, T, H, W, 2C] stacked input with matching
    audio [T_a, M] or [B, T_a, M].
    """
    stacked = torch.as_tensor(stacked, dtype=next(gen.parameters()).dtype)
    audio = torch.as_tensor(audio, dtype=stacked.dtype)
    single = stacked.ndim == 4
    if single:
        stacked = stacked.unsqueeze(0)
        audio = audio.unsqueeze(0)
    cfg = gen.cfg
    expected = (cfg.window, cfg.frame_size, cfg.frame_size, 2 * cfg.channels)
    if tuple(stacked.shape[1:]) != expected:
        raise DataError(f"stacked input shape {tuple(stacked.shape[1:])} != {expected}")
    expected_audio = (cfg.window * cfg.audio_steps_per_frame, cfg.mel_bands)
    if tuple(audio.shape[1:]) != expected_audio:
        raise DataError(f"audio shape {tuple(audio.shape[1:])} != {expected_audio}")
    _check_finite_params(gen, "generator")
    out = gen(stacked, audio)
    return out[0] if single else out


def quality_disc_forward(disc: QualityDiscriminator, frames) -> torch.Tensor:
    """Validated discriminator forward over [T, H, W, C] or [B, T, H, W, C]."""
    frames = torch.as_tensor(frames, dtype=next(disc.parameters()).dtype)
    single = frames.ndim == 4
    if single:
        frames = frames.unsqueeze(0)
    cfg = disc.cfg
    expected = (cfg.window, cfg.frame_size, cfg.frame_size, cfg.channels)
    if tuple(frames.shape[1:]) != expected:
        raise DataError(f"frame window shape {tuple(frames.shape[1:])} != {expected}")
    out = disc(frames)
    return out[0] if single else out
