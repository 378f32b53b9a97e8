"""Procedural paired-emotion talking-face corpus.

Renders a parametric cartoon face whose articulation (mouth opening) is an
exact affine function of a synthetic audio envelope, and whose expression
(mouth curvature, brow height) is set by an emotion label. The same
(actor, utterance, seed) triple rendered under different emotions yields
frame-aligned sequences that differ only in expression plus per-emotion
micro-jitter, which gives the evaluation stage exact paired ground truth.

Feature colors are chosen so that a greyscale view separates cleanly:
brows and mouth are dark, skin and background are bright, and the eyes are
luminance-matched to the skin so they vanish in greyscale. The analytic
scorers rely on that separation.
"""

from __future__ import annotations

import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError
from .tensorio import read_tensor, write_tensor

EMOTIONS = ("happy", "neutral", "sad")
FPS = 25

# Greyscale weights (ITU-R BT.601), shared with the scorers.
GREY_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Expression deltas per unit intensity. Happy and sad mirror each other.
CURVE_DELTA = 0.6
BROW_DELTA = 0.3

# Face geometry as fractions of the frame size.
_FACE_CX, _FACE_CY = 0.50, 0.48
_FACE_RX, _FACE_RY = 0.36, 0.42
_EYE_DX, _EYE_Y = 0.14, 0.36
_EYE_RX = 0.055
_BROW_Y, _BROW_DX = 0.27, 0.14
_BROW_HW, _BROW_HH = 0.065, 0.013
_BROW_LIFT = 0.045
_MOUTH_Y, _MOUTH_HW = 0.68, 0.19
_CURVE_AMP = 0.08
_MOUTH_T_BASE = 0.022
_MOUTH_T_OPEN = 0.11
_AA = 2.5  # anti-alias width in pixels; coverage has compact support

MOUTH_COLOR = np.array([0.45, 0.10, 0.12])
BROW_COLOR = np.array([0.13, 0.10, 0.10])
# Zero-luminance chroma direction used to tint eyes without changing grey.
_EYE_CHROMA = np.array([-0.20, -0.0147, 0.60])

N_RING = 12
BOUNDARY_INDICES = tuple(range(N_RING))
N_LANDMARKS = N_RING + 4 + 2 + 2 + 1  # ring, brows, eyes, mouth corners, mouth center


@dataclass(frozen=True)
class FaceParams:
    """Renderer controls. All expression scalars live in fixed ranges."""

    mouth_open: float = 0.3
    mouth_curve: float = 0.0
    brow_angle: float = 0.0
    eye_open: float = 0.7
    pose_dx: float = 0.0
    pose_dy: float = 0.0
    identity_seed: int = 0

    def validate(self) -> "FaceParams":
        if not 0.0 <= self.mouth_open <= 1.0:
            raise DataError(f"mouth_open {self.mouth_open} outside [0, 1]")
        if not -1.0 <= self.mouth_curve <= 1.0:
            raise DataError(f"mouth_curve {self.mouth_curve} outside [-1, 1]")
        if not -1.0 <= self.brow_angle <= 1.0:
            raise DataError(f"brow_angle {self.brow_angle} outside [-1, 1]")
        if not 0.0 <= self.eye_open <= 1.0:
            raise DataError(f"eye_open {self.eye_open} outside [0, 1]")
        return self

    def clamped(self) -> "FaceParams":
        return replace(
            self,
            mouth_open=float(np.clip(self.mouth_open, 0.0, 1.0)),
            mouth_curve=float(np.clip(self.mouth_curve, -1.0, 1.0)),
            brow_angle=float(np.clip(self.brow_angle, -1.0, 1.0)),
            eye_open=float(np.clip(self.eye_open, 0.0, 1.0)),
        )


@dataclass(frozen=True)
class EmotionLabel:
    name: str
    intensity: int = 1

    def __post_init__(self):
        if self.name not in EMOTIONS:
            raise DataError(f"unknown emotion {self.name!r}, expected one of {EMOTIONS}")
        if self.intensity < 1:
            raise DataError(f"intensity must be >= 1, got {self.intensity}")
        if self.name == "neutral" and self.intensity != 1:
            raise DataError("neutral emotion is fixed at intensity 1")


@dataclass(frozen=True)
class ExpressionDelta:
    """Additive offsets applied on top of the neutral expression."""

    mouth_curve: float = 0.0
    brow_angle: float = 0.0


def emotion_params(label: EmotionLabel) -> ExpressionDelta:
    """Map an emotion label to its expression delta.

    Neutral is the identity; happy and sad mirror each other in both the
    mouth-curve and brow-angle signs, scaled linearly by intensity.
    """
    if label.name == "neutral":
        return ExpressionDelta(0.0, 0.0)
    sign = 1.0 if label.name == "happy" else -1.0
    return ExpressionDelta(
        mouth_curve=sign * CURVE_DELTA * label.intensity,
        brow_angle=sign * BROW_DELTA * label.intensity,
    )


def _coverage(signed_dist: np.ndarray) -> np.ndarray:
    """Linear anti-alias coverage with compact support (exact zeros outside)."""
    return np.clip(0.5 - signed_dist / _AA, 0.0, 1.0)


def _paint(img: np.ndarray, alpha: np.ndarray, color: np.ndarray) -> None:
    img += alpha[..., None] * (color[None, None, :] - img)


def _identity_colors(identity_seed: int):
    rng = np.random.default_rng(np.random.SeedSequence([986443, int(identity_seed)]))
    skin_y = rng.uniform(0.62, 0.80)
    warm = rng.uniform(0.04, 0.14)
    blue = rng.uniform(-0.06, 0.04)
    skin = np.array([skin_y + warm, skin_y, skin_y + blue])
    skin = np.clip(skin, 0.50, 0.95)
    bg_y = rng.uniform(0.62, 0.78)
    bg = np.clip(np.array([bg_y - 0.04, bg_y, bg_y + rng.uniform(0.0, 0.10)]), 0.50, 0.97)
    eye = np.clip(skin + rng.uniform(0.35, 0.55) * _EYE_CHROMA, 0.0, 1.0)
    return skin, bg, eye


def mouth_box(params: FaceParams, size: tuple[int, int]) -> tuple[int, int, int, int]:
    """Maximal pixel region the mouth can occupy at these pose/identity
    settings, over all mouth_open and mouth_curve values.

    Returned as (y0, y1, x0, x1), half-open, clipped to the frame.
    """
    H, W = size
    mx = _FACE_CX * W + params.pose_dx
    my = _MOUTH_Y * H + params.pose_dy
    mw = _MOUTH_HW * W
    camp = _CURVE_AMP * H
    t_max = (_MOUTH_T_BASE * H + 0.7 + _MOUTH_T_OPEN * H) / 2.0
    pad = _AA + 1.0
    y0 = int(np.floor(my - (2.0 / 3.0) * camp - t_max - pad))
    y1 = int(np.ceil(my + (2.0 / 3.0) * camp + t_max + pad)) + 1
    x0 = int(np.floor(mx - mw - pad))
    x1 = int(np.ceil(mx + mw + pad)) + 1
    return max(y0, 0), min(y1, H), max(x0, 0), min(x1, W)


def render_frame(params: FaceParams, size: tuple[int, int] = (64, 64)):
    """Render one face frame.

    Returns ``(frame, landmarks, box)``: float32 frame [H, W, 3] in [0, 1],
    float landmarks [N_LANDMARKS, 2] as (x, y), and the mouth bounding
    region from :func:`mouth_box`. Deterministic in ``params``.
    """
    H, W = size
    if H < 32 or W < 32:
        raise DataError(f"frame size {size} below 32x32 minimum")
    params.validate()

    skin, bg_color, eye_color = _identity_colors(params.identity_seed)
    ys = np.arange(H, dtype=np.float64)[:, None]
    xs = np.arange(W, dtype=np.float64)[None, :]

    img = np.empty((H, W, 3), dtype=np.float64)
    grad = 0.06 * (ys / max(H - 1, 1))
    img[:] = bg_color[None, None, :] + grad[..., None] * 0.5
    np.clip(img, 0.0, 1.0, out=img)

    cx = _FACE_CX * W + params.pose_dx
    cy = _FACE_CY * H + params.pose_dy
    rx, ry = _FACE_RX * W, _FACE_RY * H

    # Face ellipse; signed distance approximated via the normalized radius.
    r = np.sqrt(((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2)
    _paint(img, _coverage((r - 1.0) * min(rx, ry)), skin)

    # Eyes: luminance-matched to skin so they vanish in greyscale.
    eye_ry = (0.012 + 0.028 * params.eye_open) * H
    for side in (-1.0, 1.0):
        ex = cx + side * _EYE_DX * W
        ey = cy + (_EYE_Y - _FACE_CY) * H
        re = np.sqrt(((xs - ex) / (_EYE_RX * W)) ** 2 + ((ys - ey) / max(eye_ry, 0.5)) ** 2)
        _paint(img, _coverage((re - 1.0) * min(_EYE_RX * W, eye_ry)), eye_color)

    # Brows: dark strips that translate vertically with brow_angle.
    brow_y = cy + (_BROW_Y - _FACE_CY) * H - _BROW_LIFT * H * params.brow_angle
    bhw, bhh = _BROW_HW * W, _BROW_HH * H + 0.6
    for side in (-1.0, 1.0):
        bx = cx + side * _BROW_DX * W
        d = np.maximum(np.abs(xs - bx) - bhw, np.abs(ys - brow_y) - bhh)
        _paint(img, _coverage(d), BROW_COLOR)

    # Mouth: a curved strip. Midline follows a parabola in the normalized
    # horizontal coordinate u; thickness grows with mouth_open at the center.
    mx = cx
    my = cy + (_MOUTH_Y - _FACE_CY) * H
    mw = _MOUTH_HW * W
    camp = _CURVE_AMP * H
    u = (xs - mx) / mw
    mid = my - camp * params.mouth_curve * (u**2 - 1.0 / 3.0)
    half_t = (_MOUTH_T_BASE * H + 0.7 + _MOUTH_T_OPEN * H * params.mouth_open * (1.0 - u**2)) / 2.0
    d_vert = np.abs(ys - mid) - half_t
    d_horiz = (np.abs(u) - 1.0) * mw
    _paint(img, _coverage(np.maximum(d_vert, d_horiz)), MOUTH_COLOR)

    landmarks = np.empty((N_LANDMARKS, 2), dtype=np.float64)
    angles = np.linspace(0.0, 2.0 * np.pi, N_RING, endpoint=False)
    landmarks[:N_RING, 0] = cx + rx * np.cos(angles)
    landmarks[:N_RING, 1] = cy + ry * np.sin(angles)
    i = N_RING
    for side in (-1.0, 1.0):
        bx = cx + side * _BROW_DX * W
        landmarks[i] = (bx - bhw, brow_y)
        landmarks[i + 1] = (bx + bhw, brow_y)
        i += 2
    for side in (-1.0, 1.0):
        landmarks[i] = (cx + side * _EYE_DX * W, cy + (_EYE_Y - _FACE_CY) * H)
        i += 1
    y_corner = my - camp * params.mouth_curve * (1.0 - 1.0 / 3.0)
    landmarks[i] = (mx - mw, y_corner)
    landmarks[i + 1] = (mx + mw, y_corner)
    landmarks[i + 2] = (mx, my + camp * params.mouth_curve / 3.0)

    landmarks[:, 0] = np.clip(landmarks[:, 0], 0.0, W - 1e-3)
    landmarks[:, 1] = np.clip(landmarks[:, 1], 0.0, H - 1e-3)

    return img.astype(np.float32), landmarks, mouth_box(params, size)


@dataclass
class Utterance:
    """One synthesized clip: frames, aligned audio features, landmarks."""

    actor_id: int
    utterance_id: int
    emotion: EmotionLabel
    frames: np.ndarray  # [N, H, W, 3] float32 in [0, 1]
    audio: np.ndarray  # [N * steps_per_frame, mel_bands] float32
    landmarks: np.ndarray  # [N, N_LANDMARKS, 2]
    fps: int = FPS
    mouth_open: np.ndarray | None = None  # [N] articulation ground truth
    frame_params: list[FaceParams] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass(frozen=True)
class SplitSpec:
    train_actors: tuple[int, ...]
    val_actors: tuple[int, ...]
    test_actors: tuple[int, ...]
    seed: int

    def __post_init__(self):
        sets = [set(self.train_actors), set(self.val_actors), set(self.test_actors)]
        total = sum(len(s) for s in sets)
        if len(sets[0] | sets[1] | sets[2]) != total:
            raise DataError("actor splits must be disjoint")

    def split_of(self, actor_id: int) -> str:
        for name in ("train", "val", "test"):
            if actor_id in getattr(self, f"{name}_actors"):
                return name
        raise DataError(f"actor {actor_id} not in any split")


@dataclass
class CorpusConfig:
    train_actors: int = 8
    val_actors: int = 2
    test_actors: int = 2
    utterances: int = 3
    frames_per_utterance: int = 50
    frame_size: int = 64
    window: int = 5
    audio_steps_per_frame: int = 4
    mel_bands: int = 16
    jitter: float = 0.02
    pose_amp_frac: float = 0.03
    intensity: dict = field(default_factory=lambda: {"happy": 1, "neutral": 1, "sad": 1})
    seed: int = 0

    @property
    def num_actors(self) -> int:
        return self.train_actors + self.val_actors + self.test_actors

    def label(self, name: str) -> EmotionLabel:
        return EmotionLabel(name, int(self.intensity.get(name, 1)))

    def to_dict(self) -> dict:
        return {
            "train_actors": self.train_actors,
            "val_actors": self.val_actors,
            "test_actors": self.test_actors,
            "utterances": self.utterances,
            "frames_per_utterance": self.frames_per_utterance,
            "frame_size": self.frame_size,
            "window": self.window,
            "audio_steps_per_frame": self.audio_steps_per_frame,
            "mel_bands": self.mel_bands,
            "jitter": self.jitter,
            "pose_amp_frac": self.pose_amp_frac,
            "intensity": dict(self.intensity),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        return cls(**d)


def _articulation_rng(cfg: CorpusConfig, actor_id: int, utterance_id: int):
    return np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), 71, int(actor_id), int(utterance_id)])
    )


def _expression_rng(cfg: CorpusConfig, actor_id: int, utterance_id: int, emotion: str):
    return np.random.default_rng(
        np.random.SeedSequence(
            [int(cfg.seed), 72, int(actor_id), int(utterance_id), EMOTIONS.index(emotion)]
        )
    )


def _synth_audio(cfg: CorpusConfig, actor_id: int, utterance_id: int, num_frames: int):
    """Audio envelope + mel-like features. Returns (features, frame_envelope).

    The per-step band mean equals the envelope exactly, so the envelope can
    be recovered from the stored features without loss.
    """
    rng = _articulation_rng(cfg, actor_id, utterance_id)
    spf = cfg.audio_steps_per_frame
    n_steps = num_frames * spf
    t = np.arange(n_steps, dtype=np.float64) / (FPS * spf)

    f1 = rng.uniform(4.5, 7.5)
    f2 = rng.uniform(1.5, 3.0)
    ph1, ph2 = rng.uniform(0, 2 * np.pi, size=2)
    frame_noise = rng.uniform(-1.0, 1.0, size=num_frames)
    raw = (
        0.9 * np.sin(2 * np.pi * f1 * t + ph1)
        + 0.6 * np.sin(2 * np.pi * f2 * t + ph2)
        + 0.5 * np.repeat(frame_noise, spf)
    )
    env = 0.5 + 0.45 * np.tanh(raw)

    band_phase = rng.uniform(0, 2 * np.pi)
    profile = 1.0 + 0.35 * np.sin(np.linspace(0, 2 * np.pi, cfg.mel_bands) + band_phase)
    profile /= profile.mean()
    texture = 0.05 * rng.standard_normal((n_steps, cfg.mel_bands))
    texture -= texture.mean(axis=1, keepdims=True)
    features = env[:, None] * profile[None, :] + texture

    frame_env = env.reshape(num_frames, spf).mean(axis=1)
    return features.astype(np.float32), frame_env


def synth_utterance(
    cfg: CorpusConfig,
    actor_id: int,
    utterance_id: int,
    emotion: EmotionLabel,
    num_frames: int | None = None,
    seed: int | None = None,
) -> Utterance:
    """Synthesize one utterance at 25 FPS.

    The mouth-open trajectory is an exact affine function of the per-frame
    audio envelope; expression parameters are the neutral base plus the
    emotion delta plus seeded micro-jitter. Articulation and pose depend
    only on (actor, utterance, seed), never on the emotion.
    """
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if num_frames is None:
        num_frames = cfg.frames_per_utterance
    if num_frames < cfg.window:
        raise DataError(f"num_frames {num_frames} < window length {cfg.window}")

    H = W = cfg.frame_size
    audio, frame_env = _synth_audio(cfg, actor_id, utterance_id, num_frames)
    mouth_open = 0.05 + 0.9 * frame_env

    pose_rng = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), 73, int(actor_id), int(utterance_id)])
    )
    amp = cfg.pose_amp_frac * H
    fp, fq = pose_rng.uniform(0.3, 0.9, size=2)
    pp, pq = pose_rng.uniform(0, 2 * np.pi, size=2)
    tf = np.arange(num_frames, dtype=np.float64) / FPS
    pose_dx = amp * np.sin(2 * np.pi * fp * tf + pp)
    pose_dy = amp * np.sin(2 * np.pi * fq * tf + pq)

    delta = emotion_params(emotion)
    jrng = _expression_rng(cfg, actor_id, utterance_id, emotion.name)
    jitter = jrng.uniform(-cfg.jitter, cfg.jitter, size=(num_frames, 3))

    frames = np.empty((num_frames, H, W, 3), dtype=np.float32)
    landmarks = np.empty((num_frames, N_LANDMARKS, 2), dtype=np.float32)
    frame_params = []
    for i in range(num_frames):
        params = FaceParams(
            mouth_open=float(mouth_open[i]),
            mouth_curve=delta.mouth_curve + jitter[i, 0],
            brow_angle=delta.brow_angle + jitter[i, 1],
            eye_open=0.7 + jitter[i, 2],
            pose_dx=float(pose_dx[i]),
            pose_dy=float(pose_dy[i]),
            identity_seed=actor_id,
        ).clamped()
        frame, lm, _ = render_frame(params, (H, W))
        frames[i] = frame
        landmarks[i] = lm
        frame_params.append(params)

    return Utterance(
        actor_id=actor_id,
        utterance_id=utterance_id,
        emotion=emotion,
        frames=frames,
        audio=audio,
        landmarks=landmarks,
        fps=FPS,
        mouth_open=mouth_open,
        frame_params=frame_params,
    )


def utterance_dir(root: str, actor_id: int, emotion: EmotionLabel, utterance_id: int) -> str:
    return os.path.join(
        root,
        f"actor_{actor_id:03d}",
        f"{emotion.name}_{emotion.intensity}",
        f"utt_{utterance_id:03d}",
    )


def _write_utterance(root: str, utt: Utterance, cfg: CorpusConfig) -> None:
    out = utterance_dir(root, utt.actor_id, utt.emotion, utt.utterance_id)
    os.makedirs(out, exist_ok=True)
    write_tensor(os.path.join(out, "frames.bin"), utt.frames)
    write_tensor(os.path.join(out, "audio.bin"), utt.audio)
    with open(os.path.join(out, "landmarks.json"), "w") as fh:
        json.dump([[[round(float(x), 4), round(float(y), 4)] for x, y in lm] for lm in utt.landmarks], fh)
    meta = {
        "actor": utt.actor_id,
        "utterance": utt.utterance_id,
        "emotion": utt.emotion.name,
        "intensity": utt.emotion.intensity,
        "fps": FPS,
        "seed": cfg.seed,
        "num_frames": utt.num_frames,
        "frame_size": cfg.frame_size,
    }
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)


def _synth_task(args):
    cfg_dict, actor_id, utterance_id, emotion_name = args
    cfg = CorpusConfig.from_dict(cfg_dict)
    return synth_utterance(cfg, actor_id, utterance_id, cfg.label(emotion_name))


def make_corpus(cfg: CorpusConfig, root: str, workers: int = 1, force: bool = False) -> SplitSpec:
    """Generate the full corpus on disk and return the actor split.

    Every actor lands in exactly one split and every (actor, utterance)
    exists in all three emotions, so each source-emotion clip has its
    paired destination-emotion clip.
    """
    if min(cfg.train_actors, cfg.val_actors, cfg.test_actors) < 1 or cfg.num_actors < 3:
        raise DataError(
            f"actor counts {cfg.train_actors}/{cfg.val_actors}/{cfg.test_actors} "
            "cannot fill train/val/test splits"
        )
    if os.path.isdir(root) and os.listdir(root):
        if not force:
            raise DataError(f"output directory {root} is not empty (use force)")
        shutil.rmtree(root)
    os.makedirs(root, exist_ok=True)

    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 70]))
    order = rng.permutation(cfg.num_actors)
    split = SplitSpec(
        train_actors=tuple(int(a) for a in order[: cfg.train_actors]),
        val_actors=tuple(int(a) for a in order[cfg.train_actors : cfg.train_actors + cfg.val_actors]),
        test_actors=tuple(int(a) for a in order[cfg.train_actors + cfg.val_actors :]),
        seed=cfg.seed,
    )

    tasks = [
        (cfg.to_dict(), actor, utt, emotion)
        for actor in range(cfg.num_actors)
        for utt in range(cfg.utterances)
        for emotion in EMOTIONS
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for utt in pool.map(_synth_task, tasks, chunksize=4):
                _write_utterance(root, utt, cfg)
    else:
        for task in tasks:
            _write_utterance(root, _synth_task(task), cfg)

    with open(os.path.join(root, "splits.json"), "w") as fh:
        json.dump(
            {
                "train_actors": list(split.train_actors),
                "val_actors": list(split.val_actors),
                "test_actors": list(split.test_actors),
                "seed": cfg.seed,
            },
            fh,
            sort_keys=True,
            indent=1,
        )
    with open(os.path.join(root, "corpus.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, sort_keys=True, indent=1)
    _write_stats(cfg, root, split)
    return split


def _write_stats(cfg: CorpusConfig, root: str, split: SplitSpec) -> None:
    """Channel and greyscale statistics over a train-split frame sample."""
    acc = []
    for actor in split.train_actors:
        for emotion in EMOTIONS:
            d = utterance_dir(root, actor, cfg.label(emotion), 0)
            frames = read_tensor(os.path.join(d, "frames.bin"))
            acc.append(frames[:: max(1, frames.shape[0] // 8)])
    sample = np.concatenate(acc, axis=0).astype(np.float64)
    grey = sample @ GREY_WEIGHTS
    stats = {
        "channel_mean": [float(m) for m in sample.mean(axis=(0, 1, 2))],
        "channel_std": [float(s) for s in sample.std(axis=(0, 1, 2))],
        "grey_mean": float(grey.mean()),
        "grey_std": float(grey.std()),
    }
    with open(os.path.join(root, "stats.json"), "w") as fh:
        json.dump(stats, fh, sort_keys=True, indent=1)


class Corpus:
    """Read access to an on-disk corpus."""

    def __init__(self, root: str):
        self.root = root
        corpus_json = os.path.join(root, "corpus.json")
        splits_json = os.path.join(root, "splits.json")
        if not (os.path.isfile(corpus_json) and os.path.isfile(splits_json)):
            raise DataError(f"{root} is not a corpus directory (missing corpus.json/splits.json)")
        with open(corpus_json) as fh:
            self.config = CorpusConfig.from_dict(json.load(fh))
        with open(splits_json) as fh:
            s = json.load(fh)
        self.split = SplitSpec(
            tuple(s["train_actors"]), tuple(s["val_actors"]), tuple(s["test_actors"]), s["seed"]
        )
        stats_json = os.path.join(root, "stats.json")
        self.stats = None
        if os.path.isfile(stats_json):
            with open(stats_json) as fh:
                self.stats = json.load(fh)

    def actors(self, split_name: str | None = None) -> tuple[int, ...]:
        if split_name is None:
            return tuple(range(self.config.num_actors))
        if split_name not in ("train", "val", "test"):
            raise ConfigError(f"unknown split {split_name!r}")
        return getattr(self.split, f"{split_name}_actors")

    def utterance_ids(self) -> tuple[int, ...]:
        return tuple(range(self.config.utterances))

    def path(self, actor_id: int, emotion: str, utterance_id: int) -> str:
        return utterance_dir(self.root, actor_id, self.config.label(emotion), utterance_id)

    def has(self, actor_id: int, emotion: str, utterance_id: int) -> bool:
        return os.path.isfile(os.path.join(self.path(actor_id, emotion, utterance_id), "frames.bin"))

    def load(self, actor_id: int, emotion: str, utterance_id: int) -> Utterance:
        d = self.path(actor_id, emotion, utterance_id)
        if not os.path.isdir(d):
            raise DataError(f"missing utterance {d}")
        frames = read_tensor(os.path.join(d, "frames.bin"))
        audio = read_tensor(os.path.join(d, "audio.bin"))
        with open(os.path.join(d, "landmarks.json")) as fh:
            landmarks = np.asarray(json.load(fh), dtype=np.float32)
        with open(os.path.join(d, "meta.json")) as fh:
            meta = json.load(fh)
        return Utterance(
            actor_id=meta["actor"],
            utterance_id=meta["utterance"],
            emotion=EmotionLabel(meta["emotion"], meta["intensity"]),
            frames=frames,
            audio=audio,
            landmarks=landmarks,
            fps=meta["fps"],
        )
