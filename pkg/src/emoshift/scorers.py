"""Frozen scorer backends: lip sync, emotion class, and valence/arousal.

Each scorer family has an analytic backend that inverts the renderer via
the moment measurements in :mod:`emoshift.measure`, plus an optional tiny
conv backend trained on the synthetic corpus and then frozen. Backends
never update during generator training; ``freeze_check`` fingerprints
their parameters so that invariance is testable exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import measure
from .errors import DataError, NoFaceError
from .facegen import Corpus, EmotionLabel, FaceParams, emotion_params, render_frame
from .measure import Calibration, RawFeatures, as_frame_batch, face_present, measure_raw, to_greyscale
from .tensorio import read_container, write_container

EMOTION_CLASSES = ("happy", "neutral", "sad")

# Affect oracle coefficients: valence tracks mouth curvature with a brow
# correction; arousal rises with expression magnitude and mouth opening.
VALENCE_W = (0.8, 0.2)
AROUSAL_W = (0.3, 0.4, 0.3)

LOGIT_SCALE = 4.0
NEUTRAL_MARGIN = 0.3
_DEGEN_NORM = 1e-5


@dataclass(frozen=True)
class SyncEmbeddingPair:
    v: np.ndarray
    s: np.ndarray
    dim: int = 32


@dataclass(frozen=True)
class EmotionLogits:
    z: np.ndarray  # ordered as EMOTION_CLASSES

    @property
    def argmax(self) -> str:
        return EMOTION_CLASSES[int(np.argmax(self.z))]


@dataclass(frozen=True)
class AffectScore:
    valence: float
    arousal: float


_CALIBRATION_CACHE: dict[tuple[int, int], Calibration] = {}


def _probe_params():
    """Probe grid covering the corpus parameter domain, including off-grid
    poses so sub-pixel quantization effects average into the fit."""
    poses = ((0.0, 0.0), (1.1, -0.8), (-1.3, 0.9))
    probes = []
    for identity in (0, 3, 7, 14):
        for mo in (0.05, 0.35, 0.65, 0.95):
            for mc in (-1.0, -0.6, 0.0, 0.6, 1.0):
                for ba in (-0.7, 0.0, 0.7):
                    dx, dy = poses[(identity + int(10 * mo) + int(10 * abs(mc))) % 3]
                    probes.append(
                        FaceParams(
                            mouth_open=mo,
                            mouth_curve=mc,
                            brow_angle=ba,
                            eye_open=0.7,
                            pose_dx=dx,
                            pose_dy=dy,
                            identity_seed=identity,
                        )
                    )
    return probes


def get_calibration(frame_size: tuple[int, int]) -> Calibration:
    """Affine raw-feature -> parameter map for a frame size (cached)."""
    key = tuple(int(s) for s in frame_size)
    if key not in _CALIBRATION_CACHE:
        probes = _probe_params()
        frames = np.stack([render_frame(p, key)[0] for p in probes])
        feats = measure_raw(to_greyscale(as_frame_batch(frames).double()))
        raw = feats.stacked().numpy()
        targets = np.array([[p.mouth_open, p.mouth_curve, p.brow_angle] for p in probes])
        _CALIBRATION_CACHE[key] = Calibration.solve(raw, targets, key)
    return _CALIBRATION_CACHE[key]


def _measure_calibrated(frames_t: torch.Tensor, calib: Calibration, grey_stats=None):
    """Raw features + calibrated (mouth_open, mouth_curve, brow_angle).

    When ``grey_stats`` is given the frames are normalized by the corpus
    greyscale statistics first; the dark-mass constants are transformed by
    the same affine map so the measurement is unchanged in exact math.
    """
    grey = to_greyscale(frames_t)
    tau, steep = measure.DARK_TAU, measure.DARK_STEEP
    if grey_stats is not None:
        mean, std = grey_stats
        grey = (grey - mean) / std
        tau, steep = (tau - mean) / std, steep * std
    feats = measure_raw(grey, tau=tau, steep=steep)
    return feats, calib.apply(feats)


def _fingerprint_module(module: nn.Module, tag: str) -> str:
    h = hashlib.sha256(tag.encode())
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().astype("<f4").tobytes())
    return h.hexdigest()


def freeze_check(backend) -> str:
    """Stable fingerprint of a backend's parameters.

    Analytic backends return a constant sentinel; learned backends hash
    every parameter, so any training-induced drift changes the value.
    """
    return backend.fingerprint()


# ---------------------------------------------------------------------------
# analytic backends
# ---------------------------------------------------------------------------


class AnalyticSyncScorer:
    """Sync embeddings from the mouth-open trajectory vs the audio envelope.

    Both sides are centered, linearly resampled to ``dim`` points, and
    L2-normalized, so a synthesized (frames, audio) pair whose mouth is an
    affine function of the envelope embeds to cosine ~= 1.
    """

    def __init__(self, frame_size: tuple[int, int], steps_per_frame: int = 4, dim: int = 32):
        self.frame_size = tuple(int(s) for s in frame_size)
        self.steps_per_frame = steps_per_frame
        self.dim = dim
        self.calibration = get_calibration(self.frame_size)

    def fingerprint(self) -> str:
        return "analytic:sync:v1"

    def _prepare(self, traj: torch.Tensor) -> torch.Tensor:
        """Center, resample [B, T] -> [B, dim], normalize (rows)."""
        traj = traj - traj.mean(dim=1, keepdim=True)
        B, T = traj.shape
        pos = torch.linspace(0.0, T - 1.0, self.dim, dtype=traj.dtype, device=traj.device)
        i0 = pos.floor().long().clamp(max=T - 1)
        i1 = (i0 + 1).clamp(max=T - 1)
        frac = (pos - i0.to(traj.dtype)).view(1, -1)
        res = traj[:, i0] * (1 - frac) + traj[:, i1] * frac
        norm = res.norm(dim=1, keepdim=True)
        unit = res / (norm + 1e-12)
        fallback = torch.zeros_like(res)
        fallback[:, 0] = 1.0
        return torch.where(norm > _DEGEN_NORM, unit, fallback)

    def embed_window_t(self, frames_t: torch.Tensor) -> torch.Tensor:
        """[B, T, H, W, 3] -> [B, dim], differentiable."""
        B, T = frames_t.shape[:2]
        feats, est = _measure_calibrated(frames_t.reshape(B * T, *frames_t.shape[2:]), self.calibration)
        return self._prepare(est[:, 0].reshape(B, T))

    def embed_audio_t(self, audio_t: torch.Tensor) -> torch.Tensor:
        """[B, T_a, M] -> [B, dim]; T_a must be steps_per_frame * T."""
        B, Ta, M = audio_t.shape
        if Ta % self.steps_per_frame:
            raise DataError(f"audio steps {Ta} not a multiple of {self.steps_per_frame}")
        env = audio_t.reshape(B, Ta // self.steps_per_frame, self.steps_per_frame, M).mean(dim=(2, 3))
        return self._prepare(env)

    def embed(self, frames, audio) -> SyncEmbeddingPair:
        frames_t = as_frame_batch(frames).double()
        audio_t = torch.as_tensor(np.asarray(audio), dtype=torch.float64)
        if audio_t.ndim != 2:
            raise DataError(f"expected [T_a, M] audio, got {tuple(audio_t.shape)}")
        if audio_t.shape[0] != self.steps_per_frame * frames_t.shape[0]:
            raise DataError(
                f"audio steps {audio_t.shape[0]} do not match "
                f"{self.steps_per_frame} x {frames_t.shape[0]} frames"
            )
        with torch.no_grad():
            v = self.embed_window_t(frames_t.unsqueeze(0))[0]
            s = self.embed_audio_t(audio_t.unsqueeze(0))[0]
        return SyncEmbeddingPair(v=v.numpy(), s=s.numpy(), dim=self.dim)


class AnalyticEmotionScorer:
    """Emotion logits affine in the measured expression.

    Input is converted to greyscale and normalized by the corpus channel
    statistics before template matching. Logits are ordered
    (happy, neutral, sad) along a single signed expression axis.
    """

    def __init__(self, frame_size: tuple[int, int], grey_stats: tuple[float, float] | None = None):
        self.frame_size = tuple(int(s) for s in frame_size)
        self.calibration = get_calibration(self.frame_size)
        if grey_stats is None:
            probes = np.stack([render_frame(p, self.frame_size)[0] for p in _probe_params()[:27]])
            grey = to_greyscale(torch.as_tensor(probes).double())
            grey_stats = (float(grey.mean()), float(grey.std()))
        self.grey_stats = grey_stats

    def fingerprint(self) -> str:
        return "analytic:emotion:v1"

    def logits_t(self, frames_t: torch.Tensor) -> torch.Tensor:
        """[B, H, W, 3] -> [B, 3], differentiable; degenerate-safe."""
        feats, est = _measure_calibrated(frames_t, self.calibration, self.grey_stats)
        v = VALENCE_W[0] * est[:, 1] + VALENCE_W[1] * est[:, 2]
        z_h = LOGIT_SCALE * v
        z_n = LOGIT_SCALE * (NEUTRAL_MARGIN - torch.sqrt(v**2 + 1e-4))
        return torch.stack([z_h, z_n, -z_h], dim=1)

    def logits(self, frame) -> EmotionLogits:
        frames_t = as_frame_batch(frame).double()
        with torch.no_grad():
            feats, _ = _measure_calibrated(frames_t, self.calibration, self.grey_stats)
            if not bool(face_present(feats)[0]):
                raise NoFaceError("no face found in frame")
            z = self.logits_t(frames_t)[0]
        return EmotionLogits(z=z.numpy())


class AnalyticAffectScorer:
    """Per-frame valence/arousal from the measured expression parameters."""

    def __init__(self, frame_size: tuple[int, int]):
        self.frame_size = tuple(int(s) for s in frame_size)
        self.calibration = get_calibration(self.frame_size)

    def fingerprint(self) -> str:
        return "analytic:affect:v1"

    def score_batch(self, frames) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (valence [N], arousal [N], present [N])."""
        frames_t = as_frame_batch(frames).double()
        with torch.no_grad():
            feats, est = _measure_calibrated(frames_t, self.calibration)
            present = face_present(feats).numpy()
            mo, mc, ba = est[:, 0].numpy(), est[:, 1].numpy(), est[:, 2].numpy()
        valence = np.clip(VALENCE_W[0] * mc + VALENCE_W[1] * ba, -1.0, 1.0)
        arousal = np.clip(AROUSAL_W[0] + AROUSAL_W[1] * np.abs(mc) + AROUSAL_W[2] * mo, 0.0, 1.0)
        return valence, arousal, present

    def score(self, frame) -> AffectScore:
        valence, arousal, present = self.score_batch(frame)
        if not present[0]:
            raise NoFaceError("no face found in frame")
        return AffectScore(valence=float(valence[0]), arousal=float(arousal[0]))


# ---------------------------------------------------------------------------
# learned backends (tiny conv nets, trained once on the corpus, then frozen)
# ---------------------------------------------------------------------------


class _ConvTrunk(nn.Module):
    def __init__(self, in_ch: int, widths=(16, 32, 64)):
        super().__init__()
        layers = []
        prev = in_ch
        for w in widths:
            layers += [nn.Conv2d(prev, w, 3, stride=2, padding=1), nn.ReLU()]
            prev = w
        self.body = nn.Sequential(*layers)
        self.out_ch = prev

    def forward(self, x):
        h = self.body(x)
        return h.mean(dim=(2, 3))


class LearnedSyncScorer(nn.Module):
    """SyncNet-style pair of encoders over a frame window and its audio."""

    def __init__(self, frame_size, window: int = 5, steps_per_frame: int = 4, dim: int = 32, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.frame_size = tuple(int(s) for s in frame_size)
        self.window = window
        self.steps_per_frame = steps_per_frame
        self.dim = dim
        self.video_trunk = _ConvTrunk(3 * window)
        self.video_head = nn.Linear(self.video_trunk.out_ch, dim)
        self.audio_trunk = _ConvTrunk(1)
        self.audio_head = nn.Linear(self.audio_trunk.out_ch, dim)

    def fingerprint(self) -> str:
        return _fingerprint_module(self, "learned:sync:v1")

    def freeze(self):
        self.requires_grad_(False)
        self.eval()
        return self

    def embed_window_t(self, frames_t: torch.Tensor) -> torch.Tensor:
        B, T, H, W, C = frames_t.shape
        x = frames_t.permute(0, 1, 4, 2, 3).reshape(B, T * C, H, W).float()
        e = self.video_head(self.video_trunk(x))
        return e / (e.norm(dim=1, keepdim=True) + 1e-8)

    def embed_audio_t(self, audio_t: torch.Tensor) -> torch.Tensor:
        e = self.audio_head(self.audio_trunk(audio_t.unsqueeze(1).float()))
        return e / (e.norm(dim=1, keepdim=True) + 1e-8)

    def embed(self, frames, audio) -> SyncEmbeddingPair:
        frames_t = as_frame_batch(frames)
        audio_t = torch.as_tensor(np.asarray(audio), dtype=torch.float32)
        if audio_t.shape[0] != self.steps_per_frame * frames_t.shape[0]:
            raise DataError("audio length does not match the frame window")
        with torch.no_grad():
            v = self.embed_window_t(frames_t.unsqueeze(0))[0]
            s = self.embed_audio_t(audio_t.unsqueeze(0))[0]
        return SyncEmbeddingPair(v=v.numpy(), s=s.numpy(), dim=self.dim)


class LearnedEmotionScorer(nn.Module):
    """Greyscale conv classifier over (happy, neutral, sad)."""

    def __init__(self, frame_size, grey_stats: tuple[float, float] = (0.5, 0.25), seed: int = 0):
        super().__init__()
        torch.manual_seed(seed + 1)
        self.frame_size = tuple(int(s) for s in frame_size)
        self.grey_stats = grey_stats
        self.trunk = _ConvTrunk(1)
        self.head = nn.Linear(self.trunk.out_ch, len(EMOTION_CLASSES))

    def fingerprint(self) -> str:
        return _fingerprint_module(self, "learned:emotion:v1")

    def freeze(self):
        self.requires_grad_(False)
        self.eval()
        return self

    def logits_t(self, frames_t: torch.Tensor) -> torch.Tensor:
        grey = to_greyscale(frames_t.float())
        mean, std = self.grey_stats
        x = ((grey - mean) / std).unsqueeze(1)
        return self.head(self.trunk(x))

    def logits(self, frame) -> EmotionLogits:
        frames_t = as_frame_batch(frame)
        if float(frames_t.std()) < measure.MIN_FRAME_STD:
            raise NoFaceError("no face found in frame (constant input)")
        with torch.no_grad():
            z = self.logits_t(frames_t)[0]
        return EmotionLogits(z=z.numpy())


class LearnedAffectScorer(nn.Module):
    """Conv regressor distilled from the analytic affect oracle."""

    def __init__(self, frame_size, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed + 2)
        self.frame_size = tuple(int(s) for s in frame_size)
        self.trunk = _ConvTrunk(3)
        self.head = nn.Linear(self.trunk.out_ch, 2)

    def fingerprint(self) -> str:
        return _fingerprint_module(self, "learned:affect:v1")

    def freeze(self):
        self.requires_grad_(False)
        self.eval()
        return self

    def forward(self, frames_t: torch.Tensor) -> torch.Tensor:
        x = frames_t.permute(0, 3, 1, 2).float()
        out = self.head(self.trunk(x))
        return torch.stack([torch.tanh(out[:, 0]), torch.sigmoid(out[:, 1])], dim=1)

    def score_batch(self, frames):
        frames_t = as_frame_batch(frames)
        present = (frames_t.reshape(frames_t.shape[0], -1).std(dim=1) > measure.MIN_FRAME_STD).numpy()
        with torch.no_grad():
            out = self.forward(frames_t).numpy()
        return out[:, 0], out[:, 1], present

    def score(self, frame) -> AffectScore:
        valence, arousal, present = self.score_batch(frame)
        if not present[0]:
            raise NoFaceError("no face found in frame (constant input)")
        return AffectScore(valence=float(valence[0]), arousal=float(arousal[0]))


# ---------------------------------------------------------------------------
# scorer sets, pretraining, persistence
# ---------------------------------------------------------------------------


@dataclass
class ScorerSet:
    sync: object
    emotion: object
    affect: object
    kind: str = "analytic"

    def fingerprints(self) -> dict[str, str]:
        return {
            "sync": freeze_check(self.sync),
            "emotion": freeze_check(self.emotion),
            "affect": freeze_check(self.affect),
        }


def _corpus_frame_batches(corpus: Corpus, rng: np.random.Generator, batch: int, count: int):
    actors = corpus.split.train_actors
    for _ in range(count):
        frames, labels = [], []
        for _ in range(batch):
            actor = int(rng.choice(actors))
            emotion = str(rng.choice(EMOTION_CLASSES))
            utt = corpus.load(actor, emotion, int(rng.choice(corpus.utterance_ids())))
            idx = int(rng.integers(utt.num_frames))
            frames.append(utt.frames[idx])
            labels.append(EMOTION_CLASSES.index(emotion))
        yield np.stack(frames), np.asarray(labels)


def pretrain_learned_scorers(corpus: Corpus, seed: int = 0, steps: int = 200, batch: int = 8) -> ScorerSet:
    """Train the tiny conv backends on the corpus, then freeze them."""
    cfg = corpus.config
    size = (cfg.frame_size, cfg.frame_size)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    torch.manual_seed(seed)

    sync = LearnedSyncScorer(size, cfg.window, cfg.audio_steps_per_frame, seed=seed)
    emotion = LearnedEmotionScorer(size, seed=seed)
    affect = LearnedAffectScorer(size, seed=seed)
    oracle = AnalyticAffectScorer(size)

    opt = torch.optim.Adam(sync.parameters(), lr=1e-3)
    spf = cfg.audio_steps_per_frame
    actors = corpus.split.train_actors
    for _ in range(steps):
        refs, auds, labels = [], [], []
        for _ in range(batch):
            actor = int(rng.choice(actors))
            utt = corpus.load(actor, "neutral", int(rng.choice(corpus.utterance_ids())))
            t = int(rng.integers(utt.num_frames - cfg.window - 2)) + 1
            offset = 0 if rng.random() < 0.5 else int(rng.choice([-1, 1, 2]))
            a0 = np.clip(t + offset, 0, utt.num_frames - cfg.window)
            refs.append(utt.frames[t : t + cfg.window])
            auds.append(utt.audio[a0 * spf : (a0 + cfg.window) * spf])
            labels.append(1.0 if a0 == t else 0.0)
        v = sync.embed_window_t(torch.as_tensor(np.stack(refs)))
        s = sync.embed_audio_t(torch.as_tensor(np.stack(auds)))
        p = ((v * s).sum(dim=1) + 1.0) / 2.0
        y = torch.as_tensor(labels, dtype=torch.float32)
        loss = nn.functional.binary_cross_entropy(p.clamp(1e-6, 1 - 1e-6), y)
        opt.zero_grad()
        loss.backward()
        opt.step()

    opt = torch.optim.Adam(emotion.parameters(), lr=1e-3)
    for frames, labels in _corpus_frame_batches(corpus, rng, batch, steps):
        z = emotion.logits_t(torch.as_tensor(frames))
        loss = nn.functional.cross_entropy(z, torch.as_tensor(labels))
        opt.zero_grad()
        loss.backward()
        opt.step()

    opt = torch.optim.Adam(affect.parameters(), lr=1e-3)
    for frames, _ in _corpus_frame_batches(corpus, rng, batch, steps):
        valence, arousal, _ = oracle.score_batch(frames)
        target = torch.as_tensor(np.stack([valence, arousal], axis=1), dtype=torch.float32)
        loss = nn.functional.mse_loss(affect(torch.as_tensor(frames)), target)
        opt.zero_grad()
        loss.backward()
        opt.step()

    return ScorerSet(sync.freeze(), emotion.freeze(), affect.freeze(), kind="learned")


def make_scorers(corpus: Corpus, kind: str = "analytic", seed: int = 0, pretrain_steps: int = 200) -> ScorerSet:
    """Build the scorer set for a corpus: ``analytic`` or ``learned``."""
    cfg = corpus.config
    size = (cfg.frame_size, cfg.frame_size)
    if kind == "analytic":
        stats = None
        if corpus.stats is not None:
            stats = (corpus.stats["grey_mean"], corpus.stats["grey_std"])
        return ScorerSet(
            sync=AnalyticSyncScorer(size, cfg.audio_steps_per_frame),
            emotion=AnalyticEmotionScorer(size, grey_stats=stats),
            affect=AnalyticAffectScorer(size),
            kind="analytic",
        )
    if kind == "learned":
        return pretrain_learned_scorers(corpus, seed=seed, steps=pretrain_steps)
    raise DataError(f"unknown scorer backend {kind!r}")


def save_learned_scorers(scorers: ScorerSet, path: str) -> None:
    if scorers.kind != "learned":
        raise DataError("only learned scorer sets are persisted")
    arrays = {}
    for tag, module in (("sync", scorers.sync), ("emotion", scorers.emotion), ("affect", scorers.affect)):
        for name, p in module.state_dict().items():
            arrays[f"{tag}.{name}"] = p.detach().cpu().numpy().astype(np.float32)
    write_container(path, arrays)


def load_learned_scorers(path: str, corpus: Corpus, seed: int = 0) -> ScorerSet:
    cfg = corpus.config
    size = (cfg.frame_size, cfg.frame_size)
    arrays = read_container(path)
    modules = {
        "sync": LearnedSyncScorer(size, cfg.window, cfg.audio_steps_per_frame, seed=seed),
        "emotion": LearnedEmotionScorer(size, seed=seed),
        "affect": LearnedAffectScorer(size, seed=seed),
    }
    for tag, module in modules.items():
        state = {
            name[len(tag) + 1 :]: torch.as_tensor(arr)
            for name, arr in arrays.items()
            if name.startswith(tag + ".")
        }
        module.load_state_dict(state)
        module.freeze()
    return ScorerSet(modules["sync"], modules["emotion"], modules["affect"], kind="learned")


def sync_embed(frames, audio, backend) -> SyncEmbeddingPair:
    """Embed a (frame window, audio window) pair with the given backend."""
    return backend.embed(frames, audio)


def emotion_logits(frame, backend) -> EmotionLogits:
    """Emotion class logits for one frame."""
    return backend.logits(frame)


def affect_score(frame, backend) -> AffectScore:
    """Valence/arousal for one frame."""
    return backend.score(frame)
