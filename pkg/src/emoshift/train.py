"""Variant-aware training: sample assembly, pretraining, the main loop,
checkpointing, and sliding-window inference.

Six variants: {half, full} masking x {L1, EMO, L1_EMO} emotion strategies.
Pairing rules (asserted exhaustively in the tests):

* reference frames always come from the source emotion;
* target frames come from the destination emotion, except the EMO-only
  ablation which reconstructs the source;
* the masked pose prior comes from the destination emotion under full
  masking (best pose alignment; the mask hides its expression) and from
  the source emotion under half masking (the upper face stays visible).

Half-masking variants fine-tune a pretrained checkpoint; full-masking
variants train from scratch.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import losses as L
from .config import config_hash
from .errors import ConfigError, DataError, NumericalError
from .facegen import Corpus, EmotionLabel, Utterance
from .masking import MaskStrategy, apply_mask_window
from .model import Generator, ModelConfig, QualityDiscriminator, init_params
from .scorers import EMOTION_CLASSES, ScorerSet, make_scorers
from .tensorio import read_container, write_container

log = logging.getLogger(__name__)

STRATEGIES = ("l1", "emo", "l1_emo")

STRATEGY_WEIGHTS = {
    # The plain-L1 strategy ablates the emotion objective entirely.
    "l1": L.LossWeights(0.8, 0.03, 0.07, 0.0),
    "emo": L.EMO_ONLY_WEIGHTS,
    "l1_emo": L.DEFAULT_WEIGHTS,
}


@dataclass(frozen=True)
class VariantConfig:
    masking: MaskStrategy
    strategy: str
    source_emotion: EmotionLabel
    destination_emotion: EmotionLabel
    weights: L.LossWeights = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.weights is None:
            object.__setattr__(self, "weights", STRATEGY_WEIGHTS[self.strategy])

    @property
    def name(self) -> str:
        return f"{self.masking.kind}:{self.strategy}"

    @property
    def pair(self) -> str:
        return f"{self.source_emotion.name}:{self.destination_emotion.name}"

    def pose_prior_emotion(self) -> EmotionLabel:
        return self.destination_emotion if self.masking.kind == "full" else self.source_emotion

    def target_emotion(self) -> EmotionLabel:
        return self.source_emotion if self.strategy == "emo" else self.destination_emotion

    def to_dict(self) -> dict:
        return {
            "masking": self.masking.kind,
            "strategy": self.strategy,
            "source": [self.source_emotion.name, self.source_emotion.intensity],
            "destination": [self.destination_emotion.name, self.destination_emotion.intensity],
            "weights": list(self.weights.as_tuple()),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VariantConfig":
        return cls(
            masking=MaskStrategy(d["masking"]),
            strategy=d["strategy"],
            source_emotion=EmotionLabel(*d["source"]),
            destination_emotion=EmotionLabel(*d["destination"]),
            weights=L.LossWeights(*d["weights"]),
        )

    @classmethod
    def parse(cls, variant: str, pair: str, intensity: dict | None = None) -> "VariantConfig":
        """Build from CLI-style strings, e.g. ("half:l1_emo", "sad:happy")."""
        try:
            kind, strategy = variant.split(":")
        except ValueError:
            raise ConfigError(f"variant must look like 'half:l1_emo', got {variant!r}") from None
        try:
            src, dst = pair.split(":")
        except ValueError:
            raise ConfigError(f"pair must look like 'sad:happy', got {pair!r}") from None
        if src == dst:
            raise ConfigError("source and destination emotions must differ")
        intensity = intensity or {}
        return cls(
            masking=MaskStrategy(kind),
            strategy=strategy,
            source_emotion=EmotionLabel(src, int(intensity.get(src, 1))),
            destination_emotion=EmotionLabel(dst, int(intensity.get(dst, 1))),
        )


def pairing_table() -> str:
    """Human-readable pairing-rule table for all six variants."""
    lines = ["masking strategy -> pose_prior  target     reference"]
    for kind in ("half", "full"):
        for strategy in STRATEGIES:
            v = VariantConfig(
                MaskStrategy(kind), strategy, EmotionLabel("sad"), EmotionLabel("happy")
            )
            lines.append(
                f"{kind:7s} {strategy:8s} -> {v.pose_prior_emotion().name + ' side':11s} "
                f"{v.target_emotion().name + ' side':10s} source side"
            )
    return "\n".join(lines).replace("sad side", "source side").replace("happy side", "destination side")


@dataclass
class TrainingSample:
    reference: np.ndarray  # [T, H, W, C] source emotion, random window
    pose_prior_source: np.ndarray  # [T, H, W, C] unmasked; masking applied at collate
    pose_landmarks: np.ndarray  # per-frame landmarks for the pose window
    target: np.ndarray  # [T, H, W, C]
    audio: np.ndarray  # [T * steps_per_frame, M]
    labels: tuple[str, str]  # (source, destination)


class CorpusCache:
    """In-memory utterance cache; the desk corpus fits comfortably."""

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self._cache: dict[tuple, Utterance] = {}

    def load(self, actor: int, emotion: str, utt: int) -> Utterance:
        key = (actor, emotion, utt)
        if key not in self._cache:
            self._cache[key] = self.corpus.load(actor, emotion, utt)
        return self._cache[key]


def assemble_batch(
    cache: CorpusCache,
    variant: VariantConfig,
    batch_size: int,
    rng: np.random.Generator,
    split: str = "train",
) -> list[TrainingSample]:
    """Sample training windows under the variant pairing rules."""
    corpus = cache.corpus
    cfg = corpus.config
    T = cfg.window
    actors = corpus.actors(split)
    pose_emotion = variant.pose_prior_emotion().name
    target_emotion = variant.target_emotion().name

    samples: list[TrainingSample] = []
    attempts = 0
    while len(samples) < batch_size:
        attempts += 1
        if attempts > 20 * batch_size:
            raise DataError("could not assemble a batch; too many missing pairings")
        actor = int(rng.choice(actors))
        utt_id = int(rng.choice(corpus.utterance_ids()))
        needed = {variant.source_emotion.name, pose_emotion, target_emotion}
        if not all(corpus.has(actor, e, utt_id) for e in needed):
            log.warning("skipping (actor=%d, utt=%d): missing paired emotions", actor, utt_id)
            continue
        src = cache.load(actor, variant.source_emotion.name, utt_id)
        pose = cache.load(actor, pose_emotion, utt_id)
        target = cache.load(actor, target_emotion, utt_id)
        n = src.num_frames
        t = int(rng.integers(0, n - T + 1))
        t_ref = int(rng.integers(0, n - T + 1))
        spf = cfg.audio_steps_per_frame
        samples.append(
            TrainingSample(
                reference=src.frames[t_ref : t_ref + T],
                pose_prior_source=pose.frames[t : t + T],
                pose_landmarks=pose.landmarks[t : t + T],
                target=target.frames[t : t + T],
                audio=src.audio[t * spf : (t + T) * spf],
                labels=(variant.source_emotion.name, variant.destination_emotion.name),
            )
        )
    return samples


def collate(samples: list[TrainingSample], variant: VariantConfig):
    """Stack samples into training tensors, applying the pose-prior mask."""
    stacked, targets, audios = [], [], []
    for s in samples:
        masked = apply_mask_window(s.pose_prior_source, variant.masking, s.pose_landmarks)
        stacked.append(np.concatenate([s.reference, masked], axis=-1))
        targets.append(s.target)
        audios.append(s.audio)
    return (
        torch.as_tensor(np.stack(stacked), dtype=torch.float32),
        torch.as_tensor(np.stack(targets), dtype=torch.float32),
        torch.as_tensor(np.stack(audios), dtype=torch.float32),
    )


@dataclass
class TrainState:
    gen: Generator
    disc: QualityDiscriminator
    gen_opt: torch.optim.Adam
    disc_opt: torch.optim.Adam
    scorers: ScorerSet
    variant: VariantConfig
    model_cfg: ModelConfig
    grad_clamp: tuple[float, float] = (L.GRAD_CLAMP_LO, L.GRAD_CLAMP_HI)
    step: int = 0
    dump_dir: str = "."


def _log1m_mean(scores: torch.Tensor) -> torch.Tensor:
    return torch.log((1.0 - scores).clamp(min=L.P_FLOOR)).mean()


def train_step(state: TrainState, batch) -> L.LossBreakdown:
    """One generator update on the total loss, one discriminator update
    ascending its objective; frozen scorers untouched."""
    stacked, target, audio = batch
    v = state.variant
    lo, hi = state.grad_clamp

    generated = state.gen(stacked, audio)
    l_r = L.l1_reconstruction(generated, target)
    if v.weights.s_w > 0:
        emb_v = state.scorers.sync.embed_window_t(generated)
        emb_s = state.scorers.sync.embed_audio_t(audio)
        e_s = L.sync_loss(L.sync_prob(emb_v, emb_s))
    else:
        e_s = torch.zeros((), dtype=generated.dtype)
    l_g = _log1m_mean(state.disc(generated))
    if v.weights.s_e > 0:
        B, T = generated.shape[:2]
        frames_flat = generated.reshape(B * T, *generated.shape[2:])
        probs = L.emotion_softmax(state.scorers.emotion.logits_t(frames_flat))
        l_e = L.emotion_loss(probs, EMOTION_CLASSES.index(v.destination_emotion.name))
    else:
        l_e = torch.zeros((), dtype=generated.dtype)
    l_total = L.total_loss((l_r, e_s, l_g, l_e), v.weights)

    if not torch.isfinite(l_total):
        dump = os.path.join(state.dump_dir, f"bad_batch_step{state.step}.bin")
        write_container(
            dump,
            {
                "stacked": stacked.detach().numpy().astype(np.float32),
                "target": target.detach().numpy().astype(np.float32),
                "audio": audio.detach().numpy().astype(np.float32),
            },
        )
        raise NumericalError(f"non-finite loss at step {state.step}; batch dumped to {dump}")

    state.gen_opt.zero_grad(set_to_none=True)
    state.disc_opt.zero_grad(set_to_none=True)
    l_total.backward()
    L.clamp_grad_norm_(state.gen.parameters(), lo, hi)
    state.gen_opt.step()

    d_real = state.disc(target)
    d_fake = state.disc(generated.detach())
    _, l_d = L.gan_losses(d_real, d_fake)
    state.disc_opt.zero_grad(set_to_none=True)
    (-l_d).backward()
    L.clamp_grad_norm_(state.disc.parameters(), lo, hi)
    state.disc_opt.step()

    state.step += 1
    return L.LossBreakdown(
        L_r=float(l_r.detach()),
        E_s=float(e_s.detach()),
        L_g=float(l_g.detach()),
        L_d=float(l_d.detach()),
        L_e=float(l_e.detach()),
        L_total=float(l_total.detach()),
    )


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def _optimizer_arrays(opt: torch.optim.Adam, prefix: str, params: list) -> dict:
    arrays = {}
    for i, p in enumerate(params):
        st = opt.state.get(p)
        if not st:
            continue
        arrays[f"{prefix}.{i}.step"] = np.array([int(st["step"])], dtype=np.int64)
        arrays[f"{prefix}.{i}.exp_avg"] = st["exp_avg"].detach().numpy().astype(np.float32)
        arrays[f"{prefix}.{i}.exp_avg_sq"] = st["exp_avg_sq"].detach().numpy().astype(np.float32)
    return arrays


def _restore_optimizer(opt: torch.optim.Adam, prefix: str, params: list, arrays: dict) -> None:
    for i, p in enumerate(params):
        key = f"{prefix}.{i}.step"
        if key not in arrays:
            continue
        opt.state[p] = {
            "step": torch.tensor(float(arrays[key][0])),
            "exp_avg": torch.as_tensor(arrays[f"{prefix}.{i}.exp_avg"]),
            "exp_avg_sq": torch.as_tensor(arrays[f"{prefix}.{i}.exp_avg_sq"]),
        }


def save_checkpoint(
    path: str,
    state: TrainState,
    extra_meta: dict | None = None,
) -> str:
    """Binary container of all parameters and optimizer state, plus a JSON
    metadata sidecar at ``path + '.json'``."""
    arrays: dict[str, np.ndarray] = {}
    for tag, module in (("gen", state.gen), ("disc", state.disc)):
        for name, p in module.state_dict().items():
            arrays[f"{tag}.{name}"] = p.detach().numpy().astype(np.float32)
    arrays.update(_optimizer_arrays(state.gen_opt, "opt_g", list(state.gen.parameters())))
    arrays.update(_optimizer_arrays(state.disc_opt, "opt_d", list(state.disc.parameters())))
    arrays["step"] = np.array([state.step], dtype=np.int64)
    write_container(path, arrays)

    meta = {
        "step": state.step,
        "model": state.model_cfg.to_dict(),
        "variant": state.variant.to_dict() if state.variant else None,
        "scorer_fingerprints": state.scorers.fingerprints(),
        "scorer_kind": state.scorers.kind,
        "lr": state.gen_opt.param_groups[0]["lr"],
    }
    meta["config_hash"] = config_hash({"model": meta["model"], "variant": meta["variant"]})
    meta.update(extra_meta or {})
    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return path


def checkpoint_meta(path: str) -> dict:
    with open(path + ".json") as fh:
        return json.load(fh)


def load_checkpoint(path: str, scorers: ScorerSet, lr: float | None = None) -> TrainState:
    meta = checkpoint_meta(path)
    arrays = read_container(path)
    model_cfg = ModelConfig.from_dict(meta["model"])
    gen, disc = init_params(model_cfg, seed=0)
    for tag, module in (("gen", gen), ("disc", disc)):
        state_dict = {
            name[len(tag) + 1 :]: torch.as_tensor(arr)
            for name, arr in arrays.items()
            if name.startswith(tag + ".")
        }
        module.load_state_dict(state_dict)
    lr = lr if lr is not None else meta.get("lr", 1e-4)
    gen_opt = torch.optim.Adam(gen.parameters(), lr=lr)
    disc_opt = torch.optim.Adam(disc.parameters(), lr=lr)
    _restore_optimizer(gen_opt, "opt_g", list(gen.parameters()), arrays)
    _restore_optimizer(disc_opt, "opt_d", list(disc.parameters()), arrays)
    variant = VariantConfig.from_dict(meta["variant"]) if meta.get("variant") else None
    return TrainState(
        gen=gen,
        disc=disc,
        gen_opt=gen_opt,
        disc_opt=disc_opt,
        scorers=scorers,
        variant=variant,
        model_cfg=model_cfg,
        step=int(arrays["step"][0]),
    )


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def infer(
    gen: Generator,
    frames: np.ndarray,
    audio: np.ndarray,
    variant: VariantConfig,
    landmarks: np.ndarray | None = None,
    chunk: int = 16,
) -> np.ndarray:
    """Translate a full video, stitching sliding windows by center frame.

    The input frames serve as both the identity reference and (masked) the
    pose prior; the audio is the original track. Output frame count equals
    the input frame count.
    """
    cfg = gen.cfg
    T = cfg.window
    n = frames.shape[0]
    if n < T:
        raise DataError(f"video has {n} frames, below window length {T}")
    if variant.masking.kind == "full" and landmarks is None:
        raise DataError("full masking at inference requires landmarks")

    masked = apply_mask_window(frames, variant.masking, landmarks)
    spf = cfg.audio_steps_per_frame
    starts = list(range(0, n - T + 1))
    out = np.empty_like(frames)
    center = T // 2
    was_training = gen.training
    gen.eval()
    with torch.no_grad():
        for i in range(0, len(starts), chunk):
            batch_starts = starts[i : i + chunk]
            stacked = np.stack(
                [np.concatenate([frames[t : t + T], masked[t : t + T]], axis=-1) for t in batch_starts]
            )
            aud = np.stack([audio[t * spf : (t + T) * spf] for t in batch_starts])
            gen_out = gen(
                torch.as_tensor(stacked, dtype=torch.float32),
                torch.as_tensor(aud, dtype=torch.float32),
            ).numpy()
            for j, t in enumerate(batch_starts):
                if t == 0:
                    out[: center + 1] = gen_out[j, : center + 1]
                elif t == starts[-1]:
                    out[t + center :] = gen_out[j, center:]
                else:
                    out[t + center] = gen_out[j, center]
    if was_training:
        gen.train()
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


def _validation_metrics(
    cache: CorpusCache,
    state: TrainState,
    affect_scorer,
    sync_scorer,
    max_utts: int = 2,
) -> dict:
    """Mean sync cosine and delta-valence of inferred val-split videos."""
    corpus = cache.corpus
    cfg = corpus.config
    v = state.variant
    spf = cfg.audio_steps_per_frame
    cosines, dvals = [], []
    for actor in corpus.actors("val"):
        for utt_id in corpus.utterance_ids()[:max_utts]:
            src = cache.load(actor, v.source_emotion.name, utt_id)
            dst = cache.load(actor, v.destination_emotion.name, utt_id)
            gen_frames = infer(state.gen, src.frames, src.audio, v, src.landmarks)
            for t in range(0, src.num_frames - cfg.window + 1, cfg.window):
                pair_v = sync_scorer.embed(
                    gen_frames[t : t + cfg.window], src.audio[t * spf : (t + cfg.window) * spf]
                )
                cosines.append(float(pair_v.v @ pair_v.s))
            vg = _mean_valence(affect_scorer, gen_frames)
            vs = _mean_valence(affect_scorer, src.frames)
            vd = _mean_valence(affect_scorer, dst.frames)
            if abs(vd - vs) > 1e-6:
                dvals.append((vg - vs) / (vd - vs))
        break  # one val actor keeps validation cheap
    return {
        "sync_cos": float(np.mean(cosines)) if cosines else float("nan"),
        "d_valence": float(np.mean(dvals)) if dvals else float("nan"),
    }


def _mean_valence(affect_scorer, frames: np.ndarray) -> float:
    valence, _, present = affect_scorer.score_batch(frames)
    if not present.any():
        return float("nan")
    return float(valence[present].mean())


def _build_state(
    corpus: Corpus,
    variant: VariantConfig,
    scorers: ScorerSet,
    model_overrides: dict,
    lr: float,
    grad_clamp,
    seed: int,
    dump_dir: str,
) -> TrainState:
    cfg = corpus.config
    model_cfg = ModelConfig(
        frame_size=cfg.frame_size,
        window=cfg.window,
        audio_steps_per_frame=cfg.audio_steps_per_frame,
        mel_bands=cfg.mel_bands,
        **model_overrides,
    )
    gen, disc = init_params(model_cfg, seed=seed)
    return TrainState(
        gen=gen,
        disc=disc,
        gen_opt=torch.optim.Adam(gen.parameters(), lr=lr),
        disc_opt=torch.optim.Adam(disc.parameters(), lr=lr),
        scorers=scorers,
        variant=variant,
        model_cfg=model_cfg,
        grad_clamp=tuple(grad_clamp),
        dump_dir=dump_dir,
    )


def pretrain(
    corpus: Corpus,
    out_dir: str,
    steps: int = 3000,
    batch_size: int = 4,
    lr: float = 1e-4,
    eval_interval: int = 250,
    sync_threshold: float = 0.9,
    seed: int = 0,
    scorers: ScorerSet | None = None,
    model_overrides: dict | None = None,
    grad_clamp=(L.GRAD_CLAMP_LO, L.GRAD_CLAMP_HI),
) -> str:
    """Neutral-only warm start for the half-masking variants.

    Trains reconstruction + sync + visual quality (no emotion objective)
    until validation sync cosine reaches the threshold; errors out with a
    pointer to the loss curve if it never converges.
    """
    torch.manual_seed(seed)
    os.makedirs(out_dir, exist_ok=True)
    # Neutral-only reconstruction: the EMO pairing rule (target = source)
    # with a zero emotion weight reduces to plain sync + L1 + quality.
    variant = VariantConfig(
        masking=MaskStrategy("half"),
        strategy="emo",
        source_emotion=EmotionLabel("neutral"),
        destination_emotion=EmotionLabel("happy"),
        weights=L.LossWeights(0.8, 0.03, 0.07, 0.0),
    )
    scorers = scorers or make_scorers(corpus, "analytic")
    cache = CorpusCache(corpus)
    state = _build_state(
        corpus, variant, scorers, model_overrides or {}, lr, grad_clamp, seed, out_dir
    )
    fingerprints_before = scorers.fingerprints()

    loss_csv = os.path.join(out_dir, "pretrain_loss.csv")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    reached = False
    with open(loss_csv, "w") as fh:
        fh.write(L.LossBreakdown.CSV_HEADER + "\n")
        for step in range(1, steps + 1):
            batch = collate(assemble_batch(cache, variant, batch_size, rng), variant)
            breakdown = train_step(state, batch)
            fh.write(breakdown.csv_row(step) + "\n")
            if step % eval_interval == 0:
                metrics = _validation_metrics(cache, state, scorers.affect, scorers.sync)
                log.info("pretrain step %d: sync_cos=%.4f", step, metrics["sync_cos"])
                if metrics["sync_cos"] >= sync_threshold:
                    reached = True
                    break
    if not reached:
        metrics = _validation_metrics(cache, state, scorers.affect, scorers.sync)
        reached = metrics["sync_cos"] >= sync_threshold
    if not reached:
        raise NumericalError(
            f"pretraining did not reach sync cosine {sync_threshold} within {steps} steps; "
            f"loss curve at {loss_csv}"
        )
    if scorers.fingerprints() != fingerprints_before:
        raise NumericalError("frozen scorer fingerprints changed during pretraining")
    path = os.path.join(out_dir, "checkpoint_pretrain.bin")
    save_checkpoint(path, state, {"phase": "pretrain", "val_sync_cos": metrics["sync_cos"]})
    return path


def train(
    corpus: Corpus,
    variant: VariantConfig,
    out_dir: str,
    steps: int = 2000,
    batch_size: int = 4,
    lr: float = 1e-4,
    eval_interval: int = 200,
    seed: int = 0,
    pretrained: str | None = None,
    scorers: ScorerSet | None = None,
    model_overrides: dict | None = None,
    grad_clamp=(L.GRAD_CLAMP_LO, L.GRAD_CLAMP_HI),
) -> dict:
    """Fine-tune one (variant, emotion pair) model.

    Returns artifact paths: last/best checkpoints, loss CSV, and the
    validation metric history.
    """
    torch.manual_seed(seed)
    os.makedirs(out_dir, exist_ok=True)
    scorers = scorers or make_scorers(corpus, "analytic")
    cache = CorpusCache(corpus)

    if variant.masking.kind == "half":
        if not pretrained:
            raise ConfigError(
                "half-masking variants fine-tune a pretrained checkpoint; "
                "run the pretrain command first"
            )
        state = load_checkpoint(pretrained, scorers, lr=lr)
        state.variant = variant
        state.grad_clamp = tuple(grad_clamp)
        state.dump_dir = out_dir
        state.step = 0
    else:
        state = _build_state(
            corpus, variant, scorers, model_overrides or {}, lr, grad_clamp, seed, out_dir
        )

    fingerprints_before = scorers.fingerprints()
    loss_csv = os.path.join(out_dir, "loss.csv")
    history_csv = os.path.join(out_dir, "metrics_history.csv")
    best_path = os.path.join(out_dir, "checkpoint_best.bin")
    last_path = os.path.join(out_dir, "checkpoint_last.bin")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    best_dval = -np.inf
    history = []

    with open(loss_csv, "w") as fh_loss, open(history_csv, "w") as fh_hist:
        fh_loss.write(L.LossBreakdown.CSV_HEADER + "\n")
        fh_hist.write("step,d_valence,sync_cos\n")
        for step in range(1, steps + 1):
            batch = collate(assemble_batch(cache, variant, batch_size, rng), variant)
            breakdown = train_step(state, batch)
            fh_loss.write(breakdown.csv_row(step) + "\n")
            if step % eval_interval == 0:
                metrics = _validation_metrics(cache, state, scorers.affect, scorers.sync)
                history.append({"step": step, **metrics})
                fh_hist.write(f"{step},{metrics['d_valence']:.6g},{metrics['sync_cos']:.6g}\n")
                log.info(
                    "train %s %s step %d: d_valence=%.3f sync_cos=%.3f",
                    variant.name,
                    variant.pair,
                    step,
                    metrics["d_valence"],
                    metrics["sync_cos"],
                )
                if np.isfinite(metrics["d_valence"]) and metrics["d_valence"] > best_dval:
                    best_dval = metrics["d_valence"]
                    save_checkpoint(best_path, state, {"phase": "train", "best_d_valence": best_dval})

    if scorers.fingerprints() != fingerprints_before:
        raise NumericalError("frozen scorer fingerprints changed during training")
    save_checkpoint(last_path, state, {"phase": "train"})
    if not os.path.exists(best_path):
        save_checkpoint(best_path, state, {"phase": "train", "best_d_valence": best_dval})
    return {
        "checkpoint_last": last_path,
        "checkpoint_best": best_path,
        "loss_csv": loss_csv,
        "metrics_history": history_csv,
        "history": history,
    }
