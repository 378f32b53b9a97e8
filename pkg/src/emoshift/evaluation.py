"""Normalized affect evaluation, lip-sync error metrics, and FID.

Delta scores are the ratio of the generated affect change (relative to
the source-emotion input) to the ground-truth change performed in the
destination-emotion video. A value of 1 means parity with the human
performance; for neutral destinations overshoot is penalized by mapping
the score through 1 - |1 - delta|. Per-video values are pooled across all
six ordered emotion pairs into the micro-average.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import torch

from .errors import DataError, NoFaceError, NumericalError

# Below this ground-truth change the ratio is dominated by scorer noise;
# such videos are excluded from aggregation and counted instead.
DEGENERACY_THRESHOLD = 0.05
LSE_OFFSET_RANGE = 7
FID_COV_EPS = 1e-6

ORDERED_PAIRS = tuple(
    f"{src}->{dst}"
    for src in ("sad", "neutral", "happy")
    for dst in ("sad", "neutral", "happy")
    if src != dst
)


@dataclass(frozen=True)
class VideoAffect:
    v_bar: float
    a_bar: float
    frame_count: int
    skipped: int = 0


@dataclass(frozen=True)
class DeltaScores:
    d_valence: float | None
    d_arousal: float | None
    normalized_for_neutral: bool


def video_affect(frames: np.ndarray, backend) -> VideoAffect:
    """Mean per-frame valence/arousal; unusable frames are skipped and
    counted, an all-skipped video is an error."""
    if frames.shape[0] < 1:
        raise DataError("video has no frames")
    valence, arousal, present = backend.score_batch(frames)
    kept = int(present.sum())
    if kept == 0:
        raise NoFaceError("no scorable frames in video")
    return VideoAffect(
        v_bar=float(valence[present].mean()),
        a_bar=float(arousal[present].mean()),
        frame_count=kept,
        skipped=int(len(present) - kept),
    )


def overshoot_normalize(delta: float) -> float:
    """The neutral-destination rule: 1 - |1 - delta|."""
    return 1.0 - abs(1.0 - delta)


def delta_affect(
    gen: VideoAffect,
    src: VideoAffect,
    dst: VideoAffect,
    dst_is_neutral: bool,
    threshold: float = DEGENERACY_THRESHOLD,
) -> DeltaScores:
    """Ratio-normalized affect change; degenerate denominators yield None."""

    def one(g: float, s: float, d: float) -> float | None:
        denom = d - s
        if abs(denom) < threshold:
            return None
        delta = (g - s) / denom
        return overshoot_normalize(delta) if dst_is_neutral else delta

    return DeltaScores(
        d_valence=one(gen.v_bar, src.v_bar, dst.v_bar),
        d_arousal=one(gen.a_bar, src.a_bar, dst.a_bar),
        normalized_for_neutral=dst_is_neutral,
    )


def user_study_delta(e_g: float, e_s: float, e_d: float, dst_is_neutral: bool) -> float:
    """Normalized crowd emotion rating on the 1..5 scale (sad=1, neutral=3,
    happy=5)."""
    for name, value in (("e_g", e_g), ("e_s", e_s), ("e_d", e_d)):
        if not 1.0 <= value <= 5.0:
            raise DataError(f"{name}={value} outside the 1..5 rating scale")
    if e_s == e_d:
        raise DataError("source and destination ratings must differ")
    delta = (e_g - e_s) / (e_d - e_s)
    return overshoot_normalize(delta) if dst_is_neutral else delta


def lse_metrics(
    frames: np.ndarray,
    audio: np.ndarray,
    backend,
    window: int = 5,
    offset_range: int = LSE_OFFSET_RANGE,
) -> tuple[float, float]:
    """(LSE_D, LSE_C) over stride-1 sliding windows.

    LSE_D is the mean embedding distance ||v - s||_2 at offset zero (lower
    is better). LSE_C is the mean margin of the offset-zero similarity
    over the median similarity across audio offsets in [-K, K] frames
    (higher is better). Every window start is embedded once; offset
    similarities reuse the audio embeddings of the shifted starts.
    """
    n = frames.shape[0]
    if n < window:
        raise DataError(f"video has {n} frames, below window length {window}")
    spf = getattr(backend, "steps_per_frame", 4)
    n_windows = n - window + 1
    frames_t = torch.as_tensor(
        np.stack([frames[t : t + window] for t in range(n_windows)], axis=0), dtype=torch.float32
    )
    audio_t = torch.as_tensor(
        np.stack([audio[t * spf : (t + window) * spf] for t in range(n_windows)], axis=0),
        dtype=torch.float32,
    )
    with torch.no_grad():
        v_all = backend.embed_window_t(frames_t).double().numpy()
        s_all = backend.embed_audio_t(audio_t).double().numpy()

    dists, margins = [], []
    for t in range(n_windows):
        dists.append(float(np.linalg.norm(v_all[t] - s_all[t])))
        sims = [
            float(v_all[t] @ s_all[t + o])
            for o in range(-offset_range, offset_range + 1)
            if 0 <= t + o < n_windows
        ]
        margins.append(float(v_all[t] @ s_all[t]) - float(np.median(sims)))
    return float(np.mean(dists)), float(np.mean(margins))


def fid(features_a: np.ndarray, features_b: np.ndarray, cov_eps: float = FID_COV_EPS) -> float:
    """Frechet distance between Gaussians fitted to two feature sets.

    d^2 = ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)). The
    covariance regularizer is applied only when the plain matrix square
    root fails, so the clean closed forms hold exactly.
    """
    a = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DataError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    dim = a.shape[1]
    for name, x in (("a", a), ("b", b)):
        if x.shape[0] < dim + 1:
            raise DataError(
                f"feature set {name} has {x.shape[0]} samples; need >= dim+1 = {dim + 1}"
            )
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))

    covmean, _ = scipy.linalg.sqrtm(cov_a @ cov_b, disp=False)
    if not np.isfinite(covmean).all():
        reg = cov_eps * np.eye(dim)
        covmean, _ = scipy.linalg.sqrtm((cov_a + reg) @ (cov_b + reg), disp=False)
        if not np.isfinite(covmean).all():
            raise NumericalError("matrix square root did not converge")
    if np.iscomplexobj(covmean):
        if np.abs(covmean.imag).max() > 1e-6:
            raise NumericalError("matrix square root has a large imaginary part")
        covmean = covmean.real

    d2 = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a + cov_b - 2.0 * covmean))
    return max(d2, 0.0) if d2 > -1e-6 else d2


class PixelFeatureExtractor:
    """Downsampled greyscale pixels as the FID embedding (the desk-scale
    stand-in for a pretrained feature network)."""

    def __init__(self, grid: int = 6):
        self.grid = grid
        self.dim = grid * grid

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        t = torch.as_tensor(np.asarray(frames, dtype=np.float32))
        grey = t @ torch.tensor([0.299, 0.587, 0.114])
        pooled = torch.nn.functional.adaptive_avg_pool2d(grey.unsqueeze(1), self.grid)
        return pooled.squeeze(1).reshape(t.shape[0], -1).numpy().astype(np.float64)


class ConvFeatureExtractor:
    """FID embedding from a frozen learned-affect trunk."""

    def __init__(self, affect_scorer):
        self.scorer = affect_scorer
        self.dim = affect_scorer.trunk.out_ch

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        t = torch.as_tensor(np.asarray(frames, dtype=np.float32))
        with torch.no_grad():
            feats = self.scorer.trunk(t.permute(0, 3, 1, 2))
        return feats.numpy().astype(np.float64)


@dataclass
class PairReport:
    pair: str
    n_videos: int = 0
    d_valence: float = math.nan
    d_arousal: float = math.nan
    lse_d: float = math.nan
    lse_c: float = math.nan
    fid: float = math.nan
    baseline_dv: float = math.nan
    baseline_da: float = math.nan
    degenerate_valence: int = 0
    degenerate_arousal: int = 0
    missing: bool = False


@dataclass
class MetricReport:
    pairs: dict[str, PairReport]
    micro: dict[str, float]
    counts: dict[str, int]
    extras: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "pairs": {k: vars(v) for k, v in sorted(self.pairs.items())},
            "micro": self.micro,
            "counts": self.counts,
            "extras": self.extras,
        }


@dataclass
class VideoMetrics:
    """Per-video metric row collected by the evaluation driver."""

    pair: str
    video_id: str
    delta: DeltaScores
    lse_d: float
    lse_c: float
    baseline_dv: float
    baseline_da: float


def aggregate_report(
    rows: list[VideoMetrics],
    fid_per_pair: dict[str, float] | None = None,
    extras: dict[str, float] | None = None,
) -> MetricReport:
    """Per-pair means plus the pooled micro-average.

    The micro-average pools per-video values across pairs (per-pair means
    are also reported). FID is a per-pair set statistic; its micro row is
    the mean over pairs.
    """
    fid_per_pair = fid_per_pair or {}
    pairs: dict[str, PairReport] = {}
    for pair in ORDERED_PAIRS:
        pair_rows = [r for r in rows if r.pair == pair]
        report = PairReport(pair=pair, n_videos=len(pair_rows))
        if not pair_rows:
            report.missing = True
            pairs[pair] = report
            continue
        dv = [r.delta.d_valence for r in pair_rows if r.delta.d_valence is not None]
        da = [r.delta.d_arousal for r in pair_rows if r.delta.d_arousal is not None]
        report.degenerate_valence = len(pair_rows) - len(dv)
        report.degenerate_arousal = len(pair_rows) - len(da)
        if dv:
            report.d_valence = float(np.mean(dv))
        if da:
            report.d_arousal = float(np.mean(da))
        report.lse_d = float(np.mean([r.lse_d for r in pair_rows]))
        report.lse_c = float(np.mean([r.lse_c for r in pair_rows]))
        report.baseline_dv = float(np.mean([r.baseline_dv for r in pair_rows]))
        report.baseline_da = float(np.mean([r.baseline_da for r in pair_rows]))
        if pair in fid_per_pair:
            report.fid = fid_per_pair[pair]
        pairs[pair] = report

    all_dv = [r.delta.d_valence for r in rows if r.delta.d_valence is not None]
    all_da = [r.delta.d_arousal for r in rows if r.delta.d_arousal is not None]
    fids = [v for v in fid_per_pair.values() if np.isfinite(v)]
    micro = {
        "d_valence": float(np.mean(all_dv)) if all_dv else math.nan,
        "d_arousal": float(np.mean(all_da)) if all_da else math.nan,
        "lse_d": float(np.mean([r.lse_d for r in rows])) if rows else math.nan,
        "lse_c": float(np.mean([r.lse_c for r in rows])) if rows else math.nan,
        "fid": float(np.mean(fids)) if fids else math.nan,
    }
    counts = {
        "videos": len(rows),
        "degenerate_valence": sum(1 for r in rows if r.delta.d_valence is None),
        "degenerate_arousal": sum(1 for r in rows if r.delta.d_arousal is None),
    }
    return MetricReport(pairs=pairs, micro=micro, counts=counts, extras=extras or {})


def format_report_table(report: MetricReport, title: str = "evaluation") -> str:
    """Aligned-column text table: one row per emotion pair plus the
    micro-average row and baseline columns."""
    header = (
        f"{'pair':16s} {'n':>3s} {'LSE-D':>8s} {'LSE-C':>8s} {'FID':>9s} "
        f"{'dVal':>8s} {'dAro':>8s} {'v_d-v_s':>8s} {'a_d-a_s':>8s} {'degV':>4s} {'degA':>4s}"
    )
    lines = [f"== {title} ==", header, "-" * len(header)]

    def fmt(x: float, width: int = 8) -> str:
        if x is None or (isinstance(x, float) and math.isnan(x)):
            return " " * (width - 3) + "---"
        return f"{x:{width}.4f}"

    for pair in ORDERED_PAIRS:
        r = report.pairs.get(pair)
        if r is None or r.missing:
            lines.append(f"{pair:16s} {'0':>3s} " + " ".join(["     ---"] * 7) + "  missing")
            continue
        lines.append(
            f"{pair:16s} {r.n_videos:3d} {fmt(r.lse_d)} {fmt(r.lse_c)} {fmt(r.fid, 9)} "
            f"{fmt(r.d_valence)} {fmt(r.d_arousal)} {fmt(r.baseline_dv)} {fmt(r.baseline_da)} "
            f"{r.degenerate_valence:4d} {r.degenerate_arousal:4d}"
        )
    m = report.micro
    lines.append("-" * len(header))
    lines.append(
        f"{'micro-average':16s} {report.counts['videos']:3d} {fmt(m['lse_d'])} {fmt(m['lse_c'])} "
        f"{fmt(m['fid'], 9)} {fmt(m['d_valence'])} {fmt(m['d_arousal'])} {'':8s} {'':8s} "
        f"{report.counts['degenerate_valence']:4d} {report.counts['degenerate_arousal']:4d}"
    )
    for key, value in sorted(report.extras.items()):
        lines.append(f"{key}: {value:.6g}")
    return "\n".join(lines)


def evaluate_generated(
    generated_root: str,
    corpus,
    scorers,
    fid_grid: int = 6,
    offset_range: int = LSE_OFFSET_RANGE,
    feature_extractor=None,
) -> tuple[MetricReport, list[VideoMetrics]]:
    """Score every generated utterance under ``generated_root`` against its
    paired ground truth in ``corpus``.

    Each generated utterance directory must hold frames.bin, audio.bin and
    a meta.json naming (actor, utterance, source_emotion,
    destination_emotion). Videos whose destination ground truth is absent
    are skipped with a warning; their pair row comes out missing.
    """
    import logging
    import os

    from .tensorio import read_tensor

    log = logging.getLogger(__name__)
    extract = feature_extractor or PixelFeatureExtractor(fid_grid)
    window = corpus.config.window

    metas = []
    for dirpath, _, filenames in sorted(os.walk(generated_root)):
        if "meta.json" in filenames and "frames.bin" in filenames:
            with open(os.path.join(dirpath, "meta.json")) as fh:
                meta = json.load(fh)
            if "source_emotion" in meta:
                metas.append((dirpath, meta))

    rows: list[VideoMetrics] = []
    gen_feats: dict[str, list[np.ndarray]] = {}
    dst_feats: dict[str, list[np.ndarray]] = {}
    for dirpath, meta in metas:
        actor, utt = meta["actor"], meta["utterance"]
        src_name, dst_name = meta["source_emotion"], meta["destination_emotion"]
        pair = f"{src_name}->{dst_name}"
        if not (corpus.has(actor, src_name, utt) and corpus.has(actor, dst_name, utt)):
            log.warning("missing ground truth for %s (actor=%s utt=%s)", pair, actor, utt)
            continue
        gen_frames = read_tensor(os.path.join(dirpath, "frames.bin"))
        gen_audio = read_tensor(os.path.join(dirpath, "audio.bin"))
        src = corpus.load(actor, src_name, utt)
        dst = corpus.load(actor, dst_name, utt)
        try:
            aff_g = video_affect(gen_frames, scorers.affect)
            aff_s = video_affect(src.frames, scorers.affect)
            aff_d = video_affect(dst.frames, scorers.affect)
        except NoFaceError as exc:
            log.warning("skipping %s: %s", dirpath, exc)
            continue
        delta = delta_affect(aff_g, aff_s, aff_d, dst_is_neutral=(dst_name == "neutral"))
        lse_d, lse_c = lse_metrics(gen_frames, gen_audio, scorers.sync, window, offset_range)
        rows.append(
            VideoMetrics(
                pair=pair,
                video_id=os.path.relpath(dirpath, generated_root),
                delta=delta,
                lse_d=lse_d,
                lse_c=lse_c,
                baseline_dv=aff_d.v_bar - aff_s.v_bar,
                baseline_da=aff_d.a_bar - aff_s.a_bar,
            )
        )
        gen_feats.setdefault(pair, []).append(extract(gen_frames))
        dst_feats.setdefault(pair, []).append(extract(dst.frames))

    fid_per_pair = {}
    for pair in gen_feats:
        a = np.concatenate(gen_feats[pair])
        b = np.concatenate(dst_feats[pair])
        if min(a.shape[0], b.shape[0]) >= extract.dim + 1:
            fid_per_pair[pair] = fid(a, b)

    extras = _ground_truth_fid_baseline(corpus, extract)
    return aggregate_report(rows, fid_per_pair, extras), rows


def _ground_truth_fid_baseline(corpus, extract) -> dict[str, float]:
    """Mean FID between the three ground-truth emotions on the test split,
    the reference point for generated-vs-truth FID values."""
    from .facegen import EMOTIONS

    feats = {}
    for emotion in EMOTIONS:
        chunks = []
        for actor in corpus.actors("test"):
            for utt_id in corpus.utterance_ids():
                if corpus.has(actor, emotion, utt_id):
                    chunks.append(extract(corpus.load(actor, emotion, utt_id).frames))
        if chunks:
            feats[emotion] = np.concatenate(chunks)
    values = []
    emotions = sorted(feats)
    for i, e1 in enumerate(emotions):
        for e2 in emotions[i + 1 :]:
            if min(feats[e1].shape[0], feats[e2].shape[0]) >= extract.dim + 1:
                values.append(fid(feats[e1], feats[e2]))
    if not values:
        return {}
    return {"ground_truth_fid_baseline": float(np.mean(values))}


def write_report(report: MetricReport, out_dir: str, rows: list[VideoMetrics] | None = None) -> dict:
    """Emit report.json, report.txt, and the per-video plot-data CSV."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
    txt_path = os.path.join(out_dir, "report.txt")
    with open(txt_path, "w") as fh:
        fh.write(format_report_table(report) + "\n")
    artifacts = {"report_json": json_path, "report_txt": txt_path}
    if rows is not None:
        csv_path = os.path.join(out_dir, "per_video.csv")
        with open(csv_path, "w") as fh:
            fh.write("video,pair,d_valence,d_arousal,lse_d,lse_c\n")
            for r in sorted(rows, key=lambda r: r.video_id):
                dv = "" if r.delta.d_valence is None else f"{r.delta.d_valence:.6g}"
                da = "" if r.delta.d_arousal is None else f"{r.delta.d_arousal:.6g}"
                fh.write(f"{r.video_id},{r.pair},{dv},{da},{r.lse_d:.6g},{r.lse_c:.6g}\n")
        artifacts["per_video_csv"] = csv_path
    return artifacts
