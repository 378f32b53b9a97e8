"""Pipeline command line: synth, pretrain, train, infer, eval, report.

One JSON config file feeds every command (flag > config > default). Each
command writes a manifest into its output directory. Exit codes: 0 ok,
1 data error, 2 config/compatibility error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys

import numpy as np

from . import evaluation as E
from . import train as T
from .config import config_hash, load_config, now_iso, write_manifest
from .errors import ConfigError, DataError, EmoshiftError
from .facegen import Corpus, CorpusConfig, make_corpus
from .scorers import make_scorers
from .tensorio import read_tensor, write_tensor

log = logging.getLogger("emoshift")


def _corpus_config(cfg: dict) -> CorpusConfig:
    c = dict(cfg["corpus"])
    c.pop("root", None)
    return CorpusConfig(seed=cfg["seed"], **c)


def _apply_overrides(cfg: dict, args, keys: list[tuple[str, str, str]]) -> dict:
    for section, key, attr in keys:
        value = getattr(args, attr, None)
        if value is not None:
            cfg[section][key] = value
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    return cfg


def _dump_png(frames: np.ndarray, out_dir: str, count: int = 3) -> None:
    from PIL import Image

    os.makedirs(out_dir, exist_ok=True)
    idx = np.linspace(0, frames.shape[0] - 1, count).astype(int)
    for i in idx:
        img = Image.fromarray((np.clip(frames[i], 0, 1) * 255).astype(np.uint8))
        img.save(os.path.join(out_dir, f"frame_{i:04d}.png"))


def cmd_synth(cfg: dict, args) -> int:
    started = now_iso()
    root = args.out or cfg["corpus"]["root"]
    corpus_cfg = _corpus_config(cfg)
    split = make_corpus(corpus_cfg, root, workers=cfg["workers"], force=args.force)
    if args.png:
        corpus = Corpus(root)
        actor = corpus.actors("train")[0]
        utt = corpus.load(actor, "neutral", 0)
        _dump_png(utt.frames, os.path.join(root, "preview"))
    write_manifest(root, "synth", cfg, args.config, {"corpus": os.path.abspath(root)}, started)
    print(f"corpus written to {root}")
    print(f"splits: train={list(split.train_actors)} val={list(split.val_actors)} test={list(split.test_actors)}")
    return 0


def _load_corpus(cfg: dict, args) -> Corpus:
    root = getattr(args, "corpus", None) or cfg["corpus"]["root"]
    if not os.path.isdir(root):
        raise DataError(f"corpus directory not found: {root} (run the synth command first)")
    return Corpus(root)


def _scorers_for(cfg: dict, corpus: Corpus):
    sc = cfg["scorer"]
    return make_scorers(corpus, sc["backend"], seed=cfg["seed"], pretrain_steps=sc["pretrain_steps"])


def cmd_pretrain(cfg: dict, args) -> int:
    started = now_iso()
    corpus = _load_corpus(cfg, args)
    section = cfg["pretrain"]
    out = args.out or section["out"]
    path = T.pretrain(
        corpus,
        out,
        steps=section["steps"],
        batch_size=section["batch_size"],
        lr=section["lr"],
        eval_interval=section["eval_interval"],
        sync_threshold=section["sync_threshold"],
        seed=cfg["seed"],
        scorers=_scorers_for(cfg, corpus),
        model_overrides=cfg["model"],
        grad_clamp=cfg["grad_clamp"],
    )
    write_manifest(out, "pretrain", cfg, args.config, {"checkpoint": os.path.abspath(path)}, started)
    print(f"pretrain checkpoint at {path}")
    return 0


def cmd_train(cfg: dict, args) -> int:
    started = now_iso()
    corpus = _load_corpus(cfg, args)
    section = cfg["train"]
    out = args.out or section["out"]
    try:
        variant = T.VariantConfig.parse(
            section["variant"], section["pair"], corpus.config.intensity
        )
    except (ConfigError, DataError) as exc:
        raise ConfigError(f"{exc}\n{T.pairing_table()}") from exc
    artifacts = T.train(
        corpus,
        variant,
        out,
        steps=section["steps"],
        batch_size=section["batch_size"],
        lr=section["lr"],
        eval_interval=section["eval_interval"],
        seed=cfg["seed"],
        pretrained=section["pretrained"] or None,
        scorers=_scorers_for(cfg, corpus),
        model_overrides=cfg["model"],
        grad_clamp=cfg["grad_clamp"],
    )
    artifacts.pop("history", None)
    write_manifest(out, "train", cfg, args.config, {k: os.path.abspath(v) for k, v in artifacts.items()}, started)
    print(f"checkpoints in {out} (variant {variant.name}, pair {variant.pair})")
    return 0


def cmd_infer(cfg: dict, args) -> int:
    started = now_iso()
    corpus = _load_corpus(cfg, args)
    checkpoint = args.checkpoint or cfg["infer"]["checkpoint"]
    if not checkpoint or not os.path.isfile(checkpoint):
        raise ConfigError(f"checkpoint not found: {checkpoint!r}")
    meta = T.checkpoint_meta(checkpoint)
    if meta.get("variant") is None:
        raise ConfigError("checkpoint has no variant metadata; was it produced by train?")
    expected_hash = config_hash({"model": meta["model"], "variant": meta["variant"]})
    if meta.get("config_hash") != expected_hash:
        raise ConfigError("checkpoint metadata hash mismatch; file is inconsistent")
    variant = T.VariantConfig.from_dict(meta["variant"])
    requested = cfg["train"].get("variant"), cfg["train"].get("pair")
    if args.variant is not None or args.pair is not None:
        want = T.VariantConfig.parse(
            args.variant or requested[0], args.pair or requested[1], corpus.config.intensity
        )
        if want.to_dict() != variant.to_dict():
            raise ConfigError(
                f"checkpoint was trained for {variant.name} {variant.pair}, "
                f"but {want.name} {want.pair} was requested"
            )
    if meta["model"]["frame_size"] != corpus.config.frame_size:
        raise ConfigError(
            f"checkpoint frame size {meta['model']['frame_size']} does not match "
            f"corpus frame size {corpus.config.frame_size}"
        )

    scorers = _scorers_for(cfg, corpus)
    state = T.load_checkpoint(checkpoint, scorers)
    out_root = args.out or cfg["infer"]["out"]
    if os.path.isdir(out_root) and os.listdir(out_root):
        if not args.force:
            raise DataError(f"output directory {out_root} is not empty (use --force)")
        shutil.rmtree(out_root)
    os.makedirs(out_root, exist_ok=True)

    split = args.split
    actors = corpus.actors(None if split == "all" else split)
    src_name = variant.source_emotion.name
    count = 0
    for actor in actors:
        for utt_id in corpus.utterance_ids():
            if not corpus.has(actor, src_name, utt_id):
                continue
            utt = corpus.load(actor, src_name, utt_id)
            gen_frames = T.infer(state.gen, utt.frames, utt.audio, variant, utt.landmarks)
            out_dir = os.path.join(
                out_root,
                f"actor_{actor:03d}",
                f"{src_name}_to_{variant.destination_emotion.name}",
                f"utt_{utt_id:03d}",
            )
            os.makedirs(out_dir, exist_ok=True)
            write_tensor(os.path.join(out_dir, "frames.bin"), gen_frames)
            src_audio_path = os.path.join(corpus.path(actor, src_name, utt_id), "audio.bin")
            shutil.copyfile(src_audio_path, os.path.join(out_dir, "audio.bin"))
            with open(os.path.join(out_dir, "meta.json"), "w") as fh:
                json.dump(
                    {
                        "actor": actor,
                        "utterance": utt_id,
                        "source_emotion": src_name,
                        "destination_emotion": variant.destination_emotion.name,
                        "fps": utt.fps,
                        "num_frames": int(gen_frames.shape[0]),
                        "checkpoint_hash": meta["config_hash"],
                        "variant": variant.name,
                    },
                    fh,
                    indent=1,
                    sort_keys=True,
                )
            if args.png:
                _dump_png(gen_frames, os.path.join(out_dir, "preview"))
            count += 1
    write_manifest(out_root, "infer", cfg, args.config, {"generated": os.path.abspath(out_root)}, started)
    print(f"translated {count} utterances into {out_root}")
    return 0


def cmd_eval(cfg: dict, args) -> int:
    started = now_iso()
    corpus = _load_corpus(cfg, args)
    generated = args.generated or cfg["eval"]["generated"]
    if not generated or not os.path.isdir(generated):
        raise DataError(f"generated directory not found: {generated!r}")
    out = args.out or cfg["eval"]["out"]
    scorers = _scorers_for(cfg, corpus)
    report, rows = E.evaluate_generated(
        generated,
        corpus,
        scorers,
        fid_grid=cfg["eval"]["fid_downsample"],
        offset_range=cfg["eval"]["lse_offset_range"],
    )
    artifacts = E.write_report(report, out, rows)
    write_manifest(out, "eval", cfg, args.config, {k: os.path.abspath(v) for k, v in artifacts.items()}, started)
    print(E.format_report_table(report, title=f"eval of {generated}"))
    missing = [p for p, r in report.pairs.items() if r.missing]
    if missing and len(missing) < len(report.pairs):
        print(f"warning: pairs with no videos: {', '.join(missing)}")
    return 0


def cmd_report(cfg: dict, args) -> int:
    started = now_iso()
    out = args.out or "runs/report"
    os.makedirs(out, exist_ok=True)
    lines = []
    header = f"{'run':40s} {'LSE-D':>8s} {'LSE-C':>8s} {'FID':>9s} {'dVal':>8s} {'dAro':>8s}"
    lines.append(header)
    lines.append("-" * len(header))
    for path in args.inputs:
        with open(path) as fh:
            data = json.load(fh)
        m = data["micro"]
        name = os.path.basename(os.path.dirname(os.path.abspath(path))) or path

        def cell(x):
            return "     ---" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:8.4f}"

        lines.append(
            f"{name:40s} {cell(m['lse_d'])} {cell(m['lse_c'])} {cell(m['fid']):>9s} "
            f"{cell(m['d_valence'])} {cell(m['d_arousal'])}"
        )
    table = "\n".join(lines)
    table_path = os.path.join(out, "combined_report.txt")
    with open(table_path, "w") as fh:
        fh.write(table + "\n")
    write_manifest(out, "report", cfg, args.config, {"combined_report": os.path.abspath(table_path)}, started)
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emoshift",
        description="Emotion translation for synthetic talking-face videos",
    )
    parser.add_argument("--config", default=None, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--force", action="store_true", help="overwrite non-empty outputs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    p.add_argument("--out", default=None)
    p.add_argument("--png", action="store_true", help="dump preview PNG frames")

    p = sub.add_parser("pretrain", help="neutral-only warm start for half-masking variants")
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--steps", type=int, default=None)

    p = sub.add_parser("train", help="train one variant on one emotion pair")
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--variant", default=None, help="e.g. half:l1_emo")
    p.add_argument("--pair", default=None, help="e.g. sad:happy")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--pretrained", default=None)

    p = sub.add_parser("infer", help="translate videos with a trained checkpoint")
    p.add_argument("--corpus", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--variant", default=None)
    p.add_argument("--pair", default=None)
    p.add_argument("--png", action="store_true")

    p = sub.add_parser("eval", help="score generated videos against ground truth")
    p.add_argument("--corpus", default=None)
    p.add_argument("--generated", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="combine eval reports into one table")
    p.add_argument("inputs", nargs="+", help="report.json paths")
    p.add_argument("--out", default=None)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        overrides = []
        if args.command == "pretrain":
            overrides = [("pretrain", "steps", "steps")]
        elif args.command == "train":
            overrides = [
                ("train", "steps", "steps"),
                ("train", "variant", "variant"),
                ("train", "pair", "pair"),
                ("train", "pretrained", "pretrained"),
            ]
        cfg = _apply_overrides(cfg, args, overrides)
        return COMMANDS[args.command](cfg, args)
    except EmoshiftError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
