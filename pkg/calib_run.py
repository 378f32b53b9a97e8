"""Calibration experiment for the end-to-end behavioral targets (scratch, not shipped)."""
import os, sys, time, json, shutil
import numpy as np, torch
from emoshift.facegen import CorpusConfig, make_corpus, Corpus, EmotionLabel
from emoshift.scorers import make_scorers
from emoshift.train import VariantConfig, pretrain, train, load_checkpoint, infer
from emoshift.masking import MaskStrategy
from emoshift.evaluation import video_affect, delta_affect, lse_metrics

torch.manual_seed(0)
root = "/tmp/calib"
shutil.rmtree(root, ignore_errors=True)
os.makedirs(root)
cfg = CorpusConfig(train_actors=4, val_actors=1, test_actors=1, utterances=3,
                   frames_per_utterance=40, frame_size=48, seed=0)
t0 = time.time()
make_corpus(cfg, f"{root}/corpus")
corpus = Corpus(f"{root}/corpus")
scorers = make_scorers(corpus, "analytic")
print(f"corpus {time.time()-t0:.0f}s", flush=True)

t0 = time.time()
pre = pretrain(corpus, f"{root}/pre", steps=2500, eval_interval=250, seed=0, scorers=scorers)
print(f"pretrain {time.time()-t0:.0f}s -> {pre}", flush=True)

def eval_variant(tag, ck_path, variant):
    state = load_checkpoint(ck_path, scorers)
    rows = []
    for actor in corpus.actors("test"):
        for utt_id in corpus.utterance_ids():
            src = corpus.load(actor, "sad", utt_id)
            dst = corpus.load(actor, "happy", utt_id)
            gen = infer(state.gen, src.frames, src.audio, variant, src.landmarks)
            ag = video_affect(gen, scorers.affect)
            as_ = video_affect(src.frames, scorers.affect)
            ad = video_affect(dst.frames, scorers.affect)
            d = delta_affect(ag, as_, ad, False)
            ld_g, lc_g = lse_metrics(gen, src.audio, scorers.sync, cfg.window)
            ld_s, lc_s = lse_metrics(src.frames, src.audio, scorers.sync, cfg.window)
            rows.append((d.d_valence, ld_g, ld_s, lc_g))
    dv = np.mean([r[0] for r in rows]); ldg = np.mean([r[1] for r in rows]); lds = np.mean([r[2] for r in rows])
    print(f"{tag}: d_valence={dv:.3f} lse_d_gen={ldg:.3f} lse_d_src={lds:.3f} ratio={ldg/lds:.2f} lse_c_gen={np.mean([r[3] for r in rows]):.3f}", flush=True)
    return dv, ldg/lds

for name, variant_s, steps, pretrained in [
    ("half:l1", "half:l1", 1200, pre),
    ("half:emo", "half:emo", 1200, pre),
    ("full:l1", "full:l1", 2200, None),
]:
    v = VariantConfig.parse(variant_s, "sad:happy")
    t0 = time.time()
    art = train(corpus, v, f"{root}/{name.replace(':','_')}", steps=steps, eval_interval=300,
                seed=0, pretrained=pretrained, scorers=scorers)
    print(f"{name} train {time.time()-t0:.0f}s history={art['history']}", flush=True)
    eval_variant(name, art["checkpoint_last"], v)
