"""Renderer determinism, articulation/expression factorization, and the
on-disk corpus contracts."""

import json
import os

import numpy as np
import pytest

from emoshift.errors import DataError
from emoshift.facegen import (
    EMOTIONS,
    Corpus,
    CorpusConfig,
    EmotionLabel,
    FaceParams,
    emotion_params,
    make_corpus,
    render_frame,
    synth_utterance,
    utterance_dir,
)


class TestEmotionParams:
    def test_neutral_is_identity(self):
        d = emotion_params(EmotionLabel("neutral"))
        assert d.mouth_curve == 0.0 and d.brow_angle == 0.0

    def test_happy_sad_mirror(self):
        h = emotion_params(EmotionLabel("happy"))
        s = emotion_params(EmotionLabel("sad"))
        assert h.mouth_curve == -s.mouth_curve
        assert h.brow_angle == -s.brow_angle
        assert h.mouth_curve > 0

    def test_intensity_monotonic(self):
        one = emotion_params(EmotionLabel("happy", 1))
        two = emotion_params(EmotionLabel("happy", 2))
        assert abs(two.mouth_curve) >= abs(one.mouth_curve)

    def test_label_validation(self):
        with pytest.raises(DataError):
            EmotionLabel("angry")
        with pytest.raises(DataError):
            EmotionLabel("happy", 0)
        with pytest.raises(DataError):
            EmotionLabel("neutral", 2)


class TestRenderFrame:
    def test_deterministic(self):
        p = FaceParams(mouth_open=0.4, mouth_curve=0.3, identity_seed=5)
        f1, lm1, _ = render_frame(p, (48, 48))
        f2, lm2, _ = render_frame(p, (48, 48))
        assert np.array_equal(f1, f2)
        assert np.array_equal(lm1, lm2)

    def test_values_in_unit_range(self):
        f, _, _ = render_frame(FaceParams(), (48, 48))
        assert f.min() >= 0.0 and f.max() <= 1.0

    def test_mouth_change_localized_to_returned_box(self):
        base = FaceParams(mouth_open=0.2, mouth_curve=0.4, pose_dx=1.0, identity_seed=7)
        open_wide = FaceParams(mouth_open=0.9, mouth_curve=0.4, pose_dx=1.0, identity_seed=7)
        f1, _, box = render_frame(base, (64, 64))
        f2, _, _ = render_frame(open_wide, (64, 64))
        diff = np.abs(f1.astype(np.float64) - f2.astype(np.float64)).sum(axis=-1)
        y0, y1, x0, x1 = box
        outside = diff.copy()
        outside[y0:y1, x0:x1] = 0.0
        assert outside.sum() == 0.0
        assert diff[y0:y1, x0:x1].sum() > 0.0

    def test_landmark_bounds_and_count(self):
        for pose in (-2.0, 0.0, 2.0):
            f, lm, _ = render_frame(FaceParams(pose_dx=pose, pose_dy=-pose), (32, 40))
            assert lm.shape[0] >= 16
            assert (lm[:, 0] >= 0).all() and (lm[:, 0] < 40).all()
            assert (lm[:, 1] >= 0).all() and (lm[:, 1] < 32).all()

    def test_size_minimum_enforced(self):
        with pytest.raises(DataError):
            render_frame(FaceParams(), (16, 64))

    def test_param_ranges_enforced(self):
        with pytest.raises(DataError):
            render_frame(FaceParams(mouth_open=1.5), (48, 48))


class TestSynthUtterance:
    CFG = CorpusConfig(frame_size=48, frames_per_utterance=30, seed=3)

    def test_mouth_tracks_envelope_exactly(self):
        utt = synth_utterance(self.CFG, 1, 0, EmotionLabel("neutral"))
        spf = self.CFG.audio_steps_per_frame
        env = utt.audio.astype(np.float64).reshape(utt.num_frames, spf, -1).mean(axis=(1, 2))
        rho = np.corrcoef(env, utt.mouth_open)[0, 1]
        assert abs(rho - 1.0) < 1e-9

    def test_articulation_independent_of_emotion(self):
        happy = synth_utterance(self.CFG, 1, 0, EmotionLabel("happy"))
        sad = synth_utterance(self.CFG, 1, 0, EmotionLabel("sad"))
        assert np.array_equal(happy.mouth_open, sad.mouth_open)
        assert np.array_equal(happy.audio, sad.audio)

    def test_different_actors_different_textures(self):
        a = synth_utterance(self.CFG, 0, 0, EmotionLabel("neutral"))
        b = synth_utterance(self.CFG, 1, 0, EmotionLabel("neutral"))
        l1 = np.abs(a.frames[0].astype(np.float64) - b.frames[0].astype(np.float64)).sum()
        assert l1 > 0.0

    def test_frame_landmark_audio_alignment(self):
        utt = synth_utterance(self.CFG, 2, 1, EmotionLabel("happy"))
        assert utt.frames.shape[0] == utt.landmarks.shape[0]
        assert utt.audio.shape == (utt.num_frames * self.CFG.audio_steps_per_frame, self.CFG.mel_bands)
        assert utt.fps == 25

    def test_too_few_frames_rejected(self):
        with pytest.raises(DataError):
            synth_utterance(self.CFG, 0, 0, EmotionLabel("neutral"), num_frames=3)

    def test_deterministic_given_seed(self):
        a = synth_utterance(self.CFG, 4, 2, EmotionLabel("sad"), seed=9)
        b = synth_utterance(self.CFG, 4, 2, EmotionLabel("sad"), seed=9)
        assert np.array_equal(a.frames, b.frames)


class TestMakeCorpus(object):
    def test_split_sizes_and_disjointness(self, tmp_path):
        cfg = CorpusConfig(
            train_actors=8, val_actors=2, test_actors=2, utterances=1,
            frames_per_utterance=5, frame_size=32, seed=1,
        )
        split = make_corpus(cfg, str(tmp_path / "c"))
        assert len(split.train_actors) == 8
        assert len(split.val_actors) == 2
        assert len(split.test_actors) == 2
        all_actors = set(split.train_actors) | set(split.val_actors) | set(split.test_actors)
        assert all_actors == set(range(12))

    def test_same_seed_same_split(self, tmp_path):
        cfg = CorpusConfig(
            train_actors=3, val_actors=1, test_actors=1, utterances=1,
            frames_per_utterance=5, frame_size=32, seed=7,
        )
        s1 = make_corpus(cfg, str(tmp_path / "a"))
        s2 = make_corpus(cfg, str(tmp_path / "b"))
        assert s1.train_actors == s2.train_actors
        assert s1.test_actors == s2.test_actors

    def test_record_count_and_pairing(self, tiny_corpus):
        cfg = tiny_corpus.config
        utt_dirs = []
        for dirpath, _, files in os.walk(tiny_corpus.root):
            if "frames.bin" in files:
                utt_dirs.append(dirpath)
        assert len(utt_dirs) == 3 * cfg.utterances * cfg.num_actors
        # every (actor, utterance) exists in all three emotions
        for actor in tiny_corpus.actors():
            for utt in tiny_corpus.utterance_ids():
                for emotion in EMOTIONS:
                    assert tiny_corpus.has(actor, emotion, utt)

    def test_byte_identical_regeneration(self, tmp_path):
        cfg = CorpusConfig(
            train_actors=1, val_actors=1, test_actors=1, utterances=1,
            frames_per_utterance=6, frame_size=32, seed=5,
        )
        make_corpus(cfg, str(tmp_path / "a"))
        make_corpus(cfg, str(tmp_path / "b"))
        rel = os.path.join("actor_000", "happy_1", "utt_000", "frames.bin")
        with open(tmp_path / "a" / rel, "rb") as fh:
            b1 = fh.read()
        with open(tmp_path / "b" / rel, "rb") as fh:
            b2 = fh.read()
        assert b1 == b2

    def test_too_few_actors_rejected(self, tmp_path):
        cfg = CorpusConfig(train_actors=1, val_actors=1, test_actors=0)
        with pytest.raises(DataError):
            make_corpus(cfg, str(tmp_path / "x"))

    def test_refuses_nonempty_dir_without_force(self, tmp_path):
        cfg = CorpusConfig(
            train_actors=1, val_actors=1, test_actors=1, utterances=1,
            frames_per_utterance=5, frame_size=32,
        )
        make_corpus(cfg, str(tmp_path / "c"))
        with pytest.raises(DataError):
            make_corpus(cfg, str(tmp_path / "c"))
        make_corpus(cfg, str(tmp_path / "c"), force=True)

    def test_stats_written(self, tiny_corpus):
        assert tiny_corpus.stats is not None
        assert 0.0 < tiny_corpus.stats["grey_mean"] < 1.0
        assert tiny_corpus.stats["grey_std"] > 0.0

    def test_landmarks_json_roundtrip(self, tiny_corpus):
        actor = tiny_corpus.actors("train")[0]
        d = tiny_corpus.path(actor, "neutral", 0)
        with open(os.path.join(d, "landmarks.json")) as fh:
            lm = json.load(fh)
        meta = json.load(open(os.path.join(d, "meta.json")))
        assert len(lm) == meta["num_frames"]
        assert meta["fps"] == 25
