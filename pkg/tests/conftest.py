import os

import numpy as np
import pytest
import torch

from emoshift.facegen import Corpus, CorpusConfig, make_corpus

torch.manual_seed(0)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory) -> Corpus:
    """Small 48x48 corpus shared by tests that need real data on disk."""
    root = tmp_path_factory.mktemp("corpus") / "c"
    cfg = CorpusConfig(
        train_actors=2,
        val_actors=1,
        test_actors=1,
        utterances=2,
        frames_per_utterance=25,
        frame_size=48,
        seed=0,
    )
    make_corpus(cfg, str(root))
    return Corpus(str(root))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
