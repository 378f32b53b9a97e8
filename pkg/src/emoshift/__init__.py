"""Emotion translation for synthetic talking-face videos.

Pipeline: procedural paired-emotion corpus -> masked pose-prior GAN
training over six (masking x strategy) variants -> sliding-window
inference that keeps the original audio -> normalized affect, lip-sync,
and FID evaluation.
"""

from .errors import ConfigError, DataError, EmoshiftError, NoFaceError, NumericalError
from .facegen import Corpus, CorpusConfig, EmotionLabel, FaceParams, make_corpus, render_frame, synth_utterance
from .losses import LossBreakdown, LossWeights
from .masking import MaskStrategy, apply_mask, build_generator_input, convex_hull, rasterize_mask
from .model import Generator, ModelConfig, QualityDiscriminator, init_params
from .scorers import ScorerSet, freeze_check, make_scorers
from .train import VariantConfig, infer, pretrain, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Corpus",
    "CorpusConfig",
    "DataError",
    "EmoshiftError",
    "EmotionLabel",
    "FaceParams",
    "Generator",
    "LossBreakdown",
    "LossWeights",
    "MaskStrategy",
    "ModelConfig",
    "NoFaceError",
    "NumericalError",
    "QualityDiscriminator",
    "ScorerSet",
    "VariantConfig",
    "apply_mask",
    "build_generator_input",
    "convex_hull",
    "freeze_check",
    "infer",
    "init_params",
    "make_corpus",
    "make_scorers",
    "pretrain",
    "rasterize_mask",
    "render_frame",
    "synth_utterance",
    "train",
]
