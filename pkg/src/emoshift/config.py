"""Run configuration: one JSON file with per-command sections.

Precedence is flag > config file > defaults. The resolved configuration
is hashed (canonical JSON, sorted keys) and recorded in every manifest so
artifacts can be checked for compatibility.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from datetime import datetime, timezone

from .errors import ConfigError

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "workers": 1,
    "corpus": {
        "root": "corpus",
        "train_actors": 8,
        "val_actors": 2,
        "test_actors": 2,
        "utterances": 3,
        "frames_per_utterance": 50,
        "frame_size": 64,
        "window": 5,
        "audio_steps_per_frame": 4,
        "mel_bands": 16,
        "jitter": 0.02,
        "pose_amp_frac": 0.03,
        "intensity": {"happy": 1, "neutral": 1, "sad": 1},
    },
    "model": {
        "base_width": 16,
        "enc_stages": 4,
        "audio_embed": 64,
        "use_residual": True,
    },
    "scorer": {"backend": "analytic", "pretrain_steps": 200},
    "pretrain": {
        "steps": 3000,
        "batch_size": 4,
        "lr": 1e-4,
        "eval_interval": 250,
        "sync_threshold": 0.9,
        "out": "runs/pretrain",
    },
    "train": {
        "steps": 2000,
        "batch_size": 4,
        "lr": 1e-4,
        "eval_interval": 200,
        "variant": "half:l1_emo",
        "pair": "sad:happy",
        "pretrained": "",
        "out": "runs/train",
    },
    "infer": {"input": "", "checkpoint": "", "out": "runs/infer"},
    "eval": {"generated": "", "out": "runs/eval", "fid_downsample": 6, "lse_offset_range": 7},
    "grad_clamp": [1e-2, 1e10],
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None) -> dict:
    """Defaults merged with the JSON file at ``path`` (if any)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return deep_merge(DEFAULT_CONFIG, user)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(
    out_dir: str,
    command: str,
    config: dict,
    config_path: str | None,
    artifacts: dict[str, str],
    started_at: str,
) -> str:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config_path": config_path or "",
        "config_hash": config_hash(config),
        "seed": config.get("seed", 0),
        "output_dir": os.path.abspath(out_dir),
        "started_at": started_at,
        "finished_at": now_iso(),
        "artifacts": artifacts,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return path


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()
