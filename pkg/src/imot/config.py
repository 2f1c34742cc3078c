"""Run configuration: every hyperparameter, ablation toggle, and path for a run.

A ``RunConfig`` is an immutable value object.  It serializes to a JSON
document whose keys are exactly the dataclass fields; unknown keys in a
document are a hard error so that a typo in an ablation toggle cannot pass
silently.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional


class ConfigError(ValueError):
    """Raised when a configuration document violates an invariant."""


@dataclass(frozen=True)
class RunConfig:
    # Model dimensions.  token_len is the number of samples in a 1-second
    # window, so it equals the sample rate (100 or 200 for real recordings;
    # smaller values are allowed for unit-scale instances).
    token_len: int = 100
    channels: int = 3          # IMU axes per modality; fixed at 3
    particle_count: int = 128
    encoder_layers: int = 2
    decoder_layers: int = 2
    k1: int = 9                # first moving-average order
    k2: int = 3                # second moving-average order (k2 < k1, same parity)
    gamma: float = 2.0         # exponent steering weight toward distant particles
    attention_heads: int = 4
    ffn_hidden: Optional[int] = None   # None -> 4 * token_len
    mlp_hidden: int = 64

    # Ablation toggles.
    psd: bool = True
    asc: bool = True
    ape: bool = True
    particles: bool = True
    dsm: bool = True
    # Study-only variant: divide the legacy particle weights by their sum.
    normalize_legacy_weights: bool = False

    # Training.
    learning_rate: float = 1e-4
    batch_size: int = 128
    seed: int = 0
    max_epochs: int = 50
    patience: int = 10
    grad_clip: float = 1.0
    val_fraction: float = 0.1
    train_stride: Optional[int] = None  # None -> token_len // 10
    eval_stride: Optional[int] = None   # None -> token_len

    # Step-detector settings for the PDR baseline.
    pdr_stride_m: float = 0.67
    pdr_cutoff_hz: float = 4.0
    pdr_min_gap_s: float = 0.3
    pdr_prominence: float = 0.5

    # Dataset location (optional; CLI flags override).
    data_dir: Optional[str] = None

    @property
    def ffn_width(self) -> int:
        return self.ffn_hidden if self.ffn_hidden else 4 * self.token_len

    @property
    def train_stride_eff(self) -> int:
        return self.train_stride if self.train_stride else max(1, self.token_len // 10)

    @property
    def eval_stride_eff(self) -> int:
        return self.eval_stride if self.eval_stride else self.token_len


def validate_config(cfg: RunConfig) -> RunConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError.

    The first violated invariant is reported by name.
    """
    if cfg.channels != 3:
        raise ConfigError(f"channels must be 3, got {cfg.channels}")
    if cfg.token_len < 2:
        raise ConfigError(f"token_len must be >= 2, got {cfg.token_len}")
    if cfg.k1 < 1 or cfg.k2 < 1:
        raise ConfigError(f"moving-average orders must be >= 1, got k1={cfg.k1}, k2={cfg.k2}")
    if cfg.k2 >= cfg.k1:
        raise ConfigError(f"k2 >= k1 (k1={cfg.k1}, k2={cfg.k2})")
    if cfg.k1 % 2 != cfg.k2 % 2:
        raise ConfigError(f"parity mismatch: k1={cfg.k1} and k2={cfg.k2} must be both odd or both even")
    if cfg.k1 > cfg.token_len:
        raise ConfigError(f"k1 ({cfg.k1}) exceeds token_len ({cfg.token_len})")
    if cfg.particle_count < 1:
        raise ConfigError(f"particle_count must be >= 1, got {cfg.particle_count}")
    if cfg.encoder_layers < 1:
        raise ConfigError(f"encoder_layers must be >= 1, got {cfg.encoder_layers}")
    if cfg.decoder_layers < 1:
        raise ConfigError(f"decoder_layers must be >= 1, got {cfg.decoder_layers}")
    if cfg.gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {cfg.gamma}")
    if cfg.attention_heads < 1:
        raise ConfigError(f"attention_heads must be >= 1, got {cfg.attention_heads}")
    if cfg.token_len % cfg.attention_heads != 0:
        raise ConfigError(
            f"token_len ({cfg.token_len}) must be divisible by attention_heads ({cfg.attention_heads})"
        )
    if cfg.particles and cfg.token_len % 2 != 0:
        raise ConfigError(f"token_len must be even for particle embeddings, got {cfg.token_len}")
    if cfg.dsm and not cfg.particles:
        raise ConfigError("dsm requires particles")
    if cfg.learning_rate < 0:
        raise ConfigError(f"learning_rate must be >= 0, got {cfg.learning_rate}")
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {cfg.batch_size}")
    if cfg.max_epochs < 1:
        raise ConfigError(f"max_epochs must be >= 1, got {cfg.max_epochs}")
    if cfg.patience < 0:
        raise ConfigError(f"patience must be >= 0, got {cfg.patience}")
    if not 0.0 <= cfg.val_fraction <= 0.5:
        raise ConfigError(f"val_fraction must be in [0, 0.5], got {cfg.val_fraction}")
    for name in ("ffn_hidden", "mlp_hidden", "train_stride", "eval_stride"):
        value = getattr(cfg, name)
        if value is not None and value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")
    for name in ("pdr_stride_m", "pdr_cutoff_hz", "pdr_min_gap_s", "pdr_prominence"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be > 0, got {getattr(cfg, name)}")
    return cfg


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def config_to_json(cfg: RunConfig) -> str:
    """Serialize to a canonical JSON document (field order, 2-space indent)."""
    return json.dumps(dataclasses.asdict(cfg), indent=2) + "\n"


def config_from_json(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Unknown keys are a hard error.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    unknown = sorted(set(doc) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    return validate_config(RunConfig(**doc))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(fh.read())


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_to_json(cfg))
