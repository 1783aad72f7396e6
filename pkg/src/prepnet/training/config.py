"""Run and training configuration.

A run config bundles everything `run_pipeline` needs: the manifest to
train on, preprocessing, optional model overrides, and the stage
schedule. Its JSON form mirrors the dataclasses field for field, so a
config file round-trips losslessly.
"""

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..data.preprocess import PreprocessConfig
from ..errors import ConfigError
from ..losses import LossWeights


def _default_loss_weights():
    # tuned on the synthetic benchmark: a strong reconstruction anchor
    # keeps the generator near the data manifold while the fool term
    # erodes whatever the discriminator still separates
    return LossWeights(w_rec=20.0, w_pseu=1.0, w_covid=1.0, w_fool=0.5)


@dataclass(frozen=True)
class TrainConfig:
    """Stage schedule, optimizer settings, and loss weighting."""

    seed: int = 0
    epochs_pretrain: int = 10
    epochs_warmup: int = 6
    epochs_adversarial: int = 20
    epochs_task: int = 20
    batch_size: int = 32
    lr_pretrain: float = 5e-4
    lr_warmup: float = 1e-3
    lr_generator: float = 1e-3
    lr_discriminator: float = 3e-4
    lr_task: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    split_ratios: tuple = (0.70, 0.15, 0.15)
    early_stop_patience: int = 3
    warmup_on_raw: bool = False
    artifact_threshold_multiplier: float = 3.0
    loss_weights: LossWeights = field(default_factory=_default_loss_weights)

    def __post_init__(self):
        for name in ("epochs_pretrain", "epochs_warmup", "epochs_adversarial", "epochs_task"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 0):
                raise ConfigError(f"{name} must be a nonnegative integer, got {v!r}")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        for name in ("lr_pretrain", "lr_warmup", "lr_generator", "lr_discriminator",
                     "lr_task", "weight_decay"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and nonnegative, got {v!r}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0.0 <= v < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {v!r}")
        if not (isinstance(self.early_stop_patience, int) and self.early_stop_patience >= 1):
            raise ConfigError(
                f"early_stop_patience must be a positive integer, got {self.early_stop_patience!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        m = self.artifact_threshold_multiplier
        if not (isinstance(m, (int, float)) and math.isfinite(m) and m >= 0):
            raise ConfigError(f"artifact_threshold_multiplier must be finite, got {m!r}")
        object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios):
            raise ConfigError(f"split_ratios must be three nonnegative values, got {self.split_ratios}")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must sum to 1, got {sum(self.split_ratios)}")

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "loss_weights":
                v = {"w_rec": v.w_rec, "w_pseu": v.w_pseu, "w_covid": v.w_covid, "w_fool": v.w_fool}
            elif f.name == "split_ratios":
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown train config keys: {', '.join(unknown)}")
        if "loss_weights" in d:
            lw = d["loss_weights"]
            if not isinstance(lw, LossWeights):
                extra = sorted(set(lw) - {"w_rec", "w_pseu", "w_covid", "w_fool"})
                if extra:
                    raise ConfigError(f"unknown loss weight keys: {', '.join(extra)}")
                base = _default_loss_weights()
                d["loss_weights"] = LossWeights(
                    w_rec=float(lw.get("w_rec", base.w_rec)),
                    w_pseu=float(lw.get("w_pseu", base.w_pseu)),
                    w_covid=float(lw.get("w_covid", base.w_covid)),
                    w_fool=float(lw.get("w_fool", base.w_fool)),
                )
        if "split_ratios" in d:
            d["split_ratios"] = tuple(d["split_ratios"])
        return cls(**d)


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run consumes, as found in a config file.

    `model` holds raw overrides for the model configuration; the
    pipeline resolves them against the manifest (which fixes the domain
    count) when the run starts.
    """

    manifest: str
    train: TrainConfig = field(default_factory=TrainConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.manifest, str) or not self.manifest:
            raise ConfigError("config must name a manifest file")
        if not isinstance(self.model, dict):
            raise ConfigError(f"model section must be an object, got {type(self.model).__name__}")

    def to_dict(self):
        return {
            "manifest": self.manifest,
            "preprocess": self.preprocess.to_dict(),
            "model": dict(self.model),
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError(f"config root must be an object, got {type(d).__name__}")
        unknown = sorted(set(d) - {"manifest", "preprocess", "model", "train"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "manifest" not in d:
            raise ConfigError("config must name a manifest file")
        pre = d.get("preprocess", {})
        try:
            preprocess = pre if isinstance(pre, PreprocessConfig) else PreprocessConfig.from_dict(pre)
        except TypeError as exc:
            raise ConfigError(f"bad preprocess section: {exc}") from exc
        tr = d.get("train", {})
        train = tr if isinstance(tr, TrainConfig) else TrainConfig.from_dict(tr)
        return cls(manifest=str(d["manifest"]), train=train, preprocess=preprocess,
                   model=dict(d.get("model", {})))


def load_run_config(path):
    """Parse a JSON config file. Returns (RunConfig, verbatim file text)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(raw), text


def save_run_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")
