"""Architecture configuration shared by all four network components."""

import hashlib
import json
from dataclasses import asdict, dataclass

from ..errors import ConfigError
from .backbones import backbone_recipe


@dataclass(frozen=True)
class ModelConfig:
    input_size: tuple = (32, 32)
    encoder_blocks: tuple = ((1, 8), (1, 16), (1, 32))  # (convs per block, width)
    latent_channels: int = 16
    skip_merge: str = "concatenate"
    dataset_head: tuple = ((16,), 2)  # (hidden widths, K)
    task_head: tuple = ((16,), 1)
    backbone_name: str = "vgg-mini"
    block_style: str = "plain"  # "plain" | "residual", set by the backbone recipe

    def __post_init__(self):
        h, w = self.input_size
        blocks = tuple(tuple(b) for b in self.encoder_blocks)
        object.__setattr__(self, "input_size", (int(h), int(w)))
        object.__setattr__(self, "encoder_blocks", blocks)
        object.__setattr__(self, "dataset_head", (tuple(self.dataset_head[0]), int(self.dataset_head[1])))
        object.__setattr__(self, "task_head", (tuple(self.task_head[0]), int(self.task_head[1])))
        if not blocks:
            raise ConfigError("encoder_blocks must be non-empty")
        for b in blocks:
            if len(b) != 2 or b[0] < 1 or b[1] < 1:
                raise ConfigError(f"each block must be (convs >= 1, width >= 1), got {b}")
        factor = 2 ** len(blocks)
        if h <= 0 or w <= 0 or h % factor or w % factor:
            raise ConfigError(f"input_size {self.input_size} must be positive and divisible by {factor}")
        if self.latent_channels < 1:
            raise ConfigError(f"latent_channels must be positive, got {self.latent_channels}")
        if self.skip_merge not in ("concatenate", "add"):
            raise ConfigError(f"skip_merge must be 'concatenate' or 'add', got {self.skip_merge!r}")
        if self.dataset_head[1] < 2:
            raise ConfigError(f"dataset head needs K >= 2, got {self.dataset_head[1]}")
        if self.task_head[1] != 1:
            raise ConfigError(f"task head emits a single logit, got {self.task_head[1]}")
        if self.block_style not in ("plain", "residual"):
            raise ConfigError(f"block_style must be 'plain' or 'residual', got {self.block_style!r}")

    @property
    def domain_count(self):
        return self.dataset_head[1]

    @property
    def block_widths(self):
        return tuple(w for _, w in self.encoder_blocks)

    @property
    def bottleneck_size(self):
        h, w = self.input_size
        f = 2 ** len(self.encoder_blocks)
        return (h // f, w // f)

    def to_dict(self):
        d = asdict(self)
        d["input_size"] = list(self.input_size)
        d["encoder_blocks"] = [list(b) for b in self.encoder_blocks]
        d["dataset_head"] = [list(self.dataset_head[0]), self.dataset_head[1]]
        d["task_head"] = [list(self.task_head[0]), self.task_head[1]]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_size=tuple(d["input_size"]),
            encoder_blocks=tuple(tuple(b) for b in d["encoder_blocks"]),
            latent_channels=int(d["latent_channels"]),
            skip_merge=d["skip_merge"],
            dataset_head=(tuple(d["dataset_head"][0]), int(d["dataset_head"][1])),
            task_head=(tuple(d["task_head"][0]), int(d["task_head"][1])),
            backbone_name=d["backbone_name"],
            block_style=d["block_style"],
        )


def make_model_config(backbone="vgg-mini", domain_count=2, input_size=(32, 32), **overrides):
    """Config from a registered backbone recipe plus overrides."""
    recipe = backbone_recipe(backbone)
    fields = dict(
        input_size=tuple(input_size),
        encoder_blocks=recipe["encoder_blocks"],
        block_style=recipe["block_style"],
        backbone_name=backbone,
        dataset_head=((16,), int(domain_count)),
    )
    fields.update(overrides)
    return ModelConfig(**fields)


def config_hash(config):
    """sha256 of the canonical JSON encoding; identifies checkpoints."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
