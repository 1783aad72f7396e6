"""Backbone registry: named block recipes the config builder expands.

All recipes share the same shape contract (each block halves the spatial
size), so swapping backbones never changes downstream plumbing.
"""

from ..errors import ConfigError

_REGISTRY = {
    # 3 blocks of single conv+relu, widths 8/16/32
    "vgg-mini": {"encoder_blocks": ((1, 8), (1, 16), (1, 32)), "block_style": "plain"},
    # 2-block variant for the smallest inputs
    "vgg-tiny": {"encoder_blocks": ((1, 8), (1, 16)), "block_style": "plain"},
    # width-change conv followed by a residual unit per block
    "resnet-mini": {"encoder_blocks": ((2, 8), (2, 16), (2, 32)), "block_style": "residual"},
}


def backbone_names():
    return tuple(sorted(_REGISTRY))


def backbone_recipe(name):
    if name not in _REGISTRY:
        raise ConfigError(f"unknown backbone {name!r}; registered: {backbone_names()}")
    return dict(_REGISTRY[name])


def register_backbone(name, encoder_blocks, block_style="plain"):
    """Add a recipe; later make_model_config(backbone=name) picks it up."""
    if name in _REGISTRY:
        raise ConfigError(f"backbone {name!r} already registered")
    _REGISTRY[name] = {
        "encoder_blocks": tuple(tuple(b) for b in encoder_blocks),
        "block_style": block_style,
    }
