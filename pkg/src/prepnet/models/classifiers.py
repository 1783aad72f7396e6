"""Dataset classifier E_t and task classifier E_c.

Both reuse the encoder block recipe (with their own parameters), then
global average pooling and a small MLP head. Input normalization is an
affine constant baked into the forward pass, so both classifiers consume
the same [0,1]-valued images the autoencoder produces.
"""

import numpy as np

from ..errors import ValidationError
from ..nn import ops
from ..nn.layers import Linear, prefix_params
from .autoencoder import BlockStack, batch_to_tensor

NORM_MEAN = 0.449  # single-channel reduction of common pretraining stats
NORM_STD = 0.226


class ConvClassifier:
    def __init__(self, config, head, rng, dtype=np.float32, norm_mean=NORM_MEAN, norm_std=NORM_STD):
        hidden, out_dim = head
        self.config = config
        self.dtype = dtype
        self.scale = 1.0 / norm_std
        self.shift = -norm_mean / norm_std
        self.stack = BlockStack(config, rng, dtype=dtype)
        self.head = []
        d = config.block_widths[-1]
        for width in hidden:
            self.head.append(Linear(d, width, rng, dtype=dtype))
            d = width
        self.head.append(Linear(d, out_dim, rng, dtype=dtype))

    def forward(self, x):
        h = ops.affine_const(x, self.scale, self.shift)
        h, _ = self.stack.forward(h)
        h = ops.global_avg_pool(h)
        for layer in self.head[:-1]:
            h = ops.relu(layer(h))
        return self.head[-1](h)

    def named_params(self):
        out = self.stack.named_params()
        for i, layer in enumerate(self.head):
            out.extend(prefix_params(f"head.{i}", layer.named_params()))
        return out


def build_dataset_classifier(config, seed, norm_mean=NORM_MEAN, norm_std=NORM_STD):
    """K-way classifier over dataset-of-origin pseudo-labels."""
    return ConvClassifier(config, config.dataset_head, np.random.default_rng([int(seed), 2]),
                          norm_mean=norm_mean, norm_std=norm_std)


def build_task_classifier(config, seed, norm_mean=NORM_MEAN, norm_std=NORM_STD):
    """Single-logit binary task classifier."""
    return ConvClassifier(config, config.task_head, np.random.default_rng([int(seed), 3]),
                          norm_mean=norm_mean, norm_std=norm_std)


def classify_dataset(model, batch):
    """K-way logits for a batch, as a plain (N, K) array."""
    x = batch_to_tensor(batch, model.config, model.dtype)
    logits = model.forward(x).data
    if not np.isfinite(logits).all():
        raise ValidationError("non-finite logits")
    return logits


def classify_task(model, batch):
    """Task probabilities in (0,1), shape (N,)."""
    x = batch_to_tensor(batch, model.config, model.dtype)
    logit = model.forward(x)
    return ops.sigmoid(logit).data[:, 0]
