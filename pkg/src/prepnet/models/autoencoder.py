"""Skip-connected convolutional autoencoder: encoder E_a and decoder D_a.

The decoder mirrors the encoder's block count, upsampling where the
encoder pooled; each encoder block's pre-pool feature map is routed to
the matching decoder block and merged at that block's input.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..nn import ops
from ..nn.layers import Conv2d, prefix_params
from ..nn.tensor import Tensor


@dataclass(frozen=True)
class FeaturePyramid:
    """Per-block pre-pool feature maps kept for the skip connections."""

    features: tuple

    @property
    def depth(self):
        return len(self.features)


class BlockStack:
    """The shared VGG-style feature recipe: per block, convs+relu then a
    2x2 maxpool. 'residual' style turns every conv after the first of a
    block into a residual unit."""

    def __init__(self, config, rng, dtype=np.float32, in_channels=1):
        self.style = config.block_style
        self.blocks = []
        c = in_channels
        for m, width in config.encoder_blocks:
            convs = []
            for j in range(m):
                convs.append(Conv2d(c if j == 0 else width, width, rng, dtype=dtype))
                c = width
            self.blocks.append(convs)

    def forward(self, x):
        skips = []
        h = x
        for convs in self.blocks:
            for j, conv in enumerate(convs):
                if self.style == "residual" and j > 0:
                    h = ops.relu(ops.add(h, conv(h)))
                else:
                    h = ops.relu(conv(h))
            skips.append(h)
            h = ops.maxpool2(h)
        return h, FeaturePyramid(features=tuple(skips))

    def named_params(self):
        out = []
        for i, convs in enumerate(self.blocks):
            for j, conv in enumerate(convs):
                out.extend(prefix_params(f"blocks.{i}.convs.{j}", conv.named_params()))
        return out


class Encoder:
    """BlockStack plus a bottleneck conv down to latent_channels."""

    def __init__(self, config, rng, dtype=np.float32):
        self.stack = BlockStack(config, rng, dtype=dtype)
        self.bottleneck = Conv2d(config.block_widths[-1], config.latent_channels, rng, dtype=dtype)

    def forward(self, x):
        h, pyramid = self.stack.forward(x)
        return ops.relu(self.bottleneck(h)), pyramid

    def named_params(self):
        return self.stack.named_params() + prefix_params("bottleneck", self.bottleneck.named_params())


class Decoder:
    """Mirror of the encoder: upsample, merge the skip, then convs."""

    def __init__(self, config, rng, dtype=np.float32):
        self.merge = config.skip_merge
        widths = config.block_widths
        self.pre = Conv2d(config.latent_channels, widths[-1], rng, dtype=dtype)
        self.blocks = []
        for i in reversed(range(len(widths))):
            m = config.encoder_blocks[i][0]
            in_ch = 2 * widths[i] if self.merge == "concatenate" else widths[i]
            out_ch = widths[i - 1] if i > 0 else widths[0]
            convs = [Conv2d(in_ch, out_ch, rng, dtype=dtype)]
            convs.extend(Conv2d(out_ch, out_ch, rng, dtype=dtype) for _ in range(m - 1))
            self.blocks.append(convs)
        self.out = Conv2d(widths[0], 1, rng, dtype=dtype)

    def forward(self, latent, pyramid):
        if pyramid.depth != len(self.blocks):
            raise ValidationError(f"pyramid depth {pyramid.depth} != decoder blocks {len(self.blocks)}")
        h = ops.relu(self.pre(latent))
        for step, convs in enumerate(self.blocks):
            skip = pyramid.features[len(self.blocks) - 1 - step]
            h = ops.upsample2(h)
            h = ops.concat_channels(h, skip) if self.merge == "concatenate" else ops.add(h, skip)
            for conv in convs:
                h = ops.relu(conv(h))
        return ops.sigmoid(self.out(h))

    def named_params(self):
        out = prefix_params("pre", self.pre.named_params())
        for i, convs in enumerate(self.blocks):
            for j, conv in enumerate(convs):
                out.extend(prefix_params(f"blocks.{i}.convs.{j}", conv.named_params()))
        out.extend(prefix_params("out", self.out.named_params()))
        return out


class Autoencoder:
    def __init__(self, config, encoder, decoder, dtype=np.float32):
        self.config = config
        self.encoder = encoder
        self.decoder = decoder
        self.dtype = dtype

    def forward(self, x):
        latent, pyramid = self.encoder.forward(x)
        return self.decoder.forward(latent, pyramid)

    def named_params(self):
        return prefix_params("ea", self.encoder.named_params()) + prefix_params(
            "da", self.decoder.named_params()
        )


def build_autoencoder(config, seed):
    """Deterministically initialized (E_a, D_a) pair, as one Autoencoder."""
    dtype = np.float32
    encoder = Encoder(config, np.random.default_rng([int(seed), 0]), dtype=dtype)
    decoder = Decoder(config, np.random.default_rng([int(seed), 1]), dtype=dtype)
    return Autoencoder(config, encoder, decoder, dtype=dtype)


def batch_to_tensor(batch, config, dtype):
    """Validate a (N,H,W) or (N,1,H,W) batch against the config's input
    size and return a (N,1,H,W) Tensor."""
    arr = batch.data if isinstance(batch, Tensor) else np.asarray(batch)
    if arr.ndim == 3:
        arr = arr[:, None, :, :]
    if arr.ndim != 4 or arr.shape[1] != 1:
        raise ValidationError(f"expected (N,H,W) or (N,1,H,W) batch, got shape {arr.shape}")
    if arr.shape[2:] != tuple(config.input_size):
        raise ValidationError(f"batch spatial size {arr.shape[2:]} != input_size {config.input_size}")
    if isinstance(batch, Tensor):
        return batch if batch.data.ndim == 4 else Tensor(arr, requires_grad=batch.requires_grad)
    return Tensor(arr.astype(dtype, copy=False))


def reconstruct(autoencoder, batch):
    """Reconstruct a batch; returns an array shaped like the input."""
    squeeze = not (isinstance(batch, Tensor) and batch.ndim == 4) and np.asarray(
        batch.data if isinstance(batch, Tensor) else batch
    ).ndim == 3
    x = batch_to_tensor(batch, autoencoder.config, autoencoder.dtype)
    out = autoencoder.forward(x).data
    return out[:, 0] if squeeze else out
