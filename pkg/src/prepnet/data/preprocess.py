"""Fixed preprocessing: bilinear resize, cdf-based histogram
equalization, and affine normalization."""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: tuple = (32, 32)
    equalize: bool = True
    # single-channel reduction of the usual ImageNet statistics; a
    # documented default, not ground truth
    norm_mean: float = 0.449
    norm_std: float = 0.226

    def __post_init__(self):
        h, w = self.target_size
        if not (isinstance(h, int) and isinstance(w, int) and h > 0 and w > 0):
            raise ValidationError(f"target_size must be positive integers, got {self.target_size}")
        if not self.norm_std > 0:
            raise ValidationError(f"norm_std must be positive, got {self.norm_std}")

    def to_dict(self):
        return {
            "target_size": list(self.target_size),
            "equalize": self.equalize,
            "norm_mean": self.norm_mean,
            "norm_std": self.norm_std,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "target_size" in d:
            d["target_size"] = tuple(int(v) for v in d["target_size"])
        return cls(**d)


def _check_unit_range(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {image.shape}")
    if not np.isfinite(image).all():
        raise ValidationError("image contains non-finite values")
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise ValidationError("pixel values must lie in [0,1]")
    return image


def equalize_histogram(image, levels=256):
    """Classic histogram equalization on the quantized image.

    h(v) = round((cdf(v) - cdf_min) / (N - cdf_min) * (levels-1)) / (levels-1).
    Monotone non-decreasing by construction. A constant image makes the
    denominator zero, so it is returned unchanged.
    """
    image = _check_unit_range(image)
    if levels < 2:
        raise ValidationError(f"levels must be >= 2, got {levels}")
    q = np.round(image * (levels - 1)).astype(np.int64)
    hist = np.bincount(q.reshape(-1), minlength=levels)
    cdf = np.cumsum(hist)
    n_pix = image.size
    cdf_min = cdf[q.min()]
    if cdf_min == n_pix:  # single occupied level
        return image.copy()
    mapping = np.round((cdf - cdf_min) / (n_pix - cdf_min) * (levels - 1)) / (levels - 1)
    return mapping[q]


def resize_bilinear(image, target_size):
    """Bilinear resample with half-pixel centers; exact identity when the
    size is unchanged."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {image.shape}")
    th, tw = target_size
    if th <= 0 or tw <= 0:
        raise ValidationError(f"target_size must be positive, got {target_size}")
    h, w = image.shape
    if (h, w) == (th, tw):
        return image.copy()

    def axis_coords(n_src, n_dst):
        pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_src - 1)
        frac = pos - lo
        return lo, hi, frac

    ylo, yhi, fy = axis_coords(h, th)
    xlo, xhi, fx = axis_coords(w, tw)
    fy = fy[:, None]
    fx = fx[None, :]
    top = image[ylo][:, xlo] * (1 - fx) + image[ylo][:, xhi] * fx
    bot = image[yhi][:, xlo] * (1 - fx) + image[yhi][:, xhi] * fx
    return top * (1 - fy) + bot * fy


def preprocess_image(image, config):
    """Resize, optionally equalize, then normalize to (x - mean) / std."""
    image = _check_unit_range(image)
    out = resize_bilinear(image, config.target_size)
    if config.equalize:
        out = equalize_histogram(out)
    return (out - config.norm_mean) / config.norm_std
