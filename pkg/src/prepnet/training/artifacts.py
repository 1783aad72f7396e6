"""Outlier screening over per-sample losses.

Samples whose loss sits far above the batch statistics usually point at
corrupt inputs (truncated files, wrong modality, empty frames). The
rule is intentionally blunt: flag anything strictly above
mean + multiplier * stddev.
"""

import math
import warnings

import numpy as np

from ..errors import ValidationError


def flag_artifacts(losses, multiplier=3.0):
    """Return indices of losses strictly above mean + multiplier * stddev.

    The standard deviation is the population form (ddof=0). A single
    sample has no spread to estimate, so nothing is flagged and a
    warning is issued instead.
    """
    arr = np.asarray(losses, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"losses must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("losses must be finite")
    if not (isinstance(multiplier, (int, float)) and math.isfinite(multiplier) and multiplier >= 0):
        raise ValidationError(f"multiplier must be finite and nonnegative, got {multiplier!r}")
    if arr.size == 1:
        warnings.warn("flag_artifacts: single sample, spread is undefined; flagging nothing",
                      stacklevel=2)
        return np.array([], dtype=np.intp)
    threshold = arr.mean() + multiplier * arr.std()
    return np.nonzero(arr > threshold)[0]
