"""Training objectives: reconstruction, the two classification losses,
and the generator-side fooling objective, plus their weighted combination.

Each loss accepts either a plain ndarray prediction (returns a float) or a
:class:`~prepnet.nn.Tensor` on the tape (returns a scalar Tensor), so the
same definitions serve training, evaluation, and the finite-difference
gradient checks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .nn.tensor import Tensor, make_op

EPS = 1e-7  # probability clamp before logs


@dataclass(frozen=True)
class LossWeights:
    """Combination coefficients; unit weights with w_fool inactive
    reproduce the plain three-term sum."""

    w_rec: float = 1.0
    w_pseu: float = 1.0
    w_covid: float = 1.0
    w_fool: float = 1.0

    def __post_init__(self):
        for name in ("w_rec", "w_pseu", "w_covid", "w_fool"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    rec: float = 0.0
    pseu: float = 0.0
    covid: float = 0.0
    fool: float = 0.0
    total: float = 0.0

    def to_dict(self):
        return {"rec": self.rec, "pseu": self.pseu, "covid": self.covid, "fool": self.fool, "total": self.total}


def loss_total(parts, weights=LossWeights()):
    """Weighted sum of the four terms in a fixed left-to-right order."""
    vals = (parts.rec, parts.pseu, parts.covid, parts.fool)
    if not all(np.isfinite(v) for v in vals):
        raise ValidationError(f"non-finite loss parts: {vals}")
    return (
        weights.w_rec * parts.rec
        + weights.w_pseu * parts.pseu
        + weights.w_covid * parts.covid
        + weights.w_fool * parts.fool
    )


def make_breakdown(rec=0.0, pseu=0.0, covid=0.0, fool=0.0, weights=LossWeights()):
    parts = LossBreakdown(rec=float(rec), pseu=float(pseu), covid=float(covid), fool=float(fool))
    return LossBreakdown(rec=parts.rec, pseu=parts.pseu, covid=parts.covid, fool=parts.fool,
                         total=loss_total(parts, weights))


def _maybe_item(t, tensor_in):
    return t if tensor_in else t.item()


def loss_rec(x, x_hat, reduction="mean"):
    """Squared reconstruction error.

    'sum' is the raw summed squared error over batch and pixels; 'mean'
    (the training default) divides by batch * pixels.
    """
    if reduction not in ("sum", "mean"):
        raise ValidationError(f"unknown reduction {reduction!r}")
    tensor_in = isinstance(x_hat, Tensor)
    pred = x_hat if tensor_in else Tensor(np.asarray(x_hat))
    target = x.data if isinstance(x, Tensor) else np.asarray(x)
    if target.shape != pred.data.shape:
        raise ValidationError(f"shape mismatch: target {target.shape} vs prediction {pred.data.shape}")
    diff = pred.data - target
    count = diff.size if reduction == "mean" else 1
    val = np.asarray((diff * diff).sum() / count if reduction == "mean" else (diff * diff).sum())

    def backward(g):
        if pred.requires_grad:
            pred.accumulate_grad(g * (2.0 / count) * diff)

    return _maybe_item(make_op(val, (pred,), backward), tensor_in)


def loss_covid(y, y_hat):
    """Mean binary cross-entropy on probability predictions."""
    tensor_in = isinstance(y_hat, Tensor)
    pred = y_hat if tensor_in else Tensor(np.asarray(y_hat))
    labels = np.asarray(y)
    if labels.shape != pred.data.shape:
        raise ValidationError(f"shape mismatch: labels {labels.shape} vs predictions {pred.data.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("task labels must be 0 or 1")
    labels = labels.astype(pred.data.dtype)
    n = max(labels.size, 1)
    pc = np.clip(pred.data, EPS, 1.0 - EPS)
    val = np.asarray(-(labels * np.log(pc) + (1.0 - labels) * np.log(1.0 - pc)).sum() / n)

    def backward(g):
        if pred.requires_grad:
            inside = (pred.data > EPS) & (pred.data < 1.0 - EPS)
            d = (pc - labels) / (pc * (1.0 - pc)) / n
            pred.accumulate_grad(g * np.where(inside, d, d.dtype.type(0)))

    return _maybe_item(make_op(val, (pred,), backward), tensor_in)


def _log_softmax(z):
    m = z.max(axis=1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def loss_pseu(p, logits):
    """Mean categorical cross-entropy of K-way logits against integer labels."""
    tensor_in = isinstance(logits, Tensor)
    pred = logits if tensor_in else Tensor(np.asarray(logits))
    labels = np.asarray(p)
    if pred.data.ndim != 2:
        raise ValidationError(f"logits must be (N, K), got shape {pred.data.shape}")
    n, k = pred.data.shape
    if labels.shape != (n,):
        raise ValidationError(f"labels must be ({n},), got {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValidationError(f"dataset labels must lie in [0, {k})")
    labels = labels.astype(np.int64)
    logp = _log_softmax(pred.data)
    val = np.asarray(-logp[np.arange(n), labels].sum() / n)

    def backward(g):
        if pred.requires_grad:
            soft = np.exp(logp)
            soft[np.arange(n), labels] -= 1.0
            pred.accumulate_grad(g * soft / n)

    return _maybe_item(make_op(val, (pred,), backward), tensor_in)


def loss_fool(logits, k=None):
    """Cross-entropy between the uniform distribution and softmax(logits).

    Minimized (value ln K) exactly when predictions are uniform; this is
    the objective the reconstruction branch minimizes to erase
    dataset-of-origin evidence.
    """
    tensor_in = isinstance(logits, Tensor)
    pred = logits if tensor_in else Tensor(np.asarray(logits))
    if pred.data.ndim != 2:
        raise ValidationError(f"logits must be (N, K), got shape {pred.data.shape}")
    n, width = pred.data.shape
    if k is None:
        k = width
    if k != width:
        raise ValidationError(f"k={k} does not match logits width {width}")
    if k < 2:
        raise ValidationError("fooling objective needs at least 2 classes")
    logp = _log_softmax(pred.data)
    val = np.asarray(-logp.sum() / (k * n))

    def backward(g):
        if pred.requires_grad:
            pred.accumulate_grad(g * (np.exp(logp) - 1.0 / k) / n)

    return _maybe_item(make_op(val, (pred,), backward), tensor_in)
