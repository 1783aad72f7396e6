"""Adversarial convergence detection.

The adversarial stage has converged when the dataset classifier can no
longer beat chance on held-out reconstructions. The stopper tracks how
many consecutive epochs the accuracy has sat inside a band around
chance and fires once the streak reaches the configured patience.
"""

import math

from ..errors import ValidationError


class EarlyStopper:
    def __init__(self, chance, band=0.05, patience=3):
        if not (isinstance(chance, float) and 0.0 < chance < 1.0):
            raise ValidationError(f"chance must be in (0, 1), got {chance!r}")
        if not (isinstance(band, (int, float)) and band >= 0):
            raise ValidationError(f"band must be nonnegative, got {band!r}")
        if not (isinstance(patience, int) and patience >= 1):
            raise ValidationError(f"patience must be a positive integer, got {patience!r}")
        self.chance = chance
        self.band = float(band)
        self.patience = patience
        self.streak = 0
        self.should_stop = False

    def update(self, accuracy):
        """Record one epoch's held-out accuracy; True means stop now."""
        if not (isinstance(accuracy, (int, float)) and math.isfinite(accuracy)):
            raise ValidationError(f"accuracy must be finite, got {accuracy!r}")
        if abs(accuracy - self.chance) <= self.band:
            self.streak += 1
        else:
            self.streak = 0
        self.should_stop = self.streak >= self.patience
        return self.should_stop
