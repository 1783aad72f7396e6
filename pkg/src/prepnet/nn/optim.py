"""Adam with decoupled weight decay."""

import numpy as np


class AdamW:
    """Decoupled-weight-decay Adam over a fixed list of named parameters.

    Weight decay is applied to the parameters directly (not through the
    gradient) and skipped for 1-d parameters (biases).
    """

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-2):
        self.params = list(named_params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self._m = [np.zeros_like(t.data) for _, t in self.params]
        self._v = [np.zeros_like(t.data) for _, t in self.params]

    def zero_grad(self):
        for _, t in self.params:
            t.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for i, (_, p) in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay and p.data.ndim > 1:
                p.data -= (self.lr * self.weight_decay) * p.data
            m = self._m[i]
            v = self._v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
