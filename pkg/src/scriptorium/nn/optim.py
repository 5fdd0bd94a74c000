"""AdamW with decoupled weight decay, and the WER-plateau LR schedule."""

from __future__ import annotations

import numpy as np


class AdamW:
    """theta <- theta - lr*wd*theta - lr*m_hat/(sqrt(v_hat)+eps)."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float = 1e-3,
        weight_decay: float = 1e-2,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for key, theta in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / bc1
            v_hat = v / bc2
            theta -= self.lr * self.weight_decay * theta
            theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class PlateauScheduler:
    """Divide the LR by 3 after `patience` epochs without metric improvement.

    The first observation initializes the best value; strict decreases count
    as improvement.  The LR never drops below `min_lr`.
    """

    def __init__(self, lr: float, factor: float = 1.0 / 3.0, patience: int = 10, min_lr: float = 1e-5):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best: float | None = None
        self.stagnant = 0

    def step(self, metric: float) -> float:
        if self.best is None or metric < self.best:
            self.best = metric
            self.stagnant = 0
        else:
            self.stagnant += 1
            if self.stagnant >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.stagnant = 0
        return self.lr
