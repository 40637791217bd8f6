"""Adam optimizer."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("adam: lr must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("adam: betas must lie in [0, 1)")


def adam_step(param, m, v, t, cfg: AdamConfig):
    """One Adam update in place; moment buffers are updated even at lr=0."""
    g = param.grad
    if g is None:
        return
    m *= cfg.beta1
    m += (1.0 - cfg.beta1) * g
    v *= cfg.beta2
    v += (1.0 - cfg.beta2) * (g * g)
    mhat = m / (1.0 - cfg.beta1 ** t)
    vhat = v / (1.0 - cfg.beta2 ** t)
    param.data -= (cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)).astype(param.data.dtype)


class Adam:
    def __init__(self, params, cfg: AdamConfig | None = None):
        self.params = list(params)
        self.cfg = cfg or AdamConfig()
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    @property
    def lr(self):
        return self.cfg.lr

    def set_lr(self, lr):
        self.cfg.lr = lr

    def step(self):
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            adam_step(p, m, v, self.t, self.cfg)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
