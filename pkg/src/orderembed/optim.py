"""Adam optimizer over lists of numpy parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamConfig:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def to_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps}

    @classmethod
    def from_dict(cls, d: dict) -> "AdamConfig":
        return cls(**d)


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], t=0)


def adam_step(arrays: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, config: AdamConfig) -> None:
    """One in-place Adam update with bias correction.

    update = -lr * m_hat / (sqrt(v_hat) + eps). Raises on non-finite
    gradients instead of silently corrupting the moments.
    """
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError("parameter / gradient / state lengths differ")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient passed to adam_step")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        a -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
