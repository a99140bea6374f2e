"""ADAM with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import torch

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: List[torch.Tensor] = field(default_factory=list)
    v: List[torch.Tensor] = field(default_factory=list)


def adam_step(params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor], state: AdamState,
              lr: float = 1e-3, beta1: float = BETA1, beta2: float = BETA2, eps: float = EPS):
    """One ADAM update. Returns ``(new_params, state)``; inputs are not modified."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch at parameter {i}: {tuple(p.shape)} vs {tuple(g.shape)}")
        if not torch.isfinite(g).all():
            bad = int((~torch.isfinite(g)).sum())
            raise FloatingPointError(
                f"non-finite gradient for parameter {i} {tuple(g.shape)}: {bad} bad entries"
            )
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(p - lr * m_hat / (torch.sqrt(v_hat) + eps))
    return out, state


class Adam:
    """Applies :func:`adam_step` to a module's parameters in place."""

    def __init__(self, params, lr: float = 1e-3):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    @torch.no_grad()
    def step(self):
        grads = [p.grad if p.grad is not None else torch.zeros_like(p) for p in self.params]
        new, self.state = adam_step([p.detach() for p in self.params], grads, self.state, self.lr)
        for p, n in zip(self.params, new):
            p.copy_(n)
