"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Dict, Sequence

import torch


def numeric_grad(fn: Callable[[], torch.Tensor], tensor: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """d fn() / d tensor by central differences, perturbing ``tensor`` in place."""
    grad = torch.zeros_like(tensor)
    flat = tensor.data.view(-1)
    g = grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        plus = fn().item()
        flat[i] = orig - eps
        minus = fn().item()
        flat[i] = orig
        g[i] = (plus - minus) / (2 * eps)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor, floor: float = 1e-5) -> float:
    """max |a - b| / max(|a|, |b|, floor), elementwise.

    The floor keeps exactly-zero gradients (e.g. a conv bias cancelled by the
    following batch norm) from turning ~1e-10 differencing noise into a large
    relative error.
    """
    denom = torch.maximum(torch.maximum(a.abs(), b.abs()), torch.full_like(a, floor))
    return float(((a - b).abs() / denom).max()) if a.numel() else 0.0


def check_gradients(fn: Callable[[], torch.Tensor], tensors: Sequence[torch.Tensor],
                    eps: float = 1e-6) -> Dict[int, float]:
    """Compare autograd against finite differences for every tensor.

    ``fn`` must return a scalar and be deterministic (e.g. batch norm in
    training mode is fine, dropout is not). Returns the max relative error
    per tensor index.
    """
    for t in tensors:
        t.grad = None
    out = fn()
    grads = torch.autograd.grad(out, list(tensors), allow_unused=True)
    errors = {}
    with torch.no_grad():
        for i, (t, g) in enumerate(zip(tensors, grads)):
            if g is None:
                g = torch.zeros_like(t)
            num = numeric_grad(fn, t, eps)
            errors[i] = relative_error(g, num)
    return errors
