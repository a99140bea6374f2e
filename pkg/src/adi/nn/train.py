"""Loss, forward/backward helpers, the training loop and embeddings."""
from __future__ import annotations

import contextlib
import copy
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .models import Classifier
from .optim import Adam

log = logging.getLogger(__name__)

BATCH_GRID = (32, 40, 80, 128)
PATIENCE_GRID = (2, 5)
PROB_FLOOR = 1e-12


@contextlib.contextmanager
def _flush_denormals():
    # Vanishing LSTM gradients drift into subnormal floats, which made the CPU
    # backward pass up to 5x slower by the end of training.
    torch.set_flush_denormal(True)
    try:
        yield
    finally:
        torch.set_flush_denormal(False)


@dataclass
class TrainConfig:
    batch_size: int = 128
    epochs: int = 15
    early_stop_patience: int = 2
    learning_rate: float = 1e-3
    seed: int = 0
    allow_off_grid: bool = False

    def __post_init__(self):
        if not self.allow_off_grid:
            if self.batch_size not in BATCH_GRID:
                raise ValueError(f"batch_size must be one of {BATCH_GRID} (or set allow_off_grid)")
            if self.early_stop_patience not in PATIENCE_GRID:
                raise ValueError(f"patience must be one of {PATIENCE_GRID} (or set allow_off_grid)")
        if self.epochs < 0 or self.batch_size <= 0 or self.early_stop_patience <= 0:
            raise ValueError("epochs >= 0, batch_size > 0 and patience > 0 required")

    @classmethod
    def crnn_default(cls, seed: int = 0):
        return cls(batch_size=80, epochs=20, early_stop_patience=5, seed=seed)

    @classmethod
    def resblstm_default(cls, seed: int = 0):
        return cls(batch_size=128, epochs=15, early_stop_patience=2, seed=seed)

    @classmethod
    def for_model(cls, kind: str, seed: int = 0):
        return cls.crnn_default(seed) if kind == "crnn" else cls.resblstm_default(seed)


def cross_entropy(y_true, y_pred) -> float:
    """``-sum(y * log(y_hat))`` averaged over rows.

    ``y_true`` is a one-hot matrix/vector or integer class indices;
    ``y_pred`` holds probabilities, clamped to [1e-12, 1].
    """
    p_raw = np.asarray(y_pred, dtype=np.float64)
    p = np.atleast_2d(p_raw)
    y = np.asarray(y_true)
    # class indices: a scalar for one prediction, or a vector for a matrix of them
    if y.ndim == p_raw.ndim - 1:
        idx = np.atleast_1d(y).astype(int)
        if idx.size != p.shape[0] or np.any(idx < 0) or np.any(idx >= p.shape[1]):
            raise ValueError("class index out of range or length mismatch")
        y = np.eye(p.shape[1])[idx]
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape != p.shape:
        raise ValueError(f"shape mismatch: y {y.shape} vs y_hat {p.shape}")
    p = np.clip(p, PROB_FLOOR, 1.0)
    return float(np.mean(-np.sum(y * np.log(p), axis=1)))


def cross_entropy_logits(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy from logits; gradient w.r.t. logits is (softmax - onehot) / B."""
    return -(F.log_softmax(logits, dim=1).gather(1, target[:, None])).mean()


def _check_input(model: Classifier, batch: torch.Tensor):
    spec = model.spec
    if batch.dim() != 4 or batch.shape[1] != 1 or batch.shape[2] != spec.n_mels:
        raise ValueError(f"expected [B, 1, {spec.n_mels}, T], got {tuple(batch.shape)}")
    if batch.shape[3] != spec.t_fixed:
        raise ValueError(f"model expects T={spec.t_fixed}, got {batch.shape[3]}")
    if not torch.isfinite(batch).all():
        raise ValueError("non-finite input")


def forward(model: Classifier, batch: torch.Tensor) -> torch.Tensor:
    """Class probabilities ``[B, n_classes]``.

    In training mode the logits are kept so that :func:`backward` can
    propagate a gradient through them.
    """
    _check_input(model, batch)
    logits = model(batch)
    if model.training:
        model._pending = logits
    return torch.softmax(logits, dim=1)


def backward(model: Classifier, loss_grad: torch.Tensor) -> Dict[str, torch.Tensor]:
    """Back-propagate ``loss_grad`` (d loss / d logits of the last training
    forward) and return the parameter gradients by name."""
    logits = getattr(model, "_pending", None)
    if logits is None:
        raise RuntimeError("backward called without a preceding training-mode forward")
    model._pending = None
    logits.backward(loss_grad)
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
        grads[name] = g
    return grads


@torch.no_grad()
def predict_proba(model: Classifier, x: torch.Tensor, batch_size: int = 256) -> torch.Tensor:
    was = model.training
    model.eval()
    out = [forward(model, x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    model.train(was)
    if not out:
        return torch.zeros(0, model.spec.n_classes)
    return torch.cat(out)


def accuracy(model: Classifier, x: torch.Tensor, y: torch.Tensor) -> float:
    if len(x) == 0:
        return 0.0
    return float((predict_proba(model, x).argmax(1) == y).float().mean())


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float


def train(model: Classifier, train_set: Tuple[torch.Tensor, torch.Tensor],
          val_set: Tuple[torch.Tensor, torch.Tensor], cfg: TrainConfig,
          callback=None) -> Tuple[Classifier, List[EpochRecord]]:
    """Mini-batch ADAM training with early stopping on validation accuracy.

    The returned model holds the parameters of the best validation epoch.
    """
    x_tr, y_tr = train_set
    x_va, y_va = val_set
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("empty train or validation split")
    if torch.unique(y_tr).numel() < 2:
        raise ValueError("training data contains a single class")
    history: List[EpochRecord] = []
    if cfg.epochs == 0:
        return model, history

    with _flush_denormals():
        torch.manual_seed(cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        opt = Adam(model.parameters(), lr=cfg.learning_rate)
        best_acc = -1.0
        best_state = copy.deepcopy(model.state_dict())
        stale = 0
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            model.train()
            order = torch.from_numpy(rng.permutation(len(x_tr)))
            total, correct, seen = 0.0, 0, 0
            for i in range(0, len(order), cfg.batch_size):
                idx = order[i : i + cfg.batch_size]
                if len(idx) < 2:
                    continue  # batch norm needs more than one sample
                xb, yb = x_tr[idx], y_tr[idx]
                opt.zero_grad()
                probs = forward(model, xb)
                onehot = F.one_hot(yb, probs.shape[1]).to(probs.dtype)
                # d(mean CE)/d logits = (softmax - onehot) / B
                backward(model, (probs.detach() - onehot) / len(idx))
                opt.step()
                total += float(-torch.log(probs.detach().gather(1, yb[:, None]).clamp_min(PROB_FLOOR)).sum())
                correct += int((probs.argmax(1) == yb).sum())
                seen += len(idx)
            p_va = predict_proba(model, x_va)
            val_loss = cross_entropy(y_va.numpy(), p_va.numpy())
            val_acc = float((p_va.argmax(1) == y_va).float().mean())
            rec = EpochRecord(epoch, total / max(seen, 1), correct / max(seen, 1), val_loss, val_acc,
                              time.perf_counter() - t0)
            history.append(rec)
            log.info("epoch %d loss %.4f acc %.3f val_loss %.4f val_acc %.3f (%.1fs)", epoch,
                     rec.train_loss, rec.train_acc, val_loss, val_acc, rec.seconds)
            if callback is not None:
                callback(rec)
            if val_acc > best_acc:
                best_acc = val_acc
                best_state = copy.deepcopy(model.state_dict())
                stale = 0
            else:
                stale += 1
                if stale >= cfg.early_stop_patience:
                    break
    model.load_state_dict(best_state)
    model.eval()
    return model, history


@torch.no_grad()
def embed(model: Classifier, x: torch.Tensor) -> np.ndarray:
    """Fixed-length embeddings (the recurrent summary before the FC head)."""
    was = model.training
    model.eval()
    if x.dim() == 3:
        x = x[:, None]
    _check_input(model, x)
    e = model.embedding(x).numpy()
    model.train(was)
    return e


def compare_embeddings(e1, e2, theta: float) -> bool:
    """True when the Euclidean distance between ``e1`` and ``e2`` is at most ``theta``."""
    a = np.asarray(e1, dtype=np.float64)
    b = np.asarray(e2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    return bool(np.linalg.norm(a - b) <= theta)
