"""CRNN baseline and the residual + bidirectional-LSTM classifier."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional

import torch
from torch import nn

from ..features import N_MELS, T_FIXED
from .layers import Bidirectional, ConvBlock, ResidualBlock, to_sequence

FC_UNITS = 1024


@dataclass
class ModelSpec:
    kind: str  # "crnn" or "resblstm"
    n_classes: int
    conv_channels: Optional[List[int]] = None
    recurrent_hidden: int = 256
    fc_units: int = FC_UNITS
    dropout_p: float = 0.3
    n_mels: int = N_MELS
    t_fixed: int = T_FIXED

    def __post_init__(self):
        self.kind = self.kind.lower().replace("-", "")
        if self.kind not in ("crnn", "resblstm"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.conv_channels is None:
            self.conv_channels = [32, 64, 128, 128] if self.kind == "crnn" else [32, 64]
        self.conv_channels = list(self.conv_channels)
        if self.fc_units != FC_UNITS:
            raise ValueError(f"fc_units is fixed at {FC_UNITS}")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")

    def to_dict(self):
        return asdict(self)


class Classifier(nn.Module):
    """Common head: embedding -> FC-1024 + ReLU -> class logits.

    ``forward`` returns logits; use :func:`adi.nn.forward` for probabilities.
    """

    def __init__(self, spec: ModelSpec, embed_dim: int):
        super().__init__()
        self.spec = spec
        self.embed_dim = embed_dim
        self.drop = nn.Dropout(spec.dropout_p)
        self.fc = nn.Linear(embed_dim, spec.fc_units)
        self.out = nn.Linear(spec.fc_units, spec.n_classes)

    def embedding(self, x):
        raise NotImplementedError

    def forward(self, x):
        e = self.embedding(x)
        return self.out(torch.relu(self.fc(self.drop(e))))


class CRNN(Classifier):
    def __init__(self, spec: ModelSpec):
        ch = spec.conv_channels
        if len(ch) != 4:
            raise ValueError("CRNN needs exactly 4 conv channel widths")
        freq = spec.n_mels // 4
        for _ in range(3):
            freq //= 2
        super().__init__(spec, spec.recurrent_hidden)
        p = spec.dropout_p
        # block 1: stride-2 conv and stride-2 pool halve both axes twice
        blocks = [ConvBlock(1, ch[0], 2, 3, 2, 1, p)]
        # blocks 2-4: stride-1 conv, pool over frequency only
        for c_in, c_out in zip(ch[:-1], ch[1:]):
            blocks.append(ConvBlock(c_in, c_out, 1, (2, 1), (2, 1), 0, p))
        self.blocks = nn.Sequential(*blocks)
        self.gru = nn.GRU(ch[-1] * freq, spec.recurrent_hidden, batch_first=True)

    def embedding(self, x):
        _, h = self.gru(to_sequence(self.blocks(x)))
        return h[-1]


class ResBLSTM(Classifier):
    def __init__(self, spec: ModelSpec):
        ch = spec.conv_channels
        if len(ch) < 1:
            raise ValueError("ResBLSTM needs at least one residual block")
        super().__init__(spec, 2 * spec.recurrent_hidden)
        blocks = [ResidualBlock(1, ch[0], stride=2)]
        for c_in, c_out in zip(ch[:-1], ch[1:]):
            blocks.append(ResidualBlock(c_in, c_out, stride=1))
        self.blocks = nn.Sequential(*blocks)
        freq = (spec.n_mels + 1) // 2
        self.blstm = Bidirectional("lstm", ch[-1] * freq, spec.recurrent_hidden)

    def embedding(self, x):
        _, final = self.blstm(to_sequence(self.blocks(x)))
        return final


def build_crnn(spec: ModelSpec, seed: int = 0) -> CRNN:
    if spec.kind != "crnn":
        raise ValueError("spec.kind must be 'crnn'")
    torch.manual_seed(seed)
    return CRNN(spec)


def build_resblstm(spec: ModelSpec, seed: int = 0) -> ResBLSTM:
    if spec.kind != "resblstm":
        raise ValueError("spec.kind must be 'resblstm'")
    torch.manual_seed(seed)
    return ResBLSTM(spec)


def build_model(spec: ModelSpec, seed: int = 0) -> Classifier:
    return (build_crnn if spec.kind == "crnn" else build_resblstm)(spec, seed)
