"""Building blocks for the two classifiers."""
from __future__ import annotations

import torch
from torch import nn


class ConvBlock(nn.Module):
    """conv -> batch norm -> ELU -> max pool -> dropout."""

    def __init__(self, c_in, c_out, stride, pool_kernel, pool_stride, pool_padding=0, dropout=0.3):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn = nn.BatchNorm2d(c_out)
        self.act = nn.ELU()
        self.pool = nn.MaxPool2d(pool_kernel, stride=pool_stride, padding=pool_padding)
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        return self.drop(self.pool(self.act(self.bn(self.conv(x)))))


class ResidualBlock(nn.Module):
    """Pre-activation residual block: two 3x3 convolutions plus a shortcut.

    The shortcut is the identity unless the stride or channel count changes,
    in which case it is a strided 1x1 projection. With both convolutions
    zeroed the block returns ``shortcut(x)``.
    """

    def __init__(self, c_in, c_out, stride=1):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, stride=1, padding=1)
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Conv2d(c_in, c_out, 1, stride=stride)
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        h = self.conv1(torch.relu(self.bn1(x)))
        h = self.conv2(torch.relu(self.bn2(h)))
        return self.shortcut(x) + h


class Bidirectional(nn.Module):
    """Run one recurrent layer forwards and a second over the reversed sequence.

    Returns ``(outputs, final)`` where ``outputs`` concatenates the two
    directions per time step and ``final`` concatenates the last forward state
    (after t = T) with the last backward state (after t = 1).
    """

    def __init__(self, cell: str, input_size: int, hidden_size: int):
        super().__init__()
        rnn = {"lstm": nn.LSTM, "gru": nn.GRU}[cell]
        self.fwd = rnn(input_size, hidden_size, batch_first=True)
        self.bwd = rnn(input_size, hidden_size, batch_first=True)

    def forward(self, x):
        out_f, state_f = self.fwd(x)
        out_b, state_b = self.bwd(torch.flip(x, dims=[1]))
        h_f = state_f[0] if isinstance(state_f, tuple) else state_f
        h_b = state_b[0] if isinstance(state_b, tuple) else state_b
        outputs = torch.cat([out_f, torch.flip(out_b, dims=[1])], dim=-1)
        return outputs, torch.cat([h_f[-1], h_b[-1]], dim=-1)


def to_sequence(x):
    """[B, C, F, T] feature maps -> [B, T, C*F] recurrent input."""
    b, c, f, t = x.shape
    return x.permute(0, 3, 1, 2).reshape(b, t, c * f)
