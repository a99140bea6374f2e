"""Log-mel spectrogram features, fixed-length framing, normalisation and the
binary feature archive."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .signal import AudioClip

N_FFT = 512
HOP = 256
N_MELS = 128
LOG_FLOOR = 1e-10
T_FIXED = 64


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_centers(sample_rate: int, n_mels: int = N_MELS) -> np.ndarray:
    """Centre frequencies (Hz) of the triangular filters."""
    mels = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2)
    return mel_to_hz(mels)[1:-1]


def mel_filterbank(sample_rate: int, n_fft: int = N_FFT, n_mels: int = N_MELS,
                   oversample: int = 16) -> np.ndarray:
    """Triangular mel filters, shape ``(n_mels, n_fft // 2 + 1)``.

    Filter edges are equally spaced on the mel scale between 0 Hz and
    Nyquist. Each FFT bin gets the mean of the triangle over the bin's
    frequency interval rather than its value at the bin centre, so narrow
    low-frequency filters that fall between bin centres are not empty.
    """
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise ValueError("n_fft must be a power of two")
    n_bins = n_fft // 2 + 1
    if n_mels > n_bins - 1:
        raise ValueError(f"n_mels={n_mels} exceeds the {n_bins - 1} resolvable FFT bands")
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    df = sample_rate / n_fft
    offsets = (np.arange(oversample) + 0.5) / oversample - 0.5
    freqs = (np.arange(n_bins)[:, None] + offsets[None, :]) * df  # (bins, oversample)
    lower = edges[:-2, None, None]
    center = edges[1:-1, None, None]
    upper = edges[2:, None, None]
    rising = (freqs[None] - lower) / (center - lower)
    falling = (upper - freqs[None]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling)).mean(axis=2)
    empty = np.flatnonzero(fb.max(axis=1) <= 0.0)
    if empty.size:
        raise ValueError(
            f"n_mels={n_mels} too large for n_fft={n_fft} at {sample_rate} Hz: "
            f"{empty.size} empty filters (first at index {empty[0]})"
        )
    return fb


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_mels, T)
    sample_rate: int
    label: Optional[str] = None
    padded: bool = False

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


_FB_CACHE = {}


def _filterbank(sr, n_fft, n_mels):
    key = (sr, n_fft, n_mels)
    if key not in _FB_CACHE:
        _FB_CACHE[key] = mel_filterbank(sr, n_fft, n_mels)
    return _FB_CACHE[key]


def log_mel(clip: AudioClip, n_mels: int = N_MELS, n_fft: int = N_FFT, hop: int = HOP,
            label: Optional[str] = None) -> MelSpectrogram:
    """Natural-log mel energies of Hann-windowed power spectra.

    Clips shorter than one frame are zero-padded to ``n_fft`` and flagged
    with ``padded=True``.
    """
    x = clip.samples
    if x.size == 0:
        raise ValueError(f"{clip.source_id}: empty clip")
    padded = x.size < n_fft
    if padded:
        x = np.pad(x, (0, n_fft - x.size))
    n_frames = 1 + (x.size - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hanning(n_fft + 1)[:-1]
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    mel = _filterbank(clip.sample_rate, n_fft, n_mels) @ power.T
    return MelSpectrogram(np.log(np.maximum(mel, LOG_FLOOR)), clip.sample_rate, label, padded)


def pad_or_crop(spec: MelSpectrogram, t_fixed: int = T_FIXED) -> MelSpectrogram:
    """Right-pad with the log floor or centre-crop to ``t_fixed`` frames."""
    if t_fixed < 1:
        raise ValueError("t_fixed must be >= 1")
    v = spec.values
    t = v.shape[1]
    if t < t_fixed:
        fill = np.full((v.shape[0], t_fixed - t), np.log(LOG_FLOOR))
        v = np.concatenate([v, fill], axis=1)
    elif t > t_fixed:
        start = (t - t_fixed) // 2
        v = v[:, start : start + t_fixed]
    return MelSpectrogram(v, spec.sample_rate, spec.label, spec.padded)


@dataclass
class Normalizer:
    """Per-mel-bin standardisation with statistics from the training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, specs: Iterable[MelSpectrogram]) -> "Normalizer":
        cols = np.concatenate([s.values for s in specs], axis=1)
        std = cols.std(axis=1)
        return cls(cols.mean(axis=1), np.where(std > 1e-8, std, 1.0))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]


MAGIC = b"IMEL"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_archive(path, matrices: Sequence[np.ndarray], label_ids: Sequence[int]) -> None:
    """Write ``[n_mels x T]`` float32 matrices with one-byte labels."""
    if len(matrices) != len(label_ids):
        raise ValueError("one label per matrix")
    n_mels, t = (matrices[0].shape if matrices else (N_MELS, T_FIXED))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n_mels, t, len(matrices)))
        for m, lab in zip(matrices, label_ids):
            if m.shape != (n_mels, t):
                raise ValueError(f"shape {m.shape} != {(n_mels, t)}")
            if not 0 <= lab < 256:
                raise ValueError("label id must fit in u8")
            fh.write(struct.pack("<B", lab))
            fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def read_archive(path) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(values[count, n_mels, T], label_ids[count])``."""
    with open(path, "rb") as fh:
        magic, version, n_mels, t, count = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ValueError(f"{path}: not an IMEL archive")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported archive version {version}")
        rec = 1 + 4 * n_mels * t
        raw = fh.read(rec * count)
    if len(raw) != rec * count:
        raise ValueError(f"{path}: truncated archive")
    buf = np.frombuffer(raw, dtype=np.uint8).reshape(count, rec)
    labels = buf[:, 0].copy()
    values = buf[:, 1:].copy().view("<f4").reshape(count, n_mels, t)
    return values.astype(np.float32), labels
