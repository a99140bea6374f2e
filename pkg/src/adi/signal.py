"""Audio ingestion: WAV reading/writing, resampling and the immutable clip type."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

CANONICAL_SR = 16000


class AudioError(Exception):
    """Base class for audio ingestion failures."""


class UnreadableFileError(AudioError):
    pass


class UnsupportedCodecError(AudioError):
    pass


class EmptyAudioError(AudioError):
    pass


class InvalidSamplesError(AudioError):
    """Raised when samples are NaN/Inf or outside [-1, 1]."""


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with values in [-1, 1].

    ``span`` is the (start_s, end_s) window of the parent clip this clip was
    cut from, if any.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""
    span: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise InvalidSamplesError(f"expected 1-D samples, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidSamplesError(f"{self.source_id}: non-finite samples")
        if x.size and np.max(np.abs(x)) > 1.0:
            raise InvalidSamplesError(f"{self.source_id}: samples outside [-1, 1]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.span is not None:
            start, end = self.span
            if not 0 <= start < end:
                raise ValueError(f"invalid span {self.span}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path) -> AudioClip:
    """Read a 16-bit integer or 32-bit float PCM WAV file as a mono clip."""
    path = Path(path)
    try:
        sr, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise UnreadableFileError(f"{path}: no such file") from exc
    except ValueError as exc:
        # scipy reports both malformed RIFF headers and unknown format tags here
        msg = str(exc)
        if "unknown wave file format" in msg.lower():
            raise UnsupportedCodecError(f"{path}: {msg}") from exc
        raise UnreadableFileError(f"{path}: {msg}") from exc
    except OSError as exc:
        raise UnreadableFileError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: unsupported sample type {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise EmptyAudioError(f"{path}: zero-length audio")
    return AudioClip(np.clip(x, -1.0, 1.0), int(sr), source_id=str(path))


def save_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), clip.sample_rate, pcm)


def resample(clip: AudioClip, target_sr: int) -> AudioClip:
    """Polyphase windowed-sinc resampling to ``target_sr``.

    Output length is ``round(len * target_sr / sample_rate)``.
    """
    if target_sr <= 0:
        raise ValueError("target_sr must be positive")
    if target_sr == clip.sample_rate:
        return clip
    g = gcd(int(target_sr), int(clip.sample_rate))
    up, down = int(target_sr) // g, int(clip.sample_rate) // g
    y = resample_poly(clip.samples, up, down)
    n_out = int(round(len(clip) * target_sr / clip.sample_rate))
    if y.size >= n_out:
        y = y[:n_out]
    else:
        y = np.pad(y, (0, n_out - y.size))
    return AudioClip(np.clip(y, -1.0, 1.0), int(target_sr), clip.source_id, clip.span)


def to_canonical(clip: AudioClip) -> AudioClip:
    return resample(clip, CANONICAL_SR)
