"""Normalized cross-correlation (NCCF) pitch tracking.

The analysis window is short (256 samples at 16 kHz is 16 ms) while the
longest admissible period is sr / f_min = 320 samples, so each frame is
correlated against a span of ``window + max_lag`` samples centred on it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .signal import AudioClip

VOICING_THRESHOLD = 0.5
RMS_FLOOR = 1e-4


@dataclass(frozen=True)
class PitchConfig:
    f_min: float = 50.0
    f_max: float = 600.0
    window: int = 256
    hop: int = 256

    def validate(self, sample_rate: int) -> None:
        if not 0 < self.f_min < self.f_max < sample_rate / 2:
            raise ValueError(
                f"need 0 < f_min < f_max < sr/2, got {self.f_min}, {self.f_max}, sr={sample_rate}"
            )
        if self.window <= 0 or self.hop <= 0:
            raise ValueError("window and hop must be positive")


@dataclass(frozen=True)
class PitchFrame:
    time_s: float
    f0: float
    voiced: bool
    confidence: float


@dataclass
class PitchTrack:
    frames: List[PitchFrame]
    config: PitchConfig
    source_id: str = ""
    sample_rate: int = 16000

    def __len__(self):
        return len(self.frames)

    @property
    def f0(self) -> np.ndarray:
        return np.array([f.f0 for f in self.frames], dtype=np.float64)

    @property
    def voiced(self) -> np.ndarray:
        return np.array([f.voiced for f in self.frames], dtype=bool)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time_s for f in self.frames], dtype=np.float64)

    @property
    def frame_step(self) -> float:
        return self.config.hop / self.sample_rate


def _lag_range(sr: int, cfg: PitchConfig) -> Tuple[int, int]:
    lo = int(np.ceil(sr / cfg.f_max))
    hi = int(np.floor(sr / cfg.f_min))
    return lo, hi


def nccf(segment: np.ndarray, n: int, max_lag: int) -> np.ndarray:
    """NCCF of ``segment[:n]`` against ``segment[lag:lag+n]`` for lag in [0, max_lag].

    ``segment`` must hold at least ``n + max_lag`` samples.
    """
    ref = segment[:n]
    cross = np.correlate(segment[: n + max_lag], ref, mode="valid")
    sq = np.concatenate(([0.0], np.cumsum(segment[: n + max_lag] ** 2)))
    e_lag = sq[n : n + max_lag + 1] - sq[: max_lag + 1]
    e0 = e_lag[0]
    denom = np.sqrt(e0 * e_lag)
    out = np.zeros(max_lag + 1)
    ok = denom > 1e-20
    out[ok] = cross[ok] / denom[ok]
    return out


def _pick_lag(r: np.ndarray, lo: int, hi: int) -> Tuple[float, float]:
    """Return (fractional lag, peak value) of the NCCF restricted to [lo, hi].

    The shortest-lag local peak within 0.03 of the global maximum wins, which
    keeps period multiples (sub-octave errors) from beating the true period.
    """
    seg = r[lo : hi + 1]
    best = float(seg.max())
    peaks = []
    for i in range(len(seg)):
        left = seg[i - 1] if i > 0 else -np.inf
        right = seg[i + 1] if i + 1 < len(seg) else -np.inf
        if seg[i] >= left and seg[i] >= right:
            peaks.append(i)
    choice = int(np.argmax(seg))
    for i in peaks:
        if seg[i] >= best - 0.03:
            choice = i
            break
    lag = float(lo + choice)
    # parabolic refinement on the full-range NCCF
    j = lo + choice
    if 0 < j < len(r) - 1:
        a, b, c = r[j - 1], r[j], r[j + 1]
        den = a - 2 * b + c
        if den < 0:
            lag += float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))
    return lag, float(seg[choice])


def _median3_voiced(f0: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    out = f0.copy()
    n = len(f0)
    for i in np.flatnonzero(voiced):
        nb = [f0[j] for j in (i - 1, i, i + 1) if 0 <= j < n and voiced[j]]
        out[i] = float(np.median(nb))
    return out


def extract_f0(clip: AudioClip, cfg: PitchConfig = PitchConfig()) -> PitchTrack:
    """Track f0 frame by frame.

    Frames are placed every ``hop`` samples and cover ``window`` samples; the
    frame time is the window centre.  Unvoiced frames carry ``f0 = 0``.
    """
    sr = clip.sample_rate
    cfg.validate(sr)
    x = clip.samples
    if x.size < cfg.window:
        raise ValueError(f"{clip.source_id}: clip shorter than one analysis window")
    lo, hi = _lag_range(sr, cfg)
    span = cfg.window + hi
    n_frames = 1 + (x.size - cfg.window) // cfg.hop
    # centre each correlation span on its frame, shifted inward at the clip edges
    pad = (span - cfg.window) // 2
    xp = np.pad(x, (0, max(0, span - x.size)))
    last_start = xp.size - span

    times = np.empty(n_frames)
    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    conf = np.zeros(n_frames)
    for i in range(n_frames):
        start = i * cfg.hop
        times[i] = (start + cfg.window / 2) / sr
        rms = np.sqrt(np.mean(x[start : start + cfg.window] ** 2))
        s0 = min(max(start - pad, 0), last_start)
        seg = xp[s0 : s0 + span]
        r = nccf(seg, cfg.window, hi)
        lag, peak = _pick_lag(r, lo, hi)
        conf[i] = min(max(peak, 0.0), 1.0)
        if peak >= VOICING_THRESHOLD and rms >= RMS_FLOOR:
            voiced[i] = True
            f0[i] = float(np.clip(sr / lag, cfg.f_min, cfg.f_max))

    f0 = _median3_voiced(f0, voiced)
    frames = [
        PitchFrame(float(t), float(f), bool(v), float(c))
        for t, f, v, c in zip(times, f0, voiced, conf)
    ]
    return PitchTrack(frames, cfg, clip.source_id, sr)


def voiced_points(track: PitchTrack) -> List[Tuple[float, float]]:
    """The voiced (time_s, f0) pairs in time order."""
    return [(f.time_s, f.f0) for f in track.frames if f.voiced]


def dump_track(track: PitchTrack) -> str:
    lines = [
        f"{f.time_s:.6f}\t{f.f0:.4f}\t{int(f.voiced)}\t{f.confidence:.6f}" for f in track.frames
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_track(text: str, cfg: PitchConfig = PitchConfig(), source_id: str = "",
                sample_rate: int = 16000) -> PitchTrack:
    frames = []
    for line in text.splitlines():
        if not line.strip():
            continue
        t, f, v, c = line.split("\t")
        frames.append(PitchFrame(float(t), float(f), bool(int(v)), float(c)))
    return PitchTrack(frames, cfg, source_id, sample_rate)
