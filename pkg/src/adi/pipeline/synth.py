"""Synthetic pseudo-dialect corpus with distinct pitch-contour grammars.

Each utterance interleaves a few dialect-bearing phrases with short neutral
voiced bursts, all separated by pauses. A phrase is a staircase of pitch
levels whose shape depends on the dialect:

* ``RISE``: ascending motifs, phrase ends on a large rise;
* ``FALL``: descending motifs, phrase ends on a large fall;
* ``ALT``: levels alternate high/low throughout.

Neutral bursts have one to three random levels, too few to carry a
length-5 pattern. Speaker register, step sizes and durations are random, and
multi-talker babble is mixed in at a fixed SNR.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from ..signal import AudioClip, save_wav
from .manifest import Entry, write_manifest

DIALECTS = ("RISE", "FALL", "ALT")
SR = 16000


@dataclass
class SynthConfig:
    n_per_dialect: int = 120
    test_fraction: float = 0.2
    snr_db: float = 20.0
    n_babble_talkers: int = 16
    babble_pool_s: float = 60.0
    phrases: Tuple[int, int] = (2, 3)
    fillers: Tuple[int, int] = (5, 8)
    pause_s: Tuple[float, float] = (0.22, 0.40)
    step_s: Tuple[float, float] = (0.05, 0.10)
    seed: int = 0


def _motif_levels(dialect: str, rng, n_steps: int) -> List[float]:
    """Pitch levels in semitones relative to the speaker's base."""
    levels = []
    if dialect == "ALT":
        hi = rng.uniform(3.0, 5.0)
        start_high = rng.random() < 0.5
        # as many levels as a RISE/FALL phrase; a repeated level would merge
        for i in range(n_steps + 2):
            levels.append(hi if (i % 2 == 0) == start_high else 0.0)
        return levels
    direction = 1.0 if dialect == "RISE" else -1.0
    while len(levels) < n_steps:
        run = int(rng.integers(3, 5))
        step = rng.uniform(1.5, 2.5)
        base = 0.0 if direction > 0 else step * (run - 1)
        levels += [base + direction * step * j for j in range(run)]
    levels = levels[:n_steps]
    # phrase-final movement
    last = levels[-1]
    levels += [last + direction * rng.uniform(3.0, 4.0), last + direction * rng.uniform(5.5, 7.0)]
    return levels


def _render_levels(levels, base_f0, rng, cfg: SynthConfig) -> np.ndarray:
    f0 = []
    for lv in levels:
        n = int(rng.uniform(*cfg.step_s) * SR)
        f0.append(np.full(n, base_f0 * 2 ** (lv / 12.0)))
    f0 = np.concatenate(f0)
    # 10 ms glides between steps
    k = int(0.010 * SR)
    f0 = np.convolve(np.pad(f0, (k // 2, k - k // 2 - 1), mode="edge"), np.ones(k) / k, mode="valid")
    f0 *= 1.0 + 0.004 * np.sin(2 * np.pi * rng.uniform(4, 6) * np.arange(f0.size) / SR)
    x = _render_voice(f0, rng)
    ramp = int(0.02 * SR)
    env = np.ones(x.size)
    env[:ramp] = np.linspace(0, 1, ramp)
    env[-ramp:] = np.linspace(1, 0, ramp)
    return x * env


def _render_voice(f0: np.ndarray, rng, formants=None) -> np.ndarray:
    """Harmonic source with a fixed spectral tilt and two formant-like peaks."""
    phase = 2 * np.pi * np.cumsum(f0) / SR
    out = np.zeros_like(f0)
    if formants is None:
        formants = (rng.uniform(500, 900), rng.uniform(1100, 2200))
    f_max = np.max(f0) if f0.size else 100.0
    for h in range(1, int(3800 // max(f_max, 50.0)) + 1):
        fh = h * f0
        env = 1.0 / h
        for fc in formants:
            env = env + 0.8 * np.exp(-0.5 * ((fh - fc) / 150.0) ** 2)
        out += env * np.sin(h * phase)
    return out


def _phrase(dialect, rng, base_f0, cfg: SynthConfig) -> np.ndarray:
    levels = _motif_levels(dialect, rng, int(rng.integers(4, 7)))
    return _render_levels(levels, base_f0, rng, cfg)


def _filler(rng, base_f0, cfg: SynthConfig) -> np.ndarray:
    levels = rng.uniform(-3.0, 6.0, size=int(rng.integers(1, 4)))
    return _render_levels(levels, base_f0, rng, cfg)


def _babble(n: int, rng, talkers: int) -> np.ndarray:
    out = np.zeros(n)
    for _ in range(talkers):
        base = rng.uniform(90, 240)
        f0 = []
        while sum(map(len, f0)) < n:
            seg = int(rng.uniform(0.05, 0.12) * SR)
            f0.append(np.full(seg, base * 2 ** (rng.uniform(-4, 6) / 12.0)))
        f0 = np.concatenate(f0)[:n]
        voice = _render_voice(f0, rng)
        # syllable-rate amplitude modulation
        am = 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(3, 5) * np.arange(n) / SR + rng.uniform(0, 6.3))
        out += voice * am
    return out


def babble_pool(cfg: SynthConfig) -> np.ndarray:
    """A long babble recording; utterances take random excerpts from it."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBAB]))
    return _babble(int(cfg.babble_pool_s * SR), rng, cfg.n_babble_talkers)


def synth_utterance(dialect: str, rng, cfg: SynthConfig = SynthConfig(),
                    pool: np.ndarray = None) -> np.ndarray:
    """One utterance mixed with babble at ``cfg.snr_db`` (speech power over the
    whole utterance, pauses included)."""
    if pool is None:
        pool = babble_pool(cfg)
    base_f0 = rng.uniform(95.0, 200.0)
    n_phrases = int(rng.integers(cfg.phrases[0], cfg.phrases[1] + 1))
    n_fillers = int(rng.integers(cfg.fillers[0], cfg.fillers[1] + 1))
    kinds = rng.permutation([True] * n_phrases + [False] * n_fillers)
    parts = [np.zeros(int(rng.uniform(0.1, 0.2) * SR))]
    for is_phrase in kinds:
        if is_phrase:
            parts.append(_phrase(dialect, rng, base_f0, cfg))
        else:
            parts.append(_filler(rng, base_f0, cfg))
        parts.append(np.zeros(int(rng.uniform(*cfg.pause_s) * SR)))
    speech = np.concatenate(parts)
    if speech.size > pool.size:
        raise ValueError("babble pool shorter than the utterance")
    start = int(rng.integers(0, pool.size - speech.size + 1))
    babble = pool[start : start + speech.size].copy()
    p_s = np.mean(speech ** 2)
    p_n = np.mean(babble ** 2)
    babble *= np.sqrt(p_s / (p_n * 10 ** (cfg.snr_db / 10.0)))
    mix = speech + babble
    return 0.5 * mix / np.max(np.abs(mix))


def generate_corpus(out_dir, cfg: SynthConfig = SynthConfig()) -> Path:
    """Write WAVs and ``manifest.tsv`` under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(DIALECTS))
    entries = []
    n_test = int(round(cfg.test_fraction * cfg.n_per_dialect))
    pool = babble_pool(cfg)
    for dialect, ss in zip(DIALECTS, seeds):
        rng = np.random.default_rng(ss)
        for i in range(cfg.n_per_dialect):
            x = synth_utterance(dialect, rng, cfg, pool)
            rel = Path("wav") / f"{dialect.lower()}_{i:03d}.wav"
            save_wav(out_dir / rel, AudioClip(x, SR, rel.stem))
            split = "test" if i >= cfg.n_per_dialect - n_test else "train"
            entries.append(Entry(rel, dialect, split))
    manifest = out_dir / "manifest.tsv"
    write_manifest(manifest, entries)
    return manifest
