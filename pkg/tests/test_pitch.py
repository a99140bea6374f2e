import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import sawtooth

from adi.pitch import (PitchConfig, PitchFrame, PitchTrack, dump_track, extract_f0, parse_track,
                       voiced_points)
from adi.signal import AudioClip

SR = 16000


def clip_of(x):
    return AudioClip(np.asarray(x, dtype=float), SR)


def sine(f, dur=1.0, amp=0.5):
    return amp * np.sin(2 * np.pi * f * np.arange(int(SR * dur)) / SR)


def brute_force_period(frame, lo, hi):
    """Shortest lag that is a local peak of the normalized autocorrelation
    within 5% of its maximum, by exhaustive search (multiples of the true
    period score about as high, so the plain argmax is ambiguous)."""
    r = {}
    for lag in range(lo - 1, hi + 2):
        a, b = frame[:-lag], frame[lag:]
        r[lag] = a @ b / np.sqrt((a @ a) * (b @ b) + 1e-12)
    top = max(r[l] for l in range(lo, hi + 1))
    for lag in range(lo, hi + 1):
        if r[lag] >= r[lag - 1] and r[lag] >= r[lag + 1] and r[lag] >= 0.95 * top:
            return lag


def test_sine_220():
    track = extract_f0(clip_of(sine(220)))
    f0 = track.f0
    assert track.voiced.mean() >= 0.95
    assert np.all(np.abs(f0[track.voiced] - 220) <= 0.05 * 220)
    # autocorrelation oracle agrees on the period
    lag = brute_force_period(sine(220)[:2048], SR // 600, SR // 50)
    assert SR / lag == pytest.approx(220, rel=0.05)


def test_silence_unvoiced():
    track = extract_f0(clip_of(np.zeros(SR)))
    assert not track.voiced.any()
    assert np.all(track.f0 == 0)


def test_sawtooth_no_octave_error():
    x = 0.4 * sawtooth(2 * np.pi * 120 * np.arange(SR) / SR)
    track = extract_f0(clip_of(x))
    v = track.f0[track.voiced]
    assert v.size > 0.9 * len(track)
    assert np.all(np.abs(v - 120) <= 6)


def test_frame_times_and_range():
    track = extract_f0(clip_of(sine(300)))
    t = track.times
    assert np.allclose(np.diff(t), 256 / SR)
    assert np.all((track.f0[track.voiced] >= 50) & (track.f0[track.voiced] <= 600))


def test_errors():
    with pytest.raises(ValueError):
        extract_f0(clip_of(np.zeros(100)))
    with pytest.raises(ValueError):
        extract_f0(clip_of(sine(100)), PitchConfig(f_min=300, f_max=200))


def test_voiced_points_filter():
    cfg = PitchConfig()
    frames = [PitchFrame(0.008, 100.0, True, 0.9), PitchFrame(0.024, 0.0, False, 0.1),
              PitchFrame(0.040, 110.0, True, 0.8)]
    track = PitchTrack(frames, cfg)
    assert voiced_points(track) == [(0.008, 100.0), (0.040, 110.0)]
    assert voiced_points(extract_f0(clip_of(np.zeros(SR)))) == []


def test_voiced_points_of_sine_cover_track():
    track = extract_f0(clip_of(sine(220)))
    assert len(voiced_points(track)) >= 0.95 * len(track)


def test_dump_parse_roundtrip():
    track = extract_f0(clip_of(sine(150, 0.3)))
    back = parse_track(dump_track(track))
    assert np.allclose(back.f0, track.f0, atol=1e-4)
    assert np.array_equal(back.voiced, track.voiced)


def test_deterministic():
    x = sine(180) + 0.1 * np.random.default_rng(1).standard_normal(SR)
    x = np.clip(x, -1, 1)
    a, b = extract_f0(clip_of(x)), extract_f0(clip_of(x))
    assert np.array_equal(a.f0, b.f0) and np.array_equal(a.voiced, b.voiced)


@settings(max_examples=15, deadline=None)
@given(st.floats(60, 290))
def test_octave_equivariance(f):
    lo = extract_f0(clip_of(sine(f, 0.5)))
    hi = extract_f0(clip_of(sine(2 * f, 0.5)))
    ratio = np.median(hi.f0[hi.voiced]) / np.median(lo.f0[lo.voiced])
    assert ratio == pytest.approx(2.0, rel=0.05)
