import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adi.contour import (ClusterCountWarning, Contour, Segment, approximate_contour,
                         contours_from_track, format_contour, kmeans_1d, optimal_partition,
                         parse_contour)
from adi.pitch import PitchConfig, PitchFrame, PitchTrack
from oracles import contiguous_partition_optimum

STEP = 256 / 16000


def track_from(f0s, voiced=None):
    voiced = [f > 0 for f in f0s] if voiced is None else voiced
    frames = [PitchFrame((i + 0.5) * STEP, float(f) if v else 0.0, bool(v), 1.0)
              for i, (f, v) in enumerate(zip(f0s, voiced))]
    return PitchTrack(frames, PitchConfig(), "utt")


values_st = st.lists(st.floats(50, 600, allow_nan=False), min_size=1, max_size=40)


def test_k1_is_mean():
    x = [3.0, 5.0, 10.0]
    c = kmeans_1d(x, 1)
    assert c.centroids[0] == pytest.approx(6.0)


def test_two_clusters_example():
    c = kmeans_1d([1, 2, 10, 11], 2)
    assert np.allclose(c.centroids, [1.5, 10.5])
    assert c.assignment.tolist() == [0, 0, 1, 1]


def test_k_equals_n_zero_variance():
    c = kmeans_1d([4.0, 1.0, 9.0, 7.0], 4)
    assert c.inertia == pytest.approx(0.0)


def test_k_reduced_with_warning():
    with pytest.warns(ClusterCountWarning):
        c = kmeans_1d([1.0, 1.0, 2.0], 3)
    assert c.k == 2


def test_k_zero():
    with pytest.raises(ValueError):
        kmeans_1d([1.0], 0)


def test_ties_go_to_lower_centroid():
    # 5 sits exactly between the seeds of two clusters only if the centroids are 4 and 6
    c = kmeans_1d([3.0, 4.0, 5.0, 5.0, 6.0, 7.0], 2, polish=False)
    mid = (c.centroids[0] + c.centroids[1]) / 2
    below = np.asarray([3.0, 4.0, 5.0, 5.0, 6.0, 7.0]) <= mid
    assert np.array_equal(c.assignment == 0, below)


@settings(max_examples=60, deadline=None)
@given(values_st, st.integers(1, 6))
def test_kmeans_invariants(values, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterCountWarning)
        c = kmeans_1d(values, k)
    x = np.asarray(values)
    assert np.all(np.diff(c.centroids) > 0)
    # nearest centroid, lower one on ties
    d = np.abs(x[:, None] - c.centroids[None, :])
    assert np.all(d[np.arange(x.size), c.assignment] <= d.min(axis=1) + 1e-9)
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(c.history, c.history[1:]))
    assert c.radius(x) >= 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=9), st.integers(1, 4))
def test_optimal_partition_matches_enumeration(values, k):
    k = min(k, len(set(values)))
    cents = optimal_partition(np.asarray(values), k)
    x = np.asarray(values)
    sse = ((x - cents[np.argmin(np.abs(x[:, None] - cents[None, :]), axis=1)]) ** 2).sum()
    assert sse <= contiguous_partition_optimum(values, k) + 1e-7 * (1 + abs(sse))


def test_constant_track_one_segment():
    c = approximate_contour(track_from([150.0] * 20), k=2)
    assert len(c.segments) == 1 and c.symbols == []


def test_step_up():
    c = approximate_contour(track_from([100.0] * 10 + [200.0] * 10), k=2)
    assert [s.cluster_rank for s in c.segments] == [0, 1]
    assert c.symbols == [1]


def test_staircase_up_down():
    c = approximate_contour(track_from([100.0] * 10 + [200.0] * 10 + [100.0] * 10), k=2)
    assert c.symbols == [1, -1]


def test_no_voiced_frames():
    with pytest.raises(ValueError):
        approximate_contour(track_from([0.0] * 10), k=2)


def test_long_gap_splits_contour():
    gap = int(0.2 / STEP) + 1
    f0 = [100.0] * 8 + [200.0] * 8 + [0.0] * gap + [300.0] * 8 + [100.0] * 8
    parts = contours_from_track(track_from(f0), k=3)
    assert len(parts) == 2
    assert parts[0].symbols == [1] and parts[1].symbols == [-2]


def test_short_gap_does_not_split():
    f0 = [100.0] * 8 + [0.0] * 3 + [200.0] * 8
    assert len(contours_from_track(track_from(f0), k=2)) == 1


def test_segment_spans():
    c = approximate_contour(track_from([100.0] * 4 + [200.0] * 4), k=2)
    assert c.segments[0].start_s == pytest.approx(0.0)
    assert c.segments[0].end_s == pytest.approx(4 * STEP)
    assert c.segments[1].start_s == pytest.approx(4 * STEP)
    assert c.segments[1].n_points == 4


def test_format_parse_roundtrip():
    c = Contour([2, -1], [Segment(0, 0.0, 0.1, 3), Segment(2, 0.1, 0.2, 3), Segment(1, 0.2, 0.35, 4)], "a/b")
    line = format_contour(c)
    assert line == "a/b\t2,-1\t0.000:0.100;0.100:0.200;0.200:0.350"
    back = parse_contour(line)
    assert back.symbols == c.symbols and back.source_id == "a/b"
    assert [(s.start_s, s.end_s) for s in back.segments] == [(s.start_s, s.end_s) for s in c.segments]


levels_st = st.lists(st.floats(60, 500), min_size=2, max_size=8)


@settings(max_examples=40, deadline=None)
@given(levels_st, st.integers(1, 8), st.floats(0.3, 1.6))
def test_contour_properties(levels, k, scale):
    f0 = [v for v in levels for _ in range(5)]
    c = approximate_contour(track_from(f0), k=k)
    ranks = [s.cluster_rank for s in c.segments]
    assert all(a != b for a, b in zip(ranks, ranks[1:]))
    assert c.symbols == [b - a for a, b in zip(ranks, ranks[1:])]
    assert all(s != 0 and abs(s) <= k - 1 for s in c.symbols)
    # scale invariance
    scaled = approximate_contour(track_from([v * scale for v in f0]), k=k)
    assert scaled.symbols == c.symbols
    assert [s.cluster_rank for s in scaled.segments] == ranks


@settings(max_examples=30, deadline=None)
@given(levels_st, st.integers(1, 8))
def test_reconstruction_bound(levels, k):
    f0 = np.array([v for v in levels for _ in range(3)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterCountWarning)
        cl = kmeans_1d(f0, k)
    radius = cl.radius(f0)
    assert np.all(np.abs(f0 - cl.centroids[cl.assignment]) <= radius + 1e-12)
