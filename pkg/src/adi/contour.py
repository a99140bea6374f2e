"""Contour approximation: per-utterance 1-D k-means over f0, cluster-bounded
segments, and signed rank-difference symbols between consecutive segments."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .pitch import PitchTrack

DEFAULT_K = 8
GAP_MAX_S = 0.150


class ClusterCountWarning(UserWarning):
    """k exceeded the number of distinct values and was reduced."""


@dataclass
class Clustering1D:
    centroids: np.ndarray
    assignment: np.ndarray
    k: int
    history: List[float] = field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.history[-1] if self.history else 0.0

    def radius(self, values) -> float:
        """Largest distance from a point to its centroid."""
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return 0.0
        return float(np.max(np.abs(values - self.centroids[self.assignment])))


def _assign(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # centroids are sorted; a value exactly on a midpoint goes to the lower one
    mids = (centroids[1:] + centroids[:-1]) / 2.0
    return np.searchsorted(mids, values, side="left")


def _sse(values, centroids, assignment) -> float:
    return float(np.sum((values - centroids[assignment]) ** 2))


def _lloyd(x, centroids, assignment, k, max_iter, history):
    for _ in range(max_iter):
        counts = np.bincount(assignment, minlength=k)
        new = centroids.copy()
        nz = counts > 0
        new[nz] = np.bincount(assignment, weights=x, minlength=k)[nz] / counts[nz]
        while np.any(counts == 0):
            far = int(np.argmax(np.abs(x - new[assignment])))
            empty = int(np.flatnonzero(counts == 0)[0])
            new[empty] = x[far]
            new = np.sort(new)
            assignment = _assign(x, new)
            counts = np.bincount(assignment, minlength=k)
            nz = counts > 0
            new[nz] = np.bincount(assignment, weights=x, minlength=k)[nz] / counts[nz]
        centroids = new
        history.append(_sse(x, centroids, assignment))
        updated = _assign(x, centroids)
        if np.array_equal(updated, assignment):
            break
        assignment = updated
    return centroids, assignment


def optimal_partition(values: np.ndarray, k: int) -> np.ndarray:
    """Centroids of the minimum-SSE partition of ``values`` into ``k`` groups.

    Optimal scalar clusters are contiguous runs of the sorted data, so a
    dynamic program over split points finds them exactly in O(k n^2).
    """
    xs = np.sort(np.asarray(values, dtype=np.float64))
    n = xs.size
    s1 = np.concatenate(([0.0], np.cumsum(xs)))
    s2 = np.concatenate(([0.0], np.cumsum(xs * xs)))

    best = np.full((k + 1, n + 1), np.inf)
    split = np.zeros((k + 1, n + 1), dtype=np.int64)
    best[0, 0] = 0.0
    for m in range(1, k + 1):
        for j in range(m, n + 1):
            i = np.arange(m - 1, j)
            sse = (s2[j] - s2[i]) - (s1[j] - s1[i]) ** 2 / (j - i)
            total = best[m - 1, i] + np.maximum(sse, 0.0)
            t = int(np.argmin(total))
            best[m, j] = total[t]
            split[m, j] = i[t]
    centroids = np.empty(k)
    j = n
    for m in range(k, 0, -1):
        i = split[m, j]
        centroids[m - 1] = xs[i:j].mean()
        j = i
    return centroids


def kmeans_1d(values: Sequence[float], k: int, max_iter: int = 100,
              polish: bool = True) -> Clustering1D:
    """Scalar k-means: Lloyd iterations from quantile seeds.

    Seed ``i`` is the ``(i + 0.5) / k`` quantile of the data. Empty clusters
    are re-seeded at the point farthest from its centroid. If ``k`` exceeds
    the number of distinct values it is reduced with a
    :class:`ClusterCountWarning`.

    Lloyd can stall in a poor fixed point even in one dimension, so with
    ``polish`` the exact optimal partition is adopted when it is strictly
    better, followed by Lloyd steps from its centroids. ``history`` holds the
    within-cluster sum of squares after every step and never increases.
    """
    x = np.asarray(values, dtype=np.float64)
    if k <= 0:
        raise ValueError("k must be positive")
    if x.size == 0:
        raise ValueError("no values to cluster")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    n_distinct = np.unique(x).size
    if k > n_distinct:
        warnings.warn(f"k={k} reduced to {n_distinct} distinct values", ClusterCountWarning)
        k = n_distinct

    centroids = np.quantile(np.sort(x), (np.arange(k) + 0.5) / k)
    assignment = _assign(x, centroids)
    history: List[float] = []
    centroids, assignment = _lloyd(x, centroids, assignment, k, max_iter, history)
    if polish and k > 1:
        opt = optimal_partition(x, k)
        opt_assignment = _assign(x, opt)
        if _sse(x, opt, opt_assignment) < history[-1] * (1 - 1e-12):
            centroids, assignment = _lloyd(x, opt, opt_assignment, k, max_iter, history)
    return Clustering1D(centroids, assignment, k, history)


@dataclass(frozen=True)
class Segment:
    cluster_rank: int
    start_s: float
    end_s: float
    n_points: int


@dataclass
class Contour:
    symbols: List[int]
    segments: List[Segment]
    source_id: str = ""
    k: int = DEFAULT_K

    def __len__(self):
        return len(self.symbols)


def _runs(track: PitchTrack, gap_max: float) -> List[np.ndarray]:
    """Indices of voiced frames, split wherever an unvoiced gap exceeds ``gap_max``."""
    idx = np.flatnonzero(track.voiced)
    if idx.size == 0:
        return []
    times = track.times[idx]
    half = track.frame_step / 2.0
    # silence between the end of one voiced frame and the start of the next
    gaps = (times[1:] - half) - (times[:-1] + half)
    cuts = np.flatnonzero(gaps > gap_max + 1e-9) + 1
    return np.split(idx, cuts)


def _contour_from_run(track, run, clustering, rank_of, source_id) -> Contour:
    half = track.frame_step / 2.0
    times = track.times
    segments = []
    cur_rank = None
    first = last = None
    count = 0
    for j in run:
        r = rank_of[j]
        if r != cur_rank and cur_rank is not None:
            segments.append(Segment(cur_rank, max(times[first] - half, 0.0), times[last] + half, count))
            count = 0
            first = None
        if first is None:
            first = j
        cur_rank = r
        last = j
        count += 1
    segments.append(Segment(cur_rank, max(times[first] - half, 0.0), times[last] + half, count))
    symbols = [b.cluster_rank - a.cluster_rank for a, b in zip(segments, segments[1:])]
    return Contour(symbols, segments, source_id, clustering.k)


def contours_from_track(track: PitchTrack, k: int = DEFAULT_K, gap_max: float = GAP_MAX_S,
                        max_iter: int = 100) -> List[Contour]:
    """One contour per voiced run; all runs share one clustering of the utterance."""
    runs = _runs(track, gap_max)
    if not runs:
        raise ValueError(f"{track.source_id}: no voiced frames")
    f0 = track.f0
    idx = np.concatenate(runs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterCountWarning)
        clustering = kmeans_1d(f0[idx], k, max_iter=max_iter)
    rank_of = dict(zip(idx.tolist(), clustering.assignment.tolist()))
    return [_contour_from_run(track, run, clustering, rank_of, track.source_id) for run in runs]


def approximate_contour(track: PitchTrack, k: int = DEFAULT_K, gap_max: float = GAP_MAX_S,
                        max_iter: int = 100) -> Contour:
    """The longest (most segments) contour of the utterance; earliest wins ties."""
    if k <= 0:
        raise ValueError("k must be positive")
    contours = contours_from_track(track, k, gap_max, max_iter)
    return max(contours, key=lambda c: len(c.segments))


def format_contour(contour: Contour) -> str:
    syms = ",".join(str(s) for s in contour.symbols)
    times = ";".join(f"{s.start_s:.3f}:{s.end_s:.3f}" for s in contour.segments)
    return f"{contour.source_id}\t{syms}\t{times}"


def parse_contour(line: str) -> Contour:
    source_id, syms, times = line.rstrip("\n").split("\t")
    symbols = [int(s) for s in syms.split(",")] if syms else []
    segments = []
    rank = 0
    spans = [t.split(":") for t in times.split(";")] if times else []
    # ranks are relative after a round trip; the first segment is taken as rank 0
    for i, (a, b) in enumerate(spans):
        if i > 0:
            rank += symbols[i - 1]
        segments.append(Segment(rank, float(a), float(b), 1))
    return Contour(symbols, segments, source_id)
