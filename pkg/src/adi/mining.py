"""Closed sequential pattern mining (BIDE) over contour symbol sequences,
pattern dictionaries per dialect, and mapping patterns back to audio spans.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .contour import Contour
from .signal import AudioClip

DEFAULT_MIN_LEN = 5


@dataclass
class SequenceDB:
    sequences: List[Tuple[str, Tuple[int, ...]]]
    alphabet: frozenset = frozenset()

    def __post_init__(self):
        seqs = [(sid, tuple(int(s) for s in seq)) for sid, seq in self.sequences]
        for sid, seq in seqs:
            if not seq:
                raise ValueError(f"empty sequence {sid!r}")
        self.sequences = seqs
        used = frozenset(s for _, seq in seqs for s in seq)
        if not self.alphabet:
            self.alphabet = used
        elif not used <= self.alphabet:
            raise ValueError(f"symbols outside alphabet: {sorted(used - self.alphabet)}")

    @classmethod
    def from_lists(cls, seqs: Iterable[Sequence[int]]) -> "SequenceDB":
        return cls([(str(i), tuple(s)) for i, s in enumerate(seqs)])

    @classmethod
    def from_contours(cls, contours: Iterable[Contour]) -> "SequenceDB":
        return cls([(c.source_id, tuple(c.symbols)) for c in contours if c.symbols])

    def __len__(self):
        return len(self.sequences)


@dataclass(frozen=True)
class Pattern:
    symbols: Tuple[int, ...]
    support: int

    def __len__(self):
        return len(self.symbols)


def resolve_min_support(value, n_sequences: int) -> int:
    """Absolute support threshold from an int, a fraction in (0, 1), or None.

    ``None`` gives the default ``max(2, ceil(0.01 * n))``.
    """
    if value is None:
        return max(2, math.ceil(0.01 * n_sequences))
    if isinstance(value, float) and 0 < value < 1:
        return max(1, math.ceil(value * n_sequences))
    value = int(value)
    if value <= 0:
        raise ValueError("min_support must be positive")
    return value


class _Bide:
    def __init__(self, seqs: List[Tuple[int, ...]], min_support: int, min_len: int):
        self.seqs = seqs
        self.min_support = min_support
        self.min_len = min_len
        self.out: List[Pattern] = []

    # positions of the leftmost embedding of each pattern item
    def _first_instance(self, seq, pattern) -> List[int]:
        pos, out = 0, []
        for item in pattern:
            pos = seq.index(item, pos)
            out.append(pos)
            pos += 1
        return out

    def _periods_share_item(self, pattern, sids, semi: bool) -> bool:
        """True if some i has an item common to every sequence's i-th
        (semi-)maximum period.

        The i-th maximum period lies between the end of the first instance of
        pattern[:i] and the last-in-last appearance of pattern[i]; the semi
        variant stops at the last-in-first appearance instead.
        """
        n = len(pattern)
        bounds = []  # per sequence: list of (lo, hi) half-open ranges
        for sid in sids:
            seq = self.seqs[sid]
            first = self._first_instance(seq, pattern)
            if semi:
                anchor = [0] * n
                anchor[-1] = first[-1]
            else:
                anchor = [0] * n
                anchor[-1] = len(seq) - 1 - seq[::-1].index(pattern[-1])
            for i in range(n - 2, -1, -1):
                j = anchor[i + 1] - 1
                while seq[j] != pattern[i]:
                    j -= 1
                anchor[i] = j
            ranges = []
            for i in range(n):
                lo = first[i - 1] + 1 if i > 0 else 0
                ranges.append((lo, anchor[i]))
            bounds.append((seq, ranges))
        for i in range(n):
            common = None
            for seq, ranges in bounds:
                lo, hi = ranges[i]
                items = set(seq[lo:hi])
                common = items if common is None else common & items
                if not common:
                    break
            if common:
                return True
        return False

    def run(self):
        counts = Counter()
        for seq in self.seqs:
            counts.update(set(seq))
        for item in sorted(counts):
            if counts[item] < self.min_support:
                continue
            proj = [(sid, seq.index(item) + 1) for sid, seq in enumerate(self.seqs) if item in seq]
            pattern = (item,)
            if not self._periods_share_item(pattern, [s for s, _ in proj], semi=True):
                self._grow(pattern, proj)
        return self.out

    def _grow(self, pattern, proj):
        support = len(proj)
        local = Counter()
        for sid, pos in proj:
            local.update(set(self.seqs[sid][pos:]))
        forward_closed = all(c < support for c in local.values())
        if forward_closed and len(pattern) >= self.min_len:
            if not self._periods_share_item(pattern, [s for s, _ in proj], semi=False):
                self.out.append(Pattern(pattern, support))
        for item in sorted(local):
            if local[item] < self.min_support:
                continue
            new_proj = []
            for sid, pos in proj:
                seq = self.seqs[sid]
                try:
                    new_proj.append((sid, seq.index(item, pos) + 1))
                except ValueError:
                    pass
            new_pattern = pattern + (item,)
            if self._periods_share_item(new_pattern, [s for s, _ in new_proj], semi=True):
                continue  # BackScan: no extension of this prefix can be closed
            self._grow(new_pattern, new_proj)


def bide_mine(db: SequenceDB, min_support: int, min_len: int = 1) -> List[Pattern]:
    """All frequent closed sequential patterns with at least ``min_len`` items.

    Support is the number of sequences containing the pattern as a
    (not necessarily contiguous) subsequence.
    """
    if len(db) == 0:
        raise ValueError("empty sequence database")
    if min_support <= 0:
        raise ValueError("min_support must be positive")
    if min_len <= 0:
        raise ValueError("min_len must be positive")
    seqs = [seq for _, seq in db.sequences]
    return _Bide(seqs, min_support, min_len).run()


def sort_patterns(patterns: Iterable[Pattern]) -> List[Pattern]:
    return sorted(patterns, key=lambda p: (-p.support, -len(p.symbols), p.symbols))


@dataclass
class MiningConfig:
    min_support: Optional[float] = None
    min_len: int = DEFAULT_MIN_LEN
    k: int = 8


@dataclass
class PatternDictionary:
    dialect: str
    patterns: List[Pattern]
    min_support: int
    min_len: int
    k: int

    def to_json(self) -> dict:
        return {
            "dialect": self.dialect,
            "config": {"min_support": self.min_support, "min_len": self.min_len, "k": self.k},
            "patterns": [{"symbols": list(p.symbols), "support": p.support} for p in self.patterns],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PatternDictionary":
        cfg = obj["config"]
        patterns = [Pattern(tuple(p["symbols"]), int(p["support"])) for p in obj["patterns"]]
        return cls(obj["dialect"], patterns, int(cfg["min_support"]), int(cfg["min_len"]), int(cfg["k"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "PatternDictionary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def build_dictionary(contours: Sequence[Contour], dialect: str,
                     cfg: MiningConfig = MiningConfig()) -> PatternDictionary:
    if not contours:
        raise ValueError(f"no contours for dialect {dialect!r}")
    db = SequenceDB.from_contours(contours)
    if len(db) == 0:
        return PatternDictionary(dialect, [], resolve_min_support(cfg.min_support, 0), cfg.min_len, cfg.k)
    min_support = resolve_min_support(cfg.min_support, len(db))
    patterns = sort_patterns(bide_mine(db, min_support, cfg.min_len))
    return PatternDictionary(dialect, patterns, min_support, cfg.min_len, cfg.k)


@dataclass(frozen=True)
class PatternInstance:
    pattern: Tuple[int, ...]
    source_id: str
    start_s: float
    end_s: float
    dialect: str = ""

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


def match_windows(pattern: Sequence[int], symbols: Sequence[int]) -> List[Tuple[int, int]]:
    """Earliest minimal windows (inclusive symbol indices), left to right,
    non-overlapping."""
    m = len(pattern)
    n = len(symbols)
    out = []
    start = 0
    if m == 0:
        return out
    while start < n:
        # earliest end: greedy forward match
        j, pos = 0, start
        while pos < n and j < m:
            if symbols[pos] == pattern[j]:
                j += 1
            pos += 1
        if j < m:
            break
        end = pos - 1
        # latest start for that end: greedy backward match
        j, pos = m - 1, end
        while j >= 0:
            if symbols[pos] == pattern[j]:
                j -= 1
            pos -= 1
        out.append((pos + 1, end))
        start = end + 1
    return out


def locate_occurrences(pattern, contour: Contour) -> List[Tuple[float, float]]:
    symbols = pattern.symbols if isinstance(pattern, Pattern) else tuple(pattern)
    spans = []
    for s, e in match_windows(symbols, contour.symbols):
        spans.append((contour.segments[s].start_s, contour.segments[e + 1].end_s))
    return spans


def dedupe_instances(instances: Sequence[PatternInstance], max_overlap: float = 0.5) -> List[PatternInstance]:
    """Drop instances overlapping an earlier kept one (same source) by more than
    ``max_overlap`` of the shorter duration."""
    kept: Dict[str, List[PatternInstance]] = {}
    for inst in sorted(instances, key=lambda i: (i.source_id, i.start_s, i.end_s, i.pattern)):
        bucket = kept.setdefault(inst.source_id, [])
        ok = True
        for other in bucket:
            inter = min(inst.end_s, other.end_s) - max(inst.start_s, other.start_s)
            shorter = min(inst.duration, other.duration)
            if inter > 0 and shorter > 0 and inter / shorter > max_overlap:
                ok = False
                break
        if ok:
            bucket.append(inst)
    return [i for sid in kept for i in kept[sid]]


def find_instances(patterns: Iterable[Pattern], contours: Iterable[Contour], dialect: str = "",
                   dedupe: bool = True) -> List[PatternInstance]:
    patterns = list(patterns)
    out = []
    for contour in contours:
        if not contour.symbols:
            continue
        for p in patterns:
            for a, b in locate_occurrences(p, contour):
                out.append(PatternInstance(p.symbols, contour.source_id, a, b, dialect))
    return dedupe_instances(out) if dedupe else out


def first_instances(patterns: Iterable[Pattern], contours: Sequence[Contour], dialect: str = "",
                    dedupe: bool = True) -> List[PatternInstance]:
    """One instance per pattern: its earliest window in the first contour (in
    the given order) that contains it.

    This is how a dictionary turns into a training set; locating every
    occurrence instead would tile most of the voiced audio.
    """
    contours = [c for c in contours if c.symbols]
    out = []
    for p in patterns:
        for contour in contours:
            spans = locate_occurrences(p, contour)
            if spans:
                out.append(PatternInstance(p.symbols, contour.source_id, *spans[0], dialect))
                break
    return dedupe_instances(out) if dedupe else out


def cut_segments(clip: AudioClip, instances: Sequence[PatternInstance]) -> List[AudioClip]:
    """Copy the audio of each instance span out of ``clip`` verbatim."""
    sr = clip.sample_rate
    n = len(clip)
    tol = 0.5 / sr
    out = []
    for inst in instances:
        if inst.start_s < -tol or inst.end_s > n / sr + tol or inst.start_s >= inst.end_s:
            raise ValueError(
                f"{inst.source_id}: span [{inst.start_s}, {inst.end_s}] outside clip of {n / sr:.3f} s"
            )
        a = max(0, int(round(inst.start_s * sr)))
        b = min(n, int(round(inst.end_s * sr)))
        out.append(AudioClip(clip.samples[a:b].copy(), sr,
                             f"{clip.source_id}@{inst.start_s:.3f}-{inst.end_s:.3f}",
                             (float(inst.start_s), float(inst.end_s))))
    return out


def write_instances(path, instances: Iterable[PatternInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in instances:
            syms = ",".join(str(s) for s in i.pattern)
            fh.write(f"{i.dialect}\t{i.source_id}\t{i.start_s:.6f}\t{i.end_s:.6f}\t{syms}\n")


def read_instances(path) -> List[PatternInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            dialect, sid, a, b, syms = line.rstrip("\n").split("\t")
            pattern = tuple(int(s) for s in syms.split(",")) if syms else ()
            out.append(PatternInstance(pattern, sid, float(a), float(b), dialect))
    return out
