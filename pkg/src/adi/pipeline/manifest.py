"""Dataset manifests (``path<TAB>dialect<TAB>split``) and stratified splitting."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

SPLITS = ("train", "test")
# five-way Arabic label set (Egyptian, Gulf, Levantine, MSA, North African)
ARABIC_DIALECTS = ("EGY", "GLF", "LAV", "MSA", "NOR")

T = TypeVar("T")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Entry:
    path: Path
    dialect: str
    split: str

    @property
    def source_id(self) -> str:
        return self.path.with_suffix("").as_posix()


@dataclass
class Manifest:
    entries: List[Entry]
    root: Path = Path(".")

    @property
    def labels(self) -> List[str]:
        return sorted({e.dialect for e in self.entries})

    def split(self, name: str) -> List[Entry]:
        return [e for e in self.entries if e.split == name]

    def resolve(self, entry: Entry) -> Path:
        return entry.path if entry.path.is_absolute() else self.root / entry.path

    def source_id(self, entry: Entry) -> str:
        return entry.source_id

    def validate(self, label_set: Optional[Sequence[str]] = None, check_files: bool = True) -> None:
        if not self.entries:
            raise ManifestError("manifest is empty")
        seen = set()
        for e in self.entries:
            if e.split not in SPLITS:
                raise ManifestError(f"{e.path}: split must be one of {SPLITS}, got {e.split!r}")
            if label_set is not None and e.dialect not in label_set:
                raise ManifestError(f"{e.path}: label {e.dialect!r} not in {list(label_set)}")
            if e.source_id in seen:
                raise ManifestError(f"duplicate entry {e.path}")
            seen.add(e.source_id)
            if check_files and not self.resolve(e).exists():
                raise ManifestError(f"{self.resolve(e)}: file not found")
        if not self.split("train"):
            raise ManifestError("manifest has no training entries")


def read_manifest(path) -> Manifest:
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ManifestError(f"{path}:{n}: expected 3 tab-separated fields")
            entries.append(Entry(Path(parts[0]), parts[1], parts[2]))
    return Manifest(entries, path.parent)


def write_manifest(path, entries: Sequence[Entry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.path.as_posix()}\t{e.dialect}\t{e.split}\n")


def split_train_val(items: Sequence[T], labels: Sequence, fraction: float = 0.8,
                    seed: int = 0) -> Tuple[List[T], List[T]]:
    """Label-stratified shuffled split; each class keeps at least one item on each side."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1); a validation set is required for early stopping")
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    by_class: Dict[object, List[int]] = defaultdict(list)
    for i, lab in enumerate(labels):
        by_class[lab].append(i)
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for lab in sorted(by_class, key=str):
        idx = by_class[lab]
        if len(idx) < 2:
            raise ValueError(f"class {lab!r} has fewer than 2 instances")
        perm = [idx[j] for j in rng.permutation(len(idx))]
        n_train = min(max(int(round(fraction * len(idx))), 1), len(idx) - 1)
        train_idx += perm[:n_train]
        val_idx += perm[n_train:]
    train_idx.sort()
    val_idx.sort()
    return [items[i] for i in train_idx], [items[i] for i in val_idx]
