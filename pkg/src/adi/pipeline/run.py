"""End-to-end orchestration: manifest in, dictionaries/features/model/report out.

Every stage reads its inputs from and writes its outputs to one run
directory, so stages can be rerun individually (see ``adi.cli``).

Layout of ``out/``::

    tracks/<source_id>.f0         pitch tracks
    contours.tsv                  one line per voiced run, all splits
    dictionaries/<DIALECT>.json   per-dialect closed patterns (train split only)
    instances_{train,test}.tsv    located pattern instances
    segments/{train,test}/N.wav   cut audio, N = row of the instance file
    features_{train,test}.imel    log-mel archives, aligned with the instance files
    normalizer.npz                per-bin statistics from the train features
    model.iadi                    trained checkpoint
    report.json                   configs, seeds, audio durations, metrics, provenance
    timings.json                  wall-clock seconds per stage and per epoch
"""
from __future__ import annotations

import json
import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from ..contour import DEFAULT_K, Contour, contours_from_track, format_contour, parse_contour
from ..features import T_FIXED, Normalizer, log_mel, pad_or_crop, read_archive, write_archive
from ..mining import (DEFAULT_MIN_LEN, MiningConfig, PatternDictionary, PatternInstance,
                      build_dictionary, cut_segments, find_instances, first_instances,
                      read_instances, write_instances)
from ..nn import ModelSpec, TrainConfig, build_model, load_checkpoint, predict_proba, save_checkpoint
from ..nn import train as fit
from ..pitch import PitchConfig, dump_track, extract_f0, parse_track
from ..signal import AudioClip, load_wav, save_wav, to_canonical
from .manifest import Entry, Manifest, read_manifest, split_train_val
from .metrics import MetricsReport, classification_report

log = logging.getLogger(__name__)

TEST_MODES = ("patterns", "random-crops")
STAGES = ("pitch", "contour", "mine", "locate", "cut", "featurize", "train", "eval")
CROP_RANGE_S = (0.25, 1.3)


class StageError(RuntimeError):
    def __init__(self, stage: str, source_id: Optional[str], cause: Exception):
        where = f" [{source_id}]" if source_id else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")
        self.stage = stage
        self.source_id = source_id


@dataclass
class RunConfig:
    seed: int = 0
    k: int = DEFAULT_K
    min_support: Optional[Union[int, float]] = None
    min_len: int = DEFAULT_MIN_LEN
    model: str = "resblstm"
    batch_size: Optional[int] = None
    epochs: Optional[int] = None
    patience: Optional[int] = None
    allow_off_grid: bool = False
    test_mode: str = "patterns"
    val_fraction: float = 0.8
    crops_per_utterance: int = 8
    pitch: PitchConfig = field(default_factory=PitchConfig)

    def __post_init__(self):
        if self.test_mode not in TEST_MODES:
            raise ValueError(f"test_mode must be one of {TEST_MODES}")

    def train_config(self) -> TrainConfig:
        base = TrainConfig.for_model(self.model, seed=self.seeds()["train"])
        return TrainConfig(
            batch_size=self.batch_size or base.batch_size,
            epochs=base.epochs if self.epochs is None else self.epochs,
            early_stop_patience=self.patience or base.early_stop_patience,
            learning_rate=base.learning_rate,
            seed=base.seed,
            allow_off_grid=self.allow_off_grid,
        )

    def seeds(self) -> Dict[str, int]:
        """Independent sub-seeds derived from the master seed."""
        names = ("split", "init", "train", "crops")
        children = np.random.SeedSequence(self.seed).spawn(len(names))
        return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}

    def to_dict(self):
        d = asdict(self)
        d["train"] = asdict(self.train_config())
        return d


class Run:
    """One pipeline run rooted at ``out``."""

    def __init__(self, manifest: Manifest, out, cfg: RunConfig = RunConfig()):
        self.manifest = manifest
        self.out = Path(out)
        self.cfg = cfg
        self.timings: Dict[str, float] = {}
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def labels(self) -> List[str]:
        return self.manifest.labels

    def _entries(self, split=None) -> List[Entry]:
        return self.manifest.entries if split is None else self.manifest.split(split)

    def _load(self, entry: Entry) -> AudioClip:
        clip = to_canonical(load_wav(self.manifest.resolve(entry)))
        return AudioClip(clip.samples, clip.sample_rate, entry.source_id)

    def _stage(self, name, fn, *args):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        result = fn(*args)
        self.timings[name] = round(time.perf_counter() - t0, 3)
        return result

    # -- pitch / contour -----------------------------------------------------

    def track_path(self, entry: Entry) -> Path:
        return self.out / "tracks" / f"{entry.source_id}.f0"

    def pitch(self) -> None:
        for e in self._entries():
            try:
                track = extract_f0(self._load(e), self.cfg.pitch)
            except Exception as exc:
                raise StageError("pitch", e.source_id, exc) from exc
            path = self.track_path(e)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(dump_track(track), encoding="utf-8")

    def contour(self) -> None:
        lines = []
        for e in self._entries():
            try:
                track = parse_track(self.track_path(e).read_text(encoding="utf-8"),
                                    self.cfg.pitch, e.source_id)
                if not track.voiced.any():
                    log.warning("%s: no voiced frames, no contour", e.source_id)
                    continue
                lines += [format_contour(c) for c in contours_from_track(track, self.cfg.k)]
            except Exception as exc:
                raise StageError("contour", e.source_id, exc) from exc
        (self.out / "contours.tsv").write_text("".join(l + "\n" for l in lines), encoding="utf-8")

    def contours(self) -> Dict[str, List[Contour]]:
        """Contours grouped by source id, in file order."""
        by_source: Dict[str, List[Contour]] = defaultdict(list)
        with open(self.out / "contours.tsv", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    c = parse_contour(line)
                    by_source[c.source_id].append(c)
        return by_source

    # -- mining / location ---------------------------------------------------

    def mine(self) -> None:
        contours = self.contours()
        cfg = MiningConfig(self.cfg.min_support, self.cfg.min_len, self.cfg.k)
        (self.out / "dictionaries").mkdir(exist_ok=True)
        for dialect in self.labels:
            own = [c for e in self._entries("train") if e.dialect == dialect
                   for c in contours.get(e.source_id, [])]
            try:
                d = build_dictionary(own, dialect, cfg)
            except Exception as exc:
                raise StageError("mine", None, exc) from exc
            log.info("%s: %d patterns (min_support %d)", dialect, len(d.patterns), d.min_support)
            d.save(self.out / "dictionaries" / f"{dialect}.json")

    def dictionaries(self) -> Dict[str, PatternDictionary]:
        return {d: PatternDictionary.load(self.out / "dictionaries" / f"{d}.json") for d in self.labels}

    def locate(self) -> None:
        """Training instances: one per pattern of the utterance's own-dialect
        dictionary. Test instances: every occurrence of any training pattern,
        labelled with the utterance's true dialect."""
        contours = self.contours()
        dicts = self.dictionaries()
        train = []
        for dialect in self.labels:
            own = [c for e in self._entries("train") if e.dialect == dialect
                   for c in contours.get(e.source_id, [])]
            train += first_instances(dicts[dialect].patterns, own, dialect)
        write_instances(self.out / "instances_train.tsv", _in_manifest_order(train, self._entries("train")))

        if self.cfg.test_mode == "patterns":
            union = sorted({p.symbols: p for d in dicts.values() for p in d.patterns}.values(),
                           key=lambda p: p.symbols)
            test = []
            for e in self._entries("test"):
                found = find_instances(union, contours.get(e.source_id, []), e.dialect)
                test += found or self._crops(e, n=self.cfg.crops_per_utterance)
        else:
            test = [i for e in self._entries("test") for i in self._crops(e)]
        write_instances(self.out / "instances_test.tsv", test)

    def _crops(self, entry: Entry, n: Optional[int] = None) -> List[PatternInstance]:
        """Seeded uniform random crops; the rng depends only on the master seed
        and the source id so any subset of utterances reproduces."""
        n = self.cfg.crops_per_utterance if n is None else n
        key = [self.cfg.seeds()["crops"]] + list(entry.source_id.encode())
        rng = np.random.default_rng(np.random.SeedSequence(key))
        total = self._load(entry).duration
        out = []
        for _ in range(n):
            dur = min(rng.uniform(*CROP_RANGE_S), total)
            start = rng.uniform(0.0, total - dur)
            out.append(PatternInstance((), entry.source_id, float(start), float(start + dur), entry.dialect))
        return out

    # -- features ------------------------------------------------------------

    def segment_path(self, split: str, index: int) -> Path:
        return self.out / "segments" / split / f"{index:06d}.wav"

    def cut(self) -> None:
        """Write each located instance as its own WAV, numbered in instance-file order."""
        by_id = {e.source_id: e for e in self._entries()}
        for split in ("train", "test"):
            instances = read_instances(self.out / f"instances_{split}.tsv")
            (self.out / "segments" / split).mkdir(parents=True, exist_ok=True)
            groups: Dict[str, List[int]] = defaultdict(list)
            for i, inst in enumerate(instances):
                groups[inst.source_id].append(i)
            for sid, idx in groups.items():
                try:
                    segs = cut_segments(self._load(by_id[sid]), [instances[i] for i in idx])
                except Exception as exc:
                    raise StageError("cut", sid, exc) from exc
                for i, seg in zip(idx, segs):
                    save_wav(self.segment_path(split, i), seg)

    def featurize(self) -> None:
        """Log-mel archives per split; the normalizer is fitted on the
        unpadded training spectrograms."""
        label_id = {lab: i for i, lab in enumerate(self.labels)}
        train_specs = []
        for split in ("train", "test"):
            instances = read_instances(self.out / f"instances_{split}.tsv")
            mats, labs = [], []
            for i, inst in enumerate(instances):
                try:
                    spec = log_mel(load_wav(self.segment_path(split, i)), label=inst.dialect)
                except Exception as exc:
                    raise StageError("featurize", inst.source_id, exc) from exc
                if split == "train":
                    train_specs.append(spec)
                mats.append(pad_or_crop(spec, T_FIXED).values)
                labs.append(label_id[inst.dialect])
            write_archive(self.out / f"features_{split}.imel", mats, labs)
        if not train_specs:
            raise StageError("featurize", None, ValueError("no training instances"))
        norm = Normalizer.fit(train_specs)
        np.savez(self.out / "normalizer.npz", mean=norm.mean, std=norm.std)

    def normalizer(self) -> Normalizer:
        z = np.load(self.out / "normalizer.npz")
        return Normalizer(z["mean"], z["std"])

    # -- train / eval --------------------------------------------------------

    def train(self):
        x, y = read_archive(self.out / "features_train.imel")
        x = _normalize(x, self.normalizer())
        seeds = self.cfg.seeds()
        idx_tr, idx_va = split_train_val(np.arange(len(y)), y.tolist(), self.cfg.val_fraction, seeds["split"])
        spec = ModelSpec(self.cfg.model, n_classes=len(self.labels))
        model = build_model(spec, seed=seeds["init"])
        xt = torch.from_numpy(x)[:, None]
        yt = torch.from_numpy(y.astype(np.int64))
        idx_tr, idx_va = torch.as_tensor(idx_tr), torch.as_tensor(idx_va)
        model, history = fit(model, (xt[idx_tr], yt[idx_tr]), (xt[idx_va], yt[idx_va]),
                             self.cfg.train_config())
        save_checkpoint(self.out / "model.iadi", model, self.normalizer(), self.labels)
        return [asdict(h) for h in history], len(idx_tr), len(idx_va)

    def evaluate(self) -> Dict[str, MetricsReport]:
        model, norm, labels = load_checkpoint(self.out / "model.iadi")
        if labels != self.labels:
            raise StageError("eval", None, ValueError(f"checkpoint labels {labels} != manifest {self.labels}"))
        x, y = read_archive(self.out / "features_test.imel")
        if len(y) == 0:
            raise StageError("eval", None, ValueError("empty test set"))
        probs = predict_proba(model, torch.from_numpy(_normalize(x, norm))[:, None]).numpy()
        instances = read_instances(self.out / "instances_test.tsv")
        n = len(labels)
        segment = classification_report(y, probs.argmax(1), n, labels)
        sources = [i.source_id for i in instances]
        truth, votes = utterance_votes(sources, y, probs)
        utterance = classification_report(truth, votes, n, labels)
        return {"segment": segment, "utterance": utterance}

    # -- everything ----------------------------------------------------------

    def run(self) -> dict:
        self.manifest.validate()
        for name in STAGES[:6]:
            self._stage(name, getattr(self, name))
        history, n_tr, n_va = self._stage("train", self.train)
        metrics = self._stage("eval", self.evaluate)
        # wall-clock numbers stay out of the report so reruns compare equal
        epoch_s = [h.pop("seconds") for h in history]
        report = self.report(history, n_tr, n_va, metrics)
        with open(self.out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
        with open(self.out / "timings.json", "w", encoding="utf-8") as fh:
            json.dump({**self.timings, "epochs": epoch_s}, fh, indent=1)
        return report

    def report(self, history, n_train, n_val, metrics) -> dict:
        durations = {e.source_id: self._load(e).duration for e in self._entries()}
        train_ids = [e.source_id for e in self._entries("train")]
        test_ids = [e.source_id for e in self._entries("test")]
        train_inst = read_instances(self.out / "instances_train.tsv")
        test_inst = read_instances(self.out / "instances_test.tsv")
        pattern_s = sum(i.duration for i in train_inst)
        train_s = sum(durations[s] for s in train_ids)
        dicts = self.dictionaries()
        return {
            "config": self.cfg.to_dict(),
            "seeds": {"master": self.cfg.seed, **self.cfg.seeds()},
            "labels": self.labels,
            "counts": {
                "utterances": {"train": len(train_ids), "test": len(test_ids)},
                "patterns": {d: len(v.patterns) for d, v in dicts.items()},
                "min_support": {d: v.min_support for d, v in dicts.items()},
                "instances": {"train": len(train_inst), "test": len(test_inst),
                              "fit": n_train, "val": n_val},
            },
            "durations": {
                "corpus_s": sum(durations.values()),
                "train_s": train_s,
                "test_s": sum(durations[s] for s in test_ids),
                "pattern_set_s": pattern_s,
                "pattern_set_fraction": pattern_s / train_s if train_s else 0.0,
                "instance_mean_s": pattern_s / len(train_inst) if train_inst else 0.0,
                "instance_median_s": float(np.median([i.duration for i in train_inst])) if train_inst else 0.0,
            },
            "history": history,
            "metrics": {k: v.to_dict() for k, v in metrics.items()},
            "provenance": {
                "dictionaries_mined_from": {d: sorted(e.source_id for e in self._entries("train")
                                                      if e.dialect == d) for d in self.labels},
                "test_instances_located_with": sorted(dicts),
                "test_mode": self.cfg.test_mode,
            },
        }


def _normalize(x: np.ndarray, norm: Normalizer) -> np.ndarray:
    return ((x - norm.mean[None, :, None]) / norm.std[None, :, None]).astype(np.float32)


def _in_manifest_order(instances: Sequence[PatternInstance], entries: Sequence[Entry]) -> List[PatternInstance]:
    rank = {e.source_id: i for i, e in enumerate(entries)}
    return sorted(instances, key=lambda i: (rank[i.source_id], i.start_s, i.end_s, i.pattern))


def utterance_votes(sources: Sequence[str], y: Sequence[int], probs: np.ndarray) -> Tuple[List[int], List[int]]:
    """Majority vote of segment predictions per source; ties go to the tied
    class with the highest mean probability, then the lowest index."""
    groups: Dict[str, List[int]] = defaultdict(list)
    for i, s in enumerate(sources):
        groups[s].append(i)
    truth, pred = [], []
    for s, idx in groups.items():
        p = probs[idx]
        counts = np.bincount(p.argmax(1), minlength=p.shape[1])
        tied = np.flatnonzero(counts == counts.max())
        mean = p.mean(axis=0)
        pred.append(int(tied[np.argmax(mean[tied])]))
        truth.append(int(y[idx[0]]))
    return truth, pred


def run_pipeline(manifest, out, cfg: RunConfig = RunConfig()) -> dict:
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    return Run(manifest, out, cfg).run()
