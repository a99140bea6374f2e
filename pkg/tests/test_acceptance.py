"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criterion 8 runs the full synthetic pipeline with defaults (about ten
minutes on one CPU core); criterion 9 reruns a reduced corpus twice.
"""
import filecmp
import math
import time
from itertools import combinations_with_replacement, product

import numpy as np
import pytest
import torch
from torch import nn

from adi.contour import kmeans_1d
from adi.mining import SequenceDB, bide_mine
from adi.nn import ModelSpec, TrainConfig, accuracy, build_model, cross_entropy, train
from adi.nn.gradcheck import check_gradients
from adi.nn.layers import Bidirectional, ResidualBlock
from adi.nn.train import cross_entropy_logits
from adi.pipeline import RunConfig, read_manifest, report_from_confusion, run_pipeline
from adi.pipeline.synth import SynthConfig, generate_corpus
from adi.pitch import extract_f0
from adi.signal import AudioClip
from oracles import brute_force_closed, contiguous_partition_optimum, f1_from_confusion

ALPHABET = (-2, -1, 1, 2)


def _sequences(max_len):
    return [s for n in range(1, max_len + 1) for s in product(ALPHABET, repeat=n)]


def _bide_databases(n_sampled=1500, seed=0):
    """Every multiset of <= 2 sequences of length <= 3 and of exactly 3
    sequences of length <= 2, then a seeded sample of full-size databases
    (<= 4 sequences of length <= 6)."""
    short3, short2 = _sequences(3), _sequences(2)
    for n in (1, 2):
        yield from combinations_with_replacement(short3, n)
    yield from combinations_with_replacement(short2, 3)
    rng = np.random.default_rng(seed)
    for _ in range(n_sampled):
        n = int(rng.integers(1, 5))
        yield tuple(tuple(int(x) for x in rng.choice(ALPHABET, size=int(rng.integers(1, 7)))) for _ in range(n))


def test_1_bide_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    n_db = n_cases = mismatches = 0
    for db in _bide_databases():
        n_db += 1
        seqdb = SequenceDB.from_lists(db)
        oracle_all = brute_force_closed(db, 1, 1)
        for min_support in range(1, 5):
            for min_len in range(1, 4):
                n_cases += 1
                want = {p: s for p, s in oracle_all.items() if s >= min_support and len(p) >= min_len}
                got = {p.symbols: p.support for p in bide_mine(seqdb, min_support, min_len)}
                mismatches += got != want
    elapsed = time.perf_counter() - t0
    verdict("#1 BIDE == brute-force closed patterns", mismatches == 0 and elapsed < 60,
            f"{n_db} databases, {n_cases} cases, {mismatches} mismatches, {elapsed:.1f}s")


def test_2_kmeans_near_optimal(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst, monotone = 0.0, True
    for _ in range(200):
        n = int(rng.integers(2, 13))
        values = np.round(rng.choice([rng.uniform(0, 100, n), rng.normal(0, 1, n) * 10 ** rng.uniform(-2, 2)]), 6)
        k = int(rng.integers(1, min(4, len(np.unique(values))) + 1))
        c = kmeans_1d(values, k)
        opt = contiguous_partition_optimum(values, k)
        got = c.inertia
        worst = max(worst, got / opt if opt > 1e-12 else (1.0 if got <= 1e-9 else math.inf))
        monotone &= all(b <= a + 1e-9 * max(a, 1.0) for a, b in zip(c.history, c.history[1:]))
    elapsed = time.perf_counter() - t0
    verdict("#2 k-means within 1.05x of the optimum, monotone", worst <= 1.05 and monotone and elapsed < 60,
            f"worst ratio {worst:.6f}, {elapsed:.1f}s")


def test_3_pitch_accuracy(verdict):
    sr = 16000
    t = np.arange(sr) / sr
    errors = {}
    for f in (80, 120, 220, 440):
        track = extract_f0(AudioClip(0.5 * np.sin(2 * np.pi * f * t), sr))
        errors[f] = abs(np.median(track.f0[track.voiced]) - f) / f
    silent = int(extract_f0(AudioClip(np.zeros(sr), sr)).voiced.sum())
    ok = all(e <= 0.05 for e in errors.values()) and silent == 0
    verdict("#3 pitch: tones within 5%, silence unvoiced", ok,
            ", ".join(f"{f} Hz err {e:.2e}" for f, e in errors.items()) + f", silence voiced frames {silent}")


def _projected(module_fn, inputs, out_seed=0):
    """Scalar fn = <module(inputs), fixed random tensor>, so every output
    element contributes with a distinct weight."""
    g = torch.Generator().manual_seed(out_seed)
    with torch.no_grad():
        shape = module_fn(*inputs).shape
    w = torch.randn(shape, generator=g, dtype=torch.float64)
    return lambda: (module_fn(*inputs) * w).sum()


def _grad_cases():
    torch.manual_seed(0)
    dt = torch.float64

    def leaf(*shape):
        return torch.randn(*shape, dtype=dt, requires_grad=True)

    cases = []
    for (c_in, c_out, k, s, hw) in [(1, 2, 3, 1, 5), (2, 3, 3, 2, 6), (3, 2, 1, 1, 4)]:
        m = nn.Conv2d(c_in, c_out, k, stride=s, padding=k // 2).double()
        x = leaf(2, c_in, hw, hw + 1)
        cases.append(("conv", m, [x], list(m.parameters())))
    for c, hw in [(1, 3), (2, 4), (3, 2)]:
        m = nn.BatchNorm2d(c).double().train()
        with torch.no_grad():
            m.weight.uniform_(0.5, 1.5)
            m.bias.uniform_(-0.5, 0.5)
        cases.append(("batchnorm", m, [leaf(3, c, hw, hw)], list(m.parameters())))
    for shape in [(4,), (2, 3), (2, 2, 3)]:
        cases.append(("elu", nn.ELU(), [leaf(*shape)], []))
        cases.append(("relu", nn.ReLU(), [leaf(*shape)], []))
    for k, s, pad, hw in [(2, 2, 0, 4), (3, 2, 1, 5), ((2, 1), (2, 1), 0, 6)]:
        cases.append(("maxpool", nn.MaxPool2d(k, s, pad), [leaf(2, 2, hw, hw)], []))
    for n_in, n_h in [(2, 3), (3, 2), (4, 4)]:
        m = nn.GRUCell(n_in, n_h).double()
        cases.append(("gru cell", m, [leaf(2, n_in), leaf(2, n_h)], list(m.parameters())))
        m = nn.LSTMCell(n_in, n_h).double()
        h, c = leaf(2, n_h), leaf(2, n_h)
        cases.append(("lstm cell", lambda x, h, c, m=m: torch.cat(m(x, (h, c)), 1), [leaf(2, n_in), h, c],
                      list(m.parameters())))
    for cell, n_in, n_h, t in [("lstm", 3, 2, 4), ("gru", 2, 3, 3), ("lstm", 4, 3, 2)]:
        m = Bidirectional(cell, n_in, n_h).double()
        cases.append((f"bidirectional ({cell})", lambda x, m=m: torch.cat([m(x)[0].flatten(1), m(x)[1]], 1),
                      [leaf(2, t, n_in)], list(m.parameters())))
    for c_in, c_out, s, hw in [(1, 2, 2, 4), (2, 2, 1, 3), (2, 3, 1, 4)]:
        m = ResidualBlock(c_in, c_out, s).double().train()
        cases.append(("residual block", m, [leaf(3, c_in, hw, hw)], list(m.parameters())))
    for n_in, n_out in [(1, 1), (3, 2), (5, 4)]:
        m = nn.Linear(n_in, n_out).double()
        cases.append(("linear", m, [leaf(2, n_in)], list(m.parameters())))
    for b, c in [(1, 2), (3, 5), (4, 3)]:
        target = torch.randint(0, c, (b,))
        cases.append(("softmax+cross-entropy", lambda z, t=target: cross_entropy_logits(z, t), [leaf(b, c)], []))
    return cases


def test_4_gradient_suite(verdict):
    t0 = time.perf_counter()
    worst = {}
    for name, module, inputs, params in _grad_cases():
        fn = _projected(module, inputs)
        errs = check_gradients(fn, inputs + params)
        worst[name] = max(worst.get(name, 0.0), max(errs.values()))
    elapsed = time.perf_counter() - t0
    ok = all(e <= 1e-4 for e in worst.values()) and elapsed < 300
    verdict("#4 finite-difference gradient suite (float64, rel tol 1e-4)", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f}s")


def test_5_cross_entropy_checks(verdict):
    devs = []
    for n in (2, 3, 5, 10):
        devs.append(abs(cross_entropy(np.arange(4) % n, np.full((4, n), 1.0 / n)) - math.log(n)))
    one_hot = cross_entropy(np.eye(5)[[0, 3, 4]], np.eye(5)[[0, 3, 4]])
    ok = max(devs) <= 1e-9 and one_hot == 0.0
    verdict("#5 uniform loss = ln(n), one-hot loss = 0", ok, f"max |loss - ln n| {max(devs):.1e}, one-hot {one_hot}")


# Hand-computed (precision, recall per class; F1 = 2PR/(P+R); macro = mean;
# weighted = support-weighted mean). Values written as exact fractions.
CONFUSIONS = [
    # all predicted class A on a 50/50 two-class truth
    ([[2, 0], [2, 0]], 1 / 3, (2 * (2 / 3) + 2 * 0) / 4),
    # perfect three-class
    ([[3, 0, 0], [0, 1, 0], [0, 0, 2]], 1.0, 1.0),
    # P = (5/7, 4/7), R = (5/8, 4/6) -> F1 = (2/3, 8/13)
    ([[5, 3], [2, 4]], (2 / 3 + 8 / 13) / 2, (8 * 2 / 3 + 6 * 8 / 13) / 14),
    # class 2 never occurs and is never predicted: F1 0 enters the macro mean
    # P = (1/2, 3/5), R = (1/3, 3/4) -> F1 = (2/5, 2/3)
    ([[1, 2, 0], [1, 3, 0], [0, 0, 0]], (2 / 5 + 2 / 3 + 0) / 3, (3 * 2 / 5 + 4 * 2 / 3) / 7),
    # P = (1, 1/2, 1/3), R = (1/2, 1/2, 1/2) -> F1 = (2/3, 1/2, 2/5)
    ([[1, 0, 1], [0, 1, 1], [0, 1, 1]], (2 / 3 + 1 / 2 + 2 / 5) / 3, (2 * 2 / 3 + 2 * 1 / 2 + 2 * 2 / 5) / 6),
]


def test_6_metrics_oracle(verdict):
    worst = 0.0
    for cm, macro, weighted in CONFUSIONS:
        r = report_from_confusion(cm)
        _, macro2, weighted2 = f1_from_confusion(cm)
        worst = max(worst, abs(r.f1_macro - macro), abs(r.f1_weighted - weighted),
                    abs(macro2 - macro), abs(weighted2 - weighted))
    verdict("#6 macro/weighted F1 on 5 hand-computed confusion matrices", worst <= 1e-9, f"max deviation {worst:.1e}")


def _separable(n=64, seed=0):
    """Two classes of 128x64 'spectrograms': a harmonic band rising vs falling."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 0.3, (n, 1, 128, 64)).astype(np.float32)
    y = np.arange(n) % 2
    for i in range(n):
        base = rng.integers(10, 40)
        slope = 0.4 if y[i] == 0 else -0.4
        for t in range(64):
            row = int(base + 12 + slope * (t - 32))
            x[i, 0, row - 1 : row + 2, t] += 3.0
    return torch.from_numpy(x), torch.from_numpy(y)


def _overfit(x, y):
    model = build_model(ModelSpec("resblstm", 2), seed=0)
    cfg = TrainConfig(batch_size=32, epochs=30, early_stop_patience=5, seed=0)
    model, history = train(model, (x, y), (x, y), cfg)
    return model, history


def test_7_overfit_sanity(verdict):
    x, y = _separable()
    model_a, hist = _overfit(x, y)
    model_b, _ = _overfit(x, y)
    acc = accuracy(model_a, x, y)
    same = all(torch.equal(p, q) for p, q in zip(model_a.state_dict().values(), model_b.state_dict().values()))
    first = next((h.epoch for h in hist if h.val_acc == 1.0), None)
    verdict("#7 Res-BLSTM reaches 100% train accuracy within 30 epochs, seed-deterministic",
            acc == 1.0 and same, f"train acc {acc:.3f} (first 100% at epoch {first}), identical reruns {same}")


@pytest.mark.slow
def test_8_synthetic_end_to_end(tmp_path, verdict):
    t0 = time.perf_counter()
    manifest = generate_corpus(tmp_path / "corpus", SynthConfig())
    report = run_pipeline(manifest, tmp_path / "run", RunConfig())
    elapsed = time.perf_counter() - t0
    acc = report["metrics"]["utterance"]["accuracy"]
    frac = report["durations"]["pattern_set_fraction"]
    verdict("#8 synthetic end-to-end: utterance accuracy >= 0.90, pattern set <= 25%, < 15 min",
            acc >= 0.90 and frac <= 0.25 and elapsed < 900,
            f"utterance acc {acc:.3f}, segment acc {report['metrics']['segment']['accuracy']:.3f}, "
            f"pattern set {100 * frac:.1f}% of training audio, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_9_reproducibility(tmp_path, verdict):
    manifest = generate_corpus(tmp_path / "corpus", SynthConfig(n_per_dialect=12, seed=4))
    cfg = RunConfig(seed=11, epochs=2)
    reports = [run_pipeline(manifest, tmp_path / name, cfg) for name in ("a", "b")]
    same_ckpt = filecmp.cmp(tmp_path / "a" / "model.iadi", tmp_path / "b" / "model.iadi", shallow=False)
    same_report = filecmp.cmp(tmp_path / "a" / "report.json", tmp_path / "b" / "report.json", shallow=False)
    verdict("#9 identical seeds give bit-identical checkpoints and reports",
            same_ckpt and same_report and reports[0] == reports[1],
            f"checkpoint identical {same_ckpt}, report identical {same_report}")
