"""Command-line entry point: ``python -m adi <command> ...``.

Every command except ``synth`` works on a run directory (``--out``) and a
manifest; each one runs a single pipeline stage, ``run`` runs them all.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .pipeline.manifest import read_manifest
from .pipeline.run import TEST_MODES, Run, RunConfig
from .pipeline.synth import SynthConfig, generate_corpus


def _support(text: str):
    """``--min-support``: an integer count or a fraction in (0, 1)."""
    value = float(text)
    if value.is_integer() and value >= 1:
        return int(value)
    if 0 < value < 1:
        return value
    raise argparse.ArgumentTypeError("expected a positive integer or a fraction in (0, 1)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--manifest", required=True, help="TSV: path, dialect, split")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=RunConfig.k)
    p.add_argument("--min-support", type=_support, default=None)
    p.add_argument("--min-len", type=int, default=RunConfig.min_len)
    p.add_argument("--model", choices=("crnn", "resblstm"), default=RunConfig.model)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--allow-off-grid", action="store_true",
                   help="accept batch sizes / patience values outside the tuned grid")
    p.add_argument("--test-mode", choices=TEST_MODES, default=RunConfig.test_mode)


STEPS = {
    "pitch": ("pitch",),
    "contour": ("contour",),
    "mine": ("mine",),
    "cut": ("locate", "cut"),
    "featurize": ("featurize",),
    "train": ("train",),
    "eval": ("evaluate",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "pitch": "track f0 for every utterance",
        "contour": "quantize pitch tracks into symbol contours",
        "mine": "mine per-dialect closed patterns from the train split",
        "cut": "locate pattern instances on both splits and cut their audio",
        "featurize": "log-mel archives and normalizer",
        "train": "train the classifier",
        "eval": "evaluate the checkpoint on the test instances",
        "run": "all of the above, then write report.json",
    }
    for name, text in helps.items():
        _common(sub.add_parser(name, help=text))
    s = sub.add_parser("synth", help="generate the synthetic three-dialect corpus")
    s.add_argument("-v", "--verbose", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-per-dialect", type=int, default=SynthConfig.n_per_dialect)
    s.add_argument("--snr-db", type=float, default=SynthConfig.snr_db)
    return parser


def _config(args) -> RunConfig:
    return RunConfig(
        seed=args.seed, k=args.k, min_support=args.min_support, min_len=args.min_len,
        model=args.model, batch_size=args.batch, epochs=args.epochs, patience=args.patience,
        allow_off_grid=args.allow_off_grid, test_mode=args.test_mode,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "synth":
            cfg = SynthConfig(n_per_dialect=args.n_per_dialect, snr_db=args.snr_db, seed=args.seed)
            print(generate_corpus(args.out, cfg))
            return 0
        manifest = read_manifest(args.manifest)
        manifest.validate()
        run = Run(manifest, args.out, _config(args))
        if args.command == "run":
            report = run.run()
            print(json.dumps({k: report["metrics"][k]["accuracy"] for k in report["metrics"]}))
            return 0
        result = None
        for step in STEPS[args.command]:
            result = getattr(run, step)()
        if args.command == "eval":
            print(json.dumps({k: v.to_dict() for k, v in result.items()}, indent=1))
        return 0
    except Exception as exc:  # surface stage errors as a one-line message
        print(f"error: {exc}", file=sys.stderr)
        return 1
