"""Train both architectures under both test protocols on one manifest and
tabulate segment/utterance accuracy.

    python scripts/compare_models.py --manifest corpus/manifest.tsv --out runs/compare

Each combination gets its own run directory; stages are recomputed per run.
"""
import argparse
import itertools
import logging
from pathlib import Path

from adi.pipeline import RunConfig, read_manifest, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifest", type=Path, required=True)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    rows = []
    for model, mode in itertools.product(("crnn", "resblstm"), ("patterns", "random-crops")):
        report = run_pipeline(read_manifest(args.manifest), args.out / f"{model}_{mode}",
                              RunConfig(seed=args.seed, model=model, test_mode=mode))
        m = report["metrics"]
        rows.append((model, mode, m["segment"]["accuracy"], m["utterance"]["accuracy"], m["utterance"]["f1_macro"]))
        print(f"{model:9s} {mode:13s} seg {rows[-1][2]:.3f}  utt {rows[-1][3]:.3f}  F1 {rows[-1][4]:.3f}", flush=True)


if __name__ == "__main__":
    main()
