#!/usr/bin/env python3
"""Run every CLI analysis over the demo dataset.

Expects the files produced by make_demo_data.py and leaves one output
directory per subcommand under the results directory.
"""

import argparse
import sys
from pathlib import Path

from olfalign.cli import execute


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="demo_data")
    ap.add_argument("--out", default="demo_results")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repetitions", type=int, default=10)
    args = ap.parse_args()

    data = Path(args.data)
    out = Path(args.out)
    final = [
        "--embeddings", str(data / "embeddings_layer11.csv"),
        "--manifest", str(data / "embeddings_layer11.manifest.json"),
    ]
    layers = []
    for stem in ("embeddings_layer00", "embeddings_layer06", "embeddings_layer11"):
        layers += ["--embeddings", str(data / f"{stem}.csv"),
                   "--manifest", str(data / f"{stem}.manifest.json")]
    seeded = ["--seed", str(args.seed), "--repetitions", str(args.repetitions)]

    runs = [
        ["classify", *final, "--labels", str(data / "labels.csv"), *seeded,
         "--out", str(out / "classify")],
        ["regress", *final, "--ratings", str(data / "ratings.csv"), *seeded,
         "--out", str(out / "regress")],
        ["rsa", *final, "--pairs", str(data / "pairs.csv"), "--out", str(out / "rsa")],
        ["physchem", *final, "--descriptors", str(data / "descriptors.csv"), *seeded,
         "--out", str(out / "physchem")],
        ["noise-ceiling", "--per-subject", str(data / "per_subject.csv"),
         "--out", str(out / "noise_ceiling")],
        ["layers", "--task", "rsa", *layers, "--pairs", str(data / "pairs.csv"),
         "--seed", str(args.seed), "--out", str(out / "layers_rsa")],
        ["layers", "--task", "physchem", *layers,
         "--descriptors", str(data / "descriptors.csv"), *seeded,
         "--out", str(out / "layers_physchem")],
        ["rsm", *final, "--pairs", str(data / "pairs.csv"), "--out", str(out / "rsm")],
        ["pca-scatter", *final, "--labels", str(data / "labels.csv"),
         "--broad", "floral", "meaty", "ethereal", "--narrow", "minty",
         "--out", str(out / "pca_scatter")],
    ]
    for argv in runs:
        print("olfalign " + " ".join(argv))
        rc = execute(argv)
        if rc != 0:
            print(f"FAILED with exit code {rc}", file=sys.stderr)
            return rc
    print(f"all analyses written under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
