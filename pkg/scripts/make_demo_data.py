#!/usr/bin/env python3
"""Generate a synthetic demo dataset exercising every input format.

Writes embeddings (three layers), expert labels, continuous ratings,
pairwise similarities, per-subject ratings, and a descriptor table under
the chosen output directory. Later layers are rotated toward a planted
perceptual structure so layer sweeps show a visible trend.
"""

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from olfalign.core_data import EmbeddingTable


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_data", help="output directory")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n", type=int, default=120, help="number of molecules")
    ap.add_argument("--dim", type=int, default=32, help="embedding dimension")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    n, d = args.n, args.dim
    ids = [f"mol{i:03d}" for i in range(n)]

    # latent perceptual structure shared by all perceptual files
    latent = rng.standard_normal((n, 4))

    chem = rng.standard_normal((n, d))
    mix = rng.standard_normal((4, d)) * 0.8
    for layer, blend in ((0, 0.1), (6, 0.5), (11, 0.9)):
        M = (1 - blend) * chem + blend * (latent @ mix) + 0.05 * rng.standard_normal((n, d))
        EmbeddingTable(tuple(ids), M, "demo-transformer", layer).save(
            out / f"embeddings_layer{layer:02d}.csv",
            out / f"embeddings_layer{layer:02d}.manifest.json",
        )

    # expert labels: thresholded latent dimensions plus a catch-all
    names = ["floral", "meaty", "ethereal", "minty"]
    labels = (latent > 0.4).astype(int)
    labels[labels.sum(axis=1) == 0, 0] = 1
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + names)
        for i in range(n):
            w.writerow([ids[i]] + list(labels[i]))

    # mean ratings in [-1, 1]
    rate_names = ["sweet", "sour", "smoky"]
    ratings = np.tanh(latent @ rng.standard_normal((4, 3)) * 0.6)
    with open(out / "ratings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + rate_names)
        for i in range(n):
            w.writerow([ids[i]] + [repr(float(v)) for v in ratings[i]])
    (out / "ratings.json").write_text(json.dumps({"range": [-1, 1]}) + "\n")

    # per-subject ratings with occasional missing cells
    with open(out / "per_subject.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "odorant"] + rate_names)
        for subj in range(5):
            noise = rng.standard_normal((n, 3)) * 0.25
            for i in range(0, n, 2):
                row = np.clip(ratings[i] + noise[i], -1, 1)
                cells = [repr(float(v)) for v in row]
                if rng.random() < 0.05:
                    cells[int(rng.integers(0, 3))] = ""
                w.writerow([f"s{subj}", ids[i]] + cells)

    # pairwise similarities from latent distance, with some mixtures
    pair_rows = []
    seen = set()
    while len(pair_rows) < 60:
        i, j = rng.integers(0, n, size=2)
        if i == j or (min(i, j), max(i, j)) in seen:
            continue
        seen.add((min(i, j), max(i, j)))
        a = ids[i] if rng.random() > 0.25 else f"{ids[i]};{ids[(i + 1) % n]}"
        b = ids[j]
        dist = np.linalg.norm(latent[i] - latent[j])
        score = float(np.clip(1.0 - dist / 5.0 + rng.normal(0, 0.05), 0, 1))
        pair_rows.append((a, b, score))
    with open(out / "pairs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant_a", "odorant_b", "score"])
        for a, b, s in pair_rows:
            w.writerow([a, b, repr(s)])
    (out / "pairs.json").write_text(
        json.dumps({"range": [0, 1], "polarity": "similarity"}) + "\n"
    )

    # physicochemical-style descriptor table (15 columns)
    desc = rng.standard_normal((n, 15))
    desc[:, :4] += chem[:, :4] * 2.0
    with open(out / "descriptors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"pc_desc_{j:02d}" for j in range(15)])
        for i in range(n):
            w.writerow([ids[i]] + [repr(float(v)) for v in desc[i]])

    print(f"demo data written to {out}/")


if __name__ == "__main__":
    main()
