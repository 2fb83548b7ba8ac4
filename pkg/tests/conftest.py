import csv
import json

import numpy as np
import pytest

from olfalign.core_data import EmbeddingTable


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def write_embeddings(path, manifest_path, ids, matrix, model_name="toy", layer=0):
    table = EmbeddingTable(ids=tuple(ids), matrix=np.asarray(matrix, dtype=np.float64),
                           model_name=model_name, layer=layer)
    table.save(path, manifest_path)
    return table


def write_labels(path, odorant_keys, descriptors, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + list(descriptors))
        for key, row in zip(odorant_keys, labels):
            w.writerow([key] + [int(v) for v in row])


def write_ratings(path, odorant_keys, descriptors, ratings, rng=(-1.0, 1.0)):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + list(descriptors))
        for key, row in zip(odorant_keys, ratings):
            w.writerow([key] + [repr(float(v)) for v in row])
    path = str(path)
    sidecar = path[: path.rfind(".")] + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"range": list(rng)}, fh)


def write_pairs(path, pairs, scores, rng=(0.0, 1.0), polarity="similarity"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant_a", "odorant_b", "score"])
        for (a, b), s in zip(pairs, scores):
            w.writerow([a, b, repr(float(s))])
    path = str(path)
    sidecar = path[: path.rfind(".")] + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"range": list(rng), "polarity": polarity}, fh)


def write_per_subject(path, descriptors, rows):
    """rows: iterable of (subject, odorant_key, values); None value = missing."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "odorant"] + list(descriptors))
        for subj, key, values in rows:
            w.writerow([subj, key] + ["" if v is None else repr(float(v)) for v in values])
