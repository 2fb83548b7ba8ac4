"""Convert public olfaction datasets into the canonical analysis schemas.

Each converter reads the raw CSV layout documented below, writes canonical
files (labels / ratings + sidecar / per-subject / pairs + sidecar), and
compares row and descriptor counts against the published dataset sizes,
warning on mismatch. Column names can be overridden when a local copy uses
different headers.

Raw layouts (CSV):
  gs-lf   one row per molecule: an id column (SMILES or registry id)
          followed by 0/1 descriptor columns
  keller  one row per (subject, odorant): subject, odorant id, descriptor
          ratings on a 0..100 scale, empty cell = not rated
  sagar   same shape as keller with ratings pre-normalized to [-1, 1];
          descriptors not rated by every subject are dropped
  snitz   one row per rated pair: odorant_a, odorant_b, score
  ravia   same as snitz; odorant ids may be ';'-joined mixtures; repeated
          (unordered) pairs are averaged into one row
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

EXPECTED = {
    "gs-lf": {"rows": 4983, "descriptors": 138},
    "keller": {"rows": 480},
    "sagar": {"rows": 160, "descriptors": 15},
    "snitz": {"pairs": 359},
    "ravia": {"pairs": 195},
}

SOURCES = tuple(EXPECTED)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = [r for r in reader if r]
    return header, rows


def _warn_count(source, what, found, expected):
    if expected is not None and found != expected:
        log.warning("%s: expected %d %s, found %d", source, expected, what, found)


def convert_gs_lf(raw_path, out_dir, id_col="nonStereoSMILES", drop_cols=("descriptors",)):
    """Expert labels -> labels.csv (+ structures.csv when ids look like SMILES)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = _read_csv(raw_path)
    if id_col not in header:
        raise ValueError(f"{raw_path}: no column {id_col!r}")
    id_idx = header.index(id_col)
    desc_cols = [
        (j, name) for j, name in enumerate(header)
        if j != id_idx and name not in drop_cols
    ]
    labels_path = out_dir / "gs_lf_labels.csv"
    structures_path = out_dir / "gs_lf_structures.csv"
    n_written = 0
    with open(labels_path, "w", newline="") as lf, \
            open(structures_path, "w", newline="") as sf:
        lw, sw = csv.writer(lf), csv.writer(sf)
        lw.writerow(["odorant"] + [name for _, name in desc_cols])
        sw.writerow(["id", "structure"])
        for i, row in enumerate(rows):
            raw_id = row[id_idx].strip()
            # molecule ids must not contain the mixture separator
            mol_id = raw_id.replace(";", "_") or f"row{i}"
            values = []
            for j, _ in desc_cols:
                cell = row[j].strip()
                if cell in ("0", "1"):
                    values.append(cell)
                else:
                    values.append("1" if float(cell) >= 0.5 else "0")
            if "1" not in values:
                log.warning("gs-lf: dropping %s (no positive label)", mol_id)
                continue
            lw.writerow([mol_id] + values)
            sw.writerow([mol_id, raw_id])
            n_written += 1
    _warn_count("gs-lf", "rows", n_written, EXPECTED["gs-lf"]["rows"])
    _warn_count("gs-lf", "descriptors", len(desc_cols), EXPECTED["gs-lf"]["descriptors"])
    return labels_path, structures_path


def _read_per_subject(raw_path, subject_col, odorant_col):
    header, rows = _read_csv(raw_path)
    for col in (subject_col, odorant_col):
        if col not in header:
            raise ValueError(f"{raw_path}: no column {col!r}")
    s_idx, o_idx = header.index(subject_col), header.index(odorant_col)
    desc = [(j, n) for j, n in enumerate(header) if j not in (s_idx, o_idx)]
    records = []
    for row in rows:
        values = [row[j].strip() for j, _ in desc]
        records.append((row[s_idx].strip(), row[o_idx].strip(), values))
    return [n for _, n in desc], records


def _write_per_subject_and_means(source, out_dir, descriptors, records, value_range,
                                 keep_common_only=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    subjects = sorted({s for s, _, _ in records})
    odorants = list(dict.fromkeys(o for _, o, _ in records))

    if keep_common_only:
        rated = {s: set() for s in subjects}
        for s, _, values in records:
            for name, cell in zip(descriptors, values):
                if cell != "":
                    rated[s].add(name)
        common = [n for n in descriptors if all(n in rated[s] for s in subjects)]
        dropped = [n for n in descriptors if n not in common]
        if dropped:
            log.info("%s: dropping subject-specific descriptors %s", source, dropped)
    else:
        common = list(descriptors)
    keep_idx = [descriptors.index(n) for n in common]

    ps_path = out_dir / f"{source}_per_subject.csv"
    with open(ps_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "odorant"] + common)
        for s, o, values in records:
            w.writerow([s, o] + [values[j] for j in keep_idx])

    sums = defaultdict(lambda: np.zeros(len(common)))
    counts = defaultdict(lambda: np.zeros(len(common)))
    for _, o, values in records:
        for k, j in enumerate(keep_idx):
            if values[j] != "":
                sums[o][k] += float(values[j])
                counts[o][k] += 1
    ratings_path = out_dir / f"{source}_ratings.csv"
    with open(ratings_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + common)
        for o in odorants:
            if np.any(counts[o] == 0):
                log.warning("%s: dropping odorant %s (unrated descriptor)", source, o)
                continue
            mean = sums[o] / counts[o]
            mean = np.clip(mean, value_range[0], value_range[1])
            w.writerow([o] + [repr(float(v)) for v in mean])
    ratings_path.with_suffix(".json").write_text(
        json.dumps({"range": list(value_range)}) + "\n"
    )
    _warn_count(source, "rows", len(odorants), EXPECTED[source].get("rows"))
    _warn_count(source, "descriptors", len(common), EXPECTED[source].get("descriptors"))
    return ps_path, ratings_path


def convert_keller(raw_path, out_dir, subject_col="subject", odorant_col="cid",
                   value_range=(0.0, 100.0)):
    descriptors, records = _read_per_subject(raw_path, subject_col, odorant_col)
    return _write_per_subject_and_means("keller", out_dir, descriptors, records,
                                        value_range)


def convert_sagar(raw_path, out_dir, subject_col="subject", odorant_col="cid",
                  value_range=(-1.0, 1.0)):
    descriptors, records = _read_per_subject(raw_path, subject_col, odorant_col)
    return _write_per_subject_and_means("sagar", out_dir, descriptors, records,
                                        value_range, keep_common_only=True)


def _convert_pairs(source, raw_path, out_dir, a_col, b_col, score_col, polarity,
                   value_range=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = _read_csv(raw_path)
    for col in (a_col, b_col, score_col):
        if col not in header:
            raise ValueError(f"{raw_path}: no column {col!r}")
    ai, bi, si = header.index(a_col), header.index(b_col), header.index(score_col)
    pooled = defaultdict(list)
    order = []
    for row in rows:
        a, b = row[ai].strip(), row[bi].strip()
        key = (a, b) if a <= b else (b, a)
        if key not in pooled:
            order.append(key)
        pooled[key].append(float(row[si]))
    means = {k: float(np.mean(v)) for k, v in pooled.items()}
    if value_range is None:
        lo = min(means.values())
        hi = max(means.values())
        pad = (hi - lo or 1.0) * 1e-9
        value_range = (lo - pad, hi + pad)
        log.info("%s: inferred score range [%g, %g]", source, *value_range)
    pairs_path = out_dir / f"{source}_pairs.csv"
    with open(pairs_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant_a", "odorant_b", "score"])
        for a, b in order:
            w.writerow([a, b, repr(means[(a, b)])])
    pairs_path.with_suffix(".json").write_text(
        json.dumps({"range": list(value_range), "polarity": polarity}) + "\n"
    )
    n_dup = sum(len(v) - 1 for v in pooled.values())
    if n_dup:
        log.info("%s: averaged %d repeated pair ratings", source, n_dup)
    _warn_count(source, "pairs", len(order), EXPECTED[source].get("pairs"))
    return (pairs_path,)


def convert_snitz(raw_path, out_dir, a_col="odorant_a", b_col="odorant_b",
                  score_col="score", polarity="similarity", value_range=None):
    return _convert_pairs("snitz", raw_path, out_dir, a_col, b_col, score_col,
                          polarity, value_range)


def convert_ravia(raw_path, out_dir, a_col="odorant_a", b_col="odorant_b",
                  score_col="score", polarity="similarity", value_range=None):
    return _convert_pairs("ravia", raw_path, out_dir, a_col, b_col, score_col,
                          polarity, value_range)


CONVERTERS = {
    "gs-lf": convert_gs_lf,
    "keller": convert_keller,
    "sagar": convert_sagar,
    "snitz": convert_snitz,
    "ravia": convert_ravia,
}


def convert_dataset(source: str, raw_path, out_dir, **kwargs):
    """Dispatch to the named converter; returns the produced paths."""
    if source not in CONVERTERS:
        raise ValueError(f"unknown source {source!r}; choose from {sorted(CONVERTERS)}")
    return CONVERTERS[source](raw_path, out_dir, **kwargs)
