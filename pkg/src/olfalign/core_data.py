"""Odorant data model, canonical file schemas, mixture aggregation, and
alignment ("join") between embedding tables and perceptual datasets.

File formats (all CSV, UTF-8, '.' decimal separator):

  embeddings      header ``id,f0,...,f{D-1}``; one row per molecule;
                  JSON manifest with model_name / layer / dim
  labels          ``odorant,<descriptor...>`` with 0/1 cells
  ratings         ``odorant,<descriptor...>`` real cells; JSON sidecar
                  declares ``range: [a, b]``
  per_subject     ``subject,odorant,<descriptor...>``; empty cell = missing
  pairs           ``odorant_a,odorant_b,score``; JSON sidecar declares
                  ``range`` and ``polarity`` ("similarity" or "distance")

Odorant keys join molecule ids with ';' (a mixture has several components).
All numeric payloads are float64. Every object is immutable after
construction, so instances are safe to share across threads.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestError, JoinError, OdorantLookupError, SchemaError

log = logging.getLogger(__name__)

MIXTURE_SEP = ";"


def _validate_molecule_id(token: str) -> str:
    if not token:
        raise SchemaError("empty molecule id token")
    if MIXTURE_SEP in token:
        raise SchemaError(f"molecule id {token!r} contains reserved {MIXTURE_SEP!r}")
    return token


@dataclass(frozen=True)
class Odorant:
    """A smell stimulus: one molecule or an ordered mixture of molecules."""

    components: tuple[str, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise SchemaError("odorant needs at least one component")
        for c in self.components:
            _validate_molecule_id(c)

    @property
    def key(self) -> str:
        return MIXTURE_SEP.join(self.components)

    def __str__(self) -> str:
        return self.key


def parse_odorant_key(key: str) -> Odorant:
    """Parse a ';'-joined odorant key, trimming whitespace per token."""
    if not key or not key.strip():
        raise SchemaError("empty odorant key")
    tokens = [t.strip() for t in key.split(MIXTURE_SEP)]
    if any(not t for t in tokens):
        raise SchemaError(f"odorant key {key!r} has an empty component token")
    return Odorant(tuple(tokens))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingTable:
    """n x D matrix of per-molecule representations from one model layer."""

    ids: tuple[str, ...]
    matrix: np.ndarray
    model_name: str
    layer: int | str
    digest: str = ""
    manifest_digest: str = ""
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        n, d = self.matrix.shape
        if n != len(self.ids):
            raise IngestError(f"{len(self.ids)} ids but {n} matrix rows")
        if d <= 0:
            raise IngestError("embedding dimension must be positive")
        if len(set(self.ids)) != len(self.ids):
            raise IngestError("duplicate molecule ids in embedding table")
        if not np.all(np.isfinite(self.matrix)):
            r, c = np.argwhere(~np.isfinite(self.matrix))[0]
            raise IngestError(
                f"non-finite value at row {int(r)} ({self.ids[int(r)]}), column {int(c)}"
            )
        if not (isinstance(self.layer, int) and self.layer >= 0) and self.layer != "final":
            raise IngestError(f"layer must be a non-negative integer or 'final', got {self.layer!r}")
        for i in self.ids:
            _validate_molecule_id(i)
        object.__setattr__(self, "index", {m: i for i, m in enumerate(self.ids)})

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def save(self, path, manifest_path) -> None:
        """Write the canonical CSV + manifest pair (repr floats round-trip)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id"] + [f"f{j}" for j in range(self.dim)])
            for mid, row in zip(self.ids, self.matrix):
                w.writerow([mid] + [repr(float(v)) for v in row])
        manifest = {"model_name": self.model_name, "layer": self.layer, "dim": self.dim}
        Path(manifest_path).write_text(json.dumps(manifest, sort_keys=True) + "\n")


def load_embedding_table(path, manifest) -> EmbeddingTable:
    """Load an embedding CSV validated against its JSON manifest."""
    path, manifest = Path(path), Path(manifest)
    try:
        meta = json.loads(manifest.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise IngestError(f"cannot read manifest {manifest}: {e}") from e
    for key in ("model_name", "layer", "dim"):
        if key not in meta:
            raise IngestError(f"manifest {manifest} missing field {key!r}")
    dim = int(meta["dim"])

    ids, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0] != "id":
            raise IngestError(f"{path}: first header column must be 'id'")
        if len(header) != dim + 1:
            raise IngestError(
                f"{path}: header has {len(header) - 1} feature columns, manifest declares dim={dim}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise IngestError(
                    f"{path} row {lineno} ({row[0]!r}): {len(row) - 1} values, expected {dim}"
                )
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise IngestError(f"{path} row {lineno} ({row[0]!r}): {e}") from e
    if not ids:
        raise IngestError(f"{path}: no data rows")
    seen = set()
    for mid in ids:
        if mid in seen:
            raise IngestError(f"{path}: duplicate id {mid!r}")
        seen.add(mid)
    matrix = np.asarray(rows, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        r, c = bad[0]
        raise IngestError(f"{path}: non-finite value at row {ids[int(r)]!r}, column f{int(c)}")
    return EmbeddingTable(
        ids=tuple(ids),
        matrix=matrix,
        model_name=str(meta["model_name"]),
        layer=meta["layer"] if meta["layer"] == "final" else int(meta["layer"]),
        digest=_sha256(path),
        manifest_digest=_sha256(manifest),
    )


@dataclass(frozen=True)
class BinaryLabelSet:
    """Expert 0/1 labels: one row per odorant, one column per descriptor."""

    odorants: tuple[Odorant, ...]
    descriptors: tuple[str, ...]
    labels: np.ndarray
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "labels", _freeze(self.labels))
        n, d = self.labels.shape
        if n != len(self.odorants) or d != len(self.descriptors):
            raise SchemaError("label matrix shape does not match odorants/descriptors")
        if len(set(self.descriptors)) != d:
            raise SchemaError("descriptor names must be unique")
        if not np.all((self.labels == 0.0) | (self.labels == 1.0)):
            raise SchemaError("labels must be 0 or 1")
        empty = np.flatnonzero(self.labels.sum(axis=1) == 0)
        if empty.size:
            raise SchemaError(
                f"odorant {self.odorants[int(empty[0])].key!r} has no positive label"
            )

    @property
    def n(self) -> int:
        return len(self.odorants)


@dataclass(frozen=True)
class RatingSet:
    """Mean continuous ratings within a declared [a, b] range."""

    odorants: tuple[Odorant, ...]
    descriptors: tuple[str, ...]
    ratings: np.ndarray
    range: tuple[float, float]
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ratings", _freeze(self.ratings))
        a, b = self.range
        if not a < b:
            raise SchemaError(f"rating range must satisfy a < b, got ({a}, {b})")
        n, d = self.ratings.shape
        if n != len(self.odorants) or d != len(self.descriptors):
            raise SchemaError("rating matrix shape does not match odorants/descriptors")
        if len(set(self.descriptors)) != d:
            raise SchemaError("descriptor names must be unique")
        if not np.all(np.isfinite(self.ratings)):
            raise SchemaError("ratings must be finite")
        if self.ratings.size and (self.ratings.min() < a or self.ratings.max() > b):
            i, j = np.argwhere((self.ratings < a) | (self.ratings > b))[0]
            raise SchemaError(
                f"rating {self.ratings[i, j]} for {self.odorants[int(i)].key!r}/"
                f"{self.descriptors[int(j)]!r} outside [{a}, {b}]"
            )

    @property
    def n(self) -> int:
        return len(self.odorants)


@dataclass(frozen=True)
class PerSubjectRatings:
    """Per-participant ratings (s x n x d, NaN marks a missing rating)."""

    subjects: tuple[str, ...]
    odorants: tuple[Odorant, ...]
    descriptors: tuple[str, ...]
    ratings: np.ndarray
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ratings", _freeze(self.ratings))
        if len(set(self.subjects)) != len(self.subjects):
            raise SchemaError("subject ids must be unique")
        s, n, d = self.ratings.shape
        if s != len(self.subjects) or n != len(self.odorants) or d != len(self.descriptors):
            raise SchemaError("rating array shape does not match subjects/odorants/descriptors")


@dataclass(frozen=True)
class SimilarityJudgmentSet:
    """Mean human similarity ratings over odorant pairs."""

    pairs: tuple[tuple[Odorant, Odorant], ...]
    scores: np.ndarray
    scale: tuple[float, float]
    polarity: str = "similarity"
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scores", _freeze(self.scores))
        if self.scores.ndim != 1 or len(self.pairs) != self.scores.shape[0]:
            raise SchemaError("one score per pair required")
        if self.polarity not in ("similarity", "distance"):
            raise SchemaError(f"polarity must be 'similarity' or 'distance', got {self.polarity!r}")
        a, b = self.scale
        if not a < b:
            raise SchemaError(f"score scale must satisfy a < b, got ({a}, {b})")
        if self.scores.size and (self.scores.min() < a or self.scores.max() > b):
            raise SchemaError("similarity score outside declared scale")
        seen = set()
        for oa, ob in self.pairs:
            k = frozenset((oa.key, ob.key)) if oa.key != ob.key else frozenset((oa.key,))
            if k in seen:
                raise SchemaError(f"duplicate unordered pair ({oa.key!r}, {ob.key!r})")
            seen.add(k)


PerceptualData = BinaryLabelSet | RatingSet | PerSubjectRatings | SimilarityJudgmentSet


def _read_table_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        rows = [r for r in reader if r]
    return header, rows


def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _load_sidecar(path, sidecar):
    sidecar = Path(sidecar) if sidecar is not None else _sidecar_path(path)
    try:
        return json.loads(sidecar.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read sidecar {sidecar}: {e}") from e


def load_perceptual(path, kind: str, sidecar=None) -> PerceptualData:
    """Load and validate a perceptual file of the given kind.

    kind is one of 'labels', 'ratings', 'per_subject', 'pairs'. Ratings and
    pairs need a JSON sidecar (default: same path with a .json suffix).
    """
    path = Path(path)
    digest = _sha256(path)
    if kind == "labels":
        header, rows = _read_table_csv(path)
        if header[0] != "odorant":
            raise SchemaError(f"{path}: first column must be 'odorant'")
        descriptors = tuple(header[1:])
        odorants, mat = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path} row {lineno}: wrong cell count")
            odorants.append(parse_odorant_key(row[0]))
            vals = []
            for j, cell in enumerate(row[1:]):
                if cell not in ("0", "1"):
                    raise SchemaError(
                        f"{path} row {lineno}, column {descriptors[j]!r}: "
                        f"label {cell!r} not in {{0, 1}}"
                    )
                vals.append(float(cell))
            mat.append(vals)
        keys = [o.key for o in odorants]
        if len(set(keys)) != len(keys):
            raise SchemaError(f"{path}: duplicate odorant rows")
        return BinaryLabelSet(tuple(odorants), descriptors, np.asarray(mat), digest=digest)

    if kind == "ratings":
        meta = _load_sidecar(path, sidecar)
        if "range" not in meta:
            raise SchemaError(f"ratings sidecar for {path} must declare 'range'")
        a, b = (float(v) for v in meta["range"])
        header, rows = _read_table_csv(path)
        if header[0] != "odorant":
            raise SchemaError(f"{path}: first column must be 'odorant'")
        descriptors = tuple(header[1:])
        odorants, mat = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path} row {lineno}: wrong cell count")
            odorants.append(parse_odorant_key(row[0]))
            try:
                mat.append([float(c) for c in row[1:]])
            except ValueError as e:
                raise SchemaError(f"{path} row {lineno}: {e}") from e
        keys = [o.key for o in odorants]
        if len(set(keys)) != len(keys):
            raise SchemaError(f"{path}: duplicate odorant rows")
        return RatingSet(tuple(odorants), descriptors, np.asarray(mat), (a, b), digest=digest)

    if kind == "per_subject":
        header, rows = _read_table_csv(path)
        if header[:2] != ["subject", "odorant"]:
            raise SchemaError(f"{path}: columns must start with 'subject,odorant'")
        descriptors = tuple(header[2:])
        subjects, odorants = [], []
        cells = {}
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path} row {lineno}: wrong cell count")
            subj, okey = row[0], row[1]
            if subj not in subjects:
                subjects.append(subj)
            od = parse_odorant_key(okey)
            if od.key not in (o.key for o in odorants):
                odorants.append(od)
            if (subj, od.key) in cells:
                raise SchemaError(f"{path} row {lineno}: duplicate (subject, odorant) row")
            vals = [float(c) if c.strip() else np.nan for c in row[2:]]
            cells[(subj, od.key)] = vals
        arr = np.full((len(subjects), len(odorants), len(descriptors)), np.nan)
        for si, s in enumerate(subjects):
            for oi, o in enumerate(odorants):
                if (s, o.key) in cells:
                    arr[si, oi, :] = cells[(s, o.key)]
        return PerSubjectRatings(tuple(subjects), tuple(odorants), descriptors, arr, digest=digest)

    if kind == "pairs":
        meta = _load_sidecar(path, sidecar)
        for key in ("range", "polarity"):
            if key not in meta:
                raise SchemaError(f"pairs sidecar for {path} must declare {key!r}")
        a, b = (float(v) for v in meta["range"])
        header, rows = _read_table_csv(path)
        if header != ["odorant_a", "odorant_b", "score"]:
            raise SchemaError(f"{path}: header must be odorant_a,odorant_b,score")
        pairs, scores = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != 3:
                raise SchemaError(f"{path} row {lineno}: wrong cell count")
            pairs.append((parse_odorant_key(row[0]), parse_odorant_key(row[1])))
            try:
                scores.append(float(row[2]))
            except ValueError as e:
                raise SchemaError(f"{path} row {lineno}: {e}") from e
        return SimilarityJudgmentSet(
            tuple(pairs), np.asarray(scores), (a, b), str(meta["polarity"]), digest=digest
        )

    raise ValueError(f"unknown perceptual kind {kind!r}")


def mixture_embedding(table: EmbeddingTable, odorant: Odorant) -> np.ndarray:
    """Unweighted mean of the component rows of a (possibly mixture) odorant.

    Components are summed in sorted row order so the result is invariant
    under permutation of components, and the mean is computed relative to
    the first row so k identical components reproduce that row exactly.
    """
    missing = [c for c in odorant.components if c not in table.index]
    if missing:
        raise OdorantLookupError(missing)
    idx = sorted(table.index[c] for c in odorant.components)
    base = table.matrix[idx[0]]
    if all(i == idx[0] for i in idx):
        return base.copy()
    return base + (table.matrix[idx] - base).mean(axis=0)


def resolvable(table: EmbeddingTable, odorant: Odorant) -> bool:
    return all(c in table.index for c in odorant.components)


@dataclass(frozen=True)
class DatasetBundle:
    """Embedding rows aligned to a perceptual dataset, ready for probing.

    X is None for pair data (pair embeddings are materialized lazily from
    the retained table). n_dropped counts perceptual rows or pairs whose
    odorants could not be resolved in the table.
    """

    X: np.ndarray | None
    Y: PerceptualData
    table: EmbeddingTable
    dataset: str
    n_dropped: int = 0

    def __post_init__(self):
        if self.X is not None:
            object.__setattr__(self, "X", _freeze(self.X))

    @property
    def model_name(self) -> str:
        return self.table.model_name

    @property
    def layer(self):
        return self.table.layer

    @property
    def digests(self) -> tuple[str, ...]:
        out = [d for d in (self.table.digest, self.table.manifest_digest) if d]
        ydig = getattr(self.Y, "digest", "")
        if ydig:
            out.append(ydig)
        return tuple(out)


def join(table: EmbeddingTable, perceptual: PerceptualData, dataset: str = "") -> DatasetBundle:
    """Align embedding rows to perceptual rows (or pairs), in file order.

    Rows whose odorants have unresolvable components are dropped and
    counted; an empty intersection raises JoinError.
    """
    if isinstance(perceptual, (BinaryLabelSet, RatingSet)):
        keep = [i for i, o in enumerate(perceptual.odorants) if resolvable(table, o)]
        dropped = len(perceptual.odorants) - len(keep)
        if not keep:
            raise JoinError("no perceptual odorant is resolvable in the embedding table")
        if dropped:
            log.warning("join: dropped %d of %d odorants with unresolvable components",
                        dropped, len(perceptual.odorants))
        X = np.vstack([mixture_embedding(table, perceptual.odorants[i]) for i in keep])
        odorants = tuple(perceptual.odorants[i] for i in keep)
        if isinstance(perceptual, BinaryLabelSet):
            y = BinaryLabelSet(odorants, perceptual.descriptors,
                               perceptual.labels[keep], digest=perceptual.digest)
        else:
            y = RatingSet(odorants, perceptual.descriptors, perceptual.ratings[keep],
                          perceptual.range, digest=perceptual.digest)
        return DatasetBundle(X, y, table, dataset, n_dropped=dropped)

    if isinstance(perceptual, SimilarityJudgmentSet):
        keep = [
            i for i, (a, b) in enumerate(perceptual.pairs)
            if resolvable(table, a) and resolvable(table, b)
        ]
        dropped = len(perceptual.pairs) - len(keep)
        if not keep:
            raise JoinError("no odorant pair is resolvable in the embedding table")
        if dropped:
            log.warning("join: dropped %d of %d pairs with unresolvable components",
                        dropped, len(perceptual.pairs))
        y = SimilarityJudgmentSet(
            tuple(perceptual.pairs[i] for i in keep),
            perceptual.scores[list(keep)],
            perceptual.scale,
            perceptual.polarity,
            digest=perceptual.digest,
        )
        return DatasetBundle(None, y, table, dataset, n_dropped=dropped)

    raise TypeError(f"join does not support {type(perceptual).__name__}")
