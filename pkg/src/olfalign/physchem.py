"""Decoding physicochemical descriptors from embedding tables, per layer.

Reuses the lasso + nested-CV probe machinery: one regression per
descriptor under the standard repeated-split protocol. Descriptor targets
are z-scored before fitting (their scales are wildly heterogeneous) and
predictions are mapped back to the original scale before computing CC and
NRMSE; reports carry a target_zscored flag for this choice.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_data import EmbeddingTable, _sha256
from .errors import IngestError, JoinError
from .metrics import nrmse, pearson
from .errors import UndefinedMetricError
from .probes import (
    HyperGrid,
    ProbePreprocessing,
    SplitPlan,
    alpha_max,
    derive_seed,
    make_splits,
    nested_cv_select,
    predict_linear,
    _transforms,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DescriptorTable:
    """Per-molecule physicochemical descriptor values (15 columns)."""

    ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (len(self.ids), len(self.names)):
            raise IngestError("descriptor matrix shape does not match ids/names")
        if len(set(self.ids)) != len(self.ids):
            raise IngestError("duplicate ids in descriptor table")
        if not np.all(np.isfinite(self.values)):
            r, c = np.argwhere(~np.isfinite(self.values))[0]
            raise IngestError(
                f"non-finite descriptor value at {self.ids[int(r)]!r}/{self.names[int(c)]!r}"
            )


def load_descriptor_table(path) -> DescriptorTable:
    """CSV `id,<descriptor names...>` with real-valued cells."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise IngestError(f"{path}: first column must be 'id'")
        names = tuple(header[1:])
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(f"{path} row {lineno}: wrong cell count")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise IngestError(f"{path} row {lineno}: {e}") from e
    return DescriptorTable(tuple(ids), names, np.asarray(rows), digest=_sha256(path))


@dataclass(frozen=True)
class PhyschemResult:
    """Per-descriptor decoding quality across repetitions."""

    names: tuple[str, ...]
    cc_mean: np.ndarray
    cc_std: np.ndarray
    nrmse_mean: np.ndarray
    nrmse_std: np.ndarray
    n_reps: int
    undefined: tuple[str, ...]
    model_name: str
    layer: int | str
    target_zscored: bool = True


def run_physchem_decoding(
    table: EmbeddingTable,
    descriptors: DescriptorTable,
    plan: SplitPlan | None = None,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
    base_seed: int | None = None,
) -> PhyschemResult:
    """Lasso-decode each descriptor from the embedding rows and report
    per-descriptor CC and NRMSE (mean and std across repetitions).

    Rows are the intersection of ids; constant descriptor columns are
    marked undefined. A constant prediction (null model) counts as CC 0.
    """
    common = [i for i in table.ids if i in set(descriptors.ids)]
    if not common:
        raise JoinError("embedding table and descriptor table share no ids")
    dropped = len(descriptors.ids) - len(common)
    if dropped:
        log.warning("physchem: %d descriptor-table ids missing from embeddings", dropped)
    emb_idx = [table.index[i] for i in common]
    desc_index = {m: i for i, m in enumerate(descriptors.ids)}
    desc_idx = [desc_index[i] for i in common]
    X = table.matrix[emb_idx]
    Yd = descriptors.values[desc_idx]
    n = X.shape[0]
    if plan is None:
        plan = SplitPlan(n=n, base_seed=0 if base_seed is None else base_seed)
    if plan.n != n:
        raise ValueError(f"plan.n={plan.n} does not match joined rows {n}")

    splits = make_splits(plan)
    d = len(descriptors.names)
    cc = np.full((plan.repetitions, d), np.nan)
    err = np.full((plan.repetitions, d), np.nan)
    undefined = [bool(np.all(Yd[:, j] == Yd[0, j])) for j in range(d)]

    global_transform = None
    if preprocessing.pca_fit == "global":
        global_transform, _ = _transforms(X, preprocessing)
    for rep, (train_idx, test_idx) in enumerate(splits):
        transform = global_transform
        if transform is None:
            transform, _ = _transforms(X[train_idx], preprocessing)
        Z_train, Z_test = transform(X[train_idx]), transform(X[test_idx])
        for j in range(d):
            if undefined[j]:
                continue
            y = Yd[:, j]
            y_train, y_test = y[train_idx], y[test_idx]
            if np.all(y_train == y_train[0]):
                continue
            mu, sd = float(y_train.mean()), float(y_train.std())
            yz = (y_train - mu) / sd
            g = grid
            if g is None:
                a_max = alpha_max(Z_train, yz)
                if a_max <= 0.0:
                    continue
                g = HyperGrid.lasso_default(a_max)
            seed = derive_seed(plan.base_seed, rep, j)
            cv = nested_cv_select(Z_train, yz, "lasso", g, plan.inner_folds, seed)
            pred = predict_linear(cv.model, Z_test) * sd + mu
            try:
                cc[rep, j] = pearson(y_test, pred)[0]
            except UndefinedMetricError:
                # constant prediction or constant test target: null alignment
                cc[rep, j] = 0.0 if not np.all(y_test == y_test[0]) else np.nan
            try:
                err[rep, j] = nrmse(y_test, pred)
            except UndefinedMetricError:
                err[rep, j] = np.nan

    def _agg(a):
        with np.errstate(invalid="ignore"):
            counts = np.sum(~np.isnan(a), axis=0)
            mean = np.where(counts > 0, np.nansum(np.nan_to_num(a), axis=0) / np.maximum(counts, 1), np.nan)
            dev = np.where(np.isnan(a), 0.0, a - mean)
            var = np.where(counts > 0, (dev * dev).sum(axis=0) / np.maximum(counts, 1), np.nan)
        return mean, np.sqrt(var)

    cc_mean, cc_std = _agg(cc)
    er_mean, er_std = _agg(err)
    und = tuple(descriptors.names[j] for j in range(d) if undefined[j] or np.isnan(cc_mean[j]))
    return PhyschemResult(
        names=descriptors.names,
        cc_mean=cc_mean,
        cc_std=cc_std,
        nrmse_mean=er_mean,
        nrmse_std=er_std,
        n_reps=plan.repetitions,
        undefined=und,
        model_name=table.model_name,
        layer=table.layer,
    )


def physchem_layer_sweep(
    tables: list[EmbeddingTable],
    descriptors: DescriptorTable,
    plan: SplitPlan | None = None,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
) -> list[PhyschemResult]:
    """run_physchem_decoding per layer table, ordered by layer index."""
    if not tables:
        raise ValueError("no layer tables given")
    names = {t.model_name for t in tables}
    if len(names) != 1:
        raise ValueError(f"layer sweep mixes models: {sorted(names)}")
    layers = [t.layer for t in tables]
    if len(set(layers)) != len(layers):
        raise ValueError("duplicate layer indices in sweep")
    ids0 = set(tables[0].ids)
    for t in tables:
        if set(t.ids) != ids0:
            raise ValueError(f"layer {t.layer} id set differs from layer {tables[0].layer}")
    from .rsa import _layer_sort_key

    order = sorted(range(len(tables)), key=lambda i: _layer_sort_key(tables[i].layer))
    return [
        run_physchem_decoding(tables[i], descriptors, plan, grid, preprocessing)
        for i in order
    ]
