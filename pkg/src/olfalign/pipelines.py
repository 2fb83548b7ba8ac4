"""Experiment pipelines: classification, regression, RSA, physchem
decoding, noise ceilings, and the PCA scatter, each emitting an
AlignmentReport whose rows are reproducible from (inputs, config, seed).

Report CSV schema: task,dataset,model,layer,descriptor,metric,mean,std,n,
input_digest. Aggregate rows use descriptor "__mean__" and their mean
column is the arithmetic mean of the constituent per-descriptor rows; the
std column is the spread across repetitions of the per-repetition
descriptor average (the classification micro row pools cells instead, so
it has no per-descriptor constituents). All floats are written with repr
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_data import BinaryLabelSet, DatasetBundle, EmbeddingTable, PerSubjectRatings, _sha256
from .errors import SchemaError, UndefinedMetricError
from .metrics import NoiseCeiling, RocCurve, noise_ceiling, nrmse, pearson, roc_auc_micro, roc_curve
from .physchem import DescriptorTable, PhyschemResult, run_physchem_decoding
from .preproc import apply_pca, fit_pca
from .probes import (
    HyperGrid,
    ProbePreprocessing,
    ProbeRunResult,
    SplitPlan,
    run_probe_protocol,
)
from .rsa import RsaResult, rsa_for_table

log = logging.getLogger(__name__)

AGGREGATE = "__mean__"
POOLED = "__pooled__"


@dataclass(frozen=True)
class ReportRow:
    task: str
    dataset: str
    model: str
    layer: int | str
    descriptor: str
    metric: str
    mean: float
    std: float | None
    n: int


@dataclass
class AlignmentReport:
    task: str
    rows: list[ReportRow]
    input_digest: str
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "dataset", "model", "layer", "descriptor",
                        "metric", "mean", "std", "n", "input_digest"])
            for r in self.rows:
                w.writerow([
                    r.task, r.dataset, r.model, r.layer, r.descriptor, r.metric,
                    _fmt(r.mean), _fmt(r.std), r.n, self.input_digest,
                ])

    def write_config(self, path) -> None:
        snapshot = {
            "task": self.task,
            "seed": self.seed,
            "config": self.config,
            "input_digest": self.input_digest,
        }
        Path(path).write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def _digest_of(bundle: DatasetBundle) -> str:
    return ";".join(bundle.digests)


def _nan_stats(values: list[float]) -> tuple[float, float, int]:
    a = np.asarray([v for v in values if not np.isnan(v)], dtype=np.float64)
    if a.size == 0:
        return float("nan"), float("nan"), 0
    return float(a.mean()), float(a.std()), int(a.size)


# ---------------------------------------------------------------------------
# classification

@dataclass
class ClassificationOutput:
    report: AlignmentReport
    curves: list[RocCurve]          # one micro-pooled curve per repetition
    probe: ProbeRunResult
    n_dropped: int


def run_label_classification(
    bundle: DatasetBundle,
    plan: SplitPlan,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
    jobs: int = 1,
) -> ClassificationOutput:
    """Logistic probes per descriptor; micro ROC-AUC pooled per repetition."""
    if not isinstance(bundle.Y, BinaryLabelSet):
        raise TypeError("classification needs a BinaryLabelSet bundle")
    probe = run_probe_protocol(bundle, plan, "logistic", grid, preprocessing, jobs=jobs)

    by_rep: dict[int, list] = {}
    by_desc: dict[str, list[float]] = {}
    for p in probe.predictions:
        by_rep.setdefault(p.repetition, []).append(p)
        try:
            by_desc.setdefault(p.descriptor, []).append(roc_auc_micro(p.y_pred, p.y_true))
        except UndefinedMetricError:
            by_desc.setdefault(p.descriptor, []).append(float("nan"))

    curves, micro = [], []
    for rep in sorted(by_rep):
        preds = by_rep[rep]
        scores = np.concatenate([p.y_pred for p in preds])
        labels = np.concatenate([p.y_true for p in preds])
        curves.append(roc_curve(scores, labels))
        micro.append(curves[-1].auc)

    rows = []
    task, ds, model, layer = "classify", bundle.dataset, bundle.model_name, bundle.layer
    for name in bundle.Y.descriptors:
        if name not in by_desc:
            continue
        mean, std, n = _nan_stats(by_desc[name])
        if n:
            rows.append(ReportRow(task, ds, model, layer, name, "roc_auc", mean, std, n))
    m_mean, m_std, m_n = _nan_stats(micro)
    rows.append(ReportRow(task, ds, model, layer, POOLED, "roc_auc_micro", m_mean, m_std, m_n))
    report = AlignmentReport(task, rows, _digest_of(bundle), seed=plan.base_seed)
    return ClassificationOutput(report, curves, probe, bundle.n_dropped)


# ---------------------------------------------------------------------------
# regression

@dataclass
class RegressionOutput:
    report: AlignmentReport
    probe: ProbeRunResult
    null_model_count: int           # (rep, descriptor) cells where CV chose w = 0
    n_dropped: int


def run_rating_regression(
    bundle: DatasetBundle,
    plan: SplitPlan,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
    jobs: int = 1,
) -> RegressionOutput:
    """Lasso probes per descriptor; CC and NRMSE per descriptor plus the
    across-descriptor average (Table-style aggregate rows)."""
    from .core_data import RatingSet

    if not isinstance(bundle.Y, RatingSet):
        raise TypeError("regression needs a RatingSet bundle")
    probe = run_probe_protocol(bundle, plan, "lasso", grid, preprocessing, jobs=jobs)

    cc: dict[str, dict[int, float]] = {}
    er: dict[str, dict[int, float]] = {}
    null_count = 0
    for p in probe.predictions:
        if np.all(p.y_pred == p.y_pred[0]):
            null_count += 1
            value = 0.0 if not np.all(p.y_true == p.y_true[0]) else float("nan")
        else:
            try:
                value = pearson(p.y_true, p.y_pred)[0]
            except UndefinedMetricError:
                value = float("nan")
        cc.setdefault(p.descriptor, {})[p.repetition] = value
        try:
            er.setdefault(p.descriptor, {})[p.repetition] = nrmse(p.y_true, p.y_pred)
        except UndefinedMetricError:
            er.setdefault(p.descriptor, {})[p.repetition] = float("nan")

    rows = []
    task, ds, model, layer = "regress", bundle.dataset, bundle.model_name, bundle.layer
    desc_rows: dict[str, dict[str, float]] = {}
    for name in bundle.Y.descriptors:
        for metric, store in (("cc", cc), ("nrmse", er)):
            if name not in store:
                continue
            mean, std, n = _nan_stats(list(store[name].values()))
            if n:
                rows.append(ReportRow(task, ds, model, layer, name, metric, mean, std, n))
                desc_rows.setdefault(metric, {})[name] = mean
    for metric, store in (("cc", cc), ("nrmse", er)):
        per_desc_means = desc_rows.get(metric, {})
        if not per_desc_means:
            continue
        agg_mean = float(np.mean(list(per_desc_means.values())))
        # Table-style spread: std across repetitions of the per-repetition
        # descriptor average
        per_rep: dict[int, list[float]] = {}
        for name in per_desc_means:
            for rep, v in store[name].items():
                if not np.isnan(v):
                    per_rep.setdefault(rep, []).append(v)
        rep_means = [float(np.mean(v)) for _, v in sorted(per_rep.items())]
        agg_std = float(np.std(rep_means)) if rep_means else float("nan")
        rows.append(ReportRow(task, ds, model, layer, AGGREGATE, metric,
                              agg_mean, agg_std, len(per_desc_means)))
    report = AlignmentReport(task, rows, _digest_of(bundle), seed=plan.base_seed)
    return RegressionOutput(report, probe, null_count, bundle.n_dropped)


# ---------------------------------------------------------------------------
# RSA

@dataclass
class RsaOutput:
    report: AlignmentReport
    results: list[RsaResult]


def run_similarity_rsa(
    tables: list[EmbeddingTable],
    pairs_bundles: list[DatasetBundle],
    similarity: str = "cosine",
) -> RsaOutput:
    """RsaResult per (model, layer, dataset); rows double as bar-chart data
    (one layer) and layer-series data (several layers)."""
    if not tables or not pairs_bundles:
        raise ValueError("need at least one table and one pairs dataset")
    rows, results = [], []
    digests = []
    for bundle in pairs_bundles:
        for table in tables:
            res = rsa_for_table(table, bundle.Y, similarity)
            results.append(res)
            rows.append(ReportRow("rsa", bundle.dataset, table.model_name, table.layer,
                                  AGGREGATE, "rsa_r", res.r, None, res.n_pairs))
            rows.append(ReportRow("rsa", bundle.dataset, table.model_name, table.layer,
                                  AGGREGATE, "rsa_p_naive", res.p, None, res.n_pairs))
        digests.extend(bundle.digests)
    for t in tables:
        for d in (t.digest, t.manifest_digest):
            if d and d not in digests:
                digests.append(d)
    report = AlignmentReport("rsa", rows, ";".join(digests))
    return RsaOutput(report, results)


# ---------------------------------------------------------------------------
# noise ceiling

@dataclass
class NoiseCeilingOutput:
    report: AlignmentReport
    ceiling: NoiseCeiling


def run_noise_ceiling(
    data: PerSubjectRatings,
    dataset: str = "",
    leave_one_out: bool = False,
) -> NoiseCeilingOutput:
    """Per-descriptor noise-ceiling rows plus the across-descriptor mean."""
    nc = noise_ceiling(data, leave_one_out=leave_one_out)
    rows = []
    metric = "noise_ceiling_loo" if leave_one_out else "noise_ceiling"
    defined = []
    for j, name in enumerate(nc.descriptors):
        value = nc.per_descriptor[name]
        subj = nc.per_subject[:, j]
        subj = subj[~np.isnan(subj)]
        if np.isnan(value):
            continue
        rows.append(ReportRow("noise_ceiling", dataset, "human", "", name, metric,
                              value, float(subj.std()), int(subj.size)))
        defined.append(value)
    arr = np.asarray(defined)
    rows.append(ReportRow("noise_ceiling", dataset, "human", "", AGGREGATE, metric,
                          float(arr.mean()), float(arr.std()), int(arr.size)))
    report = AlignmentReport("noise_ceiling", rows, getattr(data, "digest", ""))
    return NoiseCeilingOutput(report, nc)


# ---------------------------------------------------------------------------
# physchem report wrapper

def physchem_report(result: PhyschemResult, dataset: str, digest: str) -> AlignmentReport:
    rows = []
    task, model, layer = "physchem", result.model_name, result.layer
    defined_cc = []
    for j, name in enumerate(result.names):
        if name in result.undefined:
            continue
        rows.append(ReportRow(task, dataset, model, layer, name, "cc",
                              float(result.cc_mean[j]), float(result.cc_std[j]), result.n_reps))
        rows.append(ReportRow(task, dataset, model, layer, name, "nrmse",
                              float(result.nrmse_mean[j]), float(result.nrmse_std[j]),
                              result.n_reps))
        defined_cc.append(float(result.cc_mean[j]))
    if defined_cc:
        arr = np.asarray(defined_cc)
        rows.append(ReportRow(task, dataset, model, layer, AGGREGATE, "cc",
                              float(arr.mean()), float(arr.std()), int(arr.size)))
    return AlignmentReport(task, rows, digest)


def run_physchem(
    table: EmbeddingTable,
    descriptors: DescriptorTable,
    plan: SplitPlan | None = None,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
    dataset: str = "",
) -> tuple[AlignmentReport, PhyschemResult]:
    result = run_physchem_decoding(table, descriptors, plan, grid, preprocessing)
    digest = ";".join(d for d in (table.digest, table.manifest_digest, descriptors.digest) if d)
    return physchem_report(result, dataset, digest), result


# ---------------------------------------------------------------------------
# PCA scatter (first two principal components with category groups)

@dataclass
class PcaScatterData:
    odorants: tuple[str, ...]
    coords: np.ndarray              # n x 2 (second column zero-padded if rank 1)
    broad_names: tuple[str, ...]
    broad_membership: np.ndarray    # n x 3 bool
    narrow_names: tuple[str, ...]
    narrow_membership: np.ndarray   # n x len(narrow) bool

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["odorant", "pc1", "pc2",
                        *[f"broad:{b}" for b in self.broad_names],
                        *[f"narrow:{m}" for m in self.narrow_names]])
            for i, key in enumerate(self.odorants):
                w.writerow([key, repr(float(self.coords[i, 0])), repr(float(self.coords[i, 1])),
                            *(int(v) for v in self.broad_membership[i]),
                            *(int(v) for v in self.narrow_membership[i])])


def run_pca_scatter(
    table: EmbeddingTable,
    labels: BinaryLabelSet,
    broad: list[str],
    narrow: list[str],
) -> PcaScatterData:
    """2-component PCA coordinates with broad shading / narrow outline groups."""
    if len(broad) != 3:
        raise ValueError(f"exactly 3 broad label names required, got {len(broad)}")
    for name in list(broad) + list(narrow):
        if name not in labels.descriptors:
            raise SchemaError(f"label {name!r} not among dataset descriptors")
    from .core_data import join

    bundle = join(table, labels, dataset="pca_scatter")
    model = fit_pca(bundle.X, k=min(2, min(bundle.X.shape)))
    coords = apply_pca(model, bundle.X)
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    didx = {name: i for i, name in enumerate(bundle.Y.descriptors)}
    broad_m = np.stack([bundle.Y.labels[:, didx[b]] == 1.0 for b in broad], axis=1)
    narrow_m = (
        np.stack([bundle.Y.labels[:, didx[m]] == 1.0 for m in narrow], axis=1)
        if narrow else np.zeros((bundle.X.shape[0], 0), dtype=bool)
    )
    return PcaScatterData(
        odorants=tuple(o.key for o in bundle.Y.odorants),
        coords=coords[:, :2],
        broad_names=tuple(broad),
        broad_membership=broad_m,
        narrow_names=tuple(narrow),
        narrow_membership=narrow_m,
    )


# ---------------------------------------------------------------------------
# external prediction ingestion

@dataclass(frozen=True)
class ExternalPredictions:
    """Scores for (row_id, descriptor) cells produced outside the toolkit."""

    scores: dict
    digest: str = ""


def ingest_external_predictions(path) -> ExternalPredictions:
    """CSV `row_id,descriptor,score`; scores may lie outside [0, 1] because
    AUC only uses their order."""
    path = Path(path)
    scores = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["row_id", "descriptor", "score"]:
            raise SchemaError(f"{path}: header must be row_id,descriptor,score")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"{path} row {lineno}: wrong cell count")
            key = (row[0], row[1])
            if key in scores:
                raise SchemaError(f"{path} row {lineno}: duplicate cell {key}")
            try:
                scores[key] = float(row[2])
            except ValueError as e:
                raise SchemaError(f"{path} row {lineno}: {e}") from e
    return ExternalPredictions(scores=scores, digest=_sha256(path))


def evaluate_external_predictions(
    preds: ExternalPredictions, labels: BinaryLabelSet
) -> tuple[float, RocCurve]:
    """Micro ROC-AUC of an external score pool against a label set.

    Every (odorant, descriptor) cell of the label set must be scored;
    missing cells are reported explicitly.
    """
    missing = []
    pool_scores, pool_labels = [], []
    for i, o in enumerate(labels.odorants):
        for j, name in enumerate(labels.descriptors):
            key = (o.key, name)
            if key not in preds.scores:
                missing.append(key)
                continue
            pool_scores.append(preds.scores[key])
            pool_labels.append(labels.labels[i, j])
    if missing:
        shown = ", ".join(f"({r}, {d})" for r, d in missing[:10])
        raise SchemaError(
            f"{len(missing)} unscored (row, descriptor) cells, first: {shown}"
        )
    scores = np.asarray(pool_scores)
    lab = np.asarray(pool_labels)
    return roc_auc_micro(scores, lab), roc_curve(scores, lab)
