"""Acceptance checks that require real pretrained-model embeddings and the
converted public datasets.

These cannot run in a sandbox without model weights and raw data. Point
OLFALIGN_REAL_DATA at a directory with the layout below (produced by
`olfextract extract` / `olfextract convert`) and the tests activate:

  molformer_final.csv / molformer_final.manifest.json   (768-dim, final layer)
  molformer_layer{00..11}.csv + manifests               (optional, layer trends)
  dam_descriptors.csv / dam_descriptors.manifest.json   (15-dim baseline table)
  gs_lf_labels.csv
  keller_ratings.csv (+ .json)     keller_per_subject.csv
  sagar_ratings.csv (+ .json)      sagar_per_subject.csv
  snitz_pairs.csv (+ .json)        ravia_pairs.csv (+ .json)
"""

import os
from pathlib import Path

import numpy as np
import pytest

olfalign = pytest.importorskip("olfalign")

from olfalign.core_data import join, load_embedding_table, load_perceptual  # noqa: E402
from olfalign.metrics import noise_ceiling  # noqa: E402
from olfalign.pipelines import (  # noqa: E402
    AGGREGATE,
    run_label_classification,
    run_rating_regression,
)
from olfalign.probes import SplitPlan  # noqa: E402
from olfalign.rsa import layer_sweep, rsa_for_table  # noqa: E402

DATA_DIR = os.environ.get("OLFALIGN_REAL_DATA", "")


def _need(*names):
    if not DATA_DIR:
        pytest.skip("OLFALIGN_REAL_DATA not set (real model weights and raw "
                    "datasets are unavailable in this environment)")
    missing = [n for n in names if not (Path(DATA_DIR) / n).exists()]
    if missing:
        pytest.skip(f"missing real-data files: {missing}")
    return Path(DATA_DIR)


def _spearman(x, y):
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    return float(np.corrcoef(rx, ry)[0, 1])


class TestRsaRealData:
    def test_snitz_correlation(self):
        d = _need("molformer_final.csv", "molformer_final.manifest.json",
                  "snitz_pairs.csv", "snitz_pairs.json")
        table = load_embedding_table(d / "molformer_final.csv",
                                     d / "molformer_final.manifest.json")
        pairs = load_perceptual(d / "snitz_pairs.csv", "pairs")
        res = rsa_for_table(table, join(table, pairs, "snitz").Y)
        assert res.r == pytest.approx(0.64, abs=0.05)

    def test_ravia_correlation(self):
        d = _need("molformer_final.csv", "molformer_final.manifest.json",
                  "ravia_pairs.csv", "ravia_pairs.json")
        table = load_embedding_table(d / "molformer_final.csv",
                                     d / "molformer_final.manifest.json")
        pairs = load_perceptual(d / "ravia_pairs.csv", "pairs")
        res = rsa_for_table(table, join(table, pairs, "ravia").Y)
        assert res.r == pytest.approx(0.66, abs=0.05)

    def test_layer_trend_positive(self):
        names = [f"molformer_layer{i:02d}.csv" for i in range(12)]
        d = _need(*names, "snitz_pairs.csv")
        tables = [load_embedding_table(d / f"molformer_layer{i:02d}.csv",
                                       d / f"molformer_layer{i:02d}.manifest.json")
                  for i in range(12)]
        pairs = load_perceptual(d / "snitz_pairs.csv", "pairs")
        results = layer_sweep(tables, pairs)
        layers = np.arange(len(results), dtype=float)
        assert _spearman(layers, np.array([r.r for r in results])) > 0.0


class TestRegressionRealData:
    @pytest.mark.parametrize("dataset,expected", [("keller", 0.20), ("sagar", 0.25)])
    def test_mean_cc(self, dataset, expected):
        d = _need("molformer_final.csv", f"{dataset}_ratings.csv",
                  f"{dataset}_ratings.json")
        table = load_embedding_table(d / "molformer_final.csv",
                                     d / "molformer_final.manifest.json")
        ratings = load_perceptual(d / f"{dataset}_ratings.csv", "ratings")
        bundle = join(table, ratings, dataset)
        out = run_rating_regression(bundle, SplitPlan(n=bundle.X.shape[0], base_seed=0))
        cc = [r for r in out.report.rows
              if r.descriptor == AGGREGATE and r.metric == "cc"][0]
        assert cc.mean == pytest.approx(expected, abs=0.05)


class TestClassificationRealData:
    def test_transformer_beats_descriptor_baseline(self):
        d = _need("molformer_final.csv", "dam_descriptors.csv",
                  "dam_descriptors.manifest.json", "gs_lf_labels.csv")
        labels = load_perceptual(d / "gs_lf_labels.csv", "labels")
        aucs = {}
        for name in ("molformer_final", "dam_descriptors"):
            table = load_embedding_table(d / f"{name}.csv", d / f"{name}.manifest.json")
            bundle = join(table, labels, "gs-lf")
            out = run_label_classification(bundle,
                                           SplitPlan(n=bundle.X.shape[0], base_seed=0))
            aucs[name] = [r for r in out.report.rows
                          if r.metric == "roc_auc_micro"][0].mean
        assert aucs["molformer_final"] > aucs["dam_descriptors"]


class TestNoiseCeilingRealData:
    @pytest.mark.parametrize("dataset,overall,spot,spot_value", [
        ("keller", 0.28, "Intensity", 0.53),
        ("sagar", 0.70, "Fishy", 0.75),
    ])
    def test_overall_and_spot(self, dataset, overall, spot, spot_value):
        d = _need(f"{dataset}_per_subject.csv")
        data = load_perceptual(d / f"{dataset}_per_subject.csv", "per_subject")
        nc = noise_ceiling(data)
        assert nc.overall[0] == pytest.approx(overall, abs=0.03)
        assert nc.per_descriptor[spot] == pytest.approx(spot_value, abs=0.02)


class TestPhyschemRealData:
    def test_layer_trend_negative(self):
        names = [f"molformer_layer{i:02d}.csv" for i in range(12)]
        d = _need(*names, "dam_descriptors_values.csv")
        from olfalign.physchem import load_descriptor_table, physchem_layer_sweep

        tables = [load_embedding_table(d / f"molformer_layer{i:02d}.csv",
                                       d / f"molformer_layer{i:02d}.manifest.json")
                  for i in range(12)]
        desc = load_descriptor_table(d / "dam_descriptors_values.csv")
        results = physchem_layer_sweep(tables, desc,
                                       SplitPlan(n=len(set(tables[0].ids)
                                                       & set(desc.ids)), base_seed=0))
        layers = np.arange(len(results), dtype=float)
        means = np.array([float(np.nanmean(r.cc_mean)) for r in results])
        assert _spearman(layers, means) < 0.0
