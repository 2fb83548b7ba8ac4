"""Command-line front end.

Subcommands: classify, regress, rsa, physchem, noise-ceiling, layers, rsm,
pca-scatter. Every run writes its outputs under --out together with a
run.json manifest (config snapshot, input digests, package version).

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
Defaults may come from a JSON config named by the OLFALIGN_CONFIG
environment variable (keys mirror flag names with underscores); explicit
flags always win. Seeds are never implicit.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_data import load_embedding_table, load_perceptual, join
from .errors import OlfalignError
from .physchem import load_descriptor_table
from .pipelines import (
    AGGREGATE,
    run_label_classification,
    run_noise_ceiling,
    run_pca_scatter,
    run_physchem,
    run_rating_regression,
    run_similarity_rsa,
    ingest_external_predictions,
    evaluate_external_predictions,
    ReportRow,
    AlignmentReport,
)
from .plots import (
    render_descriptor_bars_svg,
    render_layer_lines_svg,
    render_plots,
    render_roc_svg,
    render_rsm_svg,
    render_scatter_svg,
)
from .probes import HyperGrid, ProbePreprocessing, SplitPlan, dump_predictions
from .rsa import build_rsm, layer_sweep

log = logging.getLogger(__name__)

DEFAULTS = {
    "repetitions": 30,
    "test_fraction": 0.2,
    "inner_folds": 5,
    "pca_k": 20,
    "zscore": True,
    "pca_fit": "train",
    "jobs": 1,
    "dataset": "",
    "similarity": "cosine",
    "loo": False,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="olfalign",
        description="Alignment analyses between odorant embeddings and human perception data.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, seeded=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--dataset", default=None, help="dataset name recorded in reports")
        if seeded:
            p.add_argument("--seed", type=int, required=True, help="base random seed")
            p.add_argument("--repetitions", type=int, default=None)
            p.add_argument("--test-fraction", type=float, default=None, dest="test_fraction")
            p.add_argument("--inner-folds", type=int, default=None, dest="inner_folds")
            p.add_argument("--pca-k", type=int, default=None, dest="pca_k")
            p.add_argument("--no-zscore", action="store_false", dest="zscore", default=None)
            p.add_argument("--pca-fit", choices=("train", "global"), default=None, dest="pca_fit")
            p.add_argument("--grid", type=float, nargs="+", default=None,
                           help="explicit regularization strengths")
            p.add_argument("--jobs", type=int, default=None)

    def emb(p, multiple=False):
        kw = dict(action="append") if multiple else {}
        p.add_argument("--embeddings", required=True, **kw)
        p.add_argument("--manifest", required=True, **kw)

    p = sub.add_parser("classify", help="expert-label classification (logistic probes)")
    emb(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--external-predictions", default=None, dest="external_predictions",
                   help="CSV of externally produced scores to evaluate on the same labels")
    common(p)

    p = sub.add_parser("regress", help="continuous-rating regression (lasso probes)")
    emb(p)
    p.add_argument("--ratings", required=True)
    p.add_argument("--ratings-sidecar", default=None, dest="ratings_sidecar")
    common(p)

    p = sub.add_parser("rsa", help="representational similarity analysis")
    emb(p, multiple=True)
    p.add_argument("--pairs", required=True, action="append")
    p.add_argument("--pairs-sidecar", default=None, action="append", dest="pairs_sidecar")
    p.add_argument("--angle", action="store_true", help="use angle similarity instead of cosine")
    common(p, seeded=False)

    p = sub.add_parser("physchem", help="physicochemical descriptor decoding")
    emb(p)
    p.add_argument("--descriptors", required=True)
    common(p)

    p = sub.add_parser("noise-ceiling", help="per-subject noise ceilings")
    p.add_argument("--per-subject", required=True, dest="per_subject")
    p.add_argument("--loo", action="store_true", default=None,
                   help="leave the subject out of the reference mean")
    common(p, seeded=False)

    p = sub.add_parser("layers", help="layer sweep for rsa or physchem")
    p.add_argument("--task", choices=("rsa", "physchem"), required=True)
    emb(p, multiple=True)
    p.add_argument("--pairs", default=None)
    p.add_argument("--pairs-sidecar", default=None, dest="pairs_sidecar")
    p.add_argument("--descriptors", default=None)
    p.add_argument("--angle", action="store_true")
    common(p)

    p = sub.add_parser("rsm", help="representational similarity matrices")
    emb(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--pairs-sidecar", default=None, dest="pairs_sidecar")
    common(p, seeded=False)

    p = sub.add_parser("pca-scatter", help="2-component PCA map with label groups")
    emb(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--broad", nargs=3, required=True, help="three broad label names (shaded)")
    p.add_argument("--narrow", nargs="*", default=None, help="narrow label names (outlined)")
    common(p, seeded=False)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Env-config defaults under explicit flags, then hard defaults."""
    cfg_env = {}
    cfg_path = os.environ.get("OLFALIGN_CONFIG")
    if cfg_path:
        cfg_env = json.loads(Path(cfg_path).read_text())
        if not isinstance(cfg_env, dict):
            raise OlfalignError("OLFALIGN_CONFIG must contain a JSON object")
    merged = {}
    for key, value in vars(args).items():
        if value is None and key in cfg_env:
            value = cfg_env[key]
        if value is None and key in DEFAULTS:
            value = DEFAULTS[key]
        merged[key] = value
    return merged


def _check_paths(cfg: dict) -> None:
    keys = ("embeddings", "manifest", "labels", "ratings", "pairs", "descriptors",
            "per_subject", "external_predictions", "ratings_sidecar", "pairs_sidecar")
    for key in keys:
        value = cfg.get(key)
        if value is None:
            continue
        paths = value if isinstance(value, list) else [value]
        for path in paths:
            if path is not None and not Path(path).exists():
                raise OlfalignError(f"input file does not exist: {path}")


def _plan(cfg: dict, n: int) -> SplitPlan:
    return SplitPlan(
        n=n,
        base_seed=int(cfg["seed"]),
        repetitions=int(cfg["repetitions"]),
        test_fraction=float(cfg["test_fraction"]),
        inner_folds=int(cfg["inner_folds"]),
    )


def _preprocessing(cfg: dict) -> ProbePreprocessing:
    return ProbePreprocessing(
        pca_k=int(cfg["pca_k"]) if cfg["pca_k"] else None,
        zscore=bool(cfg["zscore"]),
        pca_fit=cfg["pca_fit"],
    )


def _grid(cfg: dict) -> HyperGrid | None:
    return HyperGrid(tuple(sorted(float(v) for v in cfg["grid"]))) if cfg.get("grid") else None


def _write_run_manifest(out: Path, cfg: dict, digests) -> None:
    manifest = {
        "version": __version__,
        "subcommand": cfg.get("subcommand"),
        "config": {k: v for k, v in sorted(cfg.items())},
        "input_digests": list(digests),
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _finish(report: AlignmentReport, cfg: dict, out: Path) -> None:
    report.config = {k: v for k, v in cfg.items() if k not in ("out",)}
    report.write_csv(out / "report.csv")
    report.write_config(out / "config.json")
    _write_run_manifest(out, cfg, report.input_digest.split(";") if report.input_digest else [])


def _load_single_table(cfg):
    emb, man = cfg["embeddings"], cfg["manifest"]
    if isinstance(emb, list):
        if len(emb) != 1 or len(man) != 1:
            raise OlfalignError("exactly one --embeddings/--manifest pair expected")
        emb, man = emb[0], man[0]
    return load_embedding_table(emb, man)


def _load_layer_tables(cfg):
    emb, man = cfg["embeddings"], cfg["manifest"]
    emb = emb if isinstance(emb, list) else [emb]
    man = man if isinstance(man, list) else [man]
    if len(emb) != len(man):
        raise OlfalignError(f"{len(emb)} embedding files but {len(man)} manifests")
    return [load_embedding_table(e, m) for e, m in zip(emb, man)]


def _write_roc_curves_csv(curves, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["repetition", "fpr", "tpr", "threshold"])
        for rep, c in enumerate(curves):
            for f, t, th in zip(c.fpr, c.tpr, c.thresholds):
                w.writerow([rep, repr(float(f)), repr(float(t)), repr(float(th))])


def _write_rsm_csv(rsm, stem: Path) -> None:
    with open(f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + list(rsm.odorants))
        for key, row in zip(rsm.odorants, rsm.matrix):
            w.writerow([key] + [repr(float(v)) for v in row])
    with open(f"{stem}_mask.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["odorant"] + list(rsm.odorants))
        for key, row in zip(rsm.odorants, rsm.mask):
            w.writerow([key] + [int(v) for v in row])


# ---------------------------------------------------------------------------
# subcommand implementations

def _cmd_classify(cfg: dict, out: Path) -> int:
    table = _load_single_table(cfg)
    labels = load_perceptual(cfg["labels"], "labels")
    bundle = join(table, labels, dataset=cfg["dataset"] or Path(cfg["labels"]).stem)
    plan = _plan(cfg, bundle.X.shape[0])
    result = run_label_classification(bundle, plan, _grid(cfg), _preprocessing(cfg),
                                      jobs=int(cfg["jobs"]))
    if cfg.get("external_predictions"):
        preds = ingest_external_predictions(cfg["external_predictions"])
        auc, _curve = evaluate_external_predictions(preds, bundle.Y)
        result.report.rows.append(ReportRow(
            "classify", bundle.dataset, "external", "", "__pooled__",
            "roc_auc_micro", auc, None, 1))
    _finish(result.report, cfg, out)
    dump_predictions(result.probe, out / "predictions.csv")
    _write_roc_curves_csv(result.curves, out / "roc_curves.csv")
    render_roc_svg(result.curves, out / "roc.svg")
    log.info("classification report written to %s (dropped %d odorants)",
             out, result.n_dropped)
    return 0


def _cmd_regress(cfg: dict, out: Path) -> int:
    table = _load_single_table(cfg)
    ratings = load_perceptual(cfg["ratings"], "ratings", sidecar=cfg.get("ratings_sidecar"))
    bundle = join(table, ratings, dataset=cfg["dataset"] or Path(cfg["ratings"]).stem)
    plan = _plan(cfg, bundle.X.shape[0])
    result = run_rating_regression(bundle, plan, _grid(cfg), _preprocessing(cfg),
                                   jobs=int(cfg["jobs"]))
    _finish(result.report, cfg, out)
    dump_predictions(result.probe, out / "predictions.csv")
    render_descriptor_bars_svg(result.report, "cc", out / "bars_cc.svg")
    render_descriptor_bars_svg(result.report, "nrmse", out / "bars_nrmse.svg")
    return 0


def _cmd_rsa(cfg: dict, out: Path) -> int:
    tables = _load_layer_tables(cfg)
    similarity = "angle" if cfg.get("angle") else "cosine"
    sidecars = cfg.get("pairs_sidecar") or [None] * len(cfg["pairs"])
    bundles = []
    for path, sidecar in zip(cfg["pairs"], sidecars):
        pairs = load_perceptual(path, "pairs", sidecar=sidecar)
        bundles.append(join(tables[0], pairs, dataset=cfg["dataset"] or Path(path).stem))
    result = run_similarity_rsa(tables, bundles, similarity)
    _finish(result.report, cfg, out)
    render_plots(result.report, out)
    return 0


def _cmd_physchem(cfg: dict, out: Path) -> int:
    table = _load_single_table(cfg)
    desc = load_descriptor_table(cfg["descriptors"])
    plan = _plan(cfg, len([i for i in table.ids if i in set(desc.ids)]))
    report, _result = run_physchem(
        table, desc, plan, _grid(cfg), _preprocessing(cfg),
        dataset=cfg["dataset"] or Path(cfg["descriptors"]).stem,
    )
    _finish(report, cfg, out)
    render_descriptor_bars_svg(report, "cc", out / "bars_cc.svg")
    return 0


def _cmd_noise_ceiling(cfg: dict, out: Path) -> int:
    data = load_perceptual(cfg["per_subject"], "per_subject")
    result = run_noise_ceiling(
        data,
        dataset=cfg["dataset"] or Path(cfg["per_subject"]).stem,
        leave_one_out=bool(cfg["loo"]),
    )
    _finish(result.report, cfg, out)
    metric = "noise_ceiling_loo" if cfg["loo"] else "noise_ceiling"
    render_descriptor_bars_svg(result.report, metric, out / "bars_nc.svg")
    return 0


def _cmd_layers(cfg: dict, out: Path) -> int:
    tables = _load_layer_tables(cfg)
    if cfg["task"] == "rsa":
        if not cfg.get("pairs"):
            raise OlfalignError("layers --task rsa needs --pairs")
        pairs = load_perceptual(cfg["pairs"], "pairs", sidecar=cfg.get("pairs_sidecar"))
        bundle = join(tables[0], pairs, dataset=cfg["dataset"] or Path(cfg["pairs"]).stem)
        similarity = "angle" if cfg.get("angle") else "cosine"
        results = layer_sweep(tables, bundle.Y, similarity)
        rows = []
        for r in results:
            rows.append(ReportRow("rsa", bundle.dataset, r.model_name, r.layer,
                                  AGGREGATE, "rsa_r", r.r, None, r.n_pairs))
            rows.append(ReportRow("rsa", bundle.dataset, r.model_name, r.layer,
                                  AGGREGATE, "rsa_p_naive", r.p, None, r.n_pairs))
        digests = [d for t in tables for d in (t.digest, t.manifest_digest) if d]
        digests.extend(bundle.digests)
        report = AlignmentReport("rsa", rows, ";".join(dict.fromkeys(digests)),
                                 seed=cfg.get("seed"))
        _finish(report, cfg, out)
        series = {"rsa_r": [(_layer_x(r.layer, i), r.r) for i, r in enumerate(results)]}
        render_layer_lines_svg(series, out / "layers.svg", "RSA r")
        return 0

    if not cfg.get("descriptors"):
        raise OlfalignError("layers --task physchem needs --descriptors")
    from .physchem import physchem_layer_sweep
    from .pipelines import physchem_report

    desc = load_descriptor_table(cfg["descriptors"])
    n = len([i for i in tables[0].ids if i in set(desc.ids)])
    plan = _plan(cfg, n)
    results = physchem_layer_sweep(tables, desc, plan, _grid(cfg), _preprocessing(cfg))
    rows = []
    dataset = cfg["dataset"] or Path(cfg["descriptors"]).stem
    for res in results:
        digest = ";".join(d for d in (desc.digest,) if d)
        rows.extend(physchem_report(res, dataset, digest).rows)
    digests = [d for t in tables for d in (t.digest, t.manifest_digest) if d] + [desc.digest]
    report = AlignmentReport("physchem", rows, ";".join(dict.fromkeys(digests)),
                             seed=cfg.get("seed"))
    _finish(report, cfg, out)
    series = {"mean cc": [
        (_layer_x(res.layer, i), float(np.nanmean(res.cc_mean))) for i, res in enumerate(results)
    ]}
    render_layer_lines_svg(series, out / "layers.svg", "mean decoding CC")
    return 0


def _layer_x(layer, fallback: int) -> float:
    return float(layer) if isinstance(layer, int) else float(fallback)


def _cmd_rsm(cfg: dict, out: Path) -> int:
    table = _load_single_table(cfg)
    pairs = load_perceptual(cfg["pairs"], "pairs", sidecar=cfg.get("pairs_sidecar"))
    bundle = join(table, pairs, dataset=cfg["dataset"] or Path(cfg["pairs"]).stem)
    odorants, seen = [], set()
    for a, b in bundle.Y.pairs:
        for o in (a, b):
            if o.key not in seen:
                seen.add(o.key)
                odorants.append(o)
    model_rsm = build_rsm(table, odorants)
    human_rsm = build_rsm(table, odorants, human=bundle.Y)
    _write_rsm_csv(model_rsm, out / "rsm_model")
    _write_rsm_csv(human_rsm, out / "rsm_human")
    render_rsm_svg(model_rsm, out / "rsm_model.svg", title="model RSM")
    render_rsm_svg(human_rsm, out / "rsm_human.svg", title="human RSM")
    rows = [ReportRow("rsa", bundle.dataset, table.model_name, table.layer, AGGREGATE,
                      "rsm_pairs_rated", float(human_rsm.mask.sum() // 2), None,
                      len(odorants))]
    report = AlignmentReport("rsa", rows, ";".join(bundle.digests))
    _finish(report, cfg, out)
    return 0


def _cmd_pca_scatter(cfg: dict, out: Path) -> int:
    table = _load_single_table(cfg)
    labels = load_perceptual(cfg["labels"], "labels")
    data = run_pca_scatter(table, labels, list(cfg["broad"]), list(cfg.get("narrow") or []))
    data.write_csv(out / "scatter.csv")
    render_scatter_svg(data, out / "scatter.svg")
    rows = [ReportRow("classify", cfg["dataset"] or Path(cfg["labels"]).stem,
                      table.model_name, table.layer, AGGREGATE, "pca_scatter_points",
                      float(len(data.odorants)), None, len(data.odorants))]
    report = AlignmentReport("classify", rows,
                             ";".join(d for d in (table.digest, table.manifest_digest,
                                                  labels.digest) if d))
    _finish(report, cfg, out)
    return 0


COMMANDS = {
    "classify": _cmd_classify,
    "regress": _cmd_regress,
    "rsa": _cmd_rsa,
    "physchem": _cmd_physchem,
    "noise-ceiling": _cmd_noise_ceiling,
    "layers": _cmd_layers,
    "rsm": _cmd_rsm,
    "pca-scatter": _cmd_pca_scatter,
}


def execute(argv: list[str]) -> int:
    """Parse argv, run the subcommand, and return a process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        _check_paths(cfg)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg["subcommand"]](cfg, out)
    except (OlfalignError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
