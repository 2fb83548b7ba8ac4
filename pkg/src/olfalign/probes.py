"""Regularized linear probes and the repeated-split evaluation protocol.

Models:
  * L2 logistic regression, fit by full-batch gradient descent with Armijo
    backtracking (monotone objective decrease, gradient-norm stopping).
  * Lasso linear regression, fit by cyclic coordinate descent with an
    unpenalized intercept; convergence requires both a small coefficient
    change and the KKT subgradient conditions.

Protocol: `repetitions` independent train/test partitions (default 30 at
80/20) with nested k-fold cross-validation (default 5) on the training
split to pick the regularization strength, then a refit on the full
training split and raw predictions on the held-out split.

Randomness: every split and shuffle comes from a Philox generator seeded
through numpy SeedSequence on (base_seed, repetition[, descriptor]), so any
(repetition, descriptor) task is a pure function of the config and results
are identical whether tasks run sequentially or in parallel.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .core_data import BinaryLabelSet, DatasetBundle, RatingSet
from .errors import (
    DegenerateTargetError,
    DimensionMismatchError,
    SelectionError,
    UndefinedMetricError,
)
from .preproc import apply_pca, apply_standardizer, fit_pca, fit_standardizer
from .metrics import roc_auc_micro

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# splits

@dataclass(frozen=True)
class SplitPlan:
    """Deterministic description of the repeated train/test protocol."""

    n: int
    base_seed: int
    repetitions: int = 30
    test_fraction: float = 0.2
    inner_folds: int = 5

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")


def _rng(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(*entropy) -> int:
    """Stable 64-bit seed derived from a tuple of integers."""
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def make_splits(plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, test) index pairs, one per repetition.

    Each repetition permutes 0..n-1 with Philox seeded on
    (base_seed, repetition) and takes the first round(test_fraction * n)
    indices as the test set. Index arrays are sorted.
    """
    if plan.n < 5:
        raise ValueError("need at least 5 samples to split")
    n_test = int(np.floor(plan.test_fraction * plan.n + 0.5))
    if n_test == 0 or n_test == plan.n:
        raise ValueError(
            f"test fraction {plan.test_fraction} gives a degenerate test set for n={plan.n}"
        )
    out = []
    for rep in range(plan.repetitions):
        perm = _rng(plan.base_seed, rep).permutation(plan.n)
        test = np.sort(perm[:n_test])
        train = np.sort(perm[n_test:])
        out.append((train, test))
    return out


# ---------------------------------------------------------------------------
# logistic regression

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2_strength: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logistic_objective(X, y, w, b, l2):
    m = X @ w + b
    # softplus(m) - y*m, stable for large |m|
    loss = float(np.mean(np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m))) - y * m))
    return loss + 0.5 * l2 * float(w @ w)


def _logistic_gradient(X, y, w, b, l2):
    p = _sigmoid(X @ w + b)
    resid = (p - y) / X.shape[0]
    return X.T @ resid + l2 * w, float(resid.sum())


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    l2_strength: float,
    tol: float = 1e-6,
    max_iter: int = 200_000,
    return_history: bool = False,
):
    """Minimize mean negative log-likelihood + l2/2 |w|^2 (bias unpenalized).

    Full-batch gradient descent with backtracking line search; stops when
    the gradient norm over (w, b) drops below tol. The objective decreases
    monotonically by construction.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError("X rows and y length differ")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if l2_strength <= 0.0:
        raise ValueError("l2_strength must be > 0")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("y must be 0/1")
    if classes.shape[0] < 2:
        raise DegenerateTargetError("y contains a single class")

    k = X.shape[1]
    w = np.zeros(k)
    b = 0.0
    f = _logistic_objective(X, y, w, b, l2_strength)
    history = [f]
    step = 1.0
    for _ in range(max_iter):
        gw, gb = _logistic_gradient(X, y, w, b, l2_strength)
        gnorm_sq = float(gw @ gw) + gb * gb
        if np.sqrt(gnorm_sq) <= tol:
            break
        # warm-start the line search from the last accepted step with mild growth
        step = min(step * 1.3, 1e6)
        accepted = False
        while step >= 1e-20:
            w_new = w - step * gw
            b_new = b - step * gb
            f_new = _logistic_objective(X, y, w_new, b_new, l2_strength)
            if f_new < f and f_new <= f - 1e-4 * step * gnorm_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # objective can no longer decrease in float64
        w, b, f = w_new, b_new, f_new
        history.append(f)
    log.debug("fit_logistic: %d iterations, objective %.6g -> %.6g",
              len(history) - 1, history[0], history[-1])
    model = LogisticModel(weights=w, bias=float(b), l2_strength=float(l2_strength))
    return (model, history) if return_history else model


def predict_logistic(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns, model expects {model.weights.shape[0]}"
        )
    return _sigmoid(X @ model.weights + model.bias)


# ---------------------------------------------------------------------------
# lasso regression

@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    l1_strength: float


def alpha_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest l1 strength for which the lasso solution is exactly zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.max(np.abs(X.T @ (y - y.mean())))) / X.shape[0]


def _soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def lasso_kkt_violation(X, y, model: LinearModel) -> float:
    """Max violation of the lasso stationarity conditions (0 at an optimum)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    r = y - X @ model.weights - model.bias
    g = X.T @ r / X.shape[0]
    alpha = model.l1_strength
    active = model.weights != 0.0
    viol = abs(float(np.mean(r)))
    if active.any():
        viol = max(viol, float(np.max(np.abs(g[active] - alpha * np.sign(model.weights[active])))))
    if (~active).any():
        viol = max(viol, float(np.max(np.maximum(np.abs(g[~active]) - alpha, 0.0))))
    return viol


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    l1_strength: float,
    tol: float = 1e-8,
    kkt_tol: float = 1e-6,
    max_iter: int = 10_000,
) -> LinearModel:
    """Minimize (1/2n)|y - Xw - b|^2 + alpha |w|_1 by cyclic coordinate
    descent with an unpenalized intercept.

    Columns are assumed standardized by the caller; a warning is logged
    when a penalized fit sees clearly unstandardized columns. A sweep ends
    with an intercept update; iteration stops once the largest parameter
    change falls below tol and the KKT conditions hold within kkt_tol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError("X rows and y length differ")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite inputs")
    if l1_strength < 0.0:
        raise ValueError("l1_strength must be >= 0")
    n, k = X.shape
    if l1_strength > 0.0 and k and n > 1:
        col_std = X.std(axis=0)
        if np.any(np.abs(X.mean(axis=0)) > 0.5) or np.any(np.abs(col_std - 1.0) > 0.5):
            log.warning("fit_lasso: columns do not look standardized; the l1 penalty "
                        "will weight features unevenly")

    col_sq = (X * X).sum(axis=0) / n
    w = np.zeros(k)
    b = float(y.mean())
    r = y - b
    cols = [np.ascontiguousarray(X[:, j]) for j in range(k)]
    for sweep in range(max_iter):
        delta = 0.0
        for j in range(k):
            if col_sq[j] == 0.0:
                continue
            wj = w[j]
            rho = float(cols[j] @ r) / n + col_sq[j] * wj
            wj_new = _soft_threshold(rho, l1_strength) / col_sq[j]
            if wj_new != wj:
                r -= cols[j] * (wj_new - wj)
                w[j] = wj_new
                delta = max(delta, abs(wj_new - wj))
        db = float(r.mean())
        if db != 0.0:
            b += db
            r -= db
            delta = max(delta, abs(db))
        if delta < tol:
            model = LinearModel(weights=w.copy(), bias=b, l1_strength=float(l1_strength))
            if lasso_kkt_violation(X, y, model) <= kkt_tol:
                return model
    model = LinearModel(weights=w.copy(), bias=b, l1_strength=float(l1_strength))
    # common for near-unidentifiable fits deep inside CV grids; the final
    # refit is what the KKT tests police
    log.debug("fit_lasso: hit max_iter=%d (KKT violation %.3e)",
              max_iter, lasso_kkt_violation(X, y, model))
    return model


def predict_linear(model: LinearModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns, model expects {model.weights.shape[0]}"
        )
    return X @ model.weights + model.bias


# ---------------------------------------------------------------------------
# nested cross-validation

@dataclass(frozen=True)
class HyperGrid:
    """Strictly increasing positive regularization strengths."""

    strengths: tuple[float, ...]

    def __post_init__(self):
        if not self.strengths:
            raise ValueError("empty hyperparameter grid")
        if any(s <= 0 for s in self.strengths):
            raise ValueError("strengths must be positive")
        if any(b <= a for a, b in zip(self.strengths, self.strengths[1:])):
            raise ValueError("strengths must be strictly increasing")

    @classmethod
    def logistic_default(cls) -> "HyperGrid":
        return cls(tuple(float(v) for v in np.logspace(-4, 2, 7)))

    @classmethod
    def lasso_default(cls, a_max: float) -> "HyperGrid":
        if a_max <= 0.0:
            raise ValueError("alpha_max is zero; features or target are degenerate")
        return cls(tuple(float(v) for v in a_max * np.logspace(-4, 0, 10)))


@dataclass(frozen=True)
class CvResult:
    strength: float
    inner_scores: tuple[float, ...]  # mean inner score per grid candidate (NaN = unscorable)
    model: object                    # refit LogisticModel or LinearModel
    folds_used: int


def _select_best(scores, strengths, model_kind: str) -> int:
    """Argmax with ties broken toward the smaller strength for logistic and
    the larger (sparser) strength for lasso."""
    best = None
    order = range(len(strengths)) if model_kind == "logistic" else range(len(strengths) - 1, -1, -1)
    for i in order:
        if np.isnan(scores[i]):
            continue
        if best is None or scores[i] > scores[best]:
            best = i
    if best is None:
        raise SelectionError("no hyperparameter candidate could be scored")
    return best


def _fit_for_kind(model_kind, X, y, strength, inner=False):
    if model_kind == "logistic":
        return fit_logistic(X, y, strength)
    if model_kind == "lasso":
        # inner scoring fits get a lighter iteration budget; only the refit
        # that leaves nested_cv_select needs full convergence
        return fit_lasso(X, y, strength, max_iter=2_000 if inner else 10_000)
    raise ValueError(f"unknown model kind {model_kind!r}")


def _score_for_kind(model_kind, model, X, y) -> float:
    if model_kind == "logistic":
        return roc_auc_micro(predict_logistic(model, X), y)
    pred = predict_linear(model, X)
    return -float(np.mean((y - pred) ** 2))


def nested_cv_select(
    X: np.ndarray,
    y: np.ndarray,
    model_kind: str,
    grid: HyperGrid,
    inner_folds: int,
    seed: int,
) -> CvResult:
    """Pick the grid strength with the best mean inner-fold validation score
    (ROC-AUC for logistic, negative MSE for lasso) and refit it on all rows.

    Inner folds are contiguous blocks of one seeded shuffle. Folds whose
    training part is single-class or whose validation score is undefined
    are skipped for every candidate alike; a grid with no scorable fold at
    all raises SelectionError.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < inner_folds:
        raise ValueError(f"n={n} smaller than inner_folds={inner_folds}")
    perm = _rng(seed).permutation(n)
    blocks = np.array_split(perm, inner_folds)
    strengths = grid.strengths
    fold_scores = np.full((len(strengths), inner_folds), np.nan)
    for f, val_idx in enumerate(blocks):
        fit_idx = np.concatenate([blocks[g] for g in range(inner_folds) if g != f])
        X_fit, y_fit = X[fit_idx], y[fit_idx]
        X_val, y_val = X[val_idx], y[val_idx]
        for s, strength in enumerate(strengths):
            try:
                model = _fit_for_kind(model_kind, X_fit, y_fit, strength, inner=True)
                fold_scores[s, f] = _score_for_kind(model_kind, model, X_val, y_val)
            except (DegenerateTargetError, UndefinedMetricError):
                continue
    with np.errstate(invalid="ignore"):
        valid = ~np.isnan(fold_scores)
        means = np.where(
            valid.any(axis=1),
            np.nansum(np.where(valid, fold_scores, 0.0), axis=1) / np.maximum(valid.sum(axis=1), 1),
            np.nan,
        )
    best = _select_best(means, strengths, model_kind)
    model = _fit_for_kind(model_kind, X, y, strengths[best])
    return CvResult(
        strength=float(strengths[best]),
        inner_scores=tuple(float(v) for v in means),
        model=model,
        folds_used=int(valid.any(axis=0).sum()),
    )


# ---------------------------------------------------------------------------
# full probe protocol

@dataclass(frozen=True)
class ProbePreprocessing:
    """Preprocessing applied before probing: PCA to pca_k components (skipped
    automatically when the feature dimension is already <= pca_k), then
    per-feature z-scoring. pca_fit chooses whether PCA/z-scoring statistics
    come from the training split only (default) or from all rows."""

    pca_k: int | None = 20
    zscore: bool = True
    pca_fit: str = "train"

    def __post_init__(self):
        if self.pca_fit not in ("train", "global"):
            raise ValueError("pca_fit must be 'train' or 'global'")


@dataclass(frozen=True)
class DescriptorPredictions:
    repetition: int
    descriptor: str
    descriptor_index: int
    row_ids: tuple[str, ...]
    y_true: np.ndarray
    y_pred: np.ndarray
    strength: float


@dataclass(frozen=True)
class ProbeRunResult:
    predictions: tuple[DescriptorPredictions, ...]
    skipped: tuple[tuple[int, str, str], ...]  # (repetition, descriptor, reason)
    model_kind: str
    preprocessing: ProbePreprocessing
    plan: SplitPlan
    pca_skipped: bool = False


def _transforms(X_fit, preprocessing):
    """Fit PCA + standardizer on X_fit; returns a row-transform callable."""
    steps = []
    d = X_fit.shape[1]
    pca_skipped = True
    if preprocessing.pca_k is not None and d > preprocessing.pca_k:
        # centering caps the usable component count at n_fit - 1
        k = min(preprocessing.pca_k, X_fit.shape[0] - 1)
        if k < preprocessing.pca_k:
            log.info("preprocessing: only %d fit rows, reducing pca_k %d -> %d",
                     X_fit.shape[0], preprocessing.pca_k, k)
        if k >= 1:
            pca = fit_pca(X_fit, k)
            steps.append(lambda Z: apply_pca(pca, Z))
            X_fit = apply_pca(pca, X_fit)
            pca_skipped = False
    if preprocessing.zscore:
        std = fit_standardizer(X_fit)
        steps.append(lambda Z: apply_standardizer(std, Z))

    def transform(Z):
        for step in steps:
            Z = step(Z)
        return Z

    return transform, pca_skipped


def _degenerate_reason(model_kind: str, y: np.ndarray) -> str | None:
    if model_kind == "logistic":
        if np.unique(y).shape[0] < 2:
            return "single-class training target"
    else:
        if np.all(y == y[0]):
            return "constant training target"
    return None


def run_probe_protocol(
    bundle: DatasetBundle,
    plan: SplitPlan,
    model_kind: str,
    grid: HyperGrid | None = None,
    preprocessing: ProbePreprocessing = ProbePreprocessing(),
    jobs: int = 1,
) -> ProbeRunResult:
    """Run the repeated-split nested-CV probe over every descriptor.

    For each repetition the preprocessing is fit per `preprocessing.pca_fit`
    and each descriptor gets its own nested CV selection on the training
    rows and raw predictions on the test rows. Descriptors with degenerate
    training targets are recorded as skipped for that repetition.

    jobs > 1 fans descriptor tasks out to a thread pool; every task derives
    its seed from (base_seed, repetition, descriptor index) and results are
    assembled in task order, so parallel output equals sequential output.
    """
    if isinstance(bundle.Y, BinaryLabelSet):
        target = bundle.Y.labels
    elif isinstance(bundle.Y, RatingSet):
        target = bundle.Y.ratings
    else:
        raise TypeError("probe protocol needs a labels or ratings bundle")
    if model_kind not in ("logistic", "lasso"):
        raise ValueError(f"unknown model kind {model_kind!r}")
    X = bundle.X
    if plan.n != X.shape[0]:
        raise ValueError(f"plan.n={plan.n} does not match bundle rows {X.shape[0]}")
    descriptors = bundle.Y.descriptors
    row_keys = tuple(o.key for o in bundle.Y.odorants)
    splits = make_splits(plan)

    global_transform = None
    pca_skipped = False
    if preprocessing.pca_fit == "global":
        global_transform, pca_skipped = _transforms(X, preprocessing)

    def run_task(rep, j, name, Z_train, Z_test, y_train, test_idx):
        reason = _degenerate_reason(model_kind, y_train)
        if reason is not None:
            return ("skip", (rep, name, reason))
        g = grid
        if g is None:
            if model_kind == "logistic":
                g = HyperGrid.logistic_default()
            else:
                a_max = alpha_max(Z_train, y_train)
                if a_max <= 0.0:
                    return ("skip", (rep, name, "degenerate features (alpha_max = 0)"))
                g = HyperGrid.lasso_default(a_max)
        seed = derive_seed(plan.base_seed, rep, j)
        try:
            cv = nested_cv_select(Z_train, y_train, model_kind, g, plan.inner_folds, seed)
        except SelectionError:
            return ("skip", (rep, name, "no scorable inner fold"))
        if model_kind == "logistic":
            y_pred = predict_logistic(cv.model, Z_test)
        else:
            y_pred = predict_linear(cv.model, Z_test)
        return ("pred", DescriptorPredictions(
            repetition=rep,
            descriptor=name,
            descriptor_index=j,
            row_ids=tuple(row_keys[i] for i in test_idx),
            y_true=target[test_idx, j].copy(),
            y_pred=np.asarray(y_pred, dtype=np.float64),
            strength=cv.strength,
        ))

    predictions: list[DescriptorPredictions] = []
    skipped: list[tuple[int, str, str]] = []
    pool = None
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        pool = ThreadPoolExecutor(max_workers=jobs)
    try:
        for rep, (train_idx, test_idx) in enumerate(splits):
            if global_transform is None:
                transform, pca_skipped = _transforms(X[train_idx], preprocessing)
            else:
                transform = global_transform
            Z_train = transform(X[train_idx])
            Z_test = transform(X[test_idx])
            args = [(rep, j, name, Z_train, Z_test, target[train_idx, j], test_idx)
                    for j, name in enumerate(descriptors)]
            if pool is None:
                outcomes = [run_task(*a) for a in args]
            else:
                outcomes = list(pool.map(lambda a: run_task(*a), args))
            for kind_, payload in outcomes:
                (predictions if kind_ == "pred" else skipped).append(payload)
    finally:
        if pool is not None:
            pool.shutdown()
    if skipped:
        log.info("probe protocol: %d (repetition, descriptor) tasks skipped", len(skipped))
    return ProbeRunResult(
        predictions=tuple(predictions),
        skipped=tuple(skipped),
        model_kind=model_kind,
        preprocessing=preprocessing,
        plan=plan,
        pca_skipped=pca_skipped,
    )


def dump_predictions(result: ProbeRunResult, path) -> None:
    """Raw prediction dump: repetition,descriptor,row_id,y_true,y_pred."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["repetition", "descriptor", "row_id", "y_true", "y_pred"])
        for p in result.predictions:
            for rid, yt, yp in zip(p.row_ids, p.y_true, p.y_pred):
                w.writerow([p.repetition, p.descriptor, rid, repr(float(yt)), repr(float(yp))])
