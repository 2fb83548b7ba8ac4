"""Representational similarity analysis: model-side pairwise similarities,
correlation with human judgments, layer sweeps, and RSM construction.

Model similarity is the cosine between (mixture-aggregated) embeddings;
an angle-based variant (1 - arccos(cos)/pi) is available because it is a
monotone transform of cosine that yields different Pearson values. Human
scores with distance polarity are negated before correlating, keeping the
analysis linear.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core_data import EmbeddingTable, Odorant, SimilarityJudgmentSet, mixture_embedding, resolvable
from .metrics import pearson
from .preproc import cosine_similarity

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RsaResult:
    r: float
    p: float
    n_pairs: int
    model_name: str
    layer: int | str
    similarity: str = "cosine"  # or "angle"


@dataclass(frozen=True)
class Rsm:
    odorants: tuple[str, ...]
    matrix: np.ndarray
    mask: np.ndarray  # True where a value exists

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float64))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))


def _pair_similarity_vec(u, v, similarity: str) -> float:
    cos = cosine_similarity(u, v)
    if similarity == "angle":
        return 1.0 - float(np.arccos(np.clip(cos, -1.0, 1.0))) / np.pi
    return cos


def _pair_similarity(table, a: Odorant, b: Odorant, similarity: str) -> float:
    return _pair_similarity_vec(
        mixture_embedding(table, a), mixture_embedding(table, b), similarity
    )


def pairwise_model_similarities(
    table: EmbeddingTable,
    pairs: SimilarityJudgmentSet,
    similarity: str = "cosine",
) -> tuple[np.ndarray, list[int]]:
    """Model similarity per pair, order preserved.

    Returns (values, kept_indices); pairs with unresolvable components are
    dropped and logged, a zero-norm mixture embedding raises per pair.
    """
    if similarity not in ("cosine", "angle"):
        raise ValueError(f"unknown similarity {similarity!r}")
    values, kept = [], []
    for i, (a, b) in enumerate(pairs.pairs):
        if not (resolvable(table, a) and resolvable(table, b)):
            continue
        values.append(_pair_similarity(table, a, b, similarity))
        kept.append(i)
    dropped = len(pairs.pairs) - len(kept)
    if dropped:
        log.warning("pairwise_model_similarities: dropped %d of %d pairs",
                    dropped, len(pairs.pairs))
    return np.asarray(values, dtype=np.float64), kept


def rsa_correlation(
    model_sims: np.ndarray,
    human: SimilarityJudgmentSet,
    kept: list[int] | None = None,
    model_name: str = "",
    layer: int | str = 0,
    similarity: str = "cosine",
) -> RsaResult:
    """Pearson correlation between model and human pair similarities.

    `kept` restricts the human scores to the pairs actually scored by the
    model (as returned by pairwise_model_similarities). Distance-oriented
    human scores are negated first.
    """
    scores = human.scores if kept is None else human.scores[list(kept)]
    if human.polarity == "distance":
        scores = -scores
    model_sims = np.asarray(model_sims, dtype=np.float64)
    if model_sims.shape[0] != scores.shape[0]:
        raise ValueError(
            f"{model_sims.shape[0]} model similarities vs {scores.shape[0]} human scores"
        )
    r, p = pearson(model_sims, scores)
    return RsaResult(r=r, p=p, n_pairs=int(scores.shape[0]),
                     model_name=model_name, layer=layer, similarity=similarity)


def rsa_for_table(
    table: EmbeddingTable,
    human: SimilarityJudgmentSet,
    similarity: str = "cosine",
) -> RsaResult:
    """Convenience composition: model similarities then correlation."""
    sims, kept = pairwise_model_similarities(table, human, similarity)
    return rsa_correlation(sims, human, kept, table.model_name, table.layer, similarity)


def layer_sweep(
    tables: list[EmbeddingTable],
    human: SimilarityJudgmentSet,
    similarity: str = "cosine",
) -> list[RsaResult]:
    """One RsaResult per layer table, ordered by layer index."""
    if not tables:
        raise ValueError("no layer tables given")
    ids0 = set(tables[0].ids)
    names = {t.model_name for t in tables}
    if len(names) != 1:
        raise ValueError(f"layer sweep mixes models: {sorted(names)}")
    layers = [t.layer for t in tables]
    if len(set(layers)) != len(layers):
        raise ValueError("duplicate layer indices in sweep")
    for t in tables:
        if set(t.ids) != ids0:
            raise ValueError(f"layer {t.layer} id set differs from layer {tables[0].layer}")
    order = sorted(range(len(tables)), key=lambda i: _layer_sort_key(tables[i].layer))
    return [rsa_for_table(tables[i], human, similarity) for i in order]


def _layer_sort_key(layer) -> tuple[int, int]:
    # integer layers in order, then the "final" sentinel
    return (1, 0) if layer == "final" else (0, int(layer))


def build_rsm(
    table: EmbeddingTable,
    odorants: list[Odorant],
    human: SimilarityJudgmentSet | None = None,
    similarity: str = "cosine",
) -> Rsm:
    """All-pairs model RSM over the odorants, or a masked human RSM.

    The model RSM has unit diagonal and exact symmetry. When `human` is
    given, only rated pairs are filled; everything else is masked.
    """
    keys = tuple(o.key for o in odorants)
    n = len(odorants)
    if human is None:
        emb = [mixture_embedding(table, o) for o in odorants]
        mat = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                mat[i, j] = mat[j, i] = _pair_similarity_vec(emb[i], emb[j], similarity)
        return Rsm(odorants=keys, matrix=mat, mask=np.ones((n, n), dtype=bool))
    index = {k: i for i, k in enumerate(keys)}
    mat = np.zeros((n, n))
    mask = np.zeros((n, n), dtype=bool)
    scores = -human.scores if human.polarity == "distance" else human.scores
    for (a, b), s in zip(human.pairs, scores):
        if a.key not in index or b.key not in index:
            continue
        i, j = index[a.key], index[b.key]
        mat[i, j] = mat[j, i] = s
        mask[i, j] = mask[j, i] = True
    return Rsm(odorants=keys, matrix=mat, mask=mask)
