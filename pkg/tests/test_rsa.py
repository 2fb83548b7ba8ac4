import numpy as np
import pytest

from olfalign.core_data import EmbeddingTable, Odorant, SimilarityJudgmentSet
from olfalign.errors import UndefinedMetricError
from olfalign.rsa import (
    build_rsm,
    layer_sweep,
    pairwise_model_similarities,
    rsa_correlation,
    rsa_for_table,
)


def _table(matrix, ids=None, model="toy", layer=0):
    ids = ids or tuple(f"m{i}" for i in range(len(matrix)))
    return EmbeddingTable(tuple(ids), np.asarray(matrix, float), model, layer)


def _pairs(keys, scores, polarity="similarity", scale=None):
    pairs = tuple(
        (Odorant(tuple(a.split(";"))), Odorant(tuple(b.split(";")))) for a, b in keys
    )
    scores = np.asarray(scores, float)
    if scale is None:
        lo, hi = float(scores.min()), float(scores.max())
        scale = (lo - 1.0, hi + 1.0)
    return SimilarityJudgmentSet(pairs, scores, scale, polarity)


class TestPairwiseModelSimilarities:
    def test_self_pair_exactly_one(self, rng):
        t = _table(rng.standard_normal((2, 5)))
        ps = _pairs([("m0", "m0"), ("m0", "m1")], [1.0, 0.2])
        sims, kept = pairwise_model_similarities(t, ps)
        assert sims[0] == 1.0
        assert kept == [0, 1]

    def test_orthogonal_zero(self):
        t = _table([[1.0, 0.0], [0.0, 1.0]])
        sims, _ = pairwise_model_similarities(t, _pairs([("m0", "m1")], [0.5]))
        assert sims[0] == 0.0

    def test_mixture_pair_parallel_means(self):
        t = _table([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        sims, _ = pairwise_model_similarities(t, _pairs([("m0;m1", "m2")], [0.9]))
        assert sims[0] == 1.0  # mean (0.5, 0.5) is parallel to (1, 1)

    def test_unresolvable_pairs_dropped(self, rng):
        t = _table(rng.standard_normal((2, 4)))
        ps = _pairs([("m0", "m1"), ("m0", "zz")], [0.1, 0.9])
        sims, kept = pairwise_model_similarities(t, ps)
        assert len(sims) == 1 and kept == [0]

    def test_order_preserved(self, rng):
        t = _table(rng.standard_normal((4, 6)))
        keys = [("m0", "m1"), ("m2", "m3"), ("m0", "m3")]
        sims, kept = pairwise_model_similarities(t, _pairs(keys, [0, 0, 0]))
        expected = [
            float(np.dot(t.matrix[a], t.matrix[b])
                  / (np.linalg.norm(t.matrix[a]) * np.linalg.norm(t.matrix[b])))
            for a, b in [(0, 1), (2, 3), (0, 3)]
        ]
        assert np.allclose(sims, expected, atol=1e-12)

    def test_angle_variant_monotone_in_cosine(self, rng):
        t = _table(rng.standard_normal((6, 5)))
        keys = [("m0", "m1"), ("m2", "m3"), ("m4", "m5")]
        cos, _ = pairwise_model_similarities(t, _pairs(keys, [0, 0, 0]), "cosine")
        ang, _ = pairwise_model_similarities(t, _pairs(keys, [0, 0, 0]), "angle")
        assert np.array_equal(np.argsort(cos), np.argsort(ang))


class TestRsaCorrelation:
    def test_identity_r_exactly_one(self, rng):
        t = _table(rng.standard_normal((6, 8)))
        keys = [(f"m{i}", f"m{j}") for i in range(6) for j in range(i + 1, 6)]
        sims, kept = pairwise_model_similarities(t, _pairs(keys, np.zeros(len(keys)),
                                                           scale=(-2, 2)))
        human = _pairs(keys, sims)
        res = rsa_correlation(sims, human, kept, "toy", 0)
        assert res.r == 1.0
        assert res.p == 0.0
        assert res.n_pairs == len(keys)

    def test_negated_r_minus_one(self, rng):
        t = _table(rng.standard_normal((5, 4)))
        keys = [(f"m{i}", f"m{j}") for i in range(5) for j in range(i + 1, 5)]
        sims, kept = pairwise_model_similarities(t, _pairs(keys, np.zeros(len(keys))))
        res = rsa_correlation(sims, _pairs(keys, -sims), kept)
        assert res.r == -1.0

    def test_distance_polarity_negates(self, rng):
        t = _table(rng.standard_normal((5, 4)))
        keys = [(f"m{i}", f"m{j}") for i in range(5) for j in range(i + 1, 5)]
        sims, kept = pairwise_model_similarities(t, _pairs(keys, np.zeros(len(keys))))
        as_sim = rsa_correlation(sims, _pairs(keys, sims, "similarity"), kept)
        as_dist = rsa_correlation(sims, _pairs(keys, sims, "distance"), kept)
        assert as_sim.r == 1.0
        assert as_dist.r == -1.0

    def test_constant_side_rejected(self):
        human = _pairs([("a", "b"), ("c", "d"), ("e", "f")], [0.5, 0.5, 0.5])
        with pytest.raises(UndefinedMetricError):
            rsa_correlation(np.array([0.1, 0.2, 0.3]), human)

    def test_pair_reordering_invariance(self, rng):
        t = _table(rng.standard_normal((6, 7)))
        keys = [(f"m{i}", f"m{j}") for i in range(6) for j in range(i + 1, 6)]
        human_scores = rng.random(len(keys))
        sims, kept = pairwise_model_similarities(t, _pairs(keys, human_scores))
        base = rsa_correlation(sims, _pairs(keys, human_scores), kept)
        perm = rng.permutation(len(keys))
        keys_p = [keys[i] for i in perm]
        sims_p, kept_p = pairwise_model_similarities(t, _pairs(keys_p, human_scores[perm]))
        res = rsa_correlation(sims_p, _pairs(keys_p, human_scores[perm]), kept_p)
        assert res.r == pytest.approx(base.r, abs=1e-12)


class TestScaleInvariance:
    def test_power_of_two_scale_bit_identical_with_mixtures(self, rng):
        M = rng.standard_normal((6, 8))
        keys = [("m0;m1", "m2"), ("m3", "m4;m5;m0"), ("m1", "m5")]
        human = rng.random(3)
        base_t = _table(M)
        scaled_t = _table(M * 2.0)
        s1, k1 = pairwise_model_similarities(base_t, _pairs(keys, human))
        s2, k2 = pairwise_model_similarities(scaled_t, _pairs(keys, human))
        assert np.array_equal(s1, s2)
        r1 = rsa_correlation(s1, _pairs(keys, human), k1)
        r2 = rsa_correlation(s2, _pairs(keys, human), k2)
        assert r1.r == r2.r and r1.p == r2.p

    def test_arbitrary_scale_bit_identical_on_dyadic_entries(self, rng):
        # entries that are powers of two make the 3.7 scaling exact in IEEE
        # arithmetic, so the exact-rational cosine must not move a bit
        exps = rng.integers(-3, 4, size=(5, 6))
        signs = np.where(rng.random((5, 6)) > 0.5, 1.0, -1.0)
        M = signs * np.exp2(exps.astype(float))
        keys = [(f"m{i}", f"m{j}") for i in range(5) for j in range(i + 1, 5)]
        human = rng.random(len(keys))
        s1, _ = pairwise_model_similarities(_table(M), _pairs(keys, human))
        s2, _ = pairwise_model_similarities(_table(M * 3.7), _pairs(keys, human))
        assert np.array_equal(s1, s2)


class TestLayerSweep:
    def test_single_layer_equals_standalone(self, rng):
        M = rng.standard_normal((5, 6))
        t = _table(M, layer=3)
        keys = [(f"m{i}", f"m{j}") for i in range(5) for j in range(i + 1, 5)]
        human = _pairs(keys, rng.random(len(keys)))
        sweep = layer_sweep([t], human)
        solo = rsa_for_table(t, human)
        assert len(sweep) == 1
        assert sweep[0] == solo

    def test_layers_ordered(self, rng):
        M = rng.standard_normal((4, 5))
        tables = [_table(M + i, layer=layer) for i, layer in enumerate((2, 0, 1))]
        keys = [(f"m{i}", f"m{j}") for i in range(4) for j in range(i + 1, 4)]
        human = _pairs(keys, rng.random(len(keys)))
        sweep = layer_sweep(tables, human)
        assert [r.layer for r in sweep] == [0, 1, 2]

    def test_final_sorts_last(self, rng):
        M = rng.standard_normal((4, 5))
        tables = [_table(M, layer="final"), _table(M + 1, layer=0)]
        keys = [(f"m{i}", f"m{j}") for i in range(4) for j in range(i + 1, 4)]
        sweep = layer_sweep(tables, _pairs(keys, rng.random(len(keys))))
        assert [r.layer for r in sweep] == [0, "final"]

    def test_duplicated_layer_table_rejected(self, rng):
        M = rng.standard_normal((4, 5))
        with pytest.raises(ValueError, match="duplicate"):
            layer_sweep([_table(M, layer=0), _table(M, layer=0)],
                        _pairs([("m0", "m1"), ("m0", "m2"), ("m1", "m3")], [0.1, 0.2, 0.3]))

    def test_mismatched_ids_rejected(self, rng):
        a = _table(rng.standard_normal((3, 4)), ids=("x", "y", "z"), layer=0)
        b = _table(rng.standard_normal((3, 4)), ids=("x", "y", "q"), layer=1)
        with pytest.raises(ValueError, match="id set"):
            layer_sweep([a, b], _pairs([("x", "y"), ("x;y", "z")], [0.1, 0.2]))

    def test_identical_tables_identical_r(self, rng):
        M = rng.standard_normal((4, 5))
        keys = [(f"m{i}", f"m{j}") for i in range(4) for j in range(i + 1, 4)]
        human = _pairs(keys, rng.random(len(keys)))
        sweep = layer_sweep([_table(M, layer=0), _table(M, layer=1)], human)
        assert sweep[0].r == sweep[1].r


class TestBuildRsm:
    def test_model_rsm_diag_and_symmetry(self, rng):
        t = _table(rng.standard_normal((5, 6)))
        odorants = [Odorant((f"m{i}",)) for i in range(5)]
        rsm = build_rsm(t, odorants)
        assert np.all(np.diag(rsm.matrix) == 1.0)
        assert np.array_equal(rsm.matrix, rsm.matrix.T)
        assert rsm.mask.all()

    def test_off_diagonal_bounded(self, rng):
        t = _table(rng.standard_normal((6, 4)))
        rsm = build_rsm(t, [Odorant((f"m{i}",)) for i in range(6)])
        assert np.max(np.abs(rsm.matrix)) <= 1.0

    def test_human_rsm_masks_unrated(self, rng):
        t = _table(rng.standard_normal((4, 5)))
        odorants = [Odorant((f"m{i}",)) for i in range(4)]
        human = _pairs([("m0", "m1"), ("m2", "m3")], [0.4, 0.8])
        rsm = build_rsm(t, odorants, human=human)
        assert rsm.mask[0, 1] and rsm.mask[1, 0]
        assert rsm.mask[2, 3] and rsm.mask[3, 2]
        assert not rsm.mask[0, 2]
        assert rsm.matrix[0, 1] == 0.4
