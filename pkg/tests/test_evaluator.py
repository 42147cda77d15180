"""Tests for kNN prediction, accuracy, and the neighbor-entropy score.

The entropy oracles are scalar hand derivations: identical rows give
log(k) exactly, and the three-row two-cluster case reduces to one
log(2) row plus two near-zero rows.  Prediction is checked against a
plain-Python brute-force voter with explicit tie-break rules.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soupkit.datasets import LabeledDataset
from soupkit.errors import BatchTooSmall, LengthMismatch, TooFewRefs, Unsupported
from soupkit.evaluator import (
    KnnConfig,
    accuracy,
    embed_dataset,
    head_accuracy,
    knn_accuracy,
    knn_entropy,
    knn_predict,
    loo_knn_accuracy,
)
from soupkit.seeding import make_rng
from soupkit.tensor_store import TensorSet
from soupkit.toy_models import CLASSIFIER_B, CLASSIFIER_W, EncoderConfig, forward_embed, init_stock


def identity_encoder(d: int, num_classes: int | None = None) -> TensorSet:
    """Single linear layer that embeds inputs unchanged."""
    entries = {"layer0.weight": np.eye(d), "layer0.bias": np.zeros(d)}
    if num_classes is not None:
        entries[CLASSIFIER_W] = np.zeros((d, num_classes))
        entries[CLASSIFIER_B] = np.zeros(num_classes)
    return TensorSet(entries)


def brute_force_predict(ref_z, ref_labels, query_z, num_classes, k, temperature, weighted):
    def unit(v):
        n = math.sqrt(sum(x * x for x in v))
        return [x / max(n, 1e-12) for x in v]

    preds = []
    refs_u = [unit(r) for r in ref_z]
    for q in query_z:
        qu = unit(q)
        sims = [sum(a * b for a, b in zip(r, qu)) for r in refs_u]
        order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:k]
        votes = [0.0] * num_classes
        if weighted:
            m = max(sims[i] for i in order)
            raw = [math.exp((sims[i] - m) / temperature) for i in order]
            tot = sum(raw)
            for i, w in zip(order, raw):
                votes[ref_labels[i]] += w / tot
        else:
            for i in order:
                votes[ref_labels[i]] += 1.0
        preds.append(max(range(num_classes), key=lambda c: (votes[c], -c)))
    return np.array(preds, dtype=np.int32)


class TestKnnConfig:
    def test_defaults(self):
        cfg = KnnConfig()
        assert cfg.k == 16 and cfg.temperature == 0.07

    def test_validation(self):
        with pytest.raises(Unsupported):
            KnnConfig(k=0)
        with pytest.raises(Unsupported):
            KnnConfig(temperature=0.0)


# ---------------------------------------------------------------------------
# neighbor entropy


class TestKnnEntropy:
    def test_identical_rows_give_log_k(self):
        z = np.tile(np.array([0.4, -1.0, 2.0]), (40, 1))
        h = knn_entropy(z, k=16, temperature=0.07)
        assert h == pytest.approx(math.log(16.0), abs=1e-9)
        assert h == pytest.approx(2.772588722239781, abs=1e-9)

    def test_three_row_two_cluster_hand_case(self):
        # Rows 0 and 1 coincide, row 2 is orthogonal.  Row 2 sees two
        # equal strangers (entropy log 2); rows 0 and 1 each see one match
        # at similarity 1 and one stranger at 0, a two-point softmax at
        # logit gap 1/T.
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        gap = 1.0 / 0.07
        q = 1.0 / (1.0 + math.exp(gap))
        p = 1.0 - q
        h_matched = -(p * math.log(p) + q * math.log(q))
        expected = (2.0 * h_matched + math.log(2.0)) / 3.0
        got = knn_entropy(z, k=2, temperature=0.07)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.23106, abs=1e-4)

    def test_exact_twins_score_below_diffuse_points(self):
        # every basis vector appears twice: the twin sits at similarity 1
        # while every stranger sits at 0, so each neighborhood collapses
        # onto one point and the score approaches zero
        paired = np.repeat(np.eye(25), 2, axis=0)
        diffuse = make_rng(3).standard_normal((50, 25))
        assert knn_entropy(paired, k=8) < 0.01
        assert knn_entropy(paired, k=8) < knn_entropy(diffuse, k=8)

    def test_collapse_is_the_maximum(self):
        rng = make_rng(13)
        collapsed = np.tile(rng.standard_normal(6), (30, 1))
        spread = rng.standard_normal((30, 6))
        assert knn_entropy(spread, k=8) < knn_entropy(collapsed, k=8)

    def test_zero_rows_stay_finite(self):
        z = np.zeros((5, 3))
        z[0] = [1.0, 0.0, 0.0]
        assert math.isfinite(knn_entropy(z, k=2))

    @given(
        n=st.integers(min_value=5, max_value=24),
        d=st.integers(min_value=1, max_value=6),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_bounded_by_log_k(self, n, d, seed):
        z = make_rng(seed).standard_normal((n, d))
        h = knn_entropy(z, k=4)
        assert -1e-12 <= h <= math.log(4.0) + 1e-9

    def test_too_few_rows(self):
        with pytest.raises(BatchTooSmall):
            knn_entropy(np.ones((16, 2)), k=16)
        with pytest.raises(Unsupported):
            knn_entropy(np.ones((5, 2)), k=0)
        with pytest.raises(Unsupported):
            knn_entropy(np.ones((5, 2)), k=2, temperature=0.0)

    def test_row_scaling_invariance(self):
        z = make_rng(21).standard_normal((12, 5))
        scaled = z.copy()
        scaled[3] *= 7.0
        scaled[8] *= 0.001
        assert knn_entropy(scaled, k=4) == pytest.approx(knn_entropy(z, k=4), abs=1e-12)

    def test_row_permutation_invariance(self):
        z = make_rng(22).standard_normal((12, 5))
        perm = make_rng(23).permutation(12)
        assert knn_entropy(z[perm], k=4) == pytest.approx(knn_entropy(z, k=4), abs=1e-12)


# ---------------------------------------------------------------------------
# prediction


class TestKnnPredict:
    @pytest.mark.parametrize("weighted", [True, False])
    def test_matches_brute_force(self, weighted):
        rng = make_rng(11)
        ref_z = rng.standard_normal((30, 5))
        ref_labels = rng.integers(0, 3, 30).astype(np.int32)
        query_z = rng.standard_normal((10, 5))
        got = knn_predict(ref_z, ref_labels, query_z, 3, k=5, weighted=weighted)
        want = brute_force_predict(ref_z, ref_labels, query_z, 3, 5, 0.07, weighted)
        assert np.array_equal(got, want)

    def test_identical_refs_fall_back_to_majority(self):
        # equal similarities mean equal weights, so the 9:7 label split
        # decides regardless of the temperature
        ref_z = np.tile(np.array([0.5, -0.5]), (16, 1))
        labels = np.array([0] * 9 + [1] * 7)
        pred = knn_predict(ref_z, labels, np.array([[1.0, 1.0]]), 2, k=16)
        assert pred.tolist() == [0]

    def test_query_duplication_invariance(self):
        rng = make_rng(14)
        ref_z = rng.standard_normal((20, 4))
        labels = rng.integers(0, 3, 20).astype(np.int32)
        queries = rng.standard_normal((6, 4))
        single = knn_predict(ref_z, labels, queries, 3, k=4)
        doubled = knn_predict(ref_z, labels, np.concatenate([queries, queries]), 3, k=4)
        assert np.array_equal(doubled, np.concatenate([single, single]))

    def test_relabeling_equivariance(self):
        # holds for weighted votes, where exact ties do not arise; majority
        # votes break ties toward the lower class and are not equivariant
        rng = make_rng(15)
        ref_z = rng.standard_normal((20, 4))
        labels = rng.integers(0, 3, 20).astype(np.int32)
        queries = rng.standard_normal((6, 4))
        relabel = np.array([2, 0, 1])
        base = knn_predict(ref_z, labels, queries, 3, k=4)
        permuted = knn_predict(ref_z, relabel[labels], queries, 3, k=4)
        assert np.array_equal(permuted, relabel[base])

    def test_equal_similarity_prefers_lower_reference_index(self):
        ref_z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        labels = np.array([1, 0, 0])
        pred = knn_predict(ref_z, labels, np.array([[1.0, 0.0]]), 2, k=1)
        assert pred.tolist() == [1]

    def test_vote_tie_prefers_lower_class(self):
        ref_z = np.array([[1.0, 0.0], [0.0, 1.0]])
        labels = np.array([1, 0])
        query = np.array([[1.0, 1.0]])
        for weighted in (True, False):
            assert knn_predict(ref_z, labels, query, 2, k=2, weighted=weighted).tolist() == [0]

    def test_separated_clusters_classify_perfectly(self):
        rng = make_rng(4)
        refs = np.concatenate(
            [[10.0, 0.0] + 0.1 * rng.standard_normal((20, 2)),
             [0.0, 10.0] + 0.1 * rng.standard_normal((20, 2))]
        )
        labels = np.repeat([0, 1], 20)
        queries = np.concatenate(
            [[10.0, 0.0] + 0.1 * rng.standard_normal((5, 2)),
             [0.0, 10.0] + 0.1 * rng.standard_normal((5, 2))]
        )
        pred = knn_predict(refs, labels, queries, 2, k=3)
        assert np.array_equal(pred, np.repeat([0, 1], 5))

    def test_validation(self):
        z = np.ones((4, 2))
        labels = np.zeros(4, dtype=np.int32)
        with pytest.raises(TooFewRefs):
            knn_predict(z, labels, z, 2, k=5)
        with pytest.raises(LengthMismatch):
            knn_predict(z, np.zeros(3), z, 2, k=2)
        with pytest.raises(Unsupported):
            knn_predict(z, labels, z, 2, k=0)
        with pytest.raises(Unsupported):
            knn_predict(z, labels, z, 2, k=2, temperature=0.0)
        with pytest.raises(Unsupported):
            knn_predict(z, np.full(4, 7), z, 2, k=2)


class TestAccuracy:
    def test_exact_fraction(self):
        assert accuracy(np.array([0, 1, 2, 1]), np.array([0, 1, 1, 1])) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy(np.array([0, 1]), np.array([0, 1, 2]))
        with pytest.raises(LengthMismatch):
            accuracy(np.array([]), np.array([]))


class TestLeaveOneOut:
    def test_duplicated_points_score_one(self):
        rng = make_rng(6)
        base = rng.standard_normal((20, 4))
        z = np.repeat(base, 2, axis=0)
        labels = np.repeat(rng.integers(0, 3, 20), 2)
        assert loo_knn_accuracy(z, labels, 3, k=1) == 1.0

    def test_too_few_rows(self):
        with pytest.raises(TooFewRefs):
            loo_knn_accuracy(np.ones((4, 2)), np.zeros(4), 2, k=4)

    def test_matches_manual_exclusion(self):
        rng = make_rng(8)
        z = rng.standard_normal((12, 3))
        labels = rng.integers(0, 2, 12).astype(np.int32)
        got = loo_knn_accuracy(z, labels, 2, k=3, weighted=False)
        correct = 0
        for i in range(12):
            others = np.delete(np.arange(12), i)
            pred = brute_force_predict(
                z[others], labels[others].tolist(), z[i : i + 1], 2, 3, 0.07, False
            )
            correct += int(pred[0] == labels[i])
        assert got == pytest.approx(correct / 12.0)


# ---------------------------------------------------------------------------
# dataset-level wrappers


class TestEmbedDataset:
    def test_batching_invariance(self):
        params = init_stock(EncoderConfig(input_dim=12, hidden_dims=(10,), embed_dim=6), seed=0)
        inputs = make_rng(1).standard_normal((23, 12)).astype(np.float32)
        ds = LabeledDataset(inputs=inputs, labels=np.zeros(23), num_classes=2)
        whole = forward_embed(params, inputs)
        for bs in (1, 5, 7, 256):
            chunked = embed_dataset(params, ds, batch_size=bs)
            assert chunked.shape == (23, 6)
            assert float(np.abs(chunked - whole).max()) <= 1e-12

    def test_bad_batch_size(self):
        params = identity_encoder(3)
        ds = LabeledDataset(inputs=np.ones((2, 3)), labels=np.zeros(2), num_classes=2)
        with pytest.raises(Unsupported):
            embed_dataset(params, ds, batch_size=0)


class TestDatasetAccuracies:
    def test_knn_accuracy_on_separable_blobs(self):
        rng = make_rng(9)
        d = 4

        def blob(center, n):
            return center + 0.1 * rng.standard_normal((n, d))

        # cosine voting needs direction, not offset: centers sit on
        # different axes rather than at the origin
        c0 = np.array([8.0, 0.0, 0.0, 0.0])
        c1 = np.array([0.0, 8.0, 0.0, 0.0])
        refs = LabeledDataset(
            inputs=np.concatenate([blob(c0, 20), blob(c1, 20)]),
            labels=np.repeat([0, 1], 20),
            num_classes=2,
        )
        queries = LabeledDataset(
            inputs=np.concatenate([blob(c0, 10), blob(c1, 10)]),
            labels=np.repeat([0, 1], 10),
            num_classes=2,
        )
        assert knn_accuracy(identity_encoder(d), refs, queries, k=5) == 1.0

    def test_head_accuracy_with_zero_head_predicts_class_zero(self):
        ds = LabeledDataset(
            inputs=make_rng(0).standard_normal((8, 3)),
            labels=np.array([0, 0, 1, 2, 0, 1, 2, 0]),
            num_classes=3,
        )
        assert head_accuracy(identity_encoder(3, num_classes=3), ds) == 0.5
