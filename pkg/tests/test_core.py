import numpy as np
import pytest

from tripmine.core import (
    BatchView,
    Sample,
    SamplerConfig,
    TripletSet,
    as_label_vector,
    seeded_rng,
    validate_config,
)


class TestSeededRng:
    def test_identical_seeds_identical_streams(self):
        a = seeded_rng(42).random(100)
        b = seeded_rng(42).random(100)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        assert seeded_rng(42).random() != seeded_rng(43).random()

    def test_seed_zero_is_ordinary(self):
        draws = seeded_rng(0).random(10)
        assert np.isfinite(draws).all()
        assert len(set(draws.tolist())) == 10


class TestLabelVector:
    def test_normalizes_to_uint8(self):
        v = as_label_vector([1, 0, 1])
        assert v.dtype == np.uint8
        assert v.tolist() == [1, 0, 1]

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            as_label_vector([1, 2, 0])

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError, match="at least one"):
            as_label_vector([0, 0, 0])


class TestSample:
    def test_rejects_non_finite_features(self):
        with pytest.raises(ValueError, match="non-finite"):
            Sample(id="x", features=[1.0, np.inf], labels=[1, 0])

    def test_features_coerced_to_float64(self):
        s = Sample(id="x", features=[1, 2], labels=[0, 1])
        assert s.features.dtype == np.float64


class TestValidateConfig:
    def test_ten_percent_fraction_gives_ten_anchors(self):
        cfg = SamplerConfig(anchor_fraction=0.1, positives_per_anchor=3, negatives_per_anchor=3)
        assert validate_config(cfg, batch_size=100) is cfg
        assert cfg.num_anchors(100) == 10

    def test_anchor_count_rounds_up(self):
        assert SamplerConfig(anchor_fraction=0.1).num_anchors(25) == 3
        assert SamplerConfig(anchor_fraction=1.0).num_anchors(7) == 7
        assert SamplerConfig(anchor_fraction=0.05).num_anchors(10) == 1

    def test_rejects_count_exceeding_batch(self):
        cfg = SamplerConfig(positives_per_anchor=4, negatives_per_anchor=4)
        with pytest.raises(ValueError, match="batch size"):
            validate_config(cfg, batch_size=4)

    def test_rejects_beta_out_of_range(self):
        with pytest.raises(ValueError, match="beta"):
            validate_config(SamplerConfig(beta=1.2), batch_size=100)

    def test_rejects_gamma_out_of_range(self):
        with pytest.raises(ValueError, match="gamma"):
            validate_config(SamplerConfig(gamma=-0.1), batch_size=100)

    def test_rejects_zero_count(self):
        with pytest.raises(ValueError, match=">= 1"):
            validate_config(SamplerConfig(positives_per_anchor=0), batch_size=100)

    def test_rejects_joint_overflow_for_disjoint_strategies(self):
        cfg = SamplerConfig(positives_per_anchor=3, negatives_per_anchor=3)
        with pytest.raises(ValueError, match="positives \\+ negatives"):
            validate_config(cfg, batch_size=6)

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError, match="anchor strategy"):
            validate_config(SamplerConfig(anchor_strategy="magic"), batch_size=10)


class TestBatchView:
    def test_from_embeddings_builds_both_distance_matrices(self):
        rng = seeded_rng(3)
        emb = rng.normal(size=(5, 2))
        labels = np.eye(5, 4, dtype=np.uint8)
        labels[:, 0] = 1
        bv = BatchView.from_embeddings(np.arange(5), emb, labels)
        assert bv.size == 5
        assert bv.dist_raw.shape == (5, 5)
        assert np.all(np.diagonal(bv.dist_norm) == 0)
        off = ~np.eye(5, dtype=bool)
        assert bv.dist_norm[off].min() == 0.0
        assert bv.dist_norm[off].max() == 1.0

    def test_distance_accessor_pairs_raw_and_norm(self):
        emb = np.array([[0.0], [1.0], [3.0]])
        bv = BatchView.from_embeddings(np.arange(3), emb, np.ones((3, 2), dtype=np.uint8))
        pair = bv.distance(0, 2)
        assert pair.raw == 3.0
        assert pair.norm == 1.0


class TestTripletSet:
    def test_len_counts_triples(self):
        ts = TripletSet(triplets=np.array([[0, 1, 2], [0, 2, 1]]), per_anchor={0: ((1, 2), (2, 1))})
        assert len(ts) == 2
        assert ts.anchors == [0]
