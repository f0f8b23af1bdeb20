import numpy as np
import pytest

from dfedsim.data import (
    Dataset,
    PartitionError,
    generate_synthetic,
    partition_dirichlet,
    partition_pathological,
)


def sorted_rows(ds: Dataset) -> np.ndarray:
    rows = np.column_stack([ds.features, ds.labels.astype(np.float64)])
    order = np.lexsort(rows.T)
    return rows[order]


def shard_union_rows(shards) -> np.ndarray:
    feats = np.concatenate([np.vstack([s.train.features, s.test.features]) for s in shards])
    labels = np.concatenate([np.concatenate([s.train.labels, s.test.labels]) for s in shards])
    rows = np.column_stack([feats, labels.astype(np.float64)])
    return rows[np.lexsort(rows.T)]


def train_logistic_oracle(ds: Dataset, steps: int = 300, lr: float = 0.5) -> float:
    """Independent multinomial logistic regression, plain gradient descent."""
    n, d = ds.features.shape
    w = np.zeros((d, ds.num_classes))
    b = np.zeros(ds.num_classes)
    onehot = np.eye(ds.num_classes)[ds.labels]
    for _ in range(steps):
        logits = ds.features @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        w -= lr * ds.features.T @ err
        b -= lr * err.sum(axis=0)
    preds = np.argmax(ds.features @ w + b, axis=1)
    return float(np.mean(preds == ds.labels))


class TestGenerateSynthetic:
    def test_shapes_and_label_range(self):
        ds = generate_synthetic(3, 5, 10, 2.0, seed=0)
        assert ds.n == 30 and ds.dim == 5 and ds.num_classes == 3
        assert ds.labels.min() == 0 and ds.labels.max() == 2

    def test_well_separated_data_is_linearly_classifiable(self):
        ds = generate_synthetic(2, 2, 100, 10.0, seed=1)
        assert ds.n == 200
        assert train_logistic_oracle(ds) > 0.95

    def test_zero_separation_carries_no_signal(self):
        ds = generate_synthetic(10, 16, 50, 0.0, seed=1)
        # all class means collapse to the origin
        assert train_logistic_oracle(ds, steps=50) < 0.3

    def test_determinism_bitwise(self):
        a = generate_synthetic(4, 8, 25, 3.0, seed=42)
        b = generate_synthetic(4, 8, 25, 3.0, seed=42)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 4, 10, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(3, 1, 10, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(3, 4, 1, 1.0, seed=0)


@pytest.fixture(scope="module")
def balanced_ds():
    return generate_synthetic(10, 8, 200, 4.0, seed=9)


class TestPartitionDirichlet:
    @pytest.mark.parametrize("seed", range(5))
    def test_conservation(self, balanced_ds, seed):
        shards = partition_dirichlet(balanced_ds, 10, alpha=0.5, seed=seed)
        np.testing.assert_array_equal(
            shard_union_rows(shards), sorted_rows(balanced_ds)
        )

    def test_huge_alpha_is_nearly_uniform(self, balanced_ds):
        shards = partition_dirichlet(balanced_ds, 10, alpha=1e6, seed=3)
        for shard in shards:
            labels = np.concatenate([shard.train.labels, shard.test.labels])
            counts = np.bincount(labels, minlength=10)
            shares = counts / counts.sum()
            assert np.max(np.abs(shares - 0.1)) <= 0.02

    def test_small_alpha_concentrates_mass(self, balanced_ds):
        # property of Dir(0.1): at least one client dominated by one class
        hit = 0
        for seed in range(5):
            shards = partition_dirichlet(balanced_ds, 10, alpha=0.1, seed=seed)
            for shard in shards:
                labels = np.concatenate([shard.train.labels, shard.test.labels])
                counts = np.bincount(labels, minlength=10)
                if counts.max() / counts.sum() > 0.5:
                    hit += 1
                    break
        assert hit == 5

    def test_min_per_client_enforced(self, balanced_ds):
        shards = partition_dirichlet(balanced_ds, 10, alpha=0.3, min_per_client=25, seed=0)
        assert all(s.train.n + s.test.n >= 25 for s in shards)

    def test_infeasible_size_rejected(self):
        small = generate_synthetic(3, 4, 10, 1.0, seed=0)
        with pytest.raises(PartitionError):
            partition_dirichlet(small, 5, alpha=1.0, min_per_client=10, seed=0)

    def test_determinism(self, balanced_ds):
        a = partition_dirichlet(balanced_ds, 6, alpha=0.4, seed=11)
        b = partition_dirichlet(balanced_ds, 6, alpha=0.4, seed=11)
        for sa, sb in zip(a, b):
            assert sa.train.features.tobytes() == sb.train.features.tobytes()
            assert sa.test.labels.tobytes() == sb.test.labels.tobytes()

    def test_stratified_split_support(self, balanced_ds):
        shards = partition_dirichlet(balanced_ds, 8, alpha=0.5, seed=2)
        for shard in shards:
            assert shard.train.n > 0 and shard.test.n > 0
            train_counts = np.bincount(shard.train.labels, minlength=10)
            test_present = set(shard.test.labels.tolist())
            for c in range(10):
                if train_counts[c] >= 5:
                    assert c in test_present


class TestPartitionPathological:
    @pytest.mark.parametrize("seed", range(5))
    def test_conservation(self, balanced_ds, seed):
        shards = partition_pathological(balanced_ds, 15, c_per_client=3, seed=seed)
        np.testing.assert_array_equal(
            shard_union_rows(shards), sorted_rows(balanced_ds)
        )

    @pytest.mark.parametrize("c_per_client", [1, 2, 5])
    def test_exact_class_count_per_client(self, balanced_ds, c_per_client):
        shards = partition_pathological(balanced_ds, 20, c_per_client, seed=4)
        for shard in shards:
            labels = np.concatenate([shard.train.labels, shard.test.labels])
            assert len(set(labels.tolist())) == c_per_client

    def test_full_assignment_is_uniform(self, balanced_ds):
        shards = partition_pathological(balanced_ds, 4, c_per_client=10, seed=0)
        for shard in shards:
            labels = np.concatenate([shard.train.labels, shard.test.labels])
            counts = np.bincount(labels, minlength=10)
            assert counts.min() == counts.max() == 200 // 4

    def test_paper_style_two_class_shards(self):
        ds = generate_synthetic(10, 4, 100, 2.0, seed=5)
        shards = partition_pathological(ds, 100, c_per_client=2, seed=5)
        assert len(shards) == 100
        for shard in shards:
            labels = np.concatenate([shard.train.labels, shard.test.labels])
            assert len(set(labels.tolist())) == 2

    def test_rejects_bad_class_counts(self, balanced_ds):
        with pytest.raises(PartitionError):
            partition_pathological(balanced_ds, 5, c_per_client=11, seed=0)
        with pytest.raises(PartitionError):
            partition_pathological(balanced_ds, 3, c_per_client=2, seed=0)

    def test_rejects_oversubscribed_classes(self):
        tiny = generate_synthetic(10, 4, 3, 2.0, seed=0)
        with pytest.raises(PartitionError, match="receive none"):
            partition_pathological(tiny, 50, c_per_client=2, seed=0)
