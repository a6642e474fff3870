"""Tests for presto diameter, normalization and projection."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from presto.exceptions import DegenerateError, DomainError, StateError
from presto.models import Embedding, ProjectionConfig
from presto.preprocess import (
    approx_diameter,
    normalize,
    philox,
    project,
    project_gaussian,
    project_mmds,
    project_pca,
    subsample,
)

LINE = np.array([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])


class TestPhilox:
    """Tests for the keyed generator."""

    def test_same_key_same_stream(self) -> None:
        """Test a (seed, stream) pair always produces the same draws."""
        assert np.array_equal(philox(7, 3).normal(size=5), philox(7, 3).normal(size=5))

    def test_streams_differ(self) -> None:
        """Test different streams of one seed are distinct."""
        assert not np.array_equal(philox(7, 0).normal(size=5), philox(7, 1).normal(size=5))


class TestDiameter:
    """Tests for approx_diameter."""

    def test_unit_square_is_exact(self, unit_square: np.ndarray) -> None:
        """Test the diagonal of the unit square."""
        assert approx_diameter(Embedding(unit_square)) == pytest.approx(np.sqrt(2))

    def test_double_sweep_on_a_line(self) -> None:
        """Test the sweep finds the endpoints of collinear points."""
        assert approx_diameter(Embedding(LINE), restarts=1, exact_threshold=0) == 10.0

    def test_double_sweep_is_a_lower_bound(self, rng: np.random.Generator) -> None:
        """Test the sweep never exceeds the exact diameter."""
        embedding = Embedding(rng.normal(size=(60, 5)))
        exact = float(np.max(pdist(embedding.data)))

        estimate = approx_diameter(embedding, restarts=3, exact_threshold=10)

        assert 0 < estimate <= exact

    def test_identical_points(self) -> None:
        """Test a zero diameter is degenerate."""
        with pytest.raises(DegenerateError):
            approx_diameter(Embedding(np.ones((4, 3))))

    def test_single_point(self) -> None:
        """Test a diameter needs two points."""
        with pytest.raises(DomainError):
            approx_diameter(Embedding(np.zeros((1, 2))))


class TestNormalize:
    """Tests for normalize."""

    def test_scales_and_marks(self) -> None:
        """Test coordinates are divided and the diameter recorded."""
        normalized = normalize(Embedding(LINE, "line"), 10.0)

        assert normalized.normalized
        assert normalized.diameter_used == 10.0
        assert normalized.data.tolist() == [[0.0, 0.0], [0.3, 0.4], [0.6, 0.8]]

    def test_twice(self) -> None:
        """Test normalizing a normalized embedding is refused."""
        with pytest.raises(StateError):
            normalize(normalize(Embedding(LINE), 10.0), 1.0)

    def test_non_positive_diameter(self) -> None:
        """Test the divisor must be positive."""
        with pytest.raises(DomainError):
            normalize(Embedding(LINE), 0.0)


class TestSubsample:
    """Tests for subsample."""

    def test_deterministic_and_ordered(self) -> None:
        """Test the same seed picks the same rows in original order."""
        embedding = Embedding(np.arange(40, dtype=float).reshape(20, 2))

        first = subsample(embedding, 5, seed=3)

        assert np.array_equal(first.data, subsample(embedding, 5, seed=3).data)
        assert np.all(np.diff(first.data[:, 0]) > 0)

    def test_large_size_is_identity(self, unit_square: np.ndarray) -> None:
        """Test a size of at least n keeps every row."""
        embedding = Embedding(unit_square)

        assert subsample(embedding, 10) is embedding


class TestPca:
    """Tests for project_pca."""

    def test_full_rank_preserves_distances(self, rng: np.random.Generator) -> None:
        """Test projecting to k = d is a rigid motion."""
        data = rng.normal(size=(12, 3))

        projected = project_pca(Embedding(data), 3).projections[0]

        assert np.allclose(pdist(projected), pdist(data))

    def test_explained_variance(self, rng: np.random.Generator) -> None:
        """Test eigenvalues are descending and cover min(n, d) components."""
        result = project_pca(Embedding(rng.normal(size=(10, 4)) * [4.0, 2.0, 1.0, 0.5]), 2)

        assert result.explained_variance is not None
        assert len(result.explained_variance) == 4
        assert np.all(np.diff(result.explained_variance) <= 0)
        assert result.projections[0].shape == (10, 2)

    def test_gram_path_matches_covariance_path(self, rng: np.random.Generator) -> None:
        """Test wide data projects to the same distances as the covariance route."""
        data = np.zeros((6, 1100))
        data[:, :3] = rng.normal(size=(6, 3)) * [3.0, 2.0, 1.0]

        projected = project_pca(Embedding(data), 3).projections[0]

        assert np.allclose(pdist(projected), pdist(data[:, :3]))

    def test_k_too_large(self, unit_square: np.ndarray) -> None:
        """Test k above min(n, d)."""
        with pytest.raises(DomainError):
            project_pca(Embedding(unit_square), 3)


class TestGaussian:
    """Tests for project_gaussian."""

    def test_count_and_shape(self, rng: np.random.Generator) -> None:
        """Test n_projections matrices of n×k."""
        result = project_gaussian(Embedding(rng.normal(size=(8, 6))), 2, 4, seed=1)

        assert len(result.projections) == 4
        assert all(p.shape == (8, 2) for p in result.projections)

    def test_projection_j_is_independent_of_the_count(self, rng: np.random.Generator) -> None:
        """Test each projection depends only on its seed and index."""
        embedding = Embedding(rng.normal(size=(8, 6)))

        few = project_gaussian(embedding, 2, 3, seed=5)
        many = project_gaussian(embedding, 2, 6, seed=5)

        for j in range(3):
            assert np.array_equal(few.projections[j], many.projections[j])

    def test_seed_changes_projection(self, rng: np.random.Generator) -> None:
        """Test different seeds draw different matrices."""
        embedding = Embedding(rng.normal(size=(8, 6)))

        assert not np.array_equal(
            project_gaussian(embedding, 2, 1, seed=1).projections[0],
            project_gaussian(embedding, 2, 1, seed=2).projections[0],
        )

    def test_distances_roughly_preserved(self, rng: np.random.Generator) -> None:
        """Test high-dimensional projections keep pairwise distances within a loose band."""
        embedding = Embedding(rng.normal(size=(30, 400)))

        projected = project_gaussian(embedding, 200, 1, seed=0).projections[0]
        ratios = pdist(projected) / pdist(embedding.data)

        assert 0.5 < ratios.min() <= ratios.max() < 1.5

    @pytest.mark.parametrize("seed", range(20))
    def test_squared_distances_within_half(self, seed: int) -> None:
        """Test 64-dimensional data keeps 95% of squared distances within (1 ± 0.5) at k = ceil(8 ln n / 0.25).

        The data is zero-padded to 256 coordinates so k stays within the ambient dimension.
        """
        n, eps = 256, 0.5
        k = int(np.ceil(8 * np.log(n) / eps**2))
        data = np.hstack([np.random.default_rng(seed).normal(size=(n, 64)), np.zeros((n, 192))])

        projected = project_gaussian(Embedding(data), k, 1, seed=seed).projections[0]
        ratios = pdist(projected, "sqeuclidean") / pdist(data, "sqeuclidean")

        assert k == 178
        assert np.mean(np.abs(ratios - 1) < eps) >= 0.95

    @pytest.mark.parametrize(("k", "count"), [(0, 1), (7, 1), (2, 0)])
    def test_invalid(self, rng: np.random.Generator, k: int, count: int) -> None:
        """Test k outside 1..d and non-positive counts."""
        with pytest.raises(DomainError):
            project_gaussian(Embedding(rng.normal(size=(8, 6))), k, count, seed=0)


class TestMmds:
    """Tests for project_mmds."""

    def test_unit_square(self, unit_square: np.ndarray) -> None:
        """Test classical MDS reproduces the square's distances."""
        result = project_mmds(Embedding(unit_square), 2)

        assert np.allclose(pdist(result.projections[0]), pdist(unit_square))

    def test_rank_deficient(self, collinear_points: np.ndarray) -> None:
        """Test collinear points cannot fill two dimensions."""
        with pytest.raises(DomainError):
            project_mmds(Embedding(collinear_points), 2)

    def test_k_above_dimension(self, collinear_points: np.ndarray) -> None:
        """Test k above min(n, d)."""
        with pytest.raises(DomainError):
            project_mmds(Embedding(collinear_points), 3)


class TestDispatch:
    """Tests for project."""

    @pytest.mark.parametrize("method", ["pca", "gaussian", "mmds"])
    def test_methods(self, unit_square: np.ndarray, method: str) -> None:
        """Test each projector records its configuration."""
        result = project(Embedding(unit_square), ProjectionConfig(method=method, k=2, n_projections=2))

        assert result.config.method == method

    def test_unknown(self, unit_square: np.ndarray) -> None:
        """Test an unknown projector name."""
        with pytest.raises(DomainError):
            project(Embedding(unit_square), ProjectionConfig(method="umap", k=2))
