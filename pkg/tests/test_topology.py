"""Tests for presto filtrations and persistent homology."""

from __future__ import annotations

from collections.abc import Callable
from math import comb
from typing import Any

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from presto.distances import bottleneck
from presto.exceptions import ConsistencyError, DomainError, UnsupportedDimension
from presto.models import FilteredComplex, PersistenceDiagram, PrestoConfig
from presto.topology import alpha_complex, check_filtration, diagram_from_points, persistence, rips_complex
from tests.oracles import diagram_bars, naive_persistence


def _values_by_dim(complex_: FilteredComplex) -> dict[int, list[float]]:
    out: dict[int, list[float]] = {}
    for simplex, value in zip(complex_.simplices, complex_.values):
        out.setdefault(len(simplex) - 1, []).append(float(value))
    return out


class TestAlphaComplex:
    """Tests for alpha_complex."""

    def test_unit_square(self, unit_square: np.ndarray) -> None:
        """Test sides enter at 0.25, the diagonal and both triangles at 0.5."""
        values = _values_by_dim(alpha_complex(unit_square))

        assert values[0] == [0.0] * 4
        assert values[1] == pytest.approx([0.25] * 4 + [0.5])
        assert values[2] == pytest.approx([0.5, 0.5])

    def test_single_point(self) -> None:
        """Test one point is a single vertex."""
        complex_ = alpha_complex(np.array([[1.0, 2.0]]))

        assert complex_.simplices == ((0,),)
        assert complex_.values.tolist() == [0.0]

    def test_collinear_path(self, collinear_points: np.ndarray) -> None:
        """Test collinear points in the plane form a path."""
        complex_ = alpha_complex(collinear_points)

        assert complex_.simplices[3:] == ((0, 1), (1, 2))
        assert _values_by_dim(complex_)[1] == pytest.approx([0.25, 0.25])

    def test_obtuse_triangle_edge_is_attached(self) -> None:
        """Test a non-Gabriel edge enters with its triangle."""
        points = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 0.5]])

        complex_ = alpha_complex(points)
        by_simplex = dict(zip(complex_.simplices, complex_.values))

        assert by_simplex[(0, 1)] == pytest.approx(by_simplex[(0, 1, 2)])
        assert by_simplex[(0, 1)] > 4.0

    def test_three_dimensions(self, rng: np.random.Generator) -> None:
        """Test a 3-D cloud builds a valid filtration up to tetrahedra."""
        complex_ = alpha_complex(rng.normal(size=(15, 3)))

        check_filtration(complex_)
        assert complex_.max_dim == 3

    def test_duplicates_are_separated(self, unit_square: np.ndarray) -> None:
        """Test repeated points still produce a valid complex over every input."""
        complex_ = alpha_complex(np.vstack([unit_square, unit_square[:1]]))

        assert sum(len(s) == 1 for s in complex_.simplices) == 5
        check_filtration(complex_)

    def test_too_many_dimensions(self, rng: np.random.Generator) -> None:
        """Test alpha complexes are limited to three dimensions."""
        with pytest.raises(UnsupportedDimension, match="--complex rips"):
            alpha_complex(rng.normal(size=(10, 4)))

    def test_mismatched_k(self, unit_square: np.ndarray) -> None:
        """Test k must match the point dimension."""
        with pytest.raises(DomainError):
            alpha_complex(unit_square, 3)


class TestRipsComplex:
    """Tests for rips_complex."""

    def test_two_points(self) -> None:
        """Test an edge enters at the distance."""
        complex_ = rips_complex(np.array([[0.0, 3.0], [3.0, 0.0]]), 1)

        assert complex_.simplices == ((0,), (1,), (0, 1))
        assert complex_.values.tolist() == [0.0, 0.0, 3.0]

    def test_unit_square(self, unit_square: np.ndarray) -> None:
        """Test sides at 1, diagonals and triangles at sqrt(2)."""
        values = _values_by_dim(rips_complex(squareform(pdist(unit_square)), 1))

        assert values[1] == pytest.approx([1.0] * 4 + [np.sqrt(2)] * 2)
        assert values[2] == pytest.approx([np.sqrt(2)] * 4)
        assert 3 not in values

    def test_threshold(self, unit_square: np.ndarray) -> None:
        """Test a small threshold leaves only vertices."""
        complex_ = rips_complex(squareform(pdist(unit_square)), 1, threshold=0.5)

        assert len(complex_) == 4

    def test_asymmetric(self) -> None:
        """Test asymmetric matrices are rejected."""
        with pytest.raises(DomainError):
            rips_complex(np.array([[0.0, 1.0], [2.0, 0.0]]), 1)

    def test_nonzero_diagonal(self) -> None:
        """Test the diagonal must be zero."""
        with pytest.raises(DomainError):
            rips_complex(np.array([[1.0, 1.0], [1.0, 0.0]]), 1)

    def test_simplex_budget(self, unit_square: np.ndarray, mocker: Any) -> None:
        """Test a complex above the simplex budget is refused with a subsampling hint."""
        mocker.patch("presto.topology.RIPS_MAX_SIMPLICES", 10)

        with pytest.raises(DomainError, match="--sample-size"):
            rips_complex(squareform(pdist(unit_square)), 1)

    def test_small_chunks_build_the_same_complex(self, rng: np.random.Generator, mocker: Any) -> None:
        """Test splitting the neighbour search into tiny blocks changes nothing."""
        dist = squareform(pdist(rng.uniform(size=(12, 3))))
        whole = rips_complex(dist, 2)
        mocker.patch("presto.topology.RIPS_CHUNK_CELLS", 1)

        chunked = rips_complex(dist, 2)

        assert chunked.simplices == whole.simplices
        np.testing.assert_array_equal(chunked.values, whole.values)

    def test_simplex_counts(self, rng: np.random.Generator) -> None:
        """Test every subset of up to max_dim + 2 points is a simplex."""
        complex_ = rips_complex(squareform(pdist(rng.uniform(size=(10, 2)))), 2)

        assert np.bincount(complex_.dims()).tolist() == [comb(10, size) for size in (1, 2, 3, 4)]


class TestPersistence:
    """Tests for persistence."""

    def test_unit_square_alpha(self, unit_square: np.ndarray) -> None:
        """Test three components merge at 0.25 and one loop lives until 0.5."""
        diagram = persistence(alpha_complex(unit_square), 1)

        np.testing.assert_allclose(diagram.get(0), [[0.0, 0.25]] * 3)
        np.testing.assert_allclose(diagram.get(1), [[0.25, 0.5]])
        assert diagram.essential_count == {0: 1, 1: 0}

    def test_unit_square_rips(self, unit_square: np.ndarray) -> None:
        """Test the Rips loop of the square."""
        diagram = persistence(rips_complex(squareform(pdist(unit_square)), 1), 1)

        np.testing.assert_allclose(diagram.get(1), [[1.0, np.sqrt(2)]])

    def test_capped_essential(self, unit_square: np.ndarray) -> None:
        """Test the essential component is reported up to the last value when capped."""
        diagram = persistence(alpha_complex(unit_square), 1, cap_essential=True)

        assert len(diagram.get(0)) == 4
        assert diagram.get(0)[-1].tolist() == pytest.approx([0.0, 0.5])

    def test_circle_has_one_loop(self, circle: Callable[..., np.ndarray]) -> None:
        """Test evenly spaced points on a unit circle carry one loop dying at radius squared 1."""
        bars = persistence(alpha_complex(circle(12)), 1).get(1)
        loops = bars[bars[:, 1] - bars[:, 0] > 1e-6]

        assert len(loops) == 1
        birth, death = loops[0]
        assert birth == pytest.approx(np.sin(np.pi / 12) ** 2)
        assert death == pytest.approx(1.0)

    @pytest.mark.parametrize("max_h", [0, 1, 2])
    def test_matches_unoptimized_reduction_alpha(self, rng: np.random.Generator, max_h: int) -> None:
        """Test clearing gives the same pairs as a plain reduction on alpha complexes."""
        complex_ = alpha_complex(rng.uniform(size=(14, 3)))

        assert diagram_bars(persistence(complex_, max_h), max_h) == naive_persistence(complex_, max_h)

    def test_matches_unoptimized_reduction_rips(self, rng: np.random.Generator) -> None:
        """Test clearing gives the same pairs as a plain reduction on Rips complexes."""
        complex_ = rips_complex(squareform(pdist(rng.uniform(size=(9, 2)))), 1)

        assert diagram_bars(persistence(complex_, 1), 1) == naive_persistence(complex_, 1)

    @pytest.mark.parametrize("seed", range(100))
    def test_random_alpha_complexes_match_unoptimized_reduction(self, seed: int) -> None:
        """Test small random planar alpha complexes pair exactly like the plain reduction."""
        rng = np.random.default_rng(seed)
        complex_ = alpha_complex(rng.uniform(size=(int(rng.integers(3, 9)), 2)))

        assert diagram_bars(persistence(complex_, 1), 1) == naive_persistence(complex_, 1)

    @pytest.mark.parametrize("seed", range(100))
    def test_random_rips_complexes_match_unoptimized_reduction(self, seed: int) -> None:
        """Test small random Rips complexes pair exactly like the plain reduction through H2."""
        rng = np.random.default_rng(1000 + seed)
        points = rng.uniform(size=(int(rng.integers(3, 9)), int(rng.integers(1, 4))))
        complex_ = rips_complex(squareform(pdist(points)), 2)

        assert diagram_bars(persistence(complex_, 2), 2) == naive_persistence(complex_, 2)

    @pytest.mark.parametrize("seed", range(100))
    def test_stable_under_small_perturbations(self, seed: int) -> None:
        """Test moving every point by at most eps moves the radius diagram by at most 4·eps."""
        rng = np.random.default_rng(2000 + seed)
        eps = 1e-3
        points = rng.uniform(size=(30, 2))
        moved = points + rng.uniform(-eps, eps, size=points.shape)

        def radii(cloud: np.ndarray) -> PersistenceDiagram:
            diagram = persistence(alpha_complex(cloud), 1)
            return PersistenceDiagram(intervals={h: np.sqrt(diagram.get(h)) for h in (0, 1)})

        before, after = radii(points), radii(moved)
        for h in (0, 1):
            assert bottleneck(before, after, h) <= 4 * eps + 1e-12

    def test_point_order_does_not_matter(self, rng: np.random.Generator) -> None:
        """Test permuting the input points leaves the diagram unchanged."""
        points = rng.uniform(size=(20, 2))
        order = rng.permutation(20)

        first = persistence(alpha_complex(points), 1)
        second = persistence(alpha_complex(points[order]), 1)

        for h in (0, 1):
            assert np.allclose(first.get(h), second.get(h))

    def test_unsupported_h(self, unit_square: np.ndarray) -> None:
        """Test homology above dimension two is refused."""
        with pytest.raises(DomainError):
            persistence(alpha_complex(unit_square), 3)


class TestCheckFiltration:
    """Tests for check_filtration."""

    def test_face_after_coface(self) -> None:
        """Test a face listed after its edge."""
        complex_ = FilteredComplex.from_simplices(((0,), (0, 1), (1,)), np.zeros(3))

        with pytest.raises(ConsistencyError):
            check_filtration(complex_)

    def test_negative_value(self) -> None:
        """Test values must be nonnegative."""
        complex_ = FilteredComplex.from_simplices(((0,),), [-1.0])

        with pytest.raises(ConsistencyError):
            check_filtration(complex_)


class TestDiagramFromPoints:
    """Tests for diagram_from_points."""

    def test_uses_configured_complex(self, unit_square: np.ndarray) -> None:
        """Test the complex choice changes the filtration units."""
        alpha = diagram_from_points(unit_square, PrestoConfig(h_max=1))
        rips = diagram_from_points(unit_square, PrestoConfig(h_max=1, complex="rips"))

        np.testing.assert_allclose(alpha.get(1), [[0.25, 0.5]])
        np.testing.assert_allclose(rips.get(1), [[1.0, np.sqrt(2)]])

    def test_single_point_rips(self) -> None:
        """Test one point has an empty finite diagram."""
        diagram = diagram_from_points(np.zeros((1, 5)), PrestoConfig(h_max=1, complex="rips"))

        assert len(diagram.get(0)) == 0
        assert diagram.essential_count[0] == 1
