"""Tests for circumsphere computations."""

from __future__ import annotations

import numpy as np
import pytest

from presto.predicates import circumspheres, exact_inside, strictly_inside

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class TestCircumspheres:
    """Tests for circumspheres."""

    def test_right_triangle(self) -> None:
        """Test the hypotenuse midpoint is the center."""
        centers, radii = circumspheres(TRIANGLE[None])

        assert centers[0] == pytest.approx([0.5, 0.5])
        assert radii[0] == pytest.approx(0.5)

    def test_edge_in_higher_dimension(self) -> None:
        """Test an edge's smallest sphere is centered at its midpoint."""
        centers, radii = circumspheres(np.array([[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]]))

        assert centers[0] == pytest.approx([1.0, 0.0, 0.0])
        assert radii[0] == pytest.approx(1.0)

    def test_vertices(self) -> None:
        """Test vertices have radius zero."""
        _, radii = circumspheres(np.array([[[3.0, 4.0]]]))

        assert radii[0] == 0.0

    def test_flat_simplex(self, collinear_points: np.ndarray) -> None:
        """Test collinear triangles have infinite radius."""
        _, radii = circumspheres(collinear_points[None])

        assert np.isinf(radii[0])


class TestInside:
    """Tests for the in-sphere predicates."""

    def test_exact_cospherical_is_not_inside(self) -> None:
        """Test a point on the circle is not strictly inside."""
        assert not exact_inside(TRIANGLE, np.array([1.0, 1.0]))

    def test_exact_interior(self) -> None:
        """Test an interior point."""
        assert exact_inside(TRIANGLE, np.array([0.5, 0.5]))

    def test_vectorised_matches_exact(self) -> None:
        """Test the filtered test agrees with the exact one on clear and tied queries."""
        simplices = np.repeat(TRIANGLE[None], 3, axis=0)
        queries = np.array([[1.0, 1.0], [0.5, 0.5], [3.0, 3.0]])
        centers, radii = circumspheres(simplices)

        inside = strictly_inside(simplices, centers, radii, queries)

        assert inside.tolist() == [False, True, False]
