import logging
from fractions import Fraction

import numpy as np
import pytest

from src.data.loader import load_graph
from src.data.models import ConstraintError
from src.graph.spectral import ThetaMatrix, capacity, capacity_ordinary, radius_below_one, spectral_radius, theta_max


class TestCapacity:
    """Capacities of the packaged constraints."""

    def test_two_state_constraint(self):
        """The two-state constraint has capacity log2 2."""
        assert capacity_ordinary(load_graph("fig1")) == pytest.approx(1.0, abs=1e-9)

    def test_rll_constraint(self):
        assert capacity_ordinary(load_graph("fig5")) == pytest.approx(0.5515, abs=5e-4)

    def test_variable_length_graph(self):
        """Loops of lengths 1, 2, 2 give theta_max = 2."""
        assert theta_max(load_graph("fig3")) == pytest.approx(2.0, abs=1e-9)
        assert capacity(load_graph("fig3")) == pytest.approx(1.0, abs=1e-8)

    def test_presentations_agree(self):
        """The variable-length presentation and the Shannon cover have equal capacity."""
        assert capacity(load_graph("fig3")) == pytest.approx(capacity(load_graph("fig1")), abs=1e-8)

    def test_nondeterministic_rejected(self):
        with pytest.raises(ConstraintError):
            capacity_ordinary(load_graph("fig2"))
        with pytest.raises(ConstraintError):
            theta_max(load_graph("fig4"))


class TestSpectralRadius:
    def test_zero_matrix(self):
        """A graph without cycles has radius zero."""
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_reducible_matrix(self):
        """The radius is the largest over irreducible components."""
        assert spectral_radius(np.array([[2, 1], [0, 3]])) == pytest.approx(3.0, abs=1e-9)

    def test_periodic_matrix(self):
        """A period-two cycle still converges (iteration runs on A + I)."""
        assert spectral_radius(np.array([[0, 2], [2, 0]])) == pytest.approx(2.0, abs=1e-9)

    def test_adding_an_edge_never_lowers_radius(self):
        """Random nonnegative matrices, one entry incremented at a time."""
        rng = np.random.default_rng(23)
        for _ in range(100):
            size = int(rng.integers(1, 5))
            a = rng.integers(0, 3, size=(size, size)) * (rng.random((size, size)) < 0.5)
            i, j = (int(v) for v in rng.integers(size, size=2))
            b = a.copy()
            b[i, j] += 1
            assert spectral_radius(b) >= spectral_radius(a) - 1e-7

    def test_negative_entries_rejected(self):
        with pytest.raises(ConstraintError):
            spectral_radius(np.array([[1, -1], [0, 1]]))

    def test_non_convergence_logged(self, caplog):
        """Running out of iterations logs the Collatz-Wielandt bracket."""
        with caplog.at_level(logging.WARNING, logger="src.graph.spectral"):
            spectral_radius(np.array([[1, 1], [1, 0]]), tol=1e-15, max_iterations=1)
        assert "did not converge" in caplog.text


class TestThetaMatrix:
    def test_exact_evaluation(self):
        """At theta = 3 the one-state graph has entry 1/3 + 2/9."""
        m = ThetaMatrix(load_graph("fig3")).evaluate(Fraction(3))
        assert m[0, 0] == Fraction(5, 9)

    def test_radius_below_one(self):
        """lambda(A(theta)) < 1 exactly when theta exceeds theta_max."""
        matrix = ThetaMatrix(load_graph("fig3"))
        assert radius_below_one(matrix.evaluate(Fraction(3)))
        assert not radius_below_one(matrix.evaluate(Fraction(3, 2)))
        assert not radius_below_one(matrix.evaluate(Fraction(2)))

    def test_multiplicity(self):
        assert ThetaMatrix(load_graph("fig8")).max_out_multiplicity() == 4
