import logging
import math
from collections import Counter
from fractions import Fraction

import numpy as np

from src.data.models import ConstraintError, LabeledGraph
from src.graph.graphs import is_deterministic, is_irreducible, require_deterministic, require_ordinary, require_paths
from src.utils.settings import get_settings

logger = logging.getLogger(__name__)


def adjacency(g: LabeledGraph) -> np.ndarray:
    """Count matrix of an ordinary graph, as an object array of Python ints."""
    require_ordinary(g, "adjacency")
    index = g.index()
    a = np.zeros((len(g.states), len(g.states)), dtype=object)
    a[:, :] = 0
    for e in g.edges:
        a[index[e.source], index[e.target]] += 1
    return a


def _components(a: np.ndarray) -> list[list[int]]:
    size = a.shape[0]
    reach = [set() for _ in range(size)]
    for i in range(size):
        stack = [j for j in range(size) if a[i, j] > 0]
        while stack:
            j = stack.pop()
            if j in reach[i]:
                continue
            reach[i].add(j)
            stack.extend(k for k in range(size) if a[j, k] > 0)
    components, assigned = [], set()
    for i in range(size):
        if i in assigned or i not in reach[i]:
            continue
        component = [j for j in range(size) if j == i or (j in reach[i] and i in reach[j])]
        assigned.update(component)
        components.append(component)
    return components


def _power_iteration(b: np.ndarray, tol: float, max_iterations: int) -> float:
    # b is irreducible; b + I is primitive, so the iteration converges
    m = b + np.eye(b.shape[0])
    x = np.ones(b.shape[0])
    low, high = 0.0, math.inf
    for iteration in range(max_iterations):
        y = m @ x
        ratios = y / x
        low, high = ratios.min(), ratios.max()
        if high - low <= tol:
            return float((low + high) / 2 - 1)
        x = y / y.max()
    logger.warning("power iteration did not converge after %d iterations; bracket [%.12g, %.12g]", max_iterations, low - 1, high - 1)
    return float((low + high) / 2 - 1)


def spectral_radius(a: np.ndarray, tol: float | None = None, max_iterations: int | None = None) -> float:
    """Perron eigenvalue of a nonnegative matrix, as the largest over its irreducible components.

    Args:
        a: Square nonnegative matrix; object arrays of Python ints are accepted.
        tol: Width of the Collatz-Wielandt bracket at which iteration stops.
        max_iterations: Iteration cap per component. Running out logs a warning and
            returns the bracket midpoint.

    Returns:
        float: The spectral radius; 0.0 when the matrix has no cycle.

    Raises:
        ConstraintError: If tol <= 0 or a has a negative entry.
    """
    settings = get_settings()
    tol = settings.tolerance if tol is None else tol
    max_iterations = settings.max_iterations if max_iterations is None else max_iterations
    if tol <= 0:
        raise ConstraintError("tolerance must be positive")
    a = np.asarray(a, dtype=float)
    if (a < 0).any():
        raise ConstraintError("spectral_radius needs a nonnegative matrix")
    radius = 0.0
    for component in _components(a):
        b = a[np.ix_(component, component)]
        radius = max(radius, _power_iteration(b, tol, max_iterations))
    return radius


def capacity_ordinary(g: LabeledGraph, tol: float | None = None) -> float:
    require_deterministic(g, "capacity_ordinary")
    require_paths(g, "capacity_ordinary")
    radius = spectral_radius(adjacency(g), tol)
    if radius == 0:
        raise ConstraintError("the graph generates only finitely many words")
    return math.log2(radius)


class ThetaMatrix:
    """Per state pair, the multiplicities of edge lengths of a variable-length graph."""

    def __init__(self, h: LabeledGraph):
        self.states = h.states
        index = h.index()
        self.entries: dict[tuple[int, int], Counter] = {}
        for e in h.edges:
            self.entries.setdefault((index[e.source], index[e.target]), Counter())[e.length] += 1

    @property
    def dimension(self) -> int:
        return len(self.states)

    def max_out_multiplicity(self) -> int:
        rows = Counter()
        for (i, _), lengths in self.entries.items():
            rows[i] += sum(lengths.values())
        return max(rows.values(), default=0)

    def evaluate(self, theta):
        """The matrix with entries sum of mu_l(u, v) * theta^-l; exact when theta is a Fraction."""
        exact = isinstance(theta, (Fraction, int))
        m = np.zeros((self.dimension, self.dimension), dtype=object if exact else float)
        if exact:
            theta = Fraction(theta)
            m[:, :] = Fraction(0)
        for (i, j), lengths in self.entries.items():
            m[i, j] = sum(count * theta ** (-ell) for ell, count in lengths.items())
        return m


def radius_below_one(m: np.ndarray) -> bool:
    """Exact test of lambda(m) < 1 for a nonnegative rational matrix.

    I - m is then a nonsingular M-matrix, which holds exactly when every pivot of
    Gaussian elimination without pivoting is positive.
    """
    size = m.shape[0]
    work = [[(1 if i == j else 0) - Fraction(m[i, j]) for j in range(size)] for i in range(size)]
    for k in range(size):
        pivot = work[k][k]
        if pivot <= 0:
            return False
        for i in range(k + 1, size):
            factor = work[i][k] / pivot
            if factor:
                for j in range(k, size):
                    work[i][j] -= factor * work[k][j]
    return True


def theta_matrix(h: LabeledGraph) -> ThetaMatrix:
    return ThetaMatrix(h)


def theta_max(h: LabeledGraph, tol: float | None = None) -> float:
    """The largest theta with lambda(A_H(theta)) = 1, found by exact bisection.

    theta_max lies in [1, 1 + the largest out-degree]. Each bisection step decides
    lambda < 1 exactly on rational matrices.

    Args:
        h: An irreducible deterministic graph, ordinary or variable-length.
        tol: Width of the final bracket.

    Returns:
        float: The midpoint of the final bracket. log2 of it is the capacity.

    Raises:
        ConstraintError: If h has no edges or is reducible or non-deterministic.
    """
    tol = get_settings().tolerance if tol is None else tol
    require_paths(h, "theta_max")
    if not is_irreducible(h):
        raise ConstraintError("theta_max needs an irreducible graph")
    if not is_deterministic(h):
        raise ConstraintError("theta_max needs a deterministic graph")
    matrix = ThetaMatrix(h)
    low, high = Fraction(1), Fraction(1 + matrix.max_out_multiplicity())
    while high - low > tol:
        mid = (low + high) / 2
        if radius_below_one(matrix.evaluate(mid)):
            high = mid
        else:
            low = mid
    return float((low + high) / 2)


def capacity(g: LabeledGraph, tol: float | None = None) -> float:
    """Capacity of the constraint presented by a deterministic graph, ordinary or variable-length."""
    if g.is_ordinary:
        return capacity_ordinary(g, tol)
    return math.log2(theta_max(g, tol))
