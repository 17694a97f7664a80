"""Approximate eigenvectors and fixed-length encoder existence tests."""

import logging
from itertools import product
from typing import Sequence

import numpy as np

from src.data.models import ConstraintError, FixedLengthReport, LabeledGraph
from src.graph.graphs import parity_of_word, require_deterministic, require_irreducible, require_ordinary, require_paths
from src.utils.settings import get_settings

logger = logging.getLogger(__name__)


def _as_int_matrix(a) -> np.ndarray:
    a = np.array(a, dtype=object)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConstraintError("expected a square count matrix")
    return a


def _as_vector(x, size: int) -> np.ndarray:
    x = np.array([int(v) for v in x], dtype=object)
    if x.shape != (size,):
        raise ConstraintError(f"expected a vector of length {size}")
    if any(v < 0 for v in x):
        raise ConstraintError("cap must be nonnegative")
    return x


def _reduce_step(a: np.ndarray, n: int, x: np.ndarray) -> np.ndarray:
    if n == 0:
        return x
    return np.minimum(x, a.dot(x) // n)


def franaszek_reduce(a, n: int, cap: Sequence[int]) -> tuple[int, ...]:
    """Largest x <= cap with a x >= n x componentwise (the zero vector when there is none).

    Iterates x <- min(x, floor(a x / n)) from cap until it stops moving. The admissible
    vectors are closed under componentwise max, so the fixed point reached is the largest.

    Args:
        a: Square nonnegative integer matrix.
        n: Target eigenvalue bound, n >= 0. n = 0 returns cap unchanged.
        cap: Entrywise upper bound, nonnegative.

    Returns:
        tuple[int, ...]: The largest (a, n)-approximate eigenvector under cap, or zeros.

    Raises:
        ConstraintError: If a is not square, cap has the wrong length or a negative entry, or n < 0.
    """
    if n < 0:
        raise ConstraintError("n must be nonnegative")
    a = _as_int_matrix(a)
    x = _as_vector(cap, a.shape[0])
    while True:
        nxt = _reduce_step(a, n, x)
        if (nxt == x).all():
            return tuple(int(v) for v in x)
        x = nxt


def joint_franaszek(a0, n0: int, a1, n1: int, cap: Sequence[int]) -> tuple[int, ...]:
    """Largest x <= cap lying in both X(a0, n0) and X(a1, n1), or zero.

    Args:
        a0: Count matrix of even paths.
        n0: Number of even input tags.
        a1: Count matrix of odd paths, same shape as a0.
        n1: Number of odd input tags.
        cap: Entrywise upper bound.

    Returns:
        tuple[int, ...]: The largest joint vector under cap, or zeros.

    Raises:
        ConstraintError: If the shapes differ or n0, n1 is negative.
    """
    if n0 < 0 or n1 < 0:
        raise ConstraintError("n0 and n1 must be nonnegative")
    a0, a1 = _as_int_matrix(a0), _as_int_matrix(a1)
    if a0.shape != a1.shape:
        raise ConstraintError(f"dimension mismatch: {a0.shape} vs {a1.shape}")
    x = _as_vector(cap, a0.shape[0])
    while True:
        nxt = _reduce_step(a1, n1, _reduce_step(a0, n0, x))
        if (nxt == x).all():
            return tuple(int(v) for v in x)
        x = nxt


def in_joint_set(a0, n0: int, a1, n1: int, x: Sequence[int]) -> bool:
    x = np.array(x, dtype=object)
    if not any(x):
        return False
    return bool((np.array(a0, dtype=object).dot(x) >= n0 * x).all() and (np.array(a1, dtype=object).dot(x) >= n1 * x).all())


def enumerate_joint_vectors(a0, n0: int, a1, n1: int, bound: int) -> list[tuple[int, ...]]:
    """Every nonzero vector with entries <= bound in X(a0, n0) and X(a1, n1)."""
    size = np.array(a0).shape[0]
    return [x for x in product(range(bound + 1), repeat=size) if in_joint_set(a0, n0, a1, n1, x)]


def _matrix_power(m: np.ndarray, t: int) -> np.ndarray:
    result = np.zeros(m.shape, dtype=object)
    result[:, :] = 0
    for i in range(m.shape[0]):
        result[i, i] = 1
    base = m
    while t:
        if t & 1:
            result = result.dot(base)
        base = base.dot(base)
        t >>= 1
    return result


def parity_power_adjacency(g: LabeledGraph, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Counts of even and odd paths of length t between states.

    Powers the 2|V|-state product graph that tracks the parity accumulated so far,
    instead of materializing the edges of the t-th power.
    """
    require_ordinary(g, "parity_power_adjacency")
    if t < 1:
        raise ConstraintError("parity_power_adjacency needs t >= 1")
    size = len(g.states)
    index = g.index()
    step = np.zeros((2 * size, 2 * size), dtype=object)
    step[:, :] = 0
    for e in g.edges:
        q = parity_of_word(e.label, g.alphabet)
        i, j = index[e.source], index[e.target]
        for p in (0, 1):
            step[p * size + i, (p ^ q) * size + j] += 1
    power = _matrix_power(step, t)
    return power[:size, :size].copy(), power[:size, size:].copy()


def fixed_length_existence(g: LabeledGraph, n0: int, n1: int, t: int = 1, deterministic: bool = False, cap: int | None = None) -> FixedLengthReport:
    """Existence test for a rate t:t fixed-length encoder with n0 even and n1 odd input tags.

    With deterministic=True the search is conclusive (0-1 vectors); otherwise a zero
    result only certifies that no vector with entries <= cap exists.

    Args:
        g: An ordinary, deterministic, irreducible constraint graph.
        n0: Number of even input tags.
        n1: Number of odd input tags.
        t: Block length.
        deterministic: Restrict to 0-1 vectors.
        cap: Entry cap; defaults to the configured cap.

    Returns:
        FixedLengthReport: The vector found, zero when none exists under the cap.
    """
    require_ordinary(g, "fixed_length_existence")
    require_paths(g, "fixed_length_existence")
    require_deterministic(g, "fixed_length_existence")
    require_irreducible(g, "fixed_length_existence")
    bound = 1 if deterministic else (get_settings().cap if cap is None else cap)
    a0, a1 = parity_power_adjacency(g, t)
    x = joint_franaszek(a0, n0, a1, n1, [bound] * len(g.states))
    report = FixedLengthReport(t=t, n0=n0, n1=n1, deterministic=deterministic, cap=bound, vector=x)
    logger.info("t=%d n0=%d n1=%d deterministic=%s: %s", t, n0, n1, deterministic, report.summary)
    return report
