"""Kraft functionals, parity-preserving Kraft feasibility, and constructive prefix-free lists.

All arithmetic is exact: Python integers and fractions.Fraction.
"""

import logging
from fractions import Fraction
from typing import Iterable, Sequence

from src.data.models import AdmissibilityWitness, ConstraintError, InfeasibleDistributionError, KraftReport, LengthDistribution, ListValidation, ParityAlphabet, PrefixCounts, PrincipalReport, UnknownSymbolError, Word
from src.graph.graphs import is_prefix_free, parity_of_word

logger = logging.getLogger(__name__)


def kraft_functional(mu: Sequence[int], n: int, ell: int) -> int:
    """K_l(mu, n) = n^l - sum_{i<=l} mu_i n^(l-i), in exact integers.

    With n = 0 only the last term survives (0 ** 0 == 1), giving -mu_l. K satisfies
    K_l = n K_(l-1) - mu_l with K_0 = 1.

    Args:
        mu: Per-length counts from length one; entries past its end count as zero.
            Entries may be negative (differences of counts).
        n: Base, n >= 0.
        ell: Length, at least 1.

    Returns:
        int: K_l(mu, n).

    Raises:
        ConstraintError: If ell < 1.
    """
    if ell < 1:
        raise ConstraintError("kraft_functional needs ell >= 1")
    value = n**ell
    for i in range(1, ell + 1):
        if i <= len(mu):
            value -= mu[i - 1] * n ** (ell - i)
    return value


def kraft_mass(mu: Sequence[int], n: int) -> Fraction:
    return sum((Fraction(m, n**ell) for ell, m in enumerate(mu, start=1)), Fraction(0))


def check_ordinary_kraft(mu: Sequence[int], n: int) -> bool:
    """True iff sum mu_l / n^l == 1, evaluated as K_r(mu, n) == 0."""
    r = max((ell for ell, m in enumerate(mu, start=1) if m), default=0)
    if r == 0:
        return False
    return kraft_functional(mu, n, r) == 0


def kraft_sequences(d: LengthDistribution, n0: int, n1: int, r: int | None = None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    r = d.r if r is None else r
    plus = tuple(kraft_functional(d.mu, n0 + n1, ell) for ell in range(1, r + 1))
    minus = tuple(kraft_functional(d.delta, n0 - n1, ell) for ell in range(1, r + 1))
    return plus, minus


def check_parity_kraft(d: LengthDistribution, n0: int, n1: int) -> KraftReport:
    """Parity-preserving Kraft feasibility of d over n0 even and n1 odd tag symbols.

    Args:
        d: A nonnegative, nonzero length distribution.
        n0: Number of even tag symbols.
        n1: Number of odd tag symbols.

    Returns:
        KraftReport: K+ and K- at every length up to r. The verdict holds when K+_r = 0
        (condition a) and K+_l >= |K-_l| at every length (condition b).

    Raises:
        ConstraintError: If d is zero or has a negative entry.
    """
    if d.is_zero or not d.is_nonnegative:
        raise ConstraintError("check_parity_kraft needs a nonnegative nonzero distribution")
    plus, minus = kraft_sequences(d, n0, n1)
    failures = tuple(ell for ell, (p, m) in enumerate(zip(plus, minus), start=1) if p < abs(m))
    return KraftReport(distribution=d, n0=n0, n1=n1, k_plus=plus, k_minus=minus, condition_a=plus[-1] == 0, condition_b_failures=failures)


def check_principal_kraft(d: LengthDistribution, n0: int, n1: int, state: str = "") -> PrincipalReport:
    """(C1) at r(u) and (C2) below it, for the outgoing label set of a single state."""
    if d.is_zero:
        return PrincipalReport(state=state, distribution=d, n0=n0, n1=n1, parity=True)
    plus, minus = kraft_sequences(d, n0, n1)
    c1 = plus[-1] <= -abs(minus[-1])
    c2 = tuple(ell for ell in range(1, len(plus)) if plus[ell - 1] < abs(minus[ell - 1]))
    return PrincipalReport(state=state, distribution=d, n0=n0, n1=n1, parity=True, k_plus=plus, k_minus=minus, mass=kraft_mass(d.mu, n0 + n1), c1=c1, c2_failures=c2)


def ordinary_mass_report(d: LengthDistribution, n: int, state: str = "") -> PrincipalReport:
    plus = tuple(kraft_functional(d.mu, n, ell) for ell in range(1, len(d.mu) + 1)) if not d.is_zero else ()
    return PrincipalReport(state=state, distribution=d, n0=n, n1=0, parity=False, k_plus=plus, mass=kraft_mass(d.mu, n))


def fixed_length_slice_condition(n0: int, n1: int, r: int, n_r: int) -> bool:
    """(n0+n1)^r + |n0-n1|^r <= 2 n_r: a state with n_r even and n_r odd edges of length r is principal."""
    return (n0 + n1) ** r + abs(n0 - n1) ** r <= 2 * n_r


def yz_forward(d: LengthDistribution, n0: int, n1: int) -> PrefixCounts:
    y, z = [Fraction(1)], [Fraction(0)]
    for ell in range(1, len(d.eta) + 1):
        y_prev, z_prev = y[-1], z[-1]
        y.append(n0 * y_prev + n1 * z_prev - d.eta_at(ell))
        z.append(n1 * y_prev + n0 * z_prev - d.omega_at(ell))
    return PrefixCounts(y=tuple(y), z=tuple(z))


def yz_backward(d: LengthDistribution, n0: int, n1: int) -> PrefixCounts:
    """Prefix counts recovered from the tail of d, starting from y_l = z_l = 0 for l >= r.

    Sums y_l + z_l come from the closed tail sums. Differences y_l - z_l come from the tail
    sums over n0 - n1, or, when n0 == n1, from omega_l - eta_l below r and 0 at r.

    Args:
        d: The parity length distribution.
        n0: Number of even tag symbols.
        n1: Number of odd tag symbols.

    Returns:
        PrefixCounts: Exact rationals; they equal yz_forward(d, n0, n1) exactly when
        K+_r = 0 and K-_r = 0, and may be fractional or negative otherwise.
    """
    r = len(d.eta)
    y, z = [], []
    for ell in range(0, r + 1):
        total = sum((Fraction(d.mu[ell + i - 1], (n0 + n1) ** i) for i in range(1, r - ell + 1)), Fraction(0))
        if ell == r:
            y.append(Fraction(0))
            z.append(Fraction(0))
            continue
        if n0 == n1:
            if ell == 0:
                y.append(total)
                z.append(Fraction(0))
                continue
            diff = Fraction(d.omega_at(ell) - d.eta_at(ell))
        else:
            diff = sum((Fraction(d.delta[ell + i - 1], (n0 - n1) ** i) for i in range(1, r - ell + 1)), Fraction(0))
        y.append((total + diff) / 2)
        z.append((total - diff) / 2)
    return PrefixCounts(y=tuple(y), z=tuple(z))


def _children(words: Iterable[Word], alphabet: ParityAlphabet) -> list[Word]:
    return [w + (s,) for w in words for s in alphabet.symbols]


def build_exhaustive_prefix_free(mu: Sequence[int], alphabet: ParityAlphabet) -> list[Word]:
    """Leftmost-leaf construction: at each length the first mu_l candidates become words."""
    n = len(alphabet.symbols)
    if not check_ordinary_kraft(mu, n):
        r = max((ell for ell, m in enumerate(mu, start=1) if m), default=0)
        value = kraft_functional(mu, n, r) if r else None
        raise InfeasibleDistributionError(f"mu={tuple(mu)} fails Kraft equality over {n} symbols (K_r={value})", kraft_value=value)
    words: list[Word] = []
    candidates: list[Word] = [(s,) for s in alphabet.symbols]
    for m in mu:
        words.extend(candidates[:m])
        candidates = _children(candidates[m:], alphabet)
    return words


def build_parity_prefix_free(d: LengthDistribution, alphabet: ParityAlphabet) -> list[Word]:
    """Grow the tree one length at a time, keeping y_l even and z_l odd words as internal nodes.

    The internal words are the lexicographically first ones of each parity; every other
    candidate becomes a list word.

    Args:
        d: The target distribution.
        alphabet: Tag alphabet; its even and odd counts are n0 and n1.

    Returns:
        list[Word]: An exhaustive prefix-free list with distribution d, in lexicographic order.

    Raises:
        InfeasibleDistributionError: If d fails the parity-preserving Kraft conditions.
    """
    report = check_parity_kraft(d, alphabet.n0, alphabet.n1)
    if not report.verdict:
        raise InfeasibleDistributionError(f"no exhaustive prefix-free list has distribution {d}", report=report)
    counts = yz_forward(d, alphabet.n0, alphabet.n1)
    words: list[Word] = []
    internal: list[Word] = [()]
    for ell in range(1, d.r + 1):
        candidates = sorted(_children(internal, alphabet), key=alphabet.sort_key)
        even = [w for w in candidates if parity_of_word(w, alphabet) == 0]
        odd = [w for w in candidates if parity_of_word(w, alphabet) == 1]
        keep_even, keep_odd = int(counts.y[ell]), int(counts.z[ell])
        internal = even[:keep_even] + odd[:keep_odd]
        words.extend(even[keep_even:] + odd[keep_odd:])
    if internal:
        raise RuntimeError(f"list construction left {len(internal)} internal words at the last length")
    return sorted(words, key=alphabet.sort_key)


def validate_list(words: Sequence[Sequence[str]], alphabet: ParityAlphabet) -> ListValidation:
    words = [tuple(w) for w in words]
    for w in words:
        for s in w:
            if s not in alphabet.symbols:
                raise UnknownSymbolError(s)
    trie: dict = {}
    terminal = object()
    for w in words:
        node = trie
        for s in w:
            node = node.setdefault(s, {})
        node[terminal] = True

    def covered(node: dict) -> bool:
        if terminal in node:
            return True
        return all(s in node and covered(node[s]) for s in alphabet.symbols)

    return ListValidation(prefix_free=is_prefix_free(words), exhaustive=bool(words) and covered(trie), distribution=LengthDistribution.from_words(words, alphabet))


def xi_sequence(zset: Iterable[int], r: int) -> tuple[int, ...]:
    zset = set(zset)
    if r < 2:
        raise ConstraintError("xi_sequence needs r >= 2")
    if any(not 1 <= ell <= r - 1 for ell in zset):
        raise ConstraintError(f"index set must lie in 1..{r - 1}")
    xi = [1]
    for ell in range(2, r + 1):
        xi.append(xi[-1] - 1 if ell - 1 in zset else 2 * xi[-1])
    return tuple(xi)


def distribution_from_prefix_counts(y: Sequence[int], z: Sequence[int], n0: int, n1: int) -> LengthDistribution:
    """Invert the forward recurrence: eta_l and omega_l from consecutive prefix counts."""
    eta = tuple(n0 * y[ell - 1] + n1 * z[ell - 1] - y[ell] for ell in range(1, len(y)))
    omega = tuple(n1 * y[ell - 1] + n0 * z[ell - 1] - z[ell] for ell in range(1, len(y)))
    return LengthDistribution(eta=eta, omega=omega)


def _witness_counts(zset: set[int], n0: int, n1: int, r: int, xi: Sequence[int] | None) -> tuple[list[int], list[int], str]:
    y, z = [1], [0]
    if xi is not None:
        construction = "doubling sequence"
        for ell in range(1, r):
            y.append(xi[ell - 1])
            z.append(-1 if ell in zset else xi[ell - 1])
    elif n0 >= n1:
        construction = "constant even prefixes"
        for ell in range(1, r):
            y.append(n0)
            z.append(-1 if ell in zset else 0)
    else:
        construction = "alternating prefixes"
        for ell in range(1, r):
            if ell % 2 == 0:
                y.append(n1)
                z.append(-1 if ell in zset else 0)
            else:
                y.append(-1 if ell in zset else 0)
                z.append(n1)
    y.append(0)
    z.append(0)
    return y, z, construction


def is_admissible(zset: Iterable[int], n0: int, n1: int, r: int) -> AdmissibilityWitness:
    """Decide whether condition (b) can fail exactly on zset for a distribution with K+ = K- = 0.

    For n0 = n1 = 1 the answer is the sign of the xi sequence. Otherwise every zset in
    1..r-1 is admissible and a witness is built from explicit prefix counts.

    Args:
        zset: Lengths at which K+_l < |K-_l| should hold.
        n0: Number of even tag symbols, at least 1.
        n1: Number of odd tag symbols, at least 1.
        r: Length of the witness distribution.

    Returns:
        AdmissibilityWitness: The verdict, xi when n0 = n1 = 1, and a verified witness
        distribution when admissible.

    Raises:
        ConstraintError: If n0 or n1 is zero or zset leaves 1..r-1.
    """
    zset = set(zset)
    if n0 < 1 or n1 < 1:
        raise ConstraintError("is_admissible needs n0, n1 >= 1")
    xi = None
    if n0 == 1 and n1 == 1:
        xi = xi_sequence(zset, r)
        if any(v <= 0 for v in xi):
            return AdmissibilityWitness(zset=tuple(sorted(zset)), n0=n0, n1=n1, r=r, xi=xi, admissible=False)
    elif any(not 1 <= ell <= r - 1 for ell in zset) or r < 2:
        raise ConstraintError(f"index set must lie in 1..{r - 1} with r >= 2")

    y, z, construction = _witness_counts(zset, n0, n1, r, xi)
    witness = distribution_from_prefix_counts(y, z, n0, n1)
    plus, minus = kraft_sequences(witness, n0, n1, r)
    failures = {ell for ell, (p, m) in enumerate(zip(plus, minus), start=1) if p < abs(m)}
    if not witness.is_nonnegative or plus[-1] != 0 or minus[-1] != 0 or failures != zset or witness.r != r:
        raise RuntimeError(f"witness for Z={sorted(zset)} at {(n0, n1, r)} does not verify: {witness}")
    logger.debug("admissible Z=%s for %s via %s", sorted(zset), (n0, n1, r), construction)
    return AdmissibilityWitness(zset=tuple(sorted(zset)), n0=n0, n1=n1, r=r, xi=xi, witness=witness, admissible=True, construction=construction)
