"""Labeled graphs: structural predicates and the transformations built on them."""

import logging
from collections import deque
from typing import Iterable, Sequence

from src.data.models import ConstraintError, Edge, LabeledGraph, LengthDistribution, ParityAlphabet, UnknownSymbolError, Word

logger = logging.getLogger(__name__)


def parity_of_word(word: Sequence[str], alphabet: ParityAlphabet) -> int:
    """Return 0 when the word has an even number of odd symbols, 1 otherwise."""
    odd = 0
    for s in word:
        if s not in alphabet.symbols:
            raise UnknownSymbolError(s)
        if s in alphabet.odd:
            odd ^= 1
    return odd


def _is_prefix(a: Sequence[str], b: Sequence[str]) -> bool:
    return len(a) <= len(b) and tuple(b[: len(a)]) == tuple(a)


def is_prefix_free(words: Sequence[Sequence[str]]) -> bool:
    ordered = sorted(tuple(w) for w in words)
    # after sorting, a prefix sits right before one of its extensions
    return all(not _is_prefix(ordered[i], ordered[i + 1]) for i in range(len(ordered) - 1))


def is_deterministic(g: LabeledGraph) -> bool:
    return all(is_prefix_free([e.label for e in edges]) for edges in g.out_map().values())


def reachable(g: LabeledGraph, u: str) -> set[str]:
    """States reachable from u by paths of length at least one."""
    out = g.out_map()
    seen: set[str] = set()
    queue = deque(e.target for e in out[u])
    while queue:
        v = queue.popleft()
        if v in seen:
            continue
        seen.add(v)
        queue.extend(e.target for e in out[v])
    return seen


def strongly_connected_components(g: LabeledGraph) -> list[tuple[str, ...]]:
    """Nontrivial strongly connected components (those containing a cycle), in state order."""
    reach = {u: reachable(g, u) for u in g.states}
    components: list[tuple[str, ...]] = []
    assigned: set[str] = set()
    for u in g.states:
        if u in assigned or u not in reach[u]:
            continue
        component = tuple(v for v in g.states if v == u or (v in reach[u] and u in reach[v]))
        assigned.update(component)
        components.append(component)
    return components


def is_irreducible(g: LabeledGraph) -> bool:
    components = strongly_connected_components(g)
    return len(components) == 1 and len(components[0]) == len(g.states)


def require_paths(g: LabeledGraph, what: str = "this operation") -> None:
    if not g.edges:
        raise ConstraintError(f"{what} needs a graph with at least one edge")


def require_ordinary(g: LabeledGraph, what: str = "this operation") -> None:
    if not g.is_ordinary:
        raise ConstraintError(f"{what} needs an ordinary graph (all labels of length 1)")


def require_deterministic(g: LabeledGraph, what: str = "this operation") -> None:
    if not is_deterministic(g):
        raise ConstraintError(f"{what} needs a deterministic graph")


def require_irreducible(g: LabeledGraph, what: str = "this operation") -> None:
    if not is_irreducible(g):
        raise ConstraintError(f"{what} needs an irreducible graph")


def product_symbol(parts: Sequence[str]) -> str:
    """Name of the power-alphabet symbol for a length-t word.

    One-character components concatenate ("0", "1" -> "01"). Longer components join with
    "+" so the name never contains the "." that separates symbols of a rendered word.
    """
    if all(len(p) == 1 for p in parts):
        return "".join(parts)
    return "+".join(parts)


def graph_power(g: LabeledGraph, t: int) -> LabeledGraph:
    """The t-th power: one edge per length-t path, labeled by a single symbol over the product alphabet.

    Args:
        g: An ordinary graph.
        t: The power, at least 1. t == 1 returns g itself.

    Returns:
        LabeledGraph: Same states; a product symbol is odd when its component word is odd.

    Raises:
        ConstraintError: If g has labels longer than one symbol, t < 1, or two product names collide.
    """
    require_ordinary(g, "graph_power")
    if t < 1:
        raise ConstraintError("graph_power needs t >= 1")
    if t == 1:
        return g
    out = g.out_map()
    edges: list[Edge] = []
    symbols: dict[tuple[str, ...], str] = {}

    def walk(u: str, start: str, word: tuple[str, ...]) -> None:
        if len(word) == t:
            name = symbols.setdefault(word, product_symbol(word))
            edges.append(Edge(source=start, target=u, label=(name,)))
            return
        for e in out[u]:
            walk(e.target, start, word + e.label)

    for u in g.states:
        walk(u, u, ())
    ordered = sorted(symbols, key=g.alphabet.sort_key)
    names = tuple(symbols[w] for w in ordered)
    odd = tuple(symbols[w] for w in ordered if parity_of_word(w, g.alphabet))
    if len(set(names)) != len(names):
        raise ConstraintError("product symbols collide; use distinct symbol names")
    logger.debug("power %d: %d edges over %d product symbols", t, len(edges), len(names))
    return LabeledGraph(states=g.states, edges=tuple(edges), alphabet=ParityAlphabet(symbols=names, odd=odd))


def expand_vlg(h: LabeledGraph) -> tuple[LabeledGraph, dict[str, int]]:
    """Replace every edge of length l by a path of l ordinary edges through fresh dummy states.

    Returns the ordinary graph and a map from each dummy state to the index of the edge it came from.
    """
    if h.is_ordinary:
        return h, {}
    states = list(h.states)
    taken = set(states)
    edges: list[Edge] = []
    origin: dict[str, int] = {}
    for i, e in enumerate(h.edges):
        if e.length == 1:
            edges.append(e)
            continue
        chain = [e.source]
        for k in range(1, e.length):
            name = f"{e.source}>{i}.{k}"
            while name in taken:
                name += "'"
            taken.add(name)
            states.append(name)
            origin[name] = i
            chain.append(name)
        chain.append(e.target)
        for k, s in enumerate(e.label):
            edges.append(Edge(source=chain[k], target=chain[k + 1], label=(s,)))
    return LabeledGraph(states=tuple(states), edges=tuple(edges), alphabet=h.alphabet), origin


def reduce_to_shannon_cover(g: LabeledGraph) -> LabeledGraph:
    """Merge states with equal follower sets by Moore partition refinement.

    The first state of every block represents it; edges are redirected to representatives.

    Args:
        g: An ordinary, deterministic, irreducible graph.

    Returns:
        LabeledGraph: The Shannon cover of the constraint g presents. Reducing it again changes nothing.

    Raises:
        ConstraintError: If g is variable-length, non-deterministic, has a dead end, or is reducible.
    """
    require_ordinary(g, "reduce_to_shannon_cover")
    require_deterministic(g, "reduce_to_shannon_cover")
    require_paths(g, "reduce_to_shannon_cover")
    require_irreducible(g, "reduce_to_shannon_cover")

    delta = {u: {e.label[0]: e.target for e in edges} for u, edges in g.out_map().items()}
    block = {u: 0 for u in g.states}
    while True:
        signatures: dict[tuple, int] = {}
        refined = {}
        for u in g.states:
            signature = (block[u],) + tuple(block[delta[u][s]] if s in delta[u] else None for s in g.alphabet.symbols)
            refined[u] = signatures.setdefault(signature, len(signatures))
        stable = len(signatures) == len(set(block.values()))
        block = refined
        if stable:
            break

    representative: dict[int, str] = {}
    for u in g.states:
        representative.setdefault(block[u], u)
    kept = tuple(representative[b] for b in dict.fromkeys(block[u] for u in g.states))
    edges = tuple(Edge(source=e.source, target=representative[block[e.target]], label=e.label) for e in g.edges if e.source in kept)
    if len(kept) < len(g.states):
        logger.info("merged %d states into %d", len(g.states), len(kept))
    return LabeledGraph(states=kept, edges=edges, alphabet=g.alphabet)


def parity_subgraph(g: LabeledGraph, b: int) -> LabeledGraph:
    """Keep only the edges whose label parity is b (0 even, 1 odd); all states stay."""
    return g.replace(edges=tuple(e for e in g.edges if parity_of_word(e.label, g.alphabet) == b))


def induced_subgraph(g: LabeledGraph, keep: Iterable[str]) -> LabeledGraph:
    """Restrict g to the states in keep and the edges between them.

    Raises:
        ConstraintError: If keep is empty or names a state g does not have.
    """
    keep = set(keep)
    if not keep:
        raise ConstraintError("induced_subgraph needs a nonempty state set")
    unknown = keep - set(g.states)
    if unknown:
        raise ConstraintError(f"unknown state {sorted(unknown)[0]!r}")
    states = tuple(s for s in g.states if s in keep)
    return g.replace(states=states, edges=tuple(e for e in g.edges if e.source in keep and e.target in keep))


def out_length_distribution(g: LabeledGraph, u: str) -> LengthDistribution:
    return LengthDistribution.from_words([e.label for e in g.out_edges(u)], g.alphabet)


def with_partition(g: LabeledGraph, odd: Iterable[str]) -> LabeledGraph:
    """The same graph with a different even/odd split of its alphabet."""
    odd = tuple(odd)
    for s in odd:
        if s not in g.alphabet.symbols:
            raise UnknownSymbolError(s)
    return g.replace(alphabet=g.alphabet.with_odd(odd))


def constraint_words(g: LabeledGraph, max_len: int) -> set[Word]:
    """All words of length 1..max_len generated by paths in g (any start state)."""
    ordinary, _ = expand_vlg(g)
    out = ordinary.out_map()
    words: set[Word] = set()
    frontier = {(u, ()) for u in ordinary.states}
    for _ in range(max_len):
        nxt = set()
        for u, word in frontier:
            for e in out[u]:
                w = word + e.label
                words.add(w)
                nxt.add((e.target, w))
        frontier = nxt
    return words
