"""Principal-state search, trimming into encoders, and encoder verification."""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from src.data.models import CandidateOutcome, CheckItem, ConstraintError, Edge, EncoderCandidate, LabeledGraph, LengthDistribution, NonexistenceReport, PrincipalReport, PrincipalResult, SearchBudgetExceeded, TrimEntry, VerificationReport, Word
from src.graph.graphs import expand_vlg, induced_subgraph, is_deterministic, out_length_distribution, parity_of_word, reduce_to_shannon_cover, require_deterministic, require_irreducible, require_ordinary, require_paths
from src.tools.kraft import check_principal_kraft, kraft_mass, kraft_sequences, ordinary_mass_report
from src.utils.progress import progress
from src.utils.settings import get_settings

logger = logging.getLogger(__name__)


def _subset_name(subset: Iterable[str]) -> str:
    return "{" + ", ".join(subset) + "}"


def _require_constraint_graph(g: LabeledGraph, what: str) -> None:
    require_ordinary(g, what)
    require_paths(g, what)
    require_deterministic(g, what)
    require_irreducible(g, what)


def _cut_edges(u: str, cut: Sequence[tuple[Word, str]]) -> tuple[Edge, ...]:
    return tuple(Edge(source=u, target=target, label=word) for word, target in cut)


# ordinary principal states


def _mass_tables(out: dict[str, list[Edge]], keep: set[str], n: int, r: int) -> list[dict[str, Fraction]]:
    """c_t(v) for t = 0..r: the largest Kraft mass of a cut of depth <= t from v ending in keep."""
    tables = [{v: Fraction(0) for v in out}]
    for _ in range(r):
        previous = tables[-1]
        tables.append({v: sum((max(Fraction(int(e.target in keep)), previous[e.target]) for e in edges), Fraction(0)) / n for v, edges in out.items()})
    return tables


def _mass_witness(out: dict[str, list[Edge]], keep: set[str], tables: list[dict[str, Fraction]], u: str, t: int) -> list[tuple[Word, str]]:
    cut: list[tuple[Word, str]] = []
    for e in out[u]:
        leaf = Fraction(int(e.target in keep))
        deeper = tables[t - 1][e.target]
        if leaf and leaf >= deeper:
            cut.append((e.label, e.target))
        elif deeper > 0:
            cut.extend((e.label + word, target) for word, target in _mass_witness(out, keep, tables, e.target, t - 1))
    return cut


def ordinary_principal_states(g: LabeledGraph, n: int, r: int) -> PrincipalResult:
    """The largest set of principal states with respect to n, with cuts of depth at most r."""
    _require_constraint_graph(g, "ordinary_principal_states")
    if n < 1 or r < 1:
        raise ConstraintError("ordinary_principal_states needs n >= 1 and r >= 1")
    out = g.out_map()
    keep = list(g.states)
    while keep:
        tables = _mass_tables(out, set(keep), n, r)
        dropped = [u for u in keep if tables[r][u] < 1]
        if not dropped:
            break
        for u in dropped:
            progress.update_status("principal", u, f"removed, mass {tables[r][u]}")
        logger.info("dropping %s (mass < 1 at r=%d)", _subset_name(dropped), r)
        keep = [u for u in keep if u not in dropped]
    if not keep:
        return PrincipalResult(n0=n, n1=0, r=r, parity=False)

    keep_set = set(keep)
    tables = _mass_tables(out, keep_set, n, r)
    cuts, reports = {}, {}
    for u in keep:
        cut = _mass_witness(out, keep_set, tables, u, r)
        cuts[u] = _cut_edges(u, cut)
        reports[u] = ordinary_mass_report(LengthDistribution.from_words([w for w, _ in cut], g.alphabet), n, u)
        progress.update_status("principal", u, "done")
    return PrincipalResult(principal_set=tuple(keep), cuts=cuts, reports=reports, n0=n, n1=0, r=r, parity=False)


def principal_subgraph(g: LabeledGraph, result: PrincipalResult) -> LabeledGraph:
    """The variable-length graph on the principal states whose edges are the chosen cuts."""
    if not result.found:
        raise ConstraintError("there are no principal states to build a subgraph from")
    edges = tuple(e for u in result.principal_set for e in result.cuts[u])
    return LabeledGraph(states=result.principal_set, edges=edges, alphabet=g.alphabet)


def _removal_order(h: LabeledGraph, edges: Iterable[Edge]) -> list[Edge]:
    # longest first, then lexicographically last first
    return sorted(edges, key=lambda e: (e.length, h.alphabet.sort_key(e.label)), reverse=True)


def trim_ordinary(h: LabeledGraph, n: int, source: PrincipalResult | None = None) -> EncoderCandidate:
    """Drop longest edges until every state meets Kraft equality with respect to n."""
    kept: list[Edge] = []
    trim_log: dict[str, TrimEntry] = {}
    for u, edges in h.out_map().items():
        mass = kraft_mass(out_length_distribution(h, u).mu, n)
        if mass < 1:
            raise ConstraintError(f"state {u!r} has Kraft mass {mass} < 1")
        removed: list[Edge] = []
        for e in _removal_order(h, edges):
            if mass == 1:
                break
            mass -= Fraction(1, n**e.length)
            removed.append(e)
        if mass != 1:
            raise RuntimeError(f"trimming state {u!r} overshot Kraft equality")
        kept.extend(e for e in edges if e not in removed)
        parities = [parity_of_word(e.label, h.alphabet) for e in removed]
        trim_log[u] = TrimEntry(removed_even=parities.count(0), removed_odd=parities.count(1), removed=tuple(removed))
    order = {id(e): i for i, e in enumerate(h.edges)}
    kept.sort(key=lambda e: order[id(e)])
    return EncoderCandidate(graph=h.replace(edges=tuple(kept)), source_principal=source, trim_log=trim_log)


# parity-preserving principal states


def pp_principal_check(h: LabeledGraph, keep: Iterable[str], n0: int, n1: int) -> tuple[dict[str, PrincipalReport], bool]:
    sub = induced_subgraph(h, keep)
    reports = {u: check_principal_kraft(out_length_distribution(sub, u), n0, n1, u) for u in sub.states}
    return reports, all(report.passed for report in reports.values())


def _zero(depth: int) -> tuple[int, ...]:
    return (0,) * (2 * depth)


def _unit(q: int, depth: int) -> tuple[int, ...]:
    key = [0] * (2 * depth)
    key[q] = 1
    return tuple(key)


def _shift(key: tuple[int, ...], q: int, depth: int) -> tuple[int, ...]:
    """Move a child distribution one level down, flipping parities by the edge parity q."""
    shifted = [0] * (2 * depth)
    for i, count in enumerate(key):
        ell, p = divmod(i, 2)
        shifted[2 * (ell + 1) + (p ^ q)] += count
    return tuple(shifted)


def _add(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


def _as_distribution(key: tuple[int, ...]) -> LengthDistribution:
    d = LengthDistribution(eta=key[0::2], omega=key[1::2])
    return d if d.is_zero else d.trimmed()


class CutSearch:
    """Achievable length distributions of cuts in depth-bounded path trees, for one candidate state set.

    A cut from u is a prefix-free set of paths from u of length at most r, all ending in
    keep. Since the graph is deterministic, distinct paths carry distinct labels. For each
    achievable (eta, omega) one representative cut is kept: the first one produced when
    children are combined in edge order with options tried as omit, stop here, go deeper.
    """

    def __init__(self, g: LabeledGraph, keep: Iterable[str], n0: int, n1: int, r: int, tree_budget: int, option_budget: int):
        self.g = g
        self.out = g.out_map()
        self.keep = set(keep)
        self.n0, self.n1, self.r = n0, n1, r
        self.tree_budget = tree_budget
        self.option_budget = option_budget
        self.parity = {id(e): parity_of_word(e.label, g.alphabet) for e in g.edges}
        self._memo: dict[tuple[str, int], dict] = {}

    def tree_size(self, u: str, depth: int) -> int:
        if depth == 0:
            return 0
        return sum(1 + self.tree_size(e.target, depth - 1) for e in self.out[u])

    def _combine(self, result: dict, child: dict, prune=None) -> dict:
        combined: dict = {}
        for key, cut in result.items():
            for child_key, child_cut in child.items():
                total = _add(key, child_key)
                if total in combined or (prune is not None and prune(total)):
                    continue
                combined[total] = cut + child_cut
                if len(combined) > self.option_budget:
                    raise SearchBudgetExceeded(f"more than {self.option_budget} distinct cut distributions; inconclusive within budget")
        return combined

    def options(self, v: str, depth: int, prune=None) -> dict[tuple[int, ...], tuple[tuple[Word, str], ...]]:
        if depth == 0:
            return {(): ()}
        if prune is None and (v, depth) in self._memo:
            return self._memo[(v, depth)]
        result = {_zero(depth): ()}
        for e in self.out[v]:
            q = self.parity[id(e)]
            child = {_zero(depth): ()}
            if e.target in self.keep:
                child[_unit(q, depth)] = ((e.label, e.target),)
            if depth > 1:
                for key, cut in self.options(e.target, depth - 1).items():
                    if any(key):
                        child.setdefault(_shift(key, q, depth), tuple((e.label + word, target) for word, target in cut))
            result = self._combine(result, child, prune)
        if prune is None:
            self._memo[(v, depth)] = result
        return result

    def _hopeless(self, key: tuple[int, ...]) -> bool:
        # adding words only lowers K+, so K+_l < 0 below the current support can never recover
        n = self.n0 + self.n1
        support = max((i // 2 + 1 for i, count in enumerate(key) if count), default=0)
        k_plus = 1
        for ell in range(1, support):
            k_plus = n * k_plus - key[2 * ell - 2] - key[2 * ell - 1]
            if k_plus < 0:
                return True
        return False

    def best_cut(self, u: str) -> tuple[PrincipalReport | None, tuple[Edge, ...]]:
        """The passing cut from u whose distribution has the most short words, else the best failing one."""
        size = self.tree_size(u, self.r)
        if size > self.tree_budget:
            raise SearchBudgetExceeded(f"path tree from {u!r} has {size} nodes at depth {self.r}, over the budget of {self.tree_budget}; inconclusive within budget")
        candidates = [(key, cut) for key, cut in self.options(u, self.r, prune=self._hopeless).items() if any(key)]
        if not candidates:
            return None, ()
        reports = [(check_principal_kraft(_as_distribution(key), self.n0, self.n1, u), key, cut) for key, cut in candidates]

        def rank(item):
            report, key, _ = item
            return (not report.passed,) + tuple(-(key[i] + key[i + 1]) for i in range(0, len(key), 2)) + tuple(-key[i] for i in range(0, len(key), 2))

        report, _, cut = min(reports, key=rank)
        return report, _cut_edges(u, cut)


def _evaluate_subset(g: LabeledGraph, subset: tuple[str, ...], n0: int, n1: int, r: int, tree_budget: int, option_budget: int):
    search = CutSearch(g, subset, n0, n1, r, tree_budget, option_budget)
    reports, cuts = {}, {}
    for u in subset:
        report, cut = search.best_cut(u)
        if report is None:
            return CandidateOutcome(subset=subset, r=r, passed=False, failing_state=u, failing_condition="no cut ends in the candidate set"), reports, cuts
        reports[u], cuts[u] = report, cut
        if not report.passed:
            return CandidateOutcome(subset=subset, r=r, passed=False, failing_state=u, failing_condition=report.failing_condition), reports, cuts
    return CandidateOutcome(subset=subset, r=r, passed=True), reports, cuts


def _candidate_subsets(states: Sequence[str], max_states: int | None = None) -> list[tuple[str, ...]]:
    largest = len(states) if max_states is None else min(max_states, len(states))
    return [subset for size in range(largest, 0, -1) for subset in combinations(states, size)]


def _scan_subsets(g: LabeledGraph, subsets: list[tuple[str, ...]], n0: int, n1: int, r: int, tree_budget: int, option_budget: int, parallel: bool, task: str):
    """Evaluate subsets in canonical order and yield each outcome; parallel runs keep the same order."""

    def evaluate(subset):
        return _evaluate_subset(g, subset, n0, n1, r, tree_budget, option_budget)

    if not parallel:
        for subset in subsets:
            progress.update_status(task, _subset_name(subset), f"checking r={r}")
            yield evaluate(subset)
        return
    executor = ThreadPoolExecutor()
    try:
        for subset, outcome in zip(subsets, executor.map(evaluate, subsets)):
            progress.update_status(task, _subset_name(subset), f"checking r={r}")
            yield outcome
    finally:
        executor.shutdown(wait=False, cancel_futures=True)


def pp_principal_search(g: LabeledGraph, n0: int, n1: int, r: int, tree_budget: int | None = None, parallel: bool = False, max_states: int | None = None) -> PrincipalResult:
    """Search for a set of parity-preserving principal states with cuts of depth at most r.

    Candidate sets are tried by decreasing size, then in state order. Any accepted family
    extends to a full presentation (see complete_presentation).

    Args:
        g: An ordinary, deterministic, irreducible constraint graph.
        n0: Number of even input tag symbols.
        n1: Number of odd input tag symbols.
        r: Largest cut depth.
        tree_budget: Path-tree node limit per state; defaults to the configured budget.
        parallel: Evaluate candidate sets on a thread pool. The result is the same.
        max_states: Skip candidate sets larger than this.

    Returns:
        PrincipalResult: The first passing set with its cuts and reports, or an empty
        result carrying the number of sets tried.

    Raises:
        SearchBudgetExceeded: If a path tree or the set of cut distributions outgrows its budget.
        ConstraintError: If g is not a constraint graph.
    """
    _require_constraint_graph(g, "pp_principal_search")
    settings = get_settings()
    tree_budget = settings.tree_budget if tree_budget is None else tree_budget
    tried = 0
    for outcome, reports, cuts in _scan_subsets(g, _candidate_subsets(g.states, max_states), n0, n1, r, tree_budget, settings.option_budget, parallel, "pp-principal"):
        tried += 1
        name = _subset_name(outcome.subset)
        if outcome.passed:
            progress.update_status("pp-principal", name, "done")
            logger.info("accepted %s at r=%d", name, r)
            return PrincipalResult(principal_set=outcome.subset, cuts=cuts, reports=reports, n0=n0, n1=n1, r=r, subsets_tried=tried)
        progress.update_status("pp-principal", name, f"rejected: {outcome.failing_state} fails {outcome.failing_condition}")
        logger.debug("rejected %s: %s fails %s", name, outcome.failing_state, outcome.failing_condition)
    return PrincipalResult(n0=n0, n1=n1, r=r, subsets_tried=tried)


def trim_pp(h: LabeledGraph, n0: int, n1: int, source: PrincipalResult | None = None) -> EncoderCandidate:
    """Remove y+ even and y- odd edges of length r(u) per state so that K+(u) = K-(u) = 0.

    Within each parity the longest, lexicographically last edges go first. Shorter
    lengths are never touched.

    Args:
        h: A graph whose every state is principal.
        n0: Number of even input tag symbols.
        n1: Number of odd input tag symbols.
        source: The search result h came from, recorded on the candidate.

    Returns:
        EncoderCandidate: The trimmed graph and a per-state log of removed edges.

    Raises:
        ConstraintError: If some state of h fails (C1) or (C2).
    """
    reports, ok = pp_principal_check(h, h.states, n0, n1)
    if not ok:
        failing = next(u for u, report in reports.items() if not report.passed)
        raise ConstraintError(f"state {failing!r} is not principal: {reports[failing].failing_condition}")
    kept: list[Edge] = []
    trim_log: dict[str, TrimEntry] = {}
    for u, edges in h.out_map().items():
        report = reports[u]
        r = report.distribution.r
        k_plus, k_minus = report.k_plus[-1], report.k_minus[-1]
        if (k_plus + k_minus) % 2:
            raise RuntimeError(f"K+ and K- of state {u!r} have different parity")
        y_plus, y_minus = -(k_plus + k_minus) // 2, -(k_plus - k_minus) // 2
        if not 0 <= y_plus <= report.distribution.eta_at(r) or not 0 <= y_minus <= report.distribution.omega_at(r):
            raise RuntimeError(f"state {u!r} needs {y_plus} even and {y_minus} odd removals, more than it has")
        longest = [e for e in _removal_order(h, edges) if e.length == r]
        even = [e for e in longest if parity_of_word(e.label, h.alphabet) == 0][:y_plus]
        odd = [e for e in longest if parity_of_word(e.label, h.alphabet) == 1][:y_minus]
        removed = even + odd
        kept.extend(e for e in edges if e not in removed)
        trim_log[u] = TrimEntry(removed_even=len(even), removed_odd=len(odd), removed=tuple(removed))
    order = {id(e): i for i, e in enumerate(h.edges)}
    kept.sort(key=lambda e: order[id(e)])
    return EncoderCandidate(graph=h.replace(edges=tuple(kept)), source_principal=source, trim_log=trim_log)


# verification


def language_containment(e: LabeledGraph, g: LabeledGraph) -> bool:
    """True iff every word generated by e is generated by g."""
    require_ordinary(g, "language_containment")
    expanded, _ = expand_vlg(e)
    moves: dict[str, dict[str, set[str]]] = {u: {} for u in g.states}
    for edge in g.edges:
        moves[edge.source].setdefault(edge.label[0], set()).add(edge.target)
    out = expanded.out_map()
    everywhere = frozenset(g.states)
    queue = deque((x, everywhere) for x in expanded.states)
    seen = set(queue)
    while queue:
        x, here = queue.popleft()
        for edge in out[x]:
            there = frozenset(t for p in here for t in moves[p].get(edge.label[0], ()))
            if not there:
                logger.debug("symbol %r from %s escapes the constraint", edge.label[0], x)
                return False
            pair = (edge.target, there)
            if pair not in seen:
                seen.add(pair)
                queue.append(pair)
    return True


def verify_vle(e: LabeledGraph, g: LabeledGraph, n0: int, n1: int = 0, parity: bool = False) -> VerificationReport:
    """Itemized check of an encoder against a constraint.

    E1 is determinism and E2 containment of the generated words in S(g). E3 is Kraft
    equality per state. With parity set, E4 (K+ >= |K-| at every length) and K-(u) = 0
    are added per state.

    Args:
        e: The candidate encoder graph.
        g: The ordinary constraint graph.
        n0: Number of even input tag symbols, or the alphabet size for ordinary checks.
        n1: Number of odd input tag symbols.
        parity: Also check the parity-preserving conditions.

    Returns:
        VerificationReport: One item per condition and state. Containment and the per-state
        items are skipped when e is not deterministic.
    """
    items: list[CheckItem] = []
    deterministic = is_deterministic(e)
    items.append(CheckItem(condition="E1", passed=deterministic, detail="deterministic" if deterministic else "outgoing labels are not prefix-free"))
    if not deterministic:
        return VerificationReport(parity=parity, n0=n0, n1=n1, items=tuple(items))
    contained = language_containment(e, g)
    items.append(CheckItem(condition="E2", passed=contained, detail="generated words stay in the constraint" if contained else "generates a word outside the constraint"))
    for u in e.states:
        d = out_length_distribution(e, u)
        if d.is_zero:
            items.append(CheckItem(condition="E3", state=u, passed=False, detail="no outgoing edges"))
            continue
        plus, minus = kraft_sequences(d, n0, n1)
        mass = kraft_mass(d.mu, n0 + n1)
        items.append(CheckItem(condition="E3", state=u, passed=plus[-1] == 0, detail=f"Kraft sum {mass}"))
        if parity:
            failures = [ell for ell, (p, m) in enumerate(zip(plus, minus), start=1) if p < abs(m)]
            items.append(CheckItem(condition="E4", state=u, passed=not failures, detail=f"fails at length {failures[0]}" if failures else "holds at every length"))
            items.append(CheckItem(condition="K-", state=u, passed=minus[-1] == 0, detail=f"K- = {minus[-1]}"))
    return VerificationReport(parity=parity, n0=n0, n1=n1, items=tuple(items))


# end-to-end synthesis


def synthesize(g: LabeledGraph, n0: int, n1: int, r: int, parity: bool = True, tree_budget: int | None = None, parallel: bool = False) -> tuple[PrincipalResult, EncoderCandidate | None]:
    """Principal states, then trimming. The ordinary case uses n = n0 + n1."""
    if parity:
        result = pp_principal_search(g, n0, n1, r, tree_budget=tree_budget, parallel=parallel)
    else:
        result = ordinary_principal_states(g, n0 + n1, r)
    if not result.found:
        return result, None
    h = principal_subgraph(g, result)
    encoder = trim_pp(h, n0, n1, result) if parity else trim_ordinary(h, n0 + n1, result)
    return result, encoder


def complete_presentation(g: LabeledGraph, result: PrincipalResult) -> LabeledGraph:
    """A full deterministic variable-length presentation of S(g) built around the chosen cuts.

    Each principal state u keeps its cut. Every path that leaves the cut tree early is
    extended to depth r(u), the longest cut length, and each such path becomes an extra
    edge. Other states keep their edges. The extra edges all have length r(u), so (C2)
    below r(u) is unchanged and (C1) at r(u) still holds.

    Args:
        g: The ordinary deterministic graph the cuts were found in.
        result: A principal-state result over g.

    Returns:
        LabeledGraph: A deterministic presentation with the same words as g.
    """
    require_ordinary(g, "complete_presentation")
    out = g.out_map()
    edges: list[Edge] = []
    for u in g.states:
        if u not in result.principal_set:
            edges.extend(out[u])
            continue
        cut = {edge.label: edge for edge in result.cuts[u]}
        inner = {word[:k] for word in cut for k in range(1, len(word))}
        depth = max(len(word) for word in cut)

        def walk(state: str, prefix: Word) -> None:
            for e in out[state]:
                word = prefix + e.label
                if word in cut:
                    edges.append(cut[word])
                elif word in inner or len(word) < depth:
                    walk(e.target, word)
                else:
                    edges.append(Edge(source=u, target=e.target, label=word))

        walk(u, ())
    return g.replace(edges=tuple(edges))


def search_none(g: LabeledGraph, n0: int, n1: int, rmax: int, max_states: int = 2, tree_budget: int | None = None, parallel: bool = False) -> NonexistenceReport:
    """Bounded exhaustive search for a deterministic parity-preserving encoder.

    Candidates are state sets of the Shannon cover with at most max_states states and
    cuts of depth at most rmax. Every candidate is reported with its failing condition.

    Args:
        g: An ordinary, deterministic, irreducible constraint graph.
        n0: Number of even input tag symbols.
        n1: Number of odd input tag symbols.
        rmax: Largest cut depth tried; depths run from 1 up.
        max_states: Largest candidate set.

    Returns:
        NonexistenceReport: Every candidate examined, plus the trimmed encoder of the first
        one that passes.

    Raises:
        ConstraintError: If n1 >= 1 while every label symbol is even.
        SearchBudgetExceeded: If a path tree outgrows its budget.
    """
    _require_constraint_graph(g, "search_none")
    if n1 >= 1 and g.alphabet.n1 == 0:
        raise ConstraintError("every label is even, so no encoder can carry odd input tags")
    settings = get_settings()
    tree_budget = settings.tree_budget if tree_budget is None else tree_budget
    cover = reduce_to_shannon_cover(g)
    subsets = _candidate_subsets(cover.states, max_states)
    outcomes: list[CandidateOutcome] = []
    for r in range(1, rmax + 1):
        for outcome, reports, cuts in _scan_subsets(cover, subsets, n0, n1, r, tree_budget, settings.option_budget, parallel, "search-none"):
            outcomes.append(outcome)
            name = _subset_name(outcome.subset)
            if not outcome.passed:
                progress.update_status("search-none", name, f"r={r}: {outcome.failing_state} fails {outcome.failing_condition}")
                continue
            progress.update_status("search-none", name, "done")
            result = PrincipalResult(principal_set=outcome.subset, cuts=cuts, reports=reports, n0=n0, n1=n1, r=r, subsets_tried=len(outcomes))
            encoder = trim_pp(principal_subgraph(cover, result), n0, n1, result)
            return NonexistenceReport(n0=n0, n1=n1, rmax=rmax, max_states=max_states, candidates=tuple(outcomes), encoder=encoder)
    logger.info("no candidate passes up to r=%d", rmax)
    return NonexistenceReport(n0=n0, n1=n1, rmax=rmax, max_states=max_states, candidates=tuple(outcomes))
