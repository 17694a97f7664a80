from collections import Counter
from unittest.mock import Mock

import numpy as np
import pytest

from src.data.loader import load_graph, load_partition
from src.data.models import ConstraintError, Edge, LabeledGraph, ParityAlphabet, SearchBudgetExceeded, format_word
from src.graph.graphs import constraint_words, is_deterministic, is_irreducible, out_length_distribution, with_partition
from src.graph.spectral import adjacency, spectral_radius, theta_max
from src.tools.aev import fixed_length_existence
from src.tools.kraft import check_principal_kraft, kraft_sequences
from src.tools.synth import (
    complete_presentation,
    language_containment,
    ordinary_principal_states,
    pp_principal_check,
    pp_principal_search,
    principal_subgraph,
    search_none,
    synthesize,
    trim_ordinary,
    trim_pp,
    verify_vle,
)
from src.utils.progress import progress


def _labels(edges) -> Counter:
    return Counter(format_word(e.label) for e in edges)


def _random_graph(rng) -> LabeledGraph:
    """A random deterministic irreducible ordinary graph with a random parity partition."""
    while True:
        size = int(rng.integers(1, 5))
        symbols = tuple(f"s{i}" for i in range(int(rng.integers(2, 7))))
        states = tuple(f"q{i}" for i in range(size))
        edges = tuple(Edge(source=u, target=states[int(rng.integers(size))], label=(s,)) for u in states for s in symbols if rng.random() < 0.5)
        odd = tuple(s for s in symbols if rng.random() < 0.5)
        g = LabeledGraph(states=states, edges=edges, alphabet=ParityAlphabet(symbols=symbols, odd=odd))
        if edges and is_irreducible(g):
            return g


def _loops(labels, alphabet: ParityAlphabet) -> LabeledGraph:
    return LabeledGraph(states=("x",), edges=tuple(Edge(source="x", target="x", label=tuple(w)) for w in labels), alphabet=alphabet)


class TestOrdinaryPrincipalStates:
    """Principal states for ordinary encoders of the squared RLL constraint at n = 2."""

    def test_depth_one_finds_none(self):
        result = ordinary_principal_states(load_graph("fig5sq"), 2, 1)
        assert not result.found

    def test_depth_two(self):
        """Only γ survives, with the cut 00, 01.00, 10.00."""
        result = ordinary_principal_states(load_graph("fig5sq"), 2, 2)
        assert result.principal_set == ("γ",)
        assert _labels(result.cuts["γ"]) == Counter(["00", "01.00", "10.00"])
        assert result.reports["γ"].mass == 1

    def test_synthesized_encoder_verifies(self):
        g = load_graph("fig5sq")
        result, encoder = synthesize(g, 1, 1, 2, parity=False)
        assert _labels(encoder.graph.edges) == Counter(["00", "01.00", "10.00"])
        assert encoder.trim_log["γ"].removed == ()
        assert verify_vle(encoder.graph, g, 2).passed

    def test_trim_removes_longest_last(self):
        """Mass 3/2 at n = 2 drops the lexicographically last length-one label."""
        h = _loops([("a",), ("b",), ("c",)], ParityAlphabet(symbols=("a", "b", "c"), odd=("c",)))
        encoder = trim_ordinary(h, 2)
        assert _labels(encoder.graph.edges) == Counter(["a", "b"])
        assert encoder.trim_log["x"].removed_odd == 1

    def test_trim_rejects_light_state(self):
        h = _loops([("a",)], ParityAlphabet(symbols=("a", "b")))
        with pytest.raises(ConstraintError):
            trim_ordinary(h, 2)

    def test_monotone_in_depth(self):
        """A state principal with cuts of depth r stays principal at depth r + 1."""
        rng = np.random.default_rng(19)
        cases = [(load_graph("fig5sq"), 2), (load_graph("fig1"), 2), (load_graph("fig5"), 1)]
        cases += [(_random_graph(rng), int(rng.integers(1, 4))) for _ in range(30)]
        for g, n in cases:
            found = [set(ordinary_principal_states(g, n, r).principal_set) for r in range(1, 5)]
            for shallow, deep in zip(found, found[1:]):
                assert shallow <= deep, f"{g} at n = {n}"


class TestParityPrincipalStates:
    """Parity-preserving principal states of the squared RLL constraint at (1, 1)."""

    def test_depth_two_finds_none(self):
        result = pp_principal_search(load_graph("fig5sq"), 1, 1, 2)
        assert not result.found
        assert result.subsets_tried == 7

    def test_depth_three(self):
        """γ alone, with the cut 00, 01.00, 10.00.00, 10.01.00."""
        result = pp_principal_search(load_graph("fig5sq"), 1, 1, 3)
        assert result.principal_set == ("γ",)
        assert _labels(result.cuts["γ"]) == Counter(["00", "01.00", "10.00.00", "10.01.00"])
        assert result.reports["γ"].passed

    def test_trimmed_encoder(self):
        """Synthesis yields the four-loop encoder, which verifies as parity-preserving."""
        g = load_graph("fig5sq")
        result, encoder = synthesize(g, 1, 1, 3)
        assert _labels(encoder.graph.edges) == Counter(["00", "01.00", "10.00.00", "10.01.00"])
        assert verify_vle(encoder.graph, g, 1, 1, parity=True).passed

    def test_parallel_matches_sequential(self):
        g = load_graph("fig5sq")
        assert pp_principal_search(g, 1, 1, 3, parallel=True) == pp_principal_search(g, 1, 1, 3)

    def test_budget_exceeded(self):
        """A path tree over the node budget makes the search inconclusive."""
        with pytest.raises(SearchBudgetExceeded):
            pp_principal_search(load_graph("fig5sq"), 1, 1, 3, tree_budget=5)

    def test_progress_handler(self):
        """Registered handlers see every candidate and the accepted one."""
        handler = Mock()
        progress.register_handler(handler)
        try:
            pp_principal_search(load_graph("fig5sq"), 1, 1, 3)
        finally:
            progress.unregister_handler(handler)
        statuses = [(c.args[0], c.args[2]) for c in handler.call_args_list]
        assert ("pp-principal", "done") in statuses
        assert any(status.startswith("rejected") for _, status in statuses)

    def test_principal_check(self):
        """The four-loop encoder is its own principal set."""
        reports, ok = pp_principal_check(load_graph("fig8"), ["γ"], 1, 1)
        assert ok
        assert reports["γ"].k_plus[-1] == 0

    def test_trim_pp(self):
        """Loops a, b, c with c odd carry one even edge too many at (1, 1)."""
        h = _loops([("a",), ("b",), ("c",)], ParityAlphabet(symbols=("a", "b", "c"), odd=("c",)))
        encoder = trim_pp(h, 1, 1)
        assert _labels(encoder.graph.edges) == Counter(["a", "c"])
        assert encoder.trim_log["x"].removed_even == 1
        assert encoder.trim_log["x"].removed_odd == 0

    def test_trim_pp_rejects_non_principal(self):
        h = _loops([("a",)], ParityAlphabet(symbols=("a", "b"), odd=("b",)))
        with pytest.raises(ConstraintError):
            trim_pp(h, 1, 1)

    def test_trim_pp_keeps_shorter_lengths(self):
        """Trimming touches only length r(u), so K+ and K- below r(u) and their ordering are unchanged."""
        rng = np.random.default_rng(29)
        cases = [(load_graph("fig5sq"), 1, 1, 3), (with_partition(load_graph("fig1"), load_partition("eq2")), 1, 1, 2)]
        while len(cases) < 20:
            n0, n1 = int(rng.integers(0, 3)), int(rng.integers(1, 3))
            cases.append((_random_graph(rng), n0, n1, int(rng.integers(1, 3))))
        for g, n0, n1, r in cases:
            result = pp_principal_search(g, n0, n1, r)
            if not result.found:
                continue
            h = principal_subgraph(g, result)
            encoder = trim_pp(h, n0, n1, result)
            for u in h.states:
                before = check_principal_kraft(out_length_distribution(h, u), n0, n1)
                depth = before.distribution.r
                plus, minus = kraft_sequences(out_length_distribution(encoder.graph, u), n0, n1, depth)
                assert plus[:-1] == before.k_plus[:-1]
                assert minus[:-1] == before.k_minus[:-1]
                assert all(p >= abs(m) for p, m in zip(plus[:-1], minus[:-1]))
                assert plus[-1] == 0 and minus[-1] == 0

    def test_rejects_nondeterministic(self):
        with pytest.raises(ConstraintError):
            pp_principal_search(load_graph("fig2"), 1, 1, 1)

    def test_depth_one_matches_zero_one_vectors(self):
        """At r = 1 a principal set exists exactly when a joint 0-1 approximate eigenvector does."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            g = _random_graph(rng)
            n0, n1 = int(rng.integers(0, 3)), int(rng.integers(0, 3))
            if n0 + n1 == 0:
                n0 = 1
            expected = fixed_length_existence(g, n0, n1, deterministic=True).exists
            assert pp_principal_search(g, n0, n1, 1).found == expected, f"{g} at {(n0, n1)}"


class TestCompletion:
    """A full presentation built around the chosen cuts."""

    def test_complete_presentation(self):
        g = load_graph("fig5sq")
        result = pp_principal_search(g, 1, 1, 3)
        h = complete_presentation(g, result)
        assert is_deterministic(h)
        assert language_containment(h, g)
        assert constraint_words(h, 5) == constraint_words(g, 5)
        assert _labels(h.out_edges("γ")) == Counter(["00", "01.00", "10.00.00", "10.00.01", "10.00.10", "10.01.00"])

    @pytest.mark.parametrize("name,partition,r", [("fig5sq", None, 3), ("fig1", "eq2", 2), ("fig1", "eq2", 3)])
    def test_completion_keeps_principal_conditions(self, name, partition, r):
        """Extra edges have length r(u), and every principal state still meets (C1) and (C2)."""
        g = load_graph(name)
        if partition:
            g = with_partition(g, load_partition(partition))
        result = pp_principal_search(g, 1, 1, r)
        assert result.found
        h = complete_presentation(g, result)
        assert is_deterministic(h)
        assert constraint_words(h, 5) == constraint_words(g, 5)
        for u in result.principal_set:
            depth = max(e.length for e in result.cuts[u])
            extra = [e for e in h.out_edges(u) if e not in result.cuts[u]]
            assert all(e.length == depth for e in extra)
            report = check_principal_kraft(out_length_distribution(h, u), 1, 1, u)
            assert report.passed, report.failing_condition

    def test_same_capacity(self):
        """theta_max of the completion equals the Perron eigenvalue of the constraint graph."""
        g = load_graph("fig5sq")
        h = complete_presentation(g, pp_principal_search(g, 1, 1, 3))
        assert theta_max(h) == pytest.approx(spectral_radius(adjacency(g)), abs=1e-6)

    def test_principal_subgraph(self):
        g = load_graph("fig5sq")
        h = principal_subgraph(g, pp_principal_search(g, 1, 1, 3))
        assert h.states == ("γ",)
        assert len(h.edges) == 4
        with pytest.raises(ConstraintError):
            principal_subgraph(g, pp_principal_search(g, 1, 1, 2))


class TestVerification:
    """Itemized encoder checks."""

    def test_ratio_half_encoder_ordinary(self):
        assert verify_vle(load_graph("fig6"), load_graph("fig5sq"), 2).passed

    def test_ratio_half_encoder_not_parity_preserving(self):
        """The three-loop encoder fails the parity condition at length 2."""
        report = verify_vle(load_graph("fig6"), load_graph("fig5sq"), 1, 1, parity=True)
        assert not report.passed
        failures = report.failures()
        assert [item.condition for item in failures] == ["E4", "K-"]
        assert failures[0].detail == "fails at length 2"

    def test_one_state_graph_parity(self):
        g = with_partition(load_graph("fig1"), load_partition("eq2"))
        assert verify_vle(load_graph("fig3"), g, 1, 1, parity=True).passed

    def test_four_loop_encoder(self):
        assert verify_vle(load_graph("fig8"), load_graph("fig5sq"), 1, 1, parity=True).passed

    def test_nondeterministic_encoder(self):
        """A non-deterministic graph fails the first item and nothing else is checked."""
        report = verify_vle(load_graph("fig2"), load_graph("fig1"), 2)
        assert [item.condition for item in report.items] == ["E1"]
        assert not report.passed

    def test_containment_failure(self):
        """Two consecutive ones leave the RLL constraint."""
        g = load_graph("fig5")
        assert not language_containment(_loops([("1", "1")], g.alphabet), g)
        report = verify_vle(_loops([("0",), ("1",)], g.alphabet), g, 2)
        assert [item.condition for item in report.failures()] == ["E2"]


class TestBoundedSearch:
    """Exhaustive search over small candidate encoders of the two-state constraint."""

    def test_finds_one_state_encoder(self):
        """Under the first partition the search finds the loops a, bd, cd at depth 2."""
        g = with_partition(load_graph("fig1"), load_partition("eq2"))
        report = search_none(g, 1, 1, 2)
        assert report.found
        assert _labels(report.encoder.graph.edges) == Counter(["a", "bd", "cd"])
        assert report.candidates[-1].passed
        assert all(not c.passed for c in report.candidates[:-1])

    def test_no_encoder_with_three_odd_symbols(self):
        """With b, c and d odd no candidate up to depth 3 passes."""
        g = with_partition(load_graph("fig1"), load_partition("eq3"))
        report = search_none(g, 1, 1, 3)
        assert not report.found
        assert len(report.candidates) == 9
        assert all(c.failing_condition for c in report.candidates)
        assert "edge length <= 3" in report.bound_note

    def test_all_even_partition_rejected(self):
        g = with_partition(load_graph("fig1"), load_partition("even"))
        with pytest.raises(ConstraintError):
            search_none(g, 1, 1, 2)
