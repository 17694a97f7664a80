import numpy as np
import pytest

from src.data.loader import load_graph, load_partition, load_tagged
from src.data.models import StreamParseError, TruncatedStreamError, UnknownSymbolError, format_word
from src.graph.graphs import with_partition
from src.tools.synth import synthesize
from src.tools.tagging import StreamCursor, TaggedEncoder, assign_tags, decode, default_tag_alphabet, encode, parity_audit

STREAM_LENGTH = 10_000


def _tags(t: TaggedEncoder) -> dict[str, str]:
    return {format_word(e.label): format_word(e.tag) for e in t.graph.edges}


def _whole_edges(t: TaggedEncoder, stream: list[str]) -> list[str]:
    """Cut a tag stream back to the last complete edge."""
    cursor = StreamCursor(t, "tag")
    end = 0
    for i, s in enumerate(stream, start=1):
        if cursor.feed(s) is not None:
            end = i
    return stream[:end]


def _synthesized() -> list[TaggedEncoder]:
    _, rll = synthesize(load_graph("fig5sq"), 1, 1, 3)
    _, rll_ordinary = synthesize(load_graph("fig5sq"), 1, 1, 2, parity=False)
    two_state = with_partition(load_graph("fig1"), load_partition("eq2"))
    _, one_state = synthesize(two_state, 1, 1, 2)
    return [
        assign_tags(rll.graph, default_tag_alphabet(1, 1)),
        assign_tags(rll_ordinary.graph, default_tag_alphabet(2, 0), parity=False),
        assign_tags(one_state.graph, default_tag_alphabet(1, 1)),
    ]


class TestTagAssignment:
    """Tags match label lengths, and label parities when parity-preserving."""

    def test_one_state_graph(self):
        """a, bd, cd get 0, 10, 11."""
        t = assign_tags(load_graph("fig3"), default_tag_alphabet(1, 1))
        assert _tags(t) == {"a": "0", "bd": "10", "cd": "11"}
        assert _tags(t) == _tags(load_tagged("table1"))

    def test_four_loop_encoder(self):
        """The odd label of length three gets the odd tag 111."""
        t = assign_tags(load_graph("fig8"), default_tag_alphabet(1, 1))
        assert _tags(t) == {"00": "0", "01.00": "10", "10.00.00": "111", "10.01.00": "110"}
        assert _tags(t) == _tags(load_tagged("table3"))

    def test_ordinary_tags(self):
        t = assign_tags(load_graph("fig6"), default_tag_alphabet(2, 0), parity=False)
        assert _tags(t) == {"00": "0", "01.00": "10", "10.00": "11"}
        assert _tags(t) == _tags(load_tagged("table2"))

    def test_default_tag_alphabet(self):
        alphabet = default_tag_alphabet(2, 1)
        assert alphabet.symbols == ("0", "1", "2")
        assert alphabet.odd == ("2",)

    def test_parity_mismatch_rejected(self):
        """The three-loop encoder's tags cannot be parity-preserving."""
        t = load_tagged("table2")
        with pytest.raises(ValueError):
            TaggedEncoder(graph=t.graph, tag_alphabet=t.tag_alphabet, start=t.start, parity_preserving=True)

    def test_nondeterministic_rejected(self):
        with pytest.raises(ValueError):
            load_tagged("fig2")

    def test_unknown_start_rejected(self):
        t = load_tagged("table1")
        with pytest.raises(ValueError):
            TaggedEncoder(graph=t.graph, tag_alphabet=t.tag_alphabet, start="ω")


class TestStreams:
    """Encoding and decoding symbol streams."""

    def test_encode_and_decode(self):
        t = load_tagged("table1")
        assert encode(t, ["0", "1", "0", "1", "1"]) == ["a", "b", "d", "c", "d"]
        assert decode(t, ["a", "b", "d", "c", "d"]) == ["0", "1", "0", "1", "1"]

    def test_truncated_tag(self):
        """A stream ending inside a tag reports how much was consumed."""
        with pytest.raises(TruncatedStreamError) as err:
            encode(load_tagged("table1"), ["0", "1"])
        assert err.value.position == 1
        assert err.value.partial == ["a"]

    def test_unparseable_label(self):
        with pytest.raises(StreamParseError) as err:
            decode(load_tagged("table1"), ["a", "d"])
        assert err.value.position == 2
        assert err.value.partial == ["0"]

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbolError):
            encode(load_tagged("table1"), ["2"])

    def test_independent_cursors(self):
        """Two cursors on one encoder keep separate state."""
        t = load_tagged("table3")
        first, second = StreamCursor(t, "tag"), StreamCursor(t, "tag")
        first.feed("1")
        assert second.feed("0").label == ("00",)
        assert first.feed("0").label == ("01", "00")

    @pytest.mark.parametrize("name", ["table1", "table2", "table3"])
    def test_fixture_round_trips(self, name):
        """decode(encode(x)) == x on long random tag streams."""
        t = load_tagged(name)
        rng = np.random.default_rng(5)
        stream = _whole_edges(t, [t.tag_alphabet.symbols[i] for i in rng.integers(len(t.tag_alphabet.symbols), size=STREAM_LENGTH)])
        labels = encode(t, stream)
        assert decode(t, labels) == stream
        if t.parity_preserving:
            tag_parity, label_parity = parity_audit(t, stream)
            assert tag_parity == label_parity

    def test_synthesized_round_trips(self):
        rng = np.random.default_rng(9)
        for t in _synthesized():
            stream = _whole_edges(t, [t.tag_alphabet.symbols[i] for i in rng.integers(len(t.tag_alphabet.symbols), size=STREAM_LENGTH)])
            assert decode(t, encode(t, stream)) == stream
            if t.parity_preserving:
                tag_parity, label_parity = parity_audit(t, stream)
                assert tag_parity == label_parity

    def test_parity_tracks_every_prefix(self):
        """Cumulative parities agree after every edge, not just at the end."""
        t = load_tagged("table3")
        rng = np.random.default_rng(3)
        stream = _whole_edges(t, [t.tag_alphabet.symbols[i] for i in rng.integers(2, size=500)])
        cursor = StreamCursor(t, "tag")
        tags = labels = 0
        for s in stream:
            edge = cursor.feed(s)
            if edge is not None:
                tags ^= sum(t.tag_alphabet.parity(x) for x in edge.tag) % 2
                labels ^= sum(t.graph.alphabet.parity(x) for x in edge.label) % 2
                assert tags == labels
