"""Tag assignment and streaming encode/decode over tagged variable-length encoders."""

import logging
from typing import Iterable, Iterator, Literal

from pydantic import BaseModel, ConfigDict, model_validator

from src.data.models import ConstraintError, Edge, LabeledGraph, ParityAlphabet, StreamParseError, TruncatedStreamError, UnknownSymbolError, Word
from src.graph.graphs import is_deterministic, out_length_distribution, parity_of_word
from src.tools.kraft import build_exhaustive_prefix_free, build_parity_prefix_free, validate_list

logger = logging.getLogger(__name__)


def default_tag_alphabet(n0: int, n1: int) -> ParityAlphabet:
    """Digits 0..n0+n1-1; the last n1 of them are odd."""
    symbols = tuple(str(i) for i in range(n0 + n1))
    return ParityAlphabet(symbols=symbols, odd=symbols[n0:])


class TaggedEncoder(BaseModel):
    """A deterministic encoder graph whose edges carry input tags."""

    model_config = ConfigDict(frozen=True)

    graph: LabeledGraph
    tag_alphabet: ParityAlphabet
    start: str
    parity_preserving: bool = True

    @model_validator(mode="after")
    def _check_tags(self):
        if not is_deterministic(self.graph):
            raise ValueError("a tagged encoder needs a deterministic graph")
        if self.start not in self.graph.states:
            raise ValueError(f"start state {self.start!r} is not a state of the encoder")
        for e in self.graph.edges:
            if e.tag is None:
                raise ValueError(f"edge {e} has no tag")
            for s in e.tag:
                if s not in self.tag_alphabet.symbols:
                    raise ValueError(f"tag symbol {s!r} is not in the tag alphabet")
            if len(e.tag) != e.length:
                raise ValueError(f"edge {e}: tag length differs from label length")
            if self.parity_preserving and parity_of_word(e.tag, self.tag_alphabet) != parity_of_word(e.label, self.graph.alphabet):
                raise ValueError(f"edge {e}: tag parity differs from label parity")
        for u, edges in self.graph.out_map().items():
            check = validate_list([e.tag for e in edges], self.tag_alphabet)
            if not (check.prefix_free and check.exhaustive):
                raise ValueError(f"tags out of state {u!r} are not an exhaustive prefix-free list")
        return self

    @property
    def n0(self) -> int:
        return self.tag_alphabet.n0

    @property
    def n1(self) -> int:
        return self.tag_alphabet.n1

    def assignment(self, u: str) -> list[tuple[Word, Word]]:
        return [(e.tag, e.label) for e in self.graph.out_edges(u)]


def assign_tags(e: LabeledGraph, tag_alphabet: ParityAlphabet, parity: bool = True, start: str | None = None) -> TaggedEncoder:
    """Give each edge an input tag of the same length (and parity, when parity=True).

    Per state, a tag list with the state's length distribution is built; tags and edges
    are matched bucket by bucket, both sides in lexicographic order.

    Args:
        e: A deterministic encoder graph.
        tag_alphabet: The input alphabet; its odd symbols fix n1.
        parity: Match parities as well as lengths.
        start: Start state for streaming; defaults to the first state.

    Returns:
        TaggedEncoder: e with a tag on every edge.

    Raises:
        ConstraintError: If a state has no outgoing edges.
        InfeasibleDistributionError: If a state's distribution has no tag list.
    """
    tags: dict[int, Word] = {}
    for u, edges in e.out_map().items():
        if not edges:
            raise ConstraintError(f"state {u!r} has no outgoing edges to tag")
        d = out_length_distribution(e, u)
        words = build_parity_prefix_free(d, tag_alphabet) if parity else build_exhaustive_prefix_free(d.mu, tag_alphabet)

        def bucket(word: Word, alphabet: ParityAlphabet) -> tuple[int, ...]:
            return (len(word), parity_of_word(word, alphabet)) if parity else (len(word),)

        pool: dict[tuple[int, ...], list[Word]] = {}
        for w in words:
            pool.setdefault(bucket(w, tag_alphabet), []).append(w)
        for edge in sorted(edges, key=lambda x: e.alphabet.sort_key(x.label)):
            tags[id(edge)] = pool[bucket(edge.label, e.alphabet)].pop(0)
    tagged = e.replace(edges=tuple(edge.model_copy(update={"tag": tags[id(edge)]}) for edge in e.edges))
    return TaggedEncoder(graph=tagged, tag_alphabet=tag_alphabet, start=start or e.states[0], parity_preserving=parity)


class StreamCursor:
    """Parses a symbol stream into edges of a tagged encoder, reading either tags or labels.

    Each cursor holds its own position and state; the encoder itself is never mutated.
    """

    def __init__(self, encoder: TaggedEncoder, read: Literal["tag", "label"]):
        self.encoder = encoder
        self.read = read
        self.alphabet = encoder.tag_alphabet if read == "tag" else encoder.graph.alphabet
        self.words: dict[str, dict[Word, Edge]] = {u: {} for u in encoder.graph.states}
        self.prefixes: dict[str, set[Word]] = {u: set() for u in encoder.graph.states}
        for edge in encoder.graph.edges:
            word = edge.tag if read == "tag" else edge.label
            self.words[edge.source][word] = edge
            self.prefixes[edge.source].update(word[:k] for k in range(1, len(word)))
        self.state = encoder.start
        self.buffer: Word = ()
        self.position = 0
        self.output: list[str] = []

    def feed(self, symbol: str) -> Edge | None:
        if symbol not in self.alphabet.symbols:
            raise UnknownSymbolError(symbol, f"{self.read} alphabet")
        self.position += 1
        self.buffer += (symbol,)
        edge = self.words[self.state].get(self.buffer)
        if edge is not None:
            self.output.extend(edge.label if self.read == "tag" else edge.tag)
            self.state, self.buffer = edge.target, ()
            return edge
        if self.buffer not in self.prefixes[self.state]:
            raise StreamParseError(f"{format_buffer(self.buffer)} starts no {self.read} out of state {self.state!r}", self.position, list(self.output))
        return None

    def finish(self) -> None:
        if self.buffer:
            raise TruncatedStreamError(f"stream ended inside a {self.read} ({format_buffer(self.buffer)} pending)", self.position - len(self.buffer), list(self.output))


def format_buffer(buffer: Word) -> str:
    return " ".join(buffer)


def _parse(encoder: TaggedEncoder, stream: Iterable[str], read: Literal["tag", "label"]) -> Iterator[Edge]:
    cursor = StreamCursor(encoder, read)
    for symbol in stream:
        edge = cursor.feed(symbol)
        if edge is not None:
            yield edge
    cursor.finish()


def encode_edges(t: TaggedEncoder, tags: Iterable[str]) -> Iterator[Edge]:
    return _parse(t, tags, "tag")


def decode_edges(t: TaggedEncoder, labels: Iterable[str]) -> Iterator[Edge]:
    return _parse(t, labels, "label")


def encode(t: TaggedEncoder, tags: Iterable[str]) -> list[str]:
    """Label symbols emitted for a tag stream, starting at the encoder's start state.

    Args:
        t: The tagged encoder.
        tags: Tag symbols, one per item.

    Returns:
        list[str]: The label symbols, flattened across edges.

    Raises:
        UnknownSymbolError: On a symbol outside the tag alphabet.
        StreamParseError: When the buffered tags start no tag out of the current state.
        TruncatedStreamError: When the stream ends inside a tag.
    """
    return [s for edge in encode_edges(t, tags) for s in edge.label]


def decode(t: TaggedEncoder, labels: Iterable[str]) -> list[str]:
    """Tag symbols recovered from a label stream; the inverse of encode on whole edges.

    Raises:
        UnknownSymbolError: On a symbol outside the label alphabet.
        StreamParseError: When the buffered labels start no label out of the current state.
        TruncatedStreamError: When the stream ends inside a label.
    """
    return [s for edge in decode_edges(t, labels) for s in edge.tag]


def parity_audit(t: TaggedEncoder, tags: Iterable[str]) -> tuple[int, int]:
    """Cumulative parities of the consumed tags and of the emitted labels."""
    tag_parity = label_parity = 0
    for edge in encode_edges(t, tags):
        tag_parity ^= parity_of_word(edge.tag, t.tag_alphabet)
        label_parity ^= parity_of_word(edge.label, t.graph.alphabet)
    return tag_parity, label_parity
