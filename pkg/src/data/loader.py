import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict

from src.data.models import ConstraintError, Edge, LabeledGraph, ParityAlphabet, TrimEntry

FIXTURE_DIR = Path(__file__).parent / "fixtures"
PARTITIONS_FILE = FIXTURE_DIR / "partitions.json"


class GraphFile(BaseModel):
    """On-disk form of a graph or tagged encoder."""

    model_config = ConfigDict(extra="forbid")

    comment: str | None = None
    alphabet: list[str]
    odd: list[str] = []
    states: list[str]
    edges: list[Edge]
    tag_alphabet: list[str] | None = None
    tag_odd: list[str] | None = None
    start: str | None = None
    parity_preserving: bool | None = None
    principal_states: list[str] | None = None
    trim_log: dict[str, TrimEntry] | None = None

    def to_graph(self) -> LabeledGraph:
        return LabeledGraph(states=tuple(self.states), edges=tuple(self.edges), alphabet=ParityAlphabet(symbols=tuple(self.alphabet), odd=tuple(self.odd)))


def resolve_path(name: str | Path) -> Path:
    """A path on disk, or else the packaged fixture of that name."""
    path = Path(name)
    if path.exists():
        return path
    fixture = FIXTURE_DIR / (path.name if path.suffix == ".json" else f"{path.name}.json")
    if fixture.exists():
        return fixture
    raise FileNotFoundError(f"no graph file or fixture named {str(name)!r}")


def read_graph_file(name: str | Path) -> GraphFile:
    with open(resolve_path(name), "r", encoding="utf-8") as f:
        return GraphFile.model_validate(json.load(f))


def load_graph(name: str | Path, partition: list[str] | None = None) -> LabeledGraph:
    g = read_graph_file(name).to_graph()
    if partition is not None:
        g = g.replace(alphabet=g.alphabet.with_odd(partition))
    return g


def load_tagged(name: str | Path):
    from src.tools.tagging import TaggedEncoder

    record = read_graph_file(name)
    if record.tag_alphabet is None:
        raise ConstraintError(f"{name} carries no tag alphabet")
    graph = record.to_graph()
    return TaggedEncoder(
        graph=graph,
        tag_alphabet=ParityAlphabet(symbols=tuple(record.tag_alphabet), odd=tuple(record.tag_odd or ())),
        start=record.start or graph.states[0],
        parity_preserving=True if record.parity_preserving is None else record.parity_preserving,
    )


def load_partition(name: str, alphabet: ParityAlphabet | None = None) -> list[str]:
    """Odd symbols named by a stored partition ("eq2", "even") or given as a comma-separated list."""
    with open(PARTITIONS_FILE, "r", encoding="utf-8") as f:
        named = json.load(f)
    if name in named:
        return list(named[name])
    odd = [s for s in name.split(",") if s]
    if alphabet is not None:
        for s in odd:
            if s not in alphabet.symbols:
                raise ConstraintError(f"partition symbol {s!r} is not in the alphabet")
    return odd


def graph_record(g: LabeledGraph, **annex: Any) -> dict:
    record = {
        "alphabet": list(g.alphabet.symbols),
        "odd": list(g.alphabet.odd),
        "states": list(g.states),
        "edges": [e.model_dump(mode="json", by_alias=True, exclude_none=True) for e in g.edges],
    }
    for key, value in annex.items():
        if value is None:
            continue
        if isinstance(value, BaseModel):
            value = value.model_dump(mode="json")
        elif isinstance(value, dict):
            value = {k: v.model_dump(mode="json") if isinstance(v, BaseModel) else v for k, v in value.items()}
        record[key] = value
    # round-trip through the schema so unknown annex keys fail here, not on reload
    GraphFile.model_validate(record)
    return record


def dump_graph(g: LabeledGraph, **annex: Any) -> str:
    return json.dumps(graph_record(g, **annex), indent=2, ensure_ascii=False)


def dump_tagged(t) -> str:
    return dump_graph(t.graph, tag_alphabet=list(t.tag_alphabet.symbols), tag_odd=list(t.tag_alphabet.odd), start=t.start, parity_preserving=t.parity_preserving)
