from fractions import Fraction
from typing import Annotated, Iterable, Sequence

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, computed_field, model_validator

Word = tuple[str, ...]

Rational = Annotated[Fraction, BeforeValidator(lambda v: v if isinstance(v, Fraction) else Fraction(v)), PlainSerializer(lambda v: str(v), return_type=str)]


class ConstraintError(ValueError):
    """Raised when an input violates the precondition of an operation."""


class UnknownSymbolError(ConstraintError):
    def __init__(self, symbol: str, where: str = "alphabet"):
        super().__init__(f"symbol {symbol!r} is not in the {where}")
        self.symbol = symbol


class InfeasibleDistributionError(ConstraintError):
    """Raised when no exhaustive prefix-free list has the requested length distribution."""

    def __init__(self, message: str, report=None, kraft_value: int | None = None):
        super().__init__(message)
        self.report = report
        self.kraft_value = kraft_value


class SearchBudgetExceeded(RuntimeError):
    """The search could not finish within its node budget; the answer is inconclusive."""


class StreamError(ValueError):
    def __init__(self, message: str, position: int, partial: list):
        super().__init__(f"{message} (at symbol {position})")
        self.position = position
        self.partial = partial


class TruncatedStreamError(StreamError):
    """The stream ended in the middle of a tag or label."""


class StreamParseError(StreamError):
    """The stream has a prefix that matches no outgoing word of the current state."""


def format_word(word: Sequence[str]) -> str:
    """Render a word the way it is displayed: concatenated for one-character symbols, dot-delimited otherwise."""
    if any(len(s) != 1 for s in word):
        return ".".join(word)
    return "".join(word)


class ParityAlphabet(BaseModel):
    """A finite symbol set split into even and odd symbols."""

    model_config = ConfigDict(frozen=True)

    symbols: tuple[str, ...]
    odd: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_partition(self):
        if not self.symbols:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        unknown = [s for s in self.odd if s not in self.symbols]
        if unknown:
            raise ValueError(f"odd symbol {unknown[0]!r} is not in the alphabet")
        # keep the odd set in alphabet order so dumps are stable
        ordered = tuple(s for s in self.symbols if s in set(self.odd))
        object.__setattr__(self, "odd", ordered)
        return self

    @property
    def even(self) -> tuple[str, ...]:
        odd = set(self.odd)
        return tuple(s for s in self.symbols if s not in odd)

    @property
    def n0(self) -> int:
        return len(self.symbols) - len(self.odd)

    @property
    def n1(self) -> int:
        return len(self.odd)

    def parity(self, symbol: str) -> int:
        if symbol not in self.symbols:
            raise UnknownSymbolError(symbol)
        return 1 if symbol in self.odd else 0

    def order(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise UnknownSymbolError(symbol) from None

    def sort_key(self, word: Sequence[str]) -> tuple[int, ...]:
        """Lexicographic key of a word with respect to the symbol order."""
        return tuple(self.order(s) for s in word)

    def with_odd(self, odd: Iterable[str]) -> "ParityAlphabet":
        return ParityAlphabet(symbols=self.symbols, odd=tuple(odd))

    def parse_word(self, text: str) -> Word:
        """Parse a displayed word back into symbols ("01.00", "bd", or a single symbol)."""
        if text in self.symbols:
            return (text,)
        parts = text.split(".") if "." in text else list(text)
        for s in parts:
            if s not in self.symbols:
                raise UnknownSymbolError(s)
        return tuple(parts)


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    source: str = Field(alias="from")
    target: str = Field(alias="to")
    label: Word
    tag: Word | None = None

    @property
    def length(self) -> int:
        return len(self.label)

    def __str__(self) -> str:
        text = f"{self.source} -{format_word(self.label)}-> {self.target}"
        if self.tag is not None:
            text += f" [{format_word(self.tag)}]"
        return text


class LabeledGraph(BaseModel):
    """States and edges labeled by nonempty words; ordinary when every label has length one."""

    model_config = ConfigDict(frozen=True)

    states: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    alphabet: ParityAlphabet

    @model_validator(mode="after")
    def _check_edges(self):
        if not self.states:
            raise ValueError("a graph needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise ValueError("state names must be distinct")
        known = set(self.states)
        for edge in self.edges:
            for endpoint in (edge.source, edge.target):
                if endpoint not in known:
                    raise ValueError(f"edge endpoint {endpoint!r} is not a declared state")
            if not edge.label:
                raise ValueError(f"edge {edge.source}->{edge.target} has an empty label")
            for s in edge.label:
                if s not in self.alphabet.symbols:
                    raise ValueError(f"label symbol {s!r} is not in the alphabet")
        return self

    @property
    def is_ordinary(self) -> bool:
        return all(e.length == 1 for e in self.edges)

    @property
    def max_length(self) -> int:
        return max((e.length for e in self.edges), default=0)

    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def out_edges(self, u: str) -> list[Edge]:
        if u not in self.states:
            raise ConstraintError(f"unknown state {u!r}")
        return [e for e in self.edges if e.source == u]

    def out_map(self) -> dict[str, list[Edge]]:
        table: dict[str, list[Edge]] = {s: [] for s in self.states}
        for e in self.edges:
            table[e.source].append(e)
        return table

    def replace(self, **changes) -> "LabeledGraph":
        data = {"states": self.states, "edges": self.edges, "alphabet": self.alphabet}
        data.update(changes)
        return LabeledGraph(**data)


class LengthDistribution(BaseModel):
    """Per-length counts of even (eta) and odd (omega) words, indexed from length one."""

    model_config = ConfigDict(frozen=True)

    eta: tuple[int, ...] = ()
    omega: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _pad(self):
        size = max(len(self.eta), len(self.omega))
        object.__setattr__(self, "eta", tuple(self.eta) + (0,) * (size - len(self.eta)))
        object.__setattr__(self, "omega", tuple(self.omega) + (0,) * (size - len(self.omega)))
        return self

    @classmethod
    def from_words(cls, words: Iterable[Sequence[str]], alphabet: ParityAlphabet) -> "LengthDistribution":
        eta: list[int] = []
        omega: list[int] = []
        for word in words:
            size = len(word)
            while len(eta) < size:
                eta.append(0)
                omega.append(0)
            if sum(alphabet.parity(s) for s in word) % 2:
                omega[size - 1] += 1
            else:
                eta[size - 1] += 1
        return cls(eta=tuple(eta), omega=tuple(omega))

    @classmethod
    def ordinary(cls, mu: Sequence[int]) -> "LengthDistribution":
        return cls(eta=tuple(mu), omega=(0,) * len(mu))

    @property
    def is_zero(self) -> bool:
        return not any(self.eta) and not any(self.omega)

    @property
    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self.eta + self.omega)

    @property
    def r(self) -> int:
        for ell in range(len(self.eta), 0, -1):
            if self.eta[ell - 1] + self.omega[ell - 1] != 0:
                return ell
        raise ConstraintError("the all-zero distribution has no support bound")

    @property
    def mu(self) -> tuple[int, ...]:
        return tuple(e + o for e, o in zip(self.eta, self.omega))

    @property
    def delta(self) -> tuple[int, ...]:
        return tuple(e - o for e, o in zip(self.eta, self.omega))

    def eta_at(self, ell: int) -> int:
        return self.eta[ell - 1] if 1 <= ell <= len(self.eta) else 0

    def omega_at(self, ell: int) -> int:
        return self.omega[ell - 1] if 1 <= ell <= len(self.omega) else 0

    def trimmed(self) -> "LengthDistribution":
        size = self.r
        return LengthDistribution(eta=self.eta[:size], omega=self.omega[:size])

    def __str__(self) -> str:
        return f"eta={self.eta}, omega={self.omega}"


class KraftReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    distribution: LengthDistribution
    n0: int
    n1: int
    k_plus: tuple[int, ...]
    k_minus: tuple[int, ...]
    condition_a: bool
    condition_b_failures: tuple[int, ...]

    @computed_field
    @property
    def verdict(self) -> bool:
        return self.condition_a and not self.condition_b_failures


class PrincipalReport(BaseModel):
    """Kraft values of one state's outgoing label set, with the principal-state verdicts."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    state: str
    distribution: LengthDistribution
    n0: int
    n1: int
    parity: bool = True
    k_plus: tuple[int, ...] = ()
    k_minus: tuple[int, ...] = ()
    mass: Rational = Fraction(0)
    c1: bool = False
    c2_failures: tuple[int, ...] = ()

    @computed_field
    @property
    def passed(self) -> bool:
        if not self.parity:
            return self.mass >= 1
        return self.c1 and not self.c2_failures

    @property
    def failing_condition(self) -> str | None:
        if self.passed:
            return None
        if not self.parity:
            return f"mass {self.mass} < 1"
        if self.c2_failures:
            return f"C2 at length {self.c2_failures[0]}"
        return "C1"


class PrefixCounts(BaseModel):
    """Even (y) and odd (z) proper-prefix counts per length, indexed from zero."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y: tuple[Rational, ...]
    z: tuple[Rational, ...]


class AdmissibilityWitness(BaseModel):
    model_config = ConfigDict(frozen=True)

    zset: tuple[int, ...]
    n0: int
    n1: int
    r: int
    xi: tuple[int, ...] | None = None
    witness: LengthDistribution | None = None
    admissible: bool
    construction: str = ""


class ListValidation(BaseModel):
    model_config = ConfigDict(frozen=True)

    prefix_free: bool
    exhaustive: bool
    distribution: LengthDistribution


class PrincipalResult(BaseModel):
    """Principal states found by a search, with the cut chosen for each of them."""

    model_config = ConfigDict(frozen=True)

    principal_set: tuple[str, ...] = ()
    cuts: dict[str, tuple[Edge, ...]] = {}
    reports: dict[str, PrincipalReport] = {}
    n0: int
    n1: int = 0
    r: int
    parity: bool = True
    subsets_tried: int = 0

    @computed_field
    @property
    def found(self) -> bool:
        return bool(self.principal_set)

    @property
    def bound_note(self) -> str:
        return f"searched edge lengths up to r={self.r}"


class TrimEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    removed_even: int = 0
    removed_odd: int = 0
    removed: tuple[Edge, ...] = ()


class EncoderCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    graph: LabeledGraph
    source_principal: PrincipalResult | None = None
    trim_log: dict[str, TrimEntry] = {}


class CheckItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    condition: str
    state: str | None = None
    passed: bool
    detail: str = ""


class VerificationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    parity: bool
    n0: int
    n1: int
    items: tuple[CheckItem, ...]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def failures(self) -> list[CheckItem]:
        return [item for item in self.items if not item.passed]


class FixedLengthReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: int
    n0: int
    n1: int
    deterministic: bool
    cap: int
    vector: tuple[int, ...]

    @computed_field
    @property
    def exists(self) -> bool:
        return any(self.vector)

    @property
    def conclusive(self) -> bool:
        return self.deterministic or self.exists

    @computed_field
    @property
    def summary(self) -> str:
        if self.exists:
            return f"exists; x={self.vector}"
        if self.deterministic:
            return "none: no 0-1 vector"
        return f"none with entries <= {self.cap} (empty under cap)"


class CandidateOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    subset: tuple[str, ...]
    r: int
    passed: bool
    failing_state: str | None = None
    failing_condition: str | None = None


class NonexistenceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n0: int
    n1: int
    rmax: int
    max_states: int = 2
    candidates: tuple[CandidateOutcome, ...] = ()
    encoder: EncoderCandidate | None = None

    @computed_field
    @property
    def found(self) -> bool:
        return self.encoder is not None

    @property
    def bound_note(self) -> str:
        return f"no candidate with at most {self.max_states} states and edge length <= {self.rmax} passes"
