import argparse
import json
import logging
import sys
from pathlib import Path

from colorama import Fore, Style, init
from dotenv import load_dotenv
from pydantic import BaseModel

from src.data.loader import dump_graph, dump_tagged, load_graph, load_partition, load_tagged
from src.data.models import ConstraintError, InfeasibleDistributionError, LengthDistribution, ParityAlphabet, SearchBudgetExceeded, StreamParseError, TruncatedStreamError, UnknownSymbolError, format_word
from src.graph.graphs import graph_power, parity_subgraph, reduce_to_shannon_cover, with_partition
from src.graph.spectral import adjacency, capacity
from src.tools.aev import fixed_length_existence, franaszek_reduce, joint_franaszek, parity_power_adjacency
from src.tools.kraft import build_exhaustive_prefix_free, build_parity_prefix_free, check_ordinary_kraft, check_parity_kraft, is_admissible, kraft_mass, validate_list
from src.tools.synth import complete_presentation, ordinary_principal_states, pp_principal_search, search_none, synthesize, verify_vle
from src.tools.tagging import TaggedEncoder, assign_tags, decode, default_tag_alphabet, encode, parity_audit
from src.utils.display import (
    print_admissibility,
    print_encoder,
    print_error,
    print_fixed_length,
    print_graph,
    print_kraft_report,
    print_list_validation,
    print_matrix,
    print_principal_result,
    print_search_report,
    print_verification,
    print_word_list,
)
from src.utils.progress import progress
from src.utils.settings import get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_TRUNCATED = 3
EXIT_PARSE = 4


class UsageError(ConstraintError):
    """Missing or contradictory command-line arguments."""


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def _emit_json(payload) -> None:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))


def _write_output(args, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")


def _graph(args):
    g = load_graph(args.file)
    if getattr(args, "partition", None):
        g = with_partition(g, load_partition(args.partition, g.alphabet))
    return g


def _counts(args) -> tuple[int, int]:
    """(n0, n1) from --n0/--n1, or (n, 0) from -n for the ordinary case."""
    if args.n0 is not None or args.n1 is not None:
        if args.n0 is None or args.n1 is None:
            raise UsageError("--n0 and --n1 go together")
        return args.n0, args.n1
    if getattr(args, "n", None) is not None:
        return args.n, 0
    raise UsageError("give --n0 and --n1 (or -n for an ordinary encoder)")


def _alphabet(args, n0: int, n1: int) -> ParityAlphabet:
    if args.alphabet:
        symbols = tuple(s for s in args.alphabet.split(",") if s)
        return ParityAlphabet(symbols=symbols, odd=tuple(s for s in (args.odd or "").split(",") if s))
    return default_tag_alphabet(n0, n1)


def _distribution(args) -> LengthDistribution:
    if args.mu is not None:
        return LengthDistribution.ordinary(args.mu)
    if args.eta is None and args.omega is None:
        raise UsageError("give --eta/--omega (or --mu for an ordinary distribution)")
    return LengthDistribution(eta=tuple(args.eta or ()), omega=tuple(args.omega or ()))


class _searching:
    """Live progress on a terminal; silent when stderr is redirected."""

    def __enter__(self):
        if sys.stderr.isatty():
            progress.start()
        return progress

    def __exit__(self, *exc):
        progress.stop()
        return False


##### Commands #####


def cmd_capacity(args) -> int:
    value = capacity(_graph(args))
    if args.json:
        _emit_json({"capacity": value})
    else:
        print(f"{value:.4f}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    cover = reduce_to_shannon_cover(_graph(args))
    if args.json:
        print(dump_graph(cover))
    else:
        print_graph(cover, "SHANNON COVER")
    _write_output(args, dump_graph(cover))
    return EXIT_OK


def cmd_power(args) -> int:
    g = graph_power(_graph(args), args.t)
    if args.json:
        print(dump_graph(g))
    else:
        print_graph(g, f"POWER t={args.t}")
        print_matrix("COUNT MATRIX", adjacency(g), g.states)
    _write_output(args, dump_graph(g))
    return EXIT_OK


def cmd_parity_split(args) -> int:
    g = _graph(args)
    even, odd = adjacency(parity_subgraph(g, 0)), adjacency(parity_subgraph(g, 1))
    if args.json:
        _emit_json({"states": list(g.states), "even": [[int(v) for v in row] for row in even], "odd": [[int(v) for v in row] for row in odd]})
    else:
        print_matrix("EVEN EDGES", even, g.states)
        print_matrix("ODD EDGES", odd, g.states)
    return EXIT_OK


def cmd_kraft_check(args) -> int:
    if args.mu is not None:
        if args.n is None:
            raise UsageError("--mu needs -n")
        ok = check_ordinary_kraft(args.mu, args.n)
        if args.json:
            _emit_json({"mu": args.mu, "n": args.n, "mass": str(kraft_mass(args.mu, args.n)), "equality": ok})
        else:
            print(f"Kraft sum {kraft_mass(args.mu, args.n)}: {'equality holds' if ok else 'equality fails'}")
        return EXIT_OK if ok else EXIT_NEGATIVE
    n0, n1 = _counts(args)
    report = check_parity_kraft(_distribution(args), n0, n1)
    if args.json:
        _emit_json(report)
    else:
        print_kraft_report(report)
    return EXIT_OK if report.verdict else EXIT_NEGATIVE


def cmd_build_list(args) -> int:
    d = _distribution(args)
    if args.mu is not None:
        if args.n is None and not args.alphabet:
            raise UsageError("--mu needs -n or --alphabet")
        alphabet = _alphabet(args, args.n or 0, 0)
        words = build_exhaustive_prefix_free(d.mu, alphabet)
    else:
        n0, n1 = _counts(args)
        words = build_parity_prefix_free(d, _alphabet(args, n0, n1))
    if args.json:
        _emit_json([format_word(w) for w in words])
    else:
        print_word_list(words)
    return EXIT_OK


def cmd_validate_list(args) -> int:
    n0, n1 = _counts(args)
    alphabet = _alphabet(args, n0, n1)
    texts = args.words or sys.stdin.read().split()
    check = validate_list([alphabet.parse_word(t) for t in texts], alphabet)
    if args.json:
        _emit_json(check)
    else:
        print_list_validation(check)
    return EXIT_OK if check.prefix_free and check.exhaustive else EXIT_NEGATIVE


def cmd_aev(args) -> int:
    g = _graph(args)
    cap = get_settings().cap if args.cap is None else args.cap
    if args.n0 is not None or args.n1 is not None:
        n0, n1 = _counts(args)
        a0, a1 = parity_power_adjacency(g, args.t)
        x = joint_franaszek(a0, n0, a1, n1, [cap] * len(g.states))
    else:
        if args.n is None:
            raise UsageError("give -n, or --n0 and --n1 for the parity case")
        x = franaszek_reduce(adjacency(graph_power(g, args.t)), args.n, [cap] * len(g.states))
    if args.json:
        _emit_json({"states": list(g.states), "cap": cap, "vector": list(x)})
    elif any(x):
        print(f"x = ({', '.join(str(v) for v in x)})")
    else:
        print(f"{Fore.RED}empty under cap{Style.RESET_ALL} (no vector with entries <= {cap})")
    return EXIT_OK if any(x) else EXIT_NEGATIVE


def cmd_fixed_existence(args) -> int:
    n0, n1 = _counts(args)
    report = fixed_length_existence(_graph(args), n0, n1, t=args.t, deterministic=args.deterministic, cap=args.cap)
    if args.json:
        _emit_json(report)
    else:
        print_fixed_length(report)
    return EXIT_OK if report.exists else EXIT_NEGATIVE


def cmd_principal(args) -> int:
    if args.n is None:
        raise UsageError("principal needs -n")
    g = _graph(args)
    with _searching():
        result = ordinary_principal_states(g, args.n, args.r)
    if args.json:
        _emit_json(result)
    else:
        print_principal_result(result, g.alphabet)
    return EXIT_OK if result.found else EXIT_NEGATIVE


def cmd_pp_principal(args) -> int:
    n0, n1 = _counts(args)
    g = _graph(args)
    with _searching():
        result = pp_principal_search(g, n0, n1, args.r, tree_budget=args.budget, parallel=args.parallel)
    if args.json:
        _emit_json(result)
    else:
        print_principal_result(result, g.alphabet)
    return EXIT_OK if result.found else EXIT_NEGATIVE


def cmd_synth(args) -> int:
    n0, n1 = _counts(args)
    parity = not args.ordinary and args.n is None
    g = _graph(args)
    with _searching():
        result, encoder = synthesize(g, n0, n1, args.r, parity=parity, tree_budget=args.budget, parallel=args.parallel)
    if encoder is None:
        if args.json:
            _emit_json(result)
        else:
            print_principal_result(result, g.alphabet)
        return EXIT_NEGATIVE
    if args.complete:
        h = complete_presentation(g, result)
        text = dump_graph(h, principal_states=list(result.principal_set))
        if args.json:
            print(text)
        else:
            print_graph(h, "COMPLETE PRESENTATION")
    else:
        text = dump_graph(encoder.graph, principal_states=list(result.principal_set), trim_log=encoder.trim_log)
        if args.json:
            print(text)
        else:
            print_principal_result(result, g.alphabet)
            print_encoder(encoder)
    _write_output(args, text)
    return EXIT_OK


def cmd_tag(args) -> int:
    n0, n1 = _counts(args)
    parity = not args.ordinary and args.n is None
    e = _graph(args)
    tagged = assign_tags(e, _alphabet(args, n0, n1), parity=parity, start=args.start)
    if args.json:
        print(dump_tagged(tagged))
    else:
        print_graph(tagged.graph, "TAGGED ENCODER")
    _write_output(args, dump_tagged(tagged))
    return EXIT_OK


def _stream(args, translate, read: str) -> int:
    tagged = load_tagged(args.file)
    if args.start:
        tagged = TaggedEncoder(graph=tagged.graph, tag_alphabet=tagged.tag_alphabet, start=args.start, parity_preserving=tagged.parity_preserving)
    alphabet = tagged.tag_alphabet if read == "tag" else tagged.graph.alphabet
    try:
        # each token is a displayed word: "0", "bd" or "01.00"
        symbols = [s for token in sys.stdin.read().split() for s in alphabet.parse_word(token)]
        out = translate(tagged, symbols)
    except TruncatedStreamError as e:
        print(" ".join(e.partial))
        print_error(f"{e}; {read}s consumed through symbol {e.position}")
        return EXIT_TRUNCATED
    except StreamParseError as e:
        print(" ".join(e.partial))
        print_error(str(e))
        return EXIT_PARSE
    except UnknownSymbolError as e:
        print_error(str(e))
        return EXIT_PARSE
    print(" ".join(out))
    if args.audit and read == "tag":
        tag_parity, label_parity = parity_audit(tagged, symbols)
        print(f"tag parity {tag_parity}, label parity {label_parity}", file=sys.stderr)
    return EXIT_OK


def cmd_encode(args) -> int:
    return _stream(args, encode, "tag")


def cmd_decode(args) -> int:
    return _stream(args, decode, "label")


def cmd_verify(args) -> int:
    n0, n1 = _counts(args)
    e = load_graph(args.encoder)
    g = _graph(args)
    e = with_partition(e, g.alphabet.odd) if set(e.alphabet.symbols) == set(g.alphabet.symbols) else e
    report = verify_vle(e, g, n0, n1, parity=args.parity)
    if args.json:
        _emit_json(report)
    else:
        print_verification(report)
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_admissible(args) -> int:
    if args.n0 is None or args.n1 is None:
        raise UsageError("admissible needs --n0 and --n1")
    witness = is_admissible(args.zset or [], args.n0, args.n1, args.r)
    if args.json:
        _emit_json(witness)
    else:
        print_admissibility(witness)
    return EXIT_OK if witness.admissible else EXIT_NEGATIVE


def cmd_search_none(args) -> int:
    n0, n1 = _counts(args)
    rmax = get_settings().max_r if args.rmax is None else args.rmax
    with _searching():
        report = search_none(_graph(args), n0, n1, rmax, max_states=args.max_states, tree_budget=args.budget, parallel=args.parallel)
    if args.json:
        _emit_json(report)
    else:
        print_search_report(report)
    return EXIT_OK if report.found else EXIT_NEGATIVE


##### Argument parsing #####


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Print the machine-readable report instead of tables")
    common.add_argument("--verbose", action="store_true", help="Log search details")

    counts = argparse.ArgumentParser(add_help=False)
    counts.add_argument("--n0", type=int, help="Number of even input tag symbols")
    counts.add_argument("--n1", type=int, help="Number of odd input tag symbols")
    counts.add_argument("-n", type=int, help="Input alphabet size for an ordinary (not parity-preserving) encoder")

    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("file", help="Graph file, or the name of a packaged fixture (fig1, fig5, ...)")
    graph.add_argument("--partition", help="Odd symbols: a stored partition name (eq2, eq3, even) or a comma-separated list")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--budget", type=int, help="Path-tree node budget per state")
    search.add_argument("--parallel", action="store_true", help="Evaluate candidate state sets on a thread pool")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("-o", "--output", help="Also write the resulting graph file here")

    distribution = argparse.ArgumentParser(add_help=False)
    distribution.add_argument("--eta", type=_int_list, help="Even word counts per length, e.g. 1,2")
    distribution.add_argument("--omega", type=_int_list, help="Odd word counts per length")
    distribution.add_argument("--mu", type=_int_list, help="Word counts per length (ordinary case)")

    alphabet = argparse.ArgumentParser(add_help=False)
    alphabet.add_argument("--alphabet", help="Comma-separated list alphabet (default: digits 0..n0+n1-1)")
    alphabet.add_argument("--odd", help="Comma-separated odd symbols of --alphabet")

    parser = argparse.ArgumentParser(prog="parity-vle", description="Synthesize and verify variable-length constrained encoders")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", parents=[common, graph], help="Capacity of the presented constraint")
    p.set_defaults(func=cmd_capacity)
    p = sub.add_parser("reduce", parents=[common, graph, output], help="Merge equivalent states into the Shannon cover")
    p.set_defaults(func=cmd_reduce)
    p = sub.add_parser("power", parents=[common, graph, output], help="t-th power of an ordinary graph")
    p.add_argument("-t", type=int, default=2)
    p.set_defaults(func=cmd_power)
    p = sub.add_parser("parity-split", parents=[common, graph], help="Count matrices of the even and odd edges")
    p.set_defaults(func=cmd_parity_split)
    p = sub.add_parser("kraft-check", parents=[common, counts, distribution], help="Parity-preserving (or ordinary) Kraft feasibility")
    p.set_defaults(func=cmd_kraft_check)
    p = sub.add_parser("build-list", parents=[common, counts, distribution, alphabet], help="Construct an exhaustive prefix-free list")
    p.set_defaults(func=cmd_build_list)
    p = sub.add_parser("validate-list", parents=[common, counts, alphabet], help="Check a word list for prefix-freeness and exhaustiveness")
    p.add_argument("words", nargs="*", help="Words (read from stdin when omitted)")
    p.set_defaults(func=cmd_validate_list)
    p = sub.add_parser("aev", parents=[common, counts, graph], help="Largest approximate eigenvector under a cap")
    p.add_argument("-t", type=int, default=1)
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_aev)
    p = sub.add_parser("fixed-existence", parents=[common, counts, graph], help="Existence of a rate t:t parity-preserving fixed-length encoder")
    p.add_argument("-t", type=int, default=1)
    p.add_argument("--cap", type=int)
    p.add_argument("--deterministic", action="store_true", help="Restrict to 0-1 vectors (conclusive)")
    p.set_defaults(func=cmd_fixed_existence)
    p = sub.add_parser("principal", parents=[common, counts, graph], help="Principal states of an ordinary encoder")
    p.add_argument("-r", type=int, required=True)
    p.set_defaults(func=cmd_principal)
    p = sub.add_parser("pp-principal", parents=[common, counts, graph, search], help="Parity-preserving principal states")
    p.add_argument("-r", type=int, required=True)
    p.set_defaults(func=cmd_pp_principal)
    p = sub.add_parser("synth", parents=[common, counts, graph, search, output], help="Principal states, then trimming into an encoder")
    p.add_argument("-r", type=int, required=True)
    p.add_argument("--ordinary", action="store_true", help="Ordinary encoder with n = n0 + n1")
    p.add_argument("--complete", action="store_true", help="Emit the full presentation around the chosen cuts")
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("tag", parents=[common, counts, graph, alphabet, output], help="Assign input tags to an encoder")
    p.add_argument("--ordinary", action="store_true", help="Match tags by length only")
    p.add_argument("--start", help="Start state")
    p.set_defaults(func=cmd_tag)
    for name, func in (("encode", cmd_encode), ("decode", cmd_decode)):
        p = sub.add_parser(name, parents=[common], help=f"{name.title()} a whitespace-separated symbol stream from stdin")
        p.add_argument("file", help="Tagged encoder file or fixture name")
        p.add_argument("--start", help="Start state (default: the file's)")
        p.add_argument("--audit", action="store_true", help="Report cumulative tag and label parity on stderr")
        p.set_defaults(func=func)
    encoder = argparse.ArgumentParser(add_help=False)
    encoder.add_argument("encoder", help="Encoder graph file")
    p = sub.add_parser("verify", parents=[common, counts, encoder, graph], help="Check an encoder against its constraint")
    p.add_argument("--parity", action="store_true", help="Also check the parity-preserving conditions")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("admissible", parents=[common], help="Can condition (b) fail exactly on a given set of lengths")
    p.add_argument("--n0", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("-r", type=int, required=True)
    p.add_argument("--zset", type=_int_list, help="Comma-separated lengths")
    p.set_defaults(func=cmd_admissible)
    p = sub.add_parser("search-none", parents=[common, counts, graph, search], help="Bounded search for a parity-preserving encoder")
    p.add_argument("-r", "--rmax", type=int)
    p.add_argument("--max-states", type=int, default=2)
    p.set_defaults(func=cmd_search_none)
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse argv, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    level = logging.DEBUG if args.verbose else get_settings().log_level
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return args.func(args)
    except InfeasibleDistributionError as e:
        print_error(str(e))
        return EXIT_NEGATIVE
    except SearchBudgetExceeded as e:
        print_error(f"inconclusive: {e}")
        return EXIT_NEGATIVE
    except (ConstraintError, FileNotFoundError, ValueError) as e:
        print_error(str(e))
        return EXIT_USAGE


def main() -> None:
    load_dotenv()
    init(autoreset=True)
    sys.exit(run())


if __name__ == "__main__":
    main()
