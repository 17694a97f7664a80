import sys
from typing import Sequence

from colorama import Fore, Style
from tabulate import tabulate

from src.data.models import AdmissibilityWitness, EncoderCandidate, FixedLengthReport, KraftReport, LabeledGraph, ListValidation, NonexistenceReport, ParityAlphabet, PrincipalResult, VerificationReport, format_word


def _verdict(passed: bool, yes: str = "PASS", no: str = "FAIL") -> str:
    return f"{Fore.GREEN}{yes}{Style.RESET_ALL}" if passed else f"{Fore.RED}{no}{Style.RESET_ALL}"


def _title(text: str, subject: str | None = None) -> None:
    line = f"\n{Fore.WHITE}{Style.BRIGHT}{text}:{Style.RESET_ALL}"
    if subject:
        line += f" [{Fore.CYAN}{subject}{Style.RESET_ALL}]"
    print(line)


def _parity_name(word: Sequence[str], alphabet: ParityAlphabet) -> str:
    return "odd" if sum(alphabet.parity(s) for s in word) % 2 else "even"


def print_error(message: str) -> None:
    print(f"{Fore.RED}Error: {message}{Style.RESET_ALL}", file=sys.stderr)


def print_graph(g: LabeledGraph, title: str = "GRAPH") -> None:
    _title(title, f"{len(g.states)} states, {len(g.edges)} edges")
    rows = []
    for e in g.edges:
        row = [f"{Fore.CYAN}{e.source}{Style.RESET_ALL}", format_word(e.label), f"{Fore.CYAN}{e.target}{Style.RESET_ALL}", _parity_name(e.label, g.alphabet)]
        if e.tag is not None:
            row.append(format_word(e.tag))
        rows.append(row)
    headers = [f"{Fore.WHITE}From", "Label", "To", "Parity"]
    if any(e.tag is not None for e in g.edges):
        headers.append("Tag")
    print(tabulate(rows, headers=headers, tablefmt="grid"))
    print(f"Alphabet: {', '.join(g.alphabet.symbols)}   odd: {', '.join(g.alphabet.odd) or '-'}")


def print_matrix(name: str, m, states: Sequence[str]) -> None:
    _title(name)
    rows = [[f"{Fore.CYAN}{u}{Style.RESET_ALL}"] + [int(v) for v in row] for u, row in zip(states, m)]
    print(tabulate(rows, headers=[""] + list(states), tablefmt="grid", numalign="right"))


def print_kraft_report(report: KraftReport) -> None:
    _title("PARITY KRAFT CHECK", f"n0={report.n0}, n1={report.n1}")
    rows = []
    d = report.distribution
    for ell, (p, m) in enumerate(zip(report.k_plus, report.k_minus), start=1):
        ok = ell not in report.condition_b_failures
        rows.append([ell, d.eta_at(ell), d.omega_at(ell), p, m, _verdict(ok, "ok", "K+ < |K-|")])
    print(tabulate(rows, headers=[f"{Fore.WHITE}Length", "Even", "Odd", "K+", "K-", "Condition (b)"], tablefmt="grid", colalign=("right", "right", "right", "right", "right", "center")))
    print(f"Condition (a) K+_r = 0: {_verdict(report.condition_a)}")
    print(f"Verdict: {_verdict(report.verdict, 'feasible', 'infeasible')}")


def print_word_list(words: Sequence[Sequence[str]]) -> None:
    for w in words:
        print(format_word(w))


def print_list_validation(check: ListValidation) -> None:
    rows = [["Prefix-free", _verdict(check.prefix_free, "yes", "no")], ["Exhaustive", _verdict(check.exhaustive, "yes", "no")], ["Even counts", list(check.distribution.eta)], ["Odd counts", list(check.distribution.omega)]]
    print(tabulate(rows, tablefmt="grid", colalign=("left", "left")))


def print_principal_result(result: PrincipalResult, alphabet: ParityAlphabet) -> None:
    kind = f"n0={result.n0}, n1={result.n1}" if result.parity else f"n={result.n0}"
    _title("PRINCIPAL STATES", f"{kind}, r={result.r}")
    if not result.found:
        print(f"{Fore.RED}none{Style.RESET_ALL} ({result.bound_note})")
        return
    print("{" + ", ".join(result.principal_set) + "}")
    rows = []
    for u in result.principal_set:
        report = result.reports[u]
        labels = "\n".join(format_word(e.label) for e in sorted(result.cuts[u], key=lambda e: alphabet.sort_key(e.label)))
        rows.append([f"{Fore.CYAN}{u}{Style.RESET_ALL}", labels, str(report.mass), _verdict(report.passed)])
    print(tabulate(rows, headers=[f"{Fore.WHITE}State", "Cut", "Kraft mass", "Conditions"], tablefmt="grid", colalign=("left", "left", "right", "center")))


def print_encoder(candidate: EncoderCandidate) -> None:
    print_graph(candidate.graph, "ENCODER")
    if candidate.trim_log:
        rows = [[f"{Fore.CYAN}{u}{Style.RESET_ALL}", entry.removed_even, entry.removed_odd, ", ".join(format_word(e.label) for e in entry.removed) or "-"] for u, entry in candidate.trim_log.items()]
        _title("TRIMMED")
        print(tabulate(rows, headers=[f"{Fore.WHITE}State", "Even removed", "Odd removed", "Labels"], tablefmt="grid"))


def print_verification(report: VerificationReport) -> None:
    kind = f"n0={report.n0}, n1={report.n1}, parity" if report.parity else f"n={report.n0 + report.n1}"
    _title("ENCODER VERIFICATION", kind)
    rows = [[item.condition, item.state or "-", _verdict(item.passed), item.detail] for item in report.items]
    print(tabulate(rows, headers=[f"{Fore.WHITE}Condition", "State", "Result", "Detail"], tablefmt="grid"))
    print(f"Verdict: {_verdict(report.passed)}")


def print_fixed_length(report: FixedLengthReport) -> None:
    colour = Fore.GREEN if report.exists else Fore.RED
    print(f"t={report.t} n0={report.n0} n1={report.n1}: {colour}{report.summary}{Style.RESET_ALL}")


def print_search_report(report: NonexistenceReport) -> None:
    _title("BOUNDED ENCODER SEARCH", f"n0={report.n0}, n1={report.n1}, rmax={report.rmax}")
    rows = []
    for c in report.candidates:
        detail = "-" if c.passed else f"{c.failing_state}: {c.failing_condition}"
        rows.append(["{" + ", ".join(c.subset) + "}", c.r, _verdict(c.passed), detail])
    print(tabulate(rows, headers=[f"{Fore.WHITE}Candidate", "r", "Result", "Failing condition"], tablefmt="grid"))
    if report.found:
        print_encoder(report.encoder)
    else:
        print(f"{Fore.RED}none found{Style.RESET_ALL}: {report.bound_note}")


def print_admissibility(w: AdmissibilityWitness) -> None:
    if not w.admissible:
        xi = "" if w.xi is None else "; xi=(" + ",".join(str(v) for v in w.xi) + ")"
        print(f"inadmissible{xi}")
        return
    print(f"admissible; witness eta={w.witness.eta} omega={w.witness.omega} ({w.construction})")
