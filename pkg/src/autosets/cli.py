"""The ``autosets`` command line tool.

Five command groups drive the library: ``span`` (digit systems), ``fset``
(set expressions compiled to automata), ``sparse`` (growth analysis of
regular languages), ``sml`` (zero sets of recurrences over function
fields), and ``auto`` (generic DFA utilities).

Outputs are canonical: JSON is emitted with sorted keys and no whitespace,
and automata are canonically numbered, so identical invocations produce
byte-identical bytes.  Exit codes: 0 success, 1 negative answer from a
yes/no command, 2 bad input, 3 inconclusive search, 4 verification
mismatch, 5 state/size cap exceeded.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys

from . import sparse as sparse_mod
from .automata import (
    Dfa,
    accepts_value,
    canonical_renumber,
    distinguishing_word,
    enumerate_values,
    minimize,
)
from .errors import CapExceededError, InconclusiveError, InputError, MismatchError
from .groups import Endomorphism, Vec
from .orbitsets import (
    compile_fset,
    expr_values_within,
    normalize,
    parse_expr,
    to_pnormal,
)
from .recurrences import (
    SequenceSpec,
    accepts_number,
    analyze_zero_set,
    eval_sequence,
    zero_pattern,
    zero_set_automaton,
)
from .spanning import (
    SpanningSet,
    eval_expansion,
    expand_greedy,
    find_spanning,
    sigma_power,
    verify_spanning,
    word_digits,
)

DEFAULT_ENDO = "4"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"bad JSON in {path}: {exc}") from exc


def _load_dfa(path: str) -> Dfa:
    return Dfa.from_json_obj(_load_json(path))


def _parse_endo(text: str, dim: int | None = None) -> Endomorphism:
    try:
        k = int(text)
    except ValueError:
        try:
            rows = json.loads(text)
            return Endomorphism.from_rows(rows)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise InputError(f"bad endomorphism {text!r}: {exc}") from exc
    try:
        return Endomorphism.scalar(k, dim or 1)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _parse_point(text: str) -> Vec:
    try:
        return (int(text),)
    except ValueError:
        pass
    try:
        val = json.loads(text)
        return tuple(int(x) for x in val)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise InputError(f"bad point {text!r}: {exc}") from exc


def _fmt_value(v: Vec) -> str:
    return str(v[0]) if len(v) == 1 else "(" + ",".join(map(str, v)) + ")"


def _emit(args, obj, text: str, dfa: Dfa | None = None) -> None:
    if args.output == "json":
        print(canonical_json(obj))
    elif args.output == "dot":
        if dfa is None:
            raise InputError("this command has no DOT rendering")
        print(dfa.to_dot())
    else:
        print(text)


# ---------------------------------------------------------------------------
# span

def cmd_span_find(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    ss = find_spanning(endo)
    digits = sorted(ss.digits)
    _emit(args, ss.to_json_obj(),
          f"power={ss.power} radius={ss.radius} "
          f"digits={' '.join(_fmt_value(d) for d in digits)}")
    return 0


def cmd_span_verify(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    if args.digits:
        obj = json.loads(args.digits)
        digits = [(int(d),) if isinstance(d, int) else tuple(int(x) for x in d)
                  for d in obj]
        ss = SpanningSet.make(endo, args.power or 1, digits)
    else:
        ss = find_spanning(endo)
    report = verify_spanning(ss)
    _emit(args, report.to_json_obj(),
          "all axioms hold" if report.all_pass()
          else "failing: " + ", ".join(report.failures()))
    return 0 if report.all_pass() else 1


def cmd_span_expand(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    ss = find_spanning(endo)
    x = _parse_point(args.x)
    word = expand_greedy(ss, x)
    digits = word_digits(ss, word)
    if ss.dim == 1:
        text = "[" + ",".join(str(d[0]) for d in digits) + "]"
    else:
        text = "[" + ",".join(_fmt_value(d) for d in digits) + "]"
    if args.verify_bruteforce is not None:
        back = eval_expansion(ss, word)
        if back != x:
            raise MismatchError(
                f"expansion of {_fmt_value(x)} evaluates to {_fmt_value(back)}")
    _emit(args, {"digits": [list(d) for d in digits]}, text)
    return 0


def cmd_span_power(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    ss = sigma_power(find_spanning(endo), args.exp)
    digits = sorted(ss.digits)
    _emit(args, ss.to_json_obj(),
          f"power={ss.power} radius={ss.radius} "
          f"digits={' '.join(_fmt_value(d) for d in digits)}")
    return 0


# ---------------------------------------------------------------------------
# fset

def _box_points(dim: int, radius: int):
    rng = range(-radius, radius + 1)
    pts = sorted(itertools.product(rng, repeat=dim),
                 key=lambda v: (max(abs(c) for c in v), v))
    return pts


def _verify_compiled(endo, expr, ss, dfa, bound: int) -> None:
    oracle = expr_values_within(endo, expr, bound)
    for v in _box_points(endo.dim, bound):
        want = v in oracle
        got = accepts_value(ss, dfa, v)
        if want != got:
            raise MismatchError(
                f"membership mismatch at {_fmt_value(v)}: "
                f"automaton={got} enumeration={want}")


def cmd_fset_compile(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    expr = parse_expr(args.expr)
    ss, dfa = compile_fset(endo, expr, state_cap=args.state_cap)
    if args.verify_bruteforce is not None:
        _verify_compiled(endo, expr, ss, dfa, args.verify_bruteforce)
    _emit(args, dfa.to_json_obj(), f"{dfa.n_states} states", dfa)
    return 0


def cmd_fset_member(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    expr = parse_expr(args.expr)
    x = _parse_point(args.x)
    ss, dfa = compile_fset(endo, expr, state_cap=args.state_cap)
    member = accepts_value(ss, dfa, x)
    if args.verify_bruteforce is not None:
        bound = max(args.verify_bruteforce, max(abs(c) for c in x))
        oracle = expr_values_within(endo, expr, bound)
        if member != (tuple(x) in oracle):
            raise MismatchError(
                f"membership mismatch at {_fmt_value(x)}: "
                f"automaton={member} enumeration={tuple(x) in oracle}")
    _emit(args, {"member": member}, "true" if member else "false")
    return 0


def cmd_fset_enumerate(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    expr = parse_expr(args.expr)
    ss, dfa = compile_fset(endo, expr, state_cap=args.state_cap)
    values = enumerate_values(ss, dfa, args.maxlen)
    if args.verify_bruteforce is not None:
        bound = args.verify_bruteforce
        oracle = expr_values_within(endo, expr, bound)
        got = {v for v in values if max(abs(c) for c in v) <= bound}
        for v in sorted(got - oracle):
            raise MismatchError(
                f"enumerated {_fmt_value(v)} is not in the set")
        for v in sorted(oracle - got):
            if len(expand_greedy(ss, v)) <= args.maxlen:
                raise MismatchError(
                    f"missing {_fmt_value(v)} from the enumeration")
    _emit(args, [list(v) for v in values],
          ",".join(_fmt_value(v) for v in values))
    return 0


def cmd_fset_normalize(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    expr = parse_expr(args.expr)
    nf = normalize(endo, expr)
    if args.verify_bruteforce is not None:
        bound = args.verify_bruteforce
        oracle = expr_values_within(endo, expr, bound)
        got = nf.values_within(bound, max_len=24)
        for v in sorted(oracle ^ got):
            raise MismatchError(
                f"normal form disagrees at {_fmt_value(v)}")
    _emit(args, nf.to_json_obj(),
          f"{len(nf.components)} components, "
          f"+{len(nf.adjust_add)}/-{len(nf.adjust_remove)} adjustments")
    return 0


def cmd_fset_pnormal(args) -> int:
    endo = _parse_endo(args.endo, args.dim)
    expr = parse_expr(args.expr)
    pn = to_pnormal(endo, expr)
    if args.verify_bruteforce is not None:
        bound = args.verify_bruteforce
        oracle = {v[0] for v in expr_values_within(endo, expr, bound)}
        got = pn.values_within(bound)
        for v in sorted(oracle ^ got):
            raise MismatchError(f"p-normal form disagrees at {v}")
    _emit(args, pn.to_json_obj(), str(pn))
    return 0


# ---------------------------------------------------------------------------
# sparse

def cmd_sparse_check(args) -> int:
    dfa = _load_dfa(args.dfa)
    cert = sparse_mod.certificate(dfa)
    if cert.sparse:
        text = f"sparse, degree <= {cert.degree}"
    else:
        u, a, b, v = cert.witness
        text = ("not sparse; witness u{a,b}*v with "
                f"u={list(u)} a={list(a)} b={list(b)} v={list(v)}")
    _emit(args, cert.to_json_obj(), text)
    return 0


def cmd_sparse_decompose(args) -> int:
    dfa = _load_dfa(args.dfa)
    decomposition = sparse_mod.decompose_sparse(dfa)
    if args.verify_bruteforce is not None:
        rebuilt = sparse_mod.compile_decomposition(dfa.symbols, decomposition,
                                                   dfa.arity)
        word = distinguishing_word(minimize(canonical_renumber(dfa)), rebuilt)
        if word is not None:
            raise MismatchError(
                f"decomposition disagrees on the word {list(word)}")
    _emit(args, sparse_mod.decomposition_json_obj(decomposition),
          "; ".join(
              " ".join(
                  (f"({','.join(map(str, b.word))})*" if b.starred
                   else f"({','.join(map(str, b.word))})")
                  for b in piece) or "()"
              for piece in decomposition))
    return 0


def cmd_sparse_growth(args) -> int:
    dfa = _load_dfa(args.dfa)
    counts = sparse_mod.length_counts(dfa, args.max)
    cumulative = list(itertools.accumulate(counts))
    lines = ["n,count,cumulative"]
    lines += [f"{n},{c},{t}" for n, (c, t) in
              enumerate(zip(counts, cumulative))]
    print("\n".join(lines))
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        ns = range(len(counts))
        ax.plot(ns, counts, marker="o", markersize=3, label="words of length n")
        ax.plot(ns, cumulative, marker=".", markersize=3, label="cumulative")
        ax.set_xlabel("n")
        ax.set_ylabel("count")
        ax.set_yscale("symlog")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# sml

def _load_sequence(path: str) -> SequenceSpec:
    return SequenceSpec.from_json_obj(_load_json(path))


def _require_closed_form(spec: SequenceSpec):
    if spec.closed_form is None:
        raise InputError("this command needs a closedForm in the sequence file")
    return spec.closed_form


def cmd_sml_zeros(args) -> int:
    spec = _load_sequence(args.seq)
    cf = _require_closed_form(spec)
    if args.negative:
        cf = cf.inverted()
    dfa = zero_set_automaton(cf, state_cap=args.state_cap or 100_000)
    if args.verify_bruteforce is not None:
        pattern = zero_pattern(cf, args.verify_bruteforce)
        for n, want in enumerate(pattern):
            if accepts_number(dfa, n) != want:
                raise MismatchError(
                    f"zero-set mismatch at n={n}: "
                    f"automaton={accepts_number(dfa, n)} sequence={want}")
    _emit(args, dfa.to_json_obj(), f"{dfa.n_states} states", dfa)
    return 0


def cmd_sml_check(args) -> int:
    spec = _load_sequence(args.seq)
    if spec.closed_form is None or spec.recurrence is None:
        raise InputError(
            "cross-checking needs both closedForm and recurrence")
    bound = args.verify_bruteforce if args.verify_bruteforce is not None else 256
    for n in range(bound):
        a = eval_sequence(spec.closed_form, n)
        b = eval_sequence(spec.recurrence, n)
        if a != b:
            raise MismatchError(
                f"closed form and recurrence disagree at n={n}")
    _emit(args, {"checked": bound, "consistent": True},
          f"consistent through n<{bound}")
    return 0


def cmd_sml_analyze(args) -> int:
    spec = _load_sequence(args.seq)
    cf = _require_closed_form(spec)
    if args.negative:
        cf = cf.inverted()
    dfa = zero_set_automaton(cf, state_cap=args.state_cap or 100_000)
    report = analyze_zero_set(dfa)
    parts = []
    if report.certificate.sparse:
        parts.append(f"sparse, degree <= {report.certificate.degree}")
    else:
        parts.append("not sparse")
    if report.periodic is not None:
        pr = report.periodic
        parts.append(
            f"eventually periodic: n >= {pr.threshold} with n mod "
            f"{pr.modulus} in {set(pr.residues) or '{}'}"
            + (f", plus {set(pr.exceptional)}" if pr.exceptional else ""))
    else:
        parts.append("no eventual period found")
    _emit(args, report.to_json_obj(), "; ".join(parts))
    return 0


# ---------------------------------------------------------------------------
# auto

def cmd_auto_minimize(args) -> int:
    dfa = minimize(canonical_renumber(_load_dfa(args.dfa)))
    _emit(args, dfa.to_json_obj(), f"{dfa.n_states} states", dfa)
    return 0


def cmd_auto_equiv(args) -> int:
    a = _load_dfa(args.a)
    b = _load_dfa(args.b)
    word = distinguishing_word(a, b)
    if word is None:
        _emit(args, {"equivalent": True}, "equivalent")
        return 0
    _emit(args, {"equivalent": False, "word": list(word)},
          f"distinguished by {list(word)}")
    return 1


def cmd_auto_export(args) -> int:
    print(_load_dfa(args.dfa).to_dot())
    return 0


# ---------------------------------------------------------------------------
# wiring

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", choices=("json", "dot", "text"),
                        default="json", help="output format (default json)")
    common.add_argument("--verify-bruteforce", type=int, metavar="BOUND",
                        default=None,
                        help="cross-check against brute force up to BOUND; "
                             "a mismatch prints a counterexample and exits 4")
    common.add_argument("--state-cap", type=int, default=1_000_000,
                        help="abort with exit 5 past this many states")
    common.add_argument("--seed", type=int, default=0,
                        help="reserved; all commands are deterministic")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="autosets",
        description="automata for orbit-generated subsets of Z^d")
    groups = parser.add_subparsers(dest="group", required=True)

    def endo_flags(p, with_dim=True):
        p.add_argument("--endo", default=DEFAULT_ENDO,
                       help="scalar like '4' or a JSON matrix (default 4)")
        if with_dim:
            p.add_argument("--dim", type=int, default=None,
                           help="dimension for scalar endomorphisms")

    span = groups.add_parser("span", help="digit systems").add_subparsers(
        dest="action", required=True)
    p = span.add_parser("find", parents=[common],
                        help="search for a digit system")
    endo_flags(p)
    p.set_defaults(func=cmd_span_find)
    p = span.add_parser("verify", parents=[common],
                        help="check the digit-system axioms")
    endo_flags(p)
    p.add_argument("--digits", default=None,
                   help="JSON list of digits (default: the found system)")
    p.add_argument("--power", type=int, default=None,
                   help="endomorphism power the digits are for")
    p.set_defaults(func=cmd_span_verify)
    p = span.add_parser("expand", parents=[common],
                        help="greedy digit expansion of a point")
    endo_flags(p)
    p.add_argument("--x", required=True, help="integer or JSON vector")
    p.set_defaults(func=cmd_span_expand)
    p = span.add_parser("power", parents=[common],
                        help="digit system for an endomorphism power")
    endo_flags(p)
    p.add_argument("--exp", type=int, required=True)
    p.set_defaults(func=cmd_span_power)

    fset = groups.add_parser(
        "fset", help="set expressions and their automata").add_subparsers(
        dest="action", required=True)
    for name, fn, extra in (
            ("compile", cmd_fset_compile, ()),
            ("member", cmd_fset_member, ("--x",)),
            ("enumerate", cmd_fset_enumerate, ("--maxlen",)),
            ("normalize", cmd_fset_normalize, ()),
            ("pnormal", cmd_fset_pnormal, ())):
        p = fset.add_parser(name, parents=[common])
        endo_flags(p)
        p.add_argument("--expr", required=True,
                       help="set expression, e.g. '2+C(3;1)+H[5]'")
        if "--x" in extra:
            p.add_argument("--x", required=True,
                           help="integer or JSON vector")
        if "--maxlen" in extra:
            p.add_argument("--maxlen", type=int, required=True,
                           help="maximum word length to enumerate")
        p.set_defaults(func=fn)

    sparse = groups.add_parser(
        "sparse", help="growth analysis of regular languages").add_subparsers(
        dest="action", required=True)
    p = sparse.add_parser("check", parents=[common])
    p.add_argument("--dfa", required=True, help="DFA JSON file or - for stdin")
    p.set_defaults(func=cmd_sparse_check)
    p = sparse.add_parser("decompose", parents=[common])
    p.add_argument("--dfa", required=True)
    p.set_defaults(func=cmd_sparse_decompose)
    p = sparse.add_parser("growth", parents=[common])
    p.add_argument("--dfa", required=True)
    p.add_argument("--max", type=int, default=40,
                   help="largest word length tabulated (default 40)")
    p.add_argument("--plot", default=None, metavar="PNG",
                   help="also render the table to this image file")
    p.set_defaults(func=cmd_sparse_growth)

    sml = groups.add_parser(
        "sml", help="zero sets of recurrences over function fields"
    ).add_subparsers(dest="action", required=True)
    for name, fn in (("zeros", cmd_sml_zeros), ("check", cmd_sml_check),
                     ("analyze", cmd_sml_analyze)):
        p = sml.add_parser(name, parents=[common])
        p.add_argument("--seq", required=True,
                       help="sequence JSON file or - for stdin")
        if name != "check":
            p.add_argument("--negative", action="store_true",
                           help="analyze the negative-index side")
        p.set_defaults(func=fn)

    auto = groups.add_parser("auto", help="DFA utilities").add_subparsers(
        dest="action", required=True)
    p = auto.add_parser("minimize", parents=[common])
    p.add_argument("--dfa", required=True)
    p.set_defaults(func=cmd_auto_minimize)
    p = auto.add_parser("equiv", parents=[common])
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_auto_equiv)
    p = auto.add_parser("export", parents=[common])
    p.add_argument("--dfa", required=True)
    p.set_defaults(func=cmd_auto_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 3
    except MismatchError as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return 4
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
