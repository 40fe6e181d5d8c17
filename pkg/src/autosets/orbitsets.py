"""The set calculus over Z^d for an expanding endomorphism F.

An expression denotes a finite union of *terms*; a term is

    base + C(g1; e1) + ... + C(gk; ek) + H

where base is a point, H is an F-invariant subgroup, and a cycle C(g; e) is
the set of partial sums of the e-step orbit of g:

    C(g; e) = { g + F^e g + F^{2e} g + ... + F^{le} g :  l >= 0 }.

Concrete syntax (whitespace optional)::

    expr  := term (('∪' | '|') term)*
    term  := atom ('+' atom)*
    atom  := '{' point '}'  |  'C(' point ';' int ')'  |
             'H[' point (',' point)* ']'  |  point
    point := int  |  '(' int (',' int)* ')'

Every construction compiles to a saturated DFA over the digits of a working
spanning set, so membership, enumeration and equality are all decidable; an
independent brute-force enumerator is provided for cross-checking.  Cycles
whose step is not a multiple of the spanning power are first re-indexed by
:func:`cycle_to_power` into translates plus cycles of a larger step.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .automata import (
    DEFAULT_STATE_CAP,
    Dfa,
    dfa_from_kernel,
    enumerate_values,
    minimize,
    rebase,
    saturate,
    sum_automaton,
    union,
    word_dfa,
    zero_pad_closure,
)
from .errors import InconclusiveError, InputError
from .groups import (
    Endomorphism,
    Lattice,
    Vec,
    as_vec,
    left_kernel,
    mat_inverse_frac,
    mat_pow,
    solve_columns,
    supnorm,
    vadd,
    vneg,
    vsub,
    zero_vec,
)
from .spanning import (
    SpanningSet,
    enlarge_digits,
    expand_greedy,
    find_spanning,
    sigma_power,
)


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Cycle:
    point: Vec
    step: int

    def __post_init__(self):
        if self.step < 1:
            raise InputError("cycle step must be >= 1")


@dataclass(frozen=True)
class SetTerm:
    base: Vec
    cycles: tuple[Cycle, ...] = ()
    subgroup: Lattice | None = None


@dataclass(frozen=True)
class SetExpr:
    dim: int
    terms: tuple[SetTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise InputError("an expression needs at least one term")


_TOKEN = re.compile(r"\s*(-?\d+|C\(|H\[|[{}()\[\],;+|]|∪)")


def _tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise InputError(f"cannot parse {text[pos:pos + 12]!r}")
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise InputError(f"expected {expected!r}, got {tok!r}")
        self.pos += 1
        return tok

    def point(self) -> Vec:
        tok = self.peek()
        if tok == "(":
            self.take("(")
            coords = [int(self.take())]
            while self.peek() == ",":
                self.take(",")
                coords.append(int(self.take()))
            self.take(")")
            return tuple(coords)
        if tok is not None and re.fullmatch(r"-?\d+", tok):
            self.take()
            return (int(tok),)
        raise InputError(f"expected a point, got {tok!r}")

    def atom(self):
        tok = self.peek()
        if tok == "{":
            self.take("{")
            p = self.point()
            self.take("}")
            return ("base", p)
        if tok == "C(":
            self.take("C(")
            p = self.point()
            self.take(";")
            step = int(self.take())
            self.take(")")
            return ("cycle", Cycle(p, step))
        if tok == "H[":
            self.take("H[")
            gens = [self.point()]
            while self.peek() == ",":
                self.take(",")
                gens.append(self.point())
            self.take("]")
            return ("subgroup", gens)
        return ("base", self.point())

    def term(self) -> SetTerm:
        atoms = [self.atom()]
        while self.peek() == "+":
            self.take("+")
            atoms.append(self.atom())
        kind0, val0 = atoms[0]
        if kind0 == "cycle":
            dim = len(val0.point)
        elif kind0 == "subgroup":
            dim = len(val0[0])
        else:
            dim = len(val0)
        base = zero_vec(dim)
        cycles = []
        sub_gens = []
        for kind, val in atoms:
            if kind == "base":
                if len(val) != dim:
                    raise InputError("mixed dimensions in one term")
                base = vadd(base, val)
            elif kind == "cycle":
                if len(val.point) != dim:
                    raise InputError("mixed dimensions in one term")
                cycles.append(val)
            else:
                if any(len(g) != dim for g in val):
                    raise InputError("mixed dimensions in one term")
                sub_gens.extend(val)
        sub = Lattice.from_rows(dim, sub_gens) if sub_gens else None
        return SetTerm(base, tuple(cycles), sub)

    def expr(self) -> SetExpr:
        terms = [self.term()]
        while self.peek() in ("∪", "|"):
            self.take()
            terms.append(self.term())
        if self.peek() is not None:
            raise InputError(f"unexpected trailing token {self.peek()!r}")
        dims = {len(t.base) for t in terms}
        if len(dims) != 1:
            raise InputError("mixed dimensions across terms")
        return SetExpr(dims.pop(), tuple(terms))


def parse_expr(text: str) -> SetExpr:
    tokens = _tokenize(text)
    if not tokens:
        raise InputError("empty expression")
    return _Parser(tokens).expr()


def _point_str(p: Vec) -> str:
    return str(p[0]) if len(p) == 1 else "(" + ",".join(map(str, p)) + ")"


def expr_to_str(expr: SetExpr) -> str:
    parts = []
    for t in expr.terms:
        atoms = ["{" + _point_str(t.base) + "}"]
        for c in t.cycles:
            atoms.append(f"C({_point_str(c.point)};{c.step})")
        if t.subgroup is not None and not t.subgroup.is_trivial():
            atoms.append("H[" + ",".join(_point_str(g) for g in t.subgroup.rows) + "]")
        parts.append("+".join(atoms))
    return " ∪ ".join(parts)


# ---------------------------------------------------------------------------
# exact cycle geometry

def _frac_vec_norm(v) -> Fraction:
    return max(abs(x) for x in v)


def cycle_base_point(endo: Endomorphism, cycle: Cycle):
    """The rational shift b with (F^step - 1) b = point.

    Exists iff no eigenvalue of F^step is 1.  Partial sums of the cycle are
    then F^{(l+1) step} b - b, which gives the exact escape bound used by the
    brute-force enumerator.
    """
    if endo.shifted_det(cycle.step) == 0:
        raise InputError(
            f"F^{cycle.step} has eigenvalue 1; C({_point_str(cycle.point)};"
            f"{cycle.step}) cannot be compiled")
    step_m = mat_pow(endo.rows, cycle.step)
    shifted = tuple(tuple(x - (1 if i == j else 0) for j, x in enumerate(row))
                    for i, row in enumerate(step_m))
    inv = mat_inverse_frac(shifted)
    return tuple(sum(a * b for a, b in zip(row, cycle.point)) for row in inv)


def cycle_partials_within(endo: Endomorphism, cycle: Cycle, radius: int,
                          hard_cap: int = 10_000) -> list[Vec]:
    """All partial sums of a cycle with sup-norm <= radius — exact.

    Terminates by the escape bound: once ||F^{(l+1) step} b|| > radius + ||b||
    every later partial sum stays outside the box.
    """
    zero = zero_vec(endo.dim)
    if cycle.point == zero:
        return [zero] if radius >= 0 else []
    beta = cycle_base_point(endo, cycle)
    bnorm = _frac_vec_norm(beta)
    fe = endo.power(cycle.step)
    inv_step = mat_inverse_frac(fe.rows)
    inv_pow = inv_step
    out = []
    s = cycle.point
    term = cycle.point
    for _ in range(hard_cap):
        if supnorm(s) <= radius:
            out.append(s)
        # ||F^{(l+1)step} b||_sup >= ||b||_sup / ||F^{-(l+1)step}||_sup
        inv_norm = max(sum(abs(x) for x in row) for row in inv_pow)
        if bnorm / inv_norm > radius + bnorm:
            return out
        term = fe(term)
        s = vadd(s, term)
        inv_pow = tuple(tuple(sum(a * b for a, b in zip(row, col))
                              for col in zip(*inv_step)) for row in inv_pow)
    raise RuntimeError("cycle enumeration failed to escape the box "
                       "(is the endomorphism expansive?)")


def _lattice_points_within(lat: Lattice, radius: int,
                           offset: Vec | None = None) -> list[Vec]:
    """All points of offset + L with sup-norm <= radius, via echelon recursion."""
    start = zero_vec(lat.dim) if offset is None else offset
    if lat.is_trivial():
        return [start] if supnorm(start) <= radius else []
    rows = lat.rows
    out: list[Vec] = []

    def rec(i: int, acc: Vec):
        if i == len(rows):
            if supnorm(acc) <= radius:
                out.append(acc)
            return
        row = rows[i]
        p = next(j for j, x in enumerate(row) if x)
        # rows below i are zero at the pivot column p, so the coordinate
        # there is acc[p] + c * row[p] no matter what comes later
        low = -((radius + acc[p]) // row[p])
        high = (radius - acc[p]) // row[p]
        for c in range(low, high + 1):
            rec(i + 1, vadd(acc, tuple(c * x for x in row)))

    rec(0, start)
    return out


def _cycle_coset_walk(endo: Endomorphism, cycle: Cycle, lat: Lattice,
                        cap: int = 1 << 20) -> list[Vec]:
    """All coset representatives of the partial sums modulo an invariant
    lattice.  The representative walk t -> reduce(point + F^step t) is
    deterministic, so the visited set is complete at the first repeat."""
    step_m = endo.power(cycle.step)
    t = lat.coset_reduce(cycle.point)
    seen_set: set[Vec] = set()
    seen: list[Vec] = []
    while t not in seen_set:
        if len(seen) >= cap:
            raise InconclusiveError("residue walk of a cycle did not close")
        seen_set.add(t)
        seen.append(t)
        t = lat.coset_reduce(vadd(cycle.point, step_m(t)))
    return seen


def _quotient_functional(lat: Lattice) -> tuple[Vec, ...]:
    """Integer functionals vanishing exactly on the span of the lattice."""
    transpose = [tuple(row[j] for row in lat.rows) for j in range(lat.dim)]
    return tuple(left_kernel(transpose, lat.rank))


def term_values_within(endo: Endomorphism, term: SetTerm, radius: int,
                       margin: int = 4) -> set[Vec]:
    """Brute-force enumeration of a term inside the sup-norm box.

    Without a subgroup, cycle partials are collected up to a working radius
    with a cancellation margin; the compiled automata are checked against
    this set in both directions, so an insufficient margin surfaces as a
    test failure rather than a silent gap.

    With a subgroup the margin approach is unsound — arbitrarily far
    partial sums re-enter the box through lattice shifts — so membership is
    decided exactly: against a finite-index lattice only the residues of
    the partial sums matter, and the residue walk closes; against an
    infinite-index lattice a single cycle is cut down by the integer
    functionals that vanish on the lattice, whose values along the cycle
    escape monotonically.
    """
    lat = term.subgroup
    if lat is None or lat.is_trivial():
        slack = radius + supnorm(term.base)
        for c in term.cycles:
            slack += int(_frac_vec_norm(cycle_base_point(endo, c))) + 1
        work = margin * slack + 8
        values = {term.base}
        for c in term.cycles:
            partials = cycle_partials_within(endo, c, work)
            values = {vadd(v, p) for v in values for p in partials}
        return {v for v in values if supnorm(v) <= radius}

    if not term.cycles:
        return set(_lattice_points_within(lat, radius, offset=term.base))

    for row in lat.rows:
        if endo(row) not in lat:
            raise InputError("subgroup is not invariant under the endomorphism")

    out: set[Vec] = set()
    if lat.rank == lat.dim:
        reps = [zero_vec(lat.dim)]
        for c in term.cycles:
            res = _cycle_coset_walk(endo, c, lat)
            reps = list({lat.coset_reduce(vadd(a, b))
                         for a in reps for b in res})
        for t in reps:
            out.update(_lattice_points_within(lat, radius,
                                              offset=vadd(term.base, t)))
        return out

    if lat.dim - lat.rank == 1 and len(term.cycles) == 1:
        cyc = term.cycles[0]
        (phi,) = _quotient_functional(lat)

        def apply_phi(v):
            return sum(a * b for a, b in zip(phi, v))

        q = cycle_base_point(endo, cyc)  # rational fixed shift
        phi_q = sum(a * b for a, b in zip(phi, q))
        phi_w = apply_phi(cyc.point) - phi_q
        bound = sum(abs(a) * (radius + abs(b))
                    for a, b in zip(phi, term.base))
        if phi_w == 0:
            for t in _cycle_coset_walk(endo, cyc, lat):
                out.update(_lattice_points_within(lat, radius,
                                                  offset=vadd(term.base, t)))
            return out
        # |phi(partial) - phi_q| grows by a fixed factor > 1 each step, so
        # the scan below is complete once it leaves the target band
        step_m = endo.power(cyc.step)
        p = cyc.point
        guard = 0
        while abs(apply_phi(p) - phi_q) <= bound + abs(phi_q):
            if abs(apply_phi(p)) <= bound:
                out.update(_lattice_points_within(lat, radius,
                                                  offset=vadd(term.base, p)))
            p = vadd(cyc.point, step_m(p))
            guard += 1
            if guard > 100_000:
                raise InconclusiveError(
                    "cycle values along the quotient functional did not escape")
        return out

    raise InconclusiveError(
        "exact enumeration with an infinite-index subgroup supports "
        "only a single cycle in codimension one")


def expr_values_within(endo: Endomorphism, expr: SetExpr, radius: int,
                       margin: int = 4) -> set[Vec]:
    out: set[Vec] = set()
    for t in expr.terms:
        out |= term_values_within(endo, t, radius, margin)
    return out


# ---------------------------------------------------------------------------
# working spanning sets

@lru_cache(maxsize=None)
def _cached_working(rows: tuple) -> SpanningSet:
    return find_spanning(Endomorphism(rows), classical_first=False)


def working_spanning(endo: Endomorphism) -> SpanningSet:
    """The digit system used to compile expressions over this map: the
    smallest verified sup-norm ball over the smallest usable power."""
    return _cached_working(endo.rows)


# ---------------------------------------------------------------------------
# building blocks

def singleton_dfa(ss: SpanningSet, g) -> Dfa:
    """Saturated DFA for the one-point set {g}.

    States are "remaining values": after reading w the state is the x with
    [w] + G^n x == g, or a sink when none exists.  Accept at x == 0.  Distinct
    remaining values are distinguishable, so the result is already minimal.
    """
    g = as_vec(g)
    if len(g) != ss.dim:
        raise InputError("dimension mismatch")
    zero = zero_vec(ss.dim)

    def step(key, sym):
        if key is None:
            return None
        return ss.eff.inverse_apply(vsub(key, sym))

    return dfa_from_kernel(
        ss.digits, 1, g, step, lambda k: k == zero,
        tag_fn=lambda k: "∅" if k is None else _point_str(k))


def coset_kernel_dfa(ss: SpanningSet, stable: Lattice,
                     state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for a lattice N with G^{-1} N == N.

    After reading w the state is { x : [w] + G^n x in N } — always a single
    coset of N (or empty when N has lower rank), tracked by its canonical
    representative.
    """
    d = ss.dim
    zero = zero_vec(d)
    cols = tuple(zip(*ss.eff.rows))
    basis = stable.rows

    def solve_coset(target: Vec):
        mat = tuple(tuple(col[i] for col in cols) + tuple(b[i] for b in basis)
                    for i in range(d))
        sol = solve_columns(mat, target)
        if sol is None:
            return None
        return stable.coset_reduce(sol[:d])

    def step(key, sym):
        if key is None:
            return None
        return solve_coset(vsub(key, sym))

    return minimize(dfa_from_kernel(
        ss.digits, 1, stable.coset_reduce(zero), step,
        lambda k: k is not None and k == stable.coset_reduce(zero),
        state_cap))


def translate_dfa(ss: SpanningSet, dfa: Dfa, g,
                  state_cap: int = 200_000) -> Dfa:
    """Saturated DFA for S + g from a saturated DFA for S.

    Deterministic borrow construction: while reading an expansion of x it
    feeds the source machine an expansion of x - g, carrying the bounded
    difference; the final borrow is resolved through a greedy expansion,
    which is sound because the source is saturated.
    """
    g = as_vec(g)
    if dfa.symbols != ss.digits:
        raise InputError("automaton alphabet does not match the spanning set")

    def step(key, sym):
        q, borrow = key
        c = vadd(borrow, sym)
        cands = ss.residue_digits.get(ss.image_lattice.coset_reduce(c))
        if cands is None:
            raise InconclusiveError(
                "digit set is not residue-complete; verify the spanning set")
        u = cands[0]
        nxt = ss.eff.inverse_apply(vsub(c, ss.digits[u]))
        return (dfa.transitions[q][u], nxt)

    def accept(key):
        q, borrow = key
        return dfa.run_from(q, expand_greedy(ss, borrow)) in dfa.accepting

    return minimize(dfa_from_kernel(
        ss.digits, 1, (dfa.initial, vneg(g)), step, accept, state_cap))


def image_dfa(ss: SpanningSet, dfa: Dfa, endo: Endomorphism,
              state_cap: int = 200_000) -> Dfa:
    """Saturated DFA for M(S) = { M s : s in S } from a saturated DFA for S.

    Subset construction over pairs (source state, carry) with the invariant
    [w] - M [u] = G^n carry for equal-length prefixes; a pair accepts when
    M^{-1} carry is integral and the source accepts its expansion from
    there.  Divisibility by M can recover later through powers of G, which
    is why carries are kept exact instead of being pruned digit-by-digit.
    """
    if endo.dim != ss.dim:
        raise InputError("dimension mismatch")
    if dfa.symbols != ss.digits:
        raise InputError("automaton alphabet does not match the spanning set")
    src = zero_pad_closure(dfa)
    q = endo.det()
    inv = mat_inverse_frac(endo.rows)
    adj = tuple(tuple(int(x * q) for x in row) for row in inv)
    images = [endo(a) for a in ss.digits]

    def pair_accepts(qs: int, carry: Vec) -> bool:
        back = tuple(sum(a * x for a, x in zip(row, carry)) for row in adj)
        if any(x % q for x in back):
            return False
        val = tuple(x // q for x in back)
        return src.run_from(qs, expand_greedy(ss, val)) in src.accepting

    def step(key, sym):
        out = set()
        for qs, carry in key:
            for ai in range(len(ss.digits)):
                nxt = ss.eff.inverse_apply(vsub(vadd(carry, sym), images[ai]))
                if nxt is not None:
                    out.add((src.transitions[qs][ai], nxt))
        return frozenset(out)

    def accept(key):
        return any(pair_accepts(qs, c) for qs, c in key)

    initial = frozenset([(src.initial, zero_vec(ss.dim))])
    return minimize(dfa_from_kernel(ss.digits, 1, initial, step, accept,
                                    state_cap))


def image_under_F(ss: SpanningSet, dfa: Dfa,
                  state_cap: int = 200_000) -> Dfa:
    return image_dfa(ss, dfa, ss.endo, state_cap)


def _coset_union_dfa(ss: SpanningSet, lat: Lattice, targets,
                     state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for the union of the cosets c + N, c in targets.

    After reading w the completion set splits along the targets: for each c
    it is empty or a single coset of N_n = G^{-n} N ∩ Z^d, and this preimage
    chain stabilizes after rho steps, so a (capped level, set of canonical
    representatives) pair is a sufficient state.
    """
    rho, _ = lat.saturate_under_preimage(ss.eff)
    chain = [lat]
    for _ in range(rho):
        chain.append(chain[-1].preimage_under(ss.eff))
    d = ss.dim
    zero = zero_vec(d)
    cols = tuple(zip(*ss.eff.rows))
    mats = [tuple(tuple(col[i] for col in cols) + tuple(b[i] for b in level.rows)
                  for i in range(d))
            for level in chain]
    cache: dict[tuple[int, Vec], Vec | None] = {}

    def advance(k: int, target: Vec):
        key = (k, target)
        if key not in cache:
            sol = solve_columns(mats[k], target)
            cache[key] = None if sol is None else \
                chain[min(k + 1, rho)].coset_reduce(sol[:d])
        return cache[key]

    def step(key, sym):
        k, cs = key
        out = set()
        for c in cs:
            nc = advance(k, vsub(c, sym))
            if nc is not None:
                out.add(nc)
        return (min(k + 1, rho), frozenset(out))

    def accept(key):
        return zero in key[1]

    init = (0, frozenset(lat.coset_reduce(as_vec(c)) for c in targets))
    return minimize(dfa_from_kernel(ss.digits, 1, init, step, accept,
                                    state_cap))


def subgroup_dfa(ss: SpanningSet, lat: Lattice,
                 state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for an F-invariant subgroup N.

    Single-target instance of the coset-union kernel: after reading w the
    completion set { x : [w] + G^n x in N } is empty or one coset of
    N_n = G^{-n} N ∩ Z^d.  Same coset tracker as ``coset_kernel_dfa``, with
    the modulus following the preimage chain instead of assuming
    G^{-1} N == N.
    """
    if lat.dim != ss.dim:
        raise InputError("dimension mismatch")
    for row in lat.rows:
        if ss.endo(row) not in lat:
            raise InputError("subgroup is not invariant under the endomorphism")
    return _coset_union_dfa(ss, lat, [zero_vec(ss.dim)], state_cap)


def _quotient_cosets_hit(ss: SpanningSet, dfa: Dfa, lat: Lattice) -> set[Vec]:
    """Canonical representatives mod a full-rank N of the values of a
    saturated digit automaton.

    Walks the product of the automaton with the quotient Z^d / N, tracking
    the partial value's coset and the class of G^k on the quotient (the
    power trajectory is eventually periodic, so both are finite).
    """
    d = ss.dim
    reduce_ = lat.coset_reduce
    reps = [reduce_(r) for r in Lattice.full(d).quotient_reps(lat)]
    rep_id = {r: i for i, r in enumerate(reps)}
    add = [[rep_id[reduce_(vadd(a, b))] for b in reps] for a in reps]

    basis = tuple(tuple(1 if j == i else 0 for j in range(d)) for i in range(d))
    digit_rid: list[list[int]] = []   # per power class, per digit
    succ: list[int] = []
    map_ids: dict[tuple[Vec, ...], int] = {}
    imgs = tuple(reduce_(e) for e in basis)
    while imgs not in map_ids:
        map_ids[imgs] = len(digit_rid)
        digit_rid.append(
            [rep_id[reduce_(tuple(sum(dg[j] * imgs[j][i] for j in range(d))
                                  for i in range(d)))]
             for dg in ss.digits])
        imgs = tuple(reduce_(ss.eff(v)) for v in imgs)
    for mid in range(len(digit_rid)):
        succ.append(mid + 1 if mid + 1 < len(digit_rid) else map_ids[imgs])

    dz = zero_pad_closure(dfa)
    zero_rid = rep_id[reduce_(zero_vec(d))]
    start = (dz.initial, zero_rid, 0)
    seen = {start}
    stack = [start]
    hit: set[int] = set()
    while stack:
        q, rid, mid = stack.pop()
        if q in dz.accepting:
            hit.add(rid)
        row = dz.transitions[q]
        drow = digit_rid[mid]
        arow = add[rid]
        m2 = succ[mid]
        for a in range(len(ss.digits)):
            key = (row[a], arow[drow[a]], m2)
            if key not in seen:
                seen.add(key)
                stack.append(key)
    return {reps[i] for i in hit}


def _subgroup_sum_dfa(ss: SpanningSet, dfa: Dfa, lat: Lattice,
                      state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for S + N when N has full rank.

    v lies in S + N exactly when its coset mod N is one of the finitely
    many cosets met by S, so the sum collapses to a coset-union kernel —
    no digit-pair product is needed.
    """
    for row in lat.rows:
        if ss.endo(row) not in lat:
            raise InputError("subgroup is not invariant under the endomorphism")
    targets = sorted(_quotient_cosets_hit(ss, dfa, lat))
    return _coset_union_dfa(ss, lat, targets, state_cap)


# ---------------------------------------------------------------------------
# cycles

def cycle_to_power(endo: Endomorphism, cycle: Cycle, s: int):
    """Re-index a cycle to the step s * cycle.step.

    Returns the s pieces (t_m, inner_m) with

        C(g; e) = union over m < s of { t_m } ∪ ( t_m + C(inner_m; s e) ),

    where t_m is the (m+1)-term partial sum and
    inner_m = F^{(m+1) e} (g + F^e g + ... + F^{(s-1) e} g).
    """
    if s < 1:
        raise InputError("s must be >= 1")
    fe = endo.power(cycle.step)
    geom = cycle.point
    term = cycle.point
    for _ in range(s - 1):
        term = fe(term)
        geom = vadd(geom, term)
    out = []
    acc = cycle.point
    pw_term = cycle.point
    inner = geom
    for _ in range(s):
        inner = fe(inner)
        out.append((acc, Cycle(inner, s * cycle.step)))
        pw_term = fe(pw_term)
        acc = vadd(acc, pw_term)
    return out


def _literal_cycle_dfa(ss: SpanningSet, digit_point: Vec, period: int) -> Dfa:
    """DFA for the literal pattern g (0^{period-1} g)* over the digits."""
    gi = ss.digit_index[digit_point]
    n_sym = len(ss.digits)
    dead = period + 1
    rows = [tuple(1 if s == gi else dead for s in range(n_sym))]
    for pos in range(1, period + 1):
        row = [dead] * n_sym
        if pos < period:
            row[0] = pos + 1
        else:
            row[gi] = 1
        rows.append(tuple(row))
    rows.append((dead,) * n_sym)
    return Dfa(ss.digits, 1, 0, frozenset([1]), tuple(rows))


def _cycle_continuation_dfa(ss: SpanningSet, point: Vec, period: int,
                            state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for the partial sums of sum_i G^{i*period} point, for a
    point that need not be a digit.

    States are continuation descriptors.  After reading a word of length n
    and value x the continuation set {y : x + G^n y in C} is a finite set of
    strays plus at most one tail v + G^j ({0} u C): dividing through by G
    maps a tail to a tail (phase j counts down, reinjecting the point every
    `period` steps) and peels off at most one stray, while strays shrink
    into the digit ball or die on divisibility.  Everything lives in balls
    fixed by the digit radius and the point, so the walk closes without ever
    touching an enlarged alphabet.
    """
    G = ss.eff
    zero = zero_vec(ss.dim)
    full_cycle = Cycle(point, period * ss.power)

    def in_tail_set(t: Vec) -> bool:
        # membership in {0} u C, scanned exactly inside the ball of t
        if t == zero:
            return True
        return t in cycle_partials_within(ss.endo, full_cycle, supnorm(t))

    def step(key, sym):
        ex, v, j = key
        nex = set()
        for e in ex:
            e2 = G.inverse_apply(vsub(e, sym))
            if e2 is not None:
                nex.add(e2)
        nv, nj = None, 0
        if v is not None:
            if j > 0:
                v2 = G.inverse_apply(vsub(v, sym))
                if v2 is not None:
                    nv, nj = v2, j - 1
            else:
                # v + D = {v} u ((v + point) + G^period D)
                e2 = G.inverse_apply(vsub(v, sym))
                if e2 is not None:
                    nex.add(e2)
                u = G.inverse_apply(vsub(vadd(v, point), sym))
                if u is not None:
                    nv, nj = u, period - 1
        return (frozenset(nex), nv, nj)

    def accept(key):
        ex, v, j = key
        if zero in ex:
            return True
        if v is None:
            return False
        t = vneg(v)
        for _ in range(j):
            t = G.inverse_apply(t)
            if t is None:
                return False
        return in_tail_set(t)

    init = (frozenset(), point, period)
    return minimize(dfa_from_kernel(ss.digits, 1, init, step, accept,
                                    state_cap))


def cycle_dfa(ss: SpanningSet, cycle: Cycle,
              state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Saturated DFA for C(point; step) w.r.t. the base map of the digits."""
    if len(cycle.point) != ss.dim:
        raise InputError("dimension mismatch")
    cycle_base_point(ss.endo, cycle)  # raises when F^step has eigenvalue 1
    if cycle.point == zero_vec(ss.dim):
        return singleton_dfa(ss, cycle.point)
    r = ss.power
    if cycle.step % r == 0:
        period = cycle.step // r
        if cycle.point in ss.digit_index:
            return saturate(ss, _literal_cycle_dfa(ss, cycle.point, period),
                            state_cap)
        return _cycle_continuation_dfa(ss, cycle.point, period, state_cap)
    s = r // math.gcd(cycle.step, r)
    out = None
    for t_m, inner in cycle_to_power(ss.endo, cycle, s):
        piece = union(singleton_dfa(ss, t_m),
                      translate_dfa(ss, cycle_dfa(ss, inner, state_cap), t_m))
        out = piece if out is None else union(out, piece)
    return minimize(out)


# ---------------------------------------------------------------------------
# compilation

def compile_term(ss: SpanningSet, term: SetTerm,
                 state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    comps = [cycle_dfa(ss, c, state_cap) for c in term.cycles]
    have_sub = term.subgroup is not None and not term.subgroup.is_trivial()
    if not comps:
        out = subgroup_dfa(ss, term.subgroup, state_cap) if have_sub \
            else singleton_dfa(ss, term.base)
    else:
        out = comps[0]
        for d in comps[1:]:
            out = sum_automaton(ss, out, d, state_cap)
        if have_sub:
            if term.subgroup.rank == ss.dim:
                out = _subgroup_sum_dfa(ss, out, term.subgroup, state_cap)
            else:
                out = sum_automaton(
                    ss, out, subgroup_dfa(ss, term.subgroup, state_cap),
                    state_cap)
    if supnorm(term.base):
        out = translate_dfa(ss, out, term.base)
    return out


def compile_expr(ss: SpanningSet, expr: SetExpr,
                 state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    if expr.dim != ss.dim:
        raise InputError("dimension mismatch")
    out = None
    for t in expr.terms:
        d = compile_term(ss, t, state_cap)
        out = d if out is None else union(out, d)
    return minimize(out)


def compile_fset(endo: Endomorphism, expr: SetExpr,
                 state_cap: int = DEFAULT_STATE_CAP) -> tuple[SpanningSet, Dfa]:
    """Compile an expression over the working spanning set of the map."""
    ss = working_spanning(endo)
    return ss, compile_expr(ss, expr, state_cap)


# ---------------------------------------------------------------------------
# base-p^delta orbit sums in Z

@dataclass(frozen=True)
class PNormalSet:
    """{ (c0 + sum_i p^{delta * l_i} c_i) / (p^delta - 1) : l_i >= 0 }.

    Well-formed only when p^delta - 1 divides c0 + c1 + ... + cd; every
    element is then an integer.
    """
    p: int
    delta: int
    c0: int
    cs: tuple[int, ...]

    def __post_init__(self):
        if self.p < 2 or self.delta < 1:
            raise InputError("need p >= 2 and delta >= 1")
        if (self.c0 + sum(self.cs)) % self.unit:
            raise InputError(
                f"{self.p}^{self.delta} - 1 must divide c0 + sum(cs)")

    @property
    def unit(self) -> int:
        return self.p ** self.delta - 1

    def values(self, level_cap: int) -> set[int]:
        base = self.p ** self.delta
        out = set()
        for ls in itertools.product(range(level_cap + 1), repeat=len(self.cs)):
            num = self.c0 + sum(base ** l * c for l, c in zip(ls, self.cs))
            out.add(num // self.unit)
        return out

    def values_within(self, radius: int, level_cap: int = 40) -> set[int]:
        return {v for v in self.values(level_cap) if abs(v) <= radius}

    def to_json_obj(self):
        return {"p": self.p, "delta": self.delta, "c0": self.c0,
                "cs": list(self.cs)}


@dataclass(frozen=True)
class PNormalForm:
    """Union of p-normal sets, plus full cosets r + mZ contributed by terms
    with a nontrivial subgroup."""
    sets: tuple[PNormalSet, ...]
    cosets: tuple[tuple[int, int], ...]

    def to_json_obj(self):
        return {"sets": [s.to_json_obj() for s in self.sets],
                "cosets": [{"residue": r, "modulus": m} for r, m in self.cosets]}

    def values_within(self, radius: int, level_cap: int = 40) -> set[int]:
        out = set()
        for s in self.sets:
            out |= {v for v in s.values(level_cap) if abs(v) <= radius}
        for r, m in self.cosets:
            lo = -((radius + r) // m)
            hi = (radius - r) // m
            out |= {r + k * m for k in range(lo, hi + 1)}
        return out


def _flatten_to_step(endo: Endomorphism, base: Vec, cycles, step: int):
    """Split a term into translate + same-step cycles via cycle_to_power.

    Returns (translate, points) pairs whose union over all pairs of
    translate + sum of C(point; step) equals base + sum of the given cycles.
    """
    options = []
    for c in cycles:
        if c.step == step:
            options.append([(zero_vec(endo.dim), c.point)])
        else:
            opts = []
            for t_m, inner in cycle_to_power(endo, c, step // c.step):
                opts.append((t_m, None))
                opts.append((t_m, inner.point))
            options.append(opts)
    flats = []
    for combo in itertools.product(*options):
        t = base
        gs = []
        for t_m, g in combo:
            t = vadd(t, t_m)
            if g is not None:
                gs.append(g)
        flats.append((t, tuple(gs)))
    return flats


def _cycle_residues_mod(p: int, delta: int, g: int, mod: int) -> set[int]:
    """Residues mod `mod` of the partial sums of C(g; delta) over F = p."""
    step_mult = pow(p, delta, mod)
    s = g % mod
    m = step_mult
    seen = set()
    residues = set()
    while (s, m) not in seen:
        seen.add((s, m))
        residues.add(s)
        s = (s + m * g) % mod
        m = (m * step_mult) % mod
    return residues


def to_pnormal(endo: Endomorphism, expr: SetExpr) -> PNormalForm:
    """Rewrite an expression over Z as a union of p-normal sets.

    Terms without a subgroup become p-normal sets with the step equalized to
    the lcm of their cycle steps:

        k0 + C(k1; e) + ... + C(kd; e)
            =  S(k0 (p^e - 1) - sum k_i ;  p^e k_1, ..., p^e k_d).

    Terms with a nontrivial subgroup hZ are finite unions of cosets of hZ
    and are returned as such.
    """
    if endo.dim != 1 or not endo.is_scalar():
        raise InputError("p-normal form is defined over Z with a scalar map")
    p = endo.scalar_value()
    if p < 2:
        raise InputError("the scalar must be at least 2")
    sets = []
    cosets = set()
    for term in expr.terms:
        cycles = [c for c in term.cycles if c.point != (0,)]
        if term.subgroup is not None and not term.subgroup.is_trivial():
            h = term.subgroup.rows[0][0]
            residues = {term.base[0] % h}
            for c in cycles:
                cyc = _cycle_residues_mod(p, c.step, c.point[0], h)
                residues = {(a + b) % h for a in residues for b in cyc}
            cosets |= {(r, h) for r in residues}
        else:
            step = math.lcm(*(c.step for c in cycles)) if cycles else 1
            unit = p ** step - 1
            for t, gs in _flatten_to_step(endo, term.base, cycles, step):
                sets.append(PNormalSet(
                    p, step, t[0] * unit - sum(g[0] for g in gs),
                    tuple(p ** step * g[0] for g in gs)))
    return PNormalForm(tuple(sets), tuple(sorted(cosets)))


def from_pnormal(endo: Endomorphism, pn: PNormalSet) -> SetExpr:
    """Expand a p-normal set back into the cycle calculus.

    With z = (c0 + sum cs) / (p^delta - 1), the set is the union over index
    subsets A of  z + sum_{i in A} C(c_i; delta).
    """
    if endo.dim != 1 or not endo.is_scalar() or endo.scalar_value() != pn.p:
        raise InputError("the endomorphism must be multiplication by p")
    z = (pn.c0 + sum(pn.cs)) // pn.unit
    terms = []
    for size in range(len(pn.cs) + 1):
        for subset in itertools.combinations(range(len(pn.cs)), size):
            terms.append(SetTerm(
                (z,), tuple(Cycle((pn.cs[i],), pn.delta) for i in subset)))
    return SetExpr(1, tuple(terms))


# ---------------------------------------------------------------------------
# sorted-block normal form

@dataclass(frozen=True)
class NormalComponent:
    translate: Vec
    spanning: SpanningSet
    language: Dfa
    subgroup: Lattice


@dataclass(frozen=True)
class NormalForm:
    endo: Endomorphism
    adjust_add: tuple[Vec, ...]
    adjust_remove: tuple[Vec, ...]
    components: tuple[NormalComponent, ...]

    def to_json_obj(self):
        return {
            "adjustAdd": [list(v) for v in self.adjust_add],
            "adjustRemove": [list(v) for v in self.adjust_remove],
            "components": [
                {"gamma": list(c.translate),
                 "sparseDfa": c.language.to_json_obj(),
                 "subgroup": [list(r) for r in c.subgroup.rows]}
                for c in self.components],
        }

    def values_within(self, radius: int, max_len: int) -> set[Vec]:
        out: set[Vec] = set()
        for comp in self.components:
            vals = {vadd(comp.translate, v)
                    for v in enumerate_values(comp.spanning, comp.language,
                                              max_len)}
            if not comp.subgroup.is_trivial():
                reach = radius + max((supnorm(v) for v in vals), default=0)
                pts = _lattice_points_within(comp.subgroup, reach)
                vals = {vadd(v, h) for v in vals for h in pts}
            out |= {v for v in vals if supnorm(v) <= radius}
        return out


def _block_language_dfa(ss: SpanningSet, blocks) -> Dfa:
    """DFA for t1 t1* t2* ... td* over the digits (ti = blocks[i-1]).

    On duplicated digit values the automaton stays in the earliest feasible
    block, whose continuation set is the largest, so the recognized language
    matches the pattern exactly.
    """
    idx = [ss.digit_index[b] for b in blocks]
    n_sym = len(ss.digits)
    d = len(blocks)
    dead = d + 1
    row0 = [dead] * n_sym
    row0[idx[0]] = 1
    trans = [tuple(row0)]
    for k in range(1, d + 1):
        row = [dead] * n_sym
        for j in range(d, k - 1, -1):
            row[idx[j - 1]] = j
        trans.append(tuple(row))
    trans.append((dead,) * n_sym)
    return Dfa(ss.digits, 1, 0, frozenset(range(1, d + 1)), tuple(trans))


def normalize(endo: Endomorphism, expr: SetExpr,
              enlarge_cap: int = 12) -> NormalForm:
    """Rewrite an expression as an exact union of sorted-block components.

    Each term is flattened to a common cycle step; in the region where the
    cycle lengths are ordered by a fixed permutation, the digits of an
    element are suffix sums of the cycle points, so the component language
    is the block pattern t1 t1* t2* ... td* over a large-enough digit set.
    The construction is exact — both adjustment lists are empty.
    """
    base_ss = find_spanning(endo)
    r = base_ss.power
    comps: list[NormalComponent] = []
    seen = set()
    for term in expr.terms:
        cycles = [c for c in term.cycles if c.point != zero_vec(endo.dim)]
        for c in cycles:
            cycle_base_point(endo, c)  # eigenvalue-1 precondition
        sub = term.subgroup if term.subgroup is not None else Lattice.zero(endo.dim)
        steps = [c.step for c in cycles]
        step_star = math.lcm(r, *steps) if steps else r
        ss_star = sigma_power(base_ss, step_star // r) if step_star > r else base_ss
        for t, gs in _flatten_to_step(endo, term.base, cycles, step_star):
            if not gs:
                key = (t, sub.rows, None)
                if key not in seen:
                    seen.add(key)
                    comps.append(NormalComponent(
                        t, ss_star, word_dfa(ss_star.digits, ()), sub))
                continue
            for perm in itertools.permutations(range(len(gs))):
                blocks = []
                for k in range(len(gs)):
                    suf = zero_vec(endo.dim)
                    for j in range(k, len(gs)):
                        suf = vadd(suf, gs[perm[j]])
                    blocks.append(suf)
                key = (t, sub.rows, tuple(blocks))
                if key in seen:
                    continue
                seen.add(key)
                ss_big = ss_star
                grow = 1
                while not all(b in ss_big.digit_index for b in blocks):
                    grow += 1
                    if grow > enlarge_cap:
                        raise InconclusiveError(
                            "block digits outgrew the enlargement budget")
                    ss_big = enlarge_digits(ss_star, grow)
                comps.append(NormalComponent(
                    t, ss_big, _block_language_dfa(ss_big, blocks), sub))
    return NormalForm(endo, (), (), tuple(comps))
