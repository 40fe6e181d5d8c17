"""Digit systems ("spanning sets") for an expanding endomorphism of Z^d.

A spanning set for G = F^r is a finite symmetric set of digits containing 0
such that every element of Z^d has a radix expansion x = x0 + G x1 + ... +
G^m xm with digits xi, and such that digit sums carry well:

  (i)   0 is a digit and the digit set is symmetric;
  (ii)  if a digit is G times a lattice point, that point is a digit;
  (iii) every point of Z^d has an expansion;
  (iv)  every sum of five digits equals t + G t' for digits t, t';
  (v)   every sum of three digits lying in G(Z^d) equals G t for a digit t.

Axioms (iv) and (v) are what make word-level addition and division by G
possible with one digit of carry; both are implemented here.  Verification
of (iii) is split into a necessary residue-completeness check (complete
residues mod G(Z^d) or else a definite failure) and a certifying fixpoint
computation on a descent box whose radius comes from the expansion factor
of G; when the factor is <= 1 or the box is too large the check reports
"inconclusive" rather than guessing.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .errors import InconclusiveError, InputError
from .groups import (
    Endomorphism,
    Lattice,
    Vec,
    as_vec,
    box_points,
    supnorm,
    vadd,
    vneg,
    vsub,
    zero_vec,
)

Word = tuple[int, ...]  # digit indices, least significant first


def _canonical_digit_order(digits) -> tuple[Vec, ...]:
    uniq = sorted(set(digits))
    z = zero_vec(len(uniq[0]))
    if z not in uniq:
        raise InputError("digit set must contain the zero vector")
    uniq.remove(z)
    return (z, *uniq)


@dataclass(frozen=True)
class SpanningSet:
    """A digit set for G = endo^power, digits[0] always the zero vector."""

    endo: Endomorphism
    power: int
    digits: tuple[Vec, ...]

    @staticmethod
    def make(endo: Endomorphism, power: int, digits) -> "SpanningSet":
        if power < 1:
            raise InputError("power must be >= 1")
        digits = tuple(as_vec(d) for d in digits)
        if any(len(d) != endo.dim for d in digits):
            raise InputError("digit dimension does not match the endomorphism")
        return SpanningSet(endo, power, _canonical_digit_order(digits))

    # -- basic views --------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.endo.dim

    @cached_property
    def eff(self) -> Endomorphism:
        """The endomorphism the digits expand: G = endo^power."""
        return self.endo.power(self.power)

    @cached_property
    def digit_index(self) -> dict[Vec, int]:
        return {d: i for i, d in enumerate(self.digits)}

    @cached_property
    def radius(self) -> int:
        return max(supnorm(d) for d in self.digits)

    @cached_property
    def image_lattice(self) -> Lattice:
        return self.eff.image_lattice()

    @cached_property
    def digit_div(self) -> tuple[int | None, ...]:
        """Per digit: the index of its exact quotient by G, if that is a digit."""
        out = []
        for d in self.digits:
            x = self.eff.inverse_apply(d)
            out.append(self.digit_index.get(x) if x is not None else None)
        return tuple(out)

    @cached_property
    def residue_digits(self) -> dict[Vec, list[int]]:
        """Canonical residue mod G(Z^d) -> digit indices, nearest digits first."""
        table: dict[Vec, list[int]] = {}
        order = sorted(range(len(self.digits)),
                       key=lambda i: (supnorm(self.digits[i]), self.digits[i]))
        for i in order:
            r = self.image_lattice.coset_reduce(self.digits[i])
            table.setdefault(r, []).append(i)
        return table

    def __len__(self) -> int:
        return len(self.digits)

    def __contains__(self, v) -> bool:
        return tuple(v) in self.digit_index

    # -- sumsets and carry tables -------------------------------------------

    @cached_property
    def _g_digit(self) -> tuple[Vec, ...]:
        return tuple(self.eff(d) for d in self.digits)

    @cached_property
    def sums3(self) -> frozenset[Vec]:
        s2 = {vadd(a, b) for a in self.digits for b in self.digits}
        return frozenset(vadd(s, c) for s in s2 for c in self.digits)

    @cached_property
    def sums5(self) -> frozenset[Vec]:
        s2 = {vadd(a, b) for a in self.digits for b in self.digits}
        return frozenset(vadd(s, c) for s in self.sums3 for c in s2)

    @cached_property
    def carry_table(self) -> dict[Vec, tuple[int, int]]:
        """sum of <= 5 digits -> (t, t') with sum == t + G t'.

        The witness minimises (t', t) in canonical digit order, which keeps
        carries as small as possible and makes every construction downstream
        deterministic.
        """
        table: dict[Vec, tuple[int, int]] = {}
        missing = set(self.sums5)
        for j, gd in enumerate(self._g_digit):
            if not missing:
                break
            for s in list(missing):
                t = vsub(s, gd)
                i = self.digit_index.get(t)
                if i is not None:
                    table[s] = (i, j)
                    missing.discard(s)
        return table

    @cached_property
    def divide_table(self) -> dict[Vec, int]:
        """sum of <= 3 digits lying in G(Z^d) -> digit index t with G t == sum."""
        table: dict[Vec, int] = {}
        for s in self.sums3:
            x = self.eff.inverse_apply(s)
            if x is not None:
                i = self.digit_index.get(x)
                if i is not None:
                    table[s] = i
        return table

    # -- serialisation -------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {"r": self.power, "digits": [list(d) for d in self.digits]}

    @staticmethod
    def from_json_obj(endo: Endomorphism, obj) -> "SpanningSet":
        try:
            return SpanningSet.make(endo, int(obj["r"]), obj["digits"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad spanning-set object: {exc}") from exc

    def __repr__(self) -> str:
        return (f"SpanningSet(power={self.power}, "
                f"{len(self.digits)} digits, radius {self.radius})")


@dataclass(frozen=True)
class HeightParams:
    """Descent data for expansion certification: the exact expansion factor of
    G and the radius of the box on which expressibility was established."""

    expansion: Fraction
    box_radius: int | None


@dataclass
class AxiomCheck:
    status: str  # "pass" | "certified" | "fail" | "inconclusive"
    witness: object = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "certified")


@dataclass
class AxiomReport:
    checks: dict[str, AxiomCheck]
    height: HeightParams | None = None
    cert_digits: dict[Vec, int] = field(default_factory=dict, repr=False)

    def all_pass(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.ok]

    def to_json_obj(self) -> dict:
        out = {}
        for key, c in self.checks.items():
            entry = {"status": c.status}
            if c.witness is not None:
                entry["witness"] = _jsonable(c.witness)
            if c.note:
                entry["note"] = c.note
            out[key] = entry
        if self.height is not None:
            out["height"] = {
                "expansion": [self.height.expansion.numerator,
                              self.height.expansion.denominator],
                "boxRadius": self.height.box_radius,
            }
        return out


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


# ---------------------------------------------------------------------------
# verification

def verify_spanning(ss: SpanningSet, box_point_cap: int = 300_000) -> AxiomReport:
    """Check all five digit-system axioms; see the module docstring.

    Statuses: (i), (ii), (iv), (v) are exact pass/fail; (iii) is "certified",
    "fail" (incomplete residues — a definite disproof) or "inconclusive".
    """
    checks: dict[str, AxiomCheck] = {}
    digitset = set(ss.digits)

    # (i): zero digit (guaranteed by construction) and symmetry
    missing = next((d for d in ss.digits if vneg(d) not in digitset), None)
    checks["i"] = AxiomCheck("pass") if missing is None else \
        AxiomCheck("fail", witness=missing, note="negation is not a digit")

    # (ii): G-divisible digits have digit quotients
    bad = None
    for d in ss.digits:
        x = ss.eff.inverse_apply(d)
        if x is not None and x not in digitset:
            bad = (d, x)
            break
    checks["ii"] = AxiomCheck("pass") if bad is None else \
        AxiomCheck("fail", witness=bad, note="digit / G is not a digit")

    # (iv): five digit sums carry
    miss4 = next((s for s in sorted(ss.sums5) if s not in ss.carry_table), None)
    checks["iv"] = AxiomCheck("pass") if miss4 is None else \
        AxiomCheck("fail", witness=miss4, note="five-digit sum has no t + G t' split")

    # (v): three digit sums in the image divide exactly
    miss5 = None
    for s in sorted(ss.sums3):
        if ss.eff.inverse_apply(s) is not None and s not in ss.divide_table:
            miss5 = s
            break
    checks["v"] = AxiomCheck("pass") if miss5 is None else \
        AxiomCheck("fail", witness=miss5, note="three-digit sum in G(Z^d) has no digit quotient")

    # (iii): residue completeness, then fixpoint certification on the descent box
    height = None
    cert_digits: dict[Vec, int] = {}
    residue_gap = None
    for rep in Lattice.full(ss.dim).quotient_reps(ss.image_lattice):
        if ss.image_lattice.coset_reduce(rep) not in ss.residue_digits:
            residue_gap = rep
            break
    if residue_gap is not None:
        checks["iii"] = AxiomCheck(
            "fail", witness=residue_gap,
            note="residue class mod G(Z^d) contains no digit; no expansion can start")
    else:
        c = ss.eff.expansion_factor()
        if c <= 1:
            checks["iii"] = AxiomCheck(
                "inconclusive", note=f"expansion factor {c} <= 1; no descent bound")
            height = HeightParams(c, None)
        else:
            b = int(Fraction(ss.radius) / (c - 1))
            height = HeightParams(c, b)
            if (2 * b + 1) ** ss.dim > box_point_cap:
                checks["iii"] = AxiomCheck(
                    "inconclusive",
                    note=f"descent box radius {b} exceeds the point cap")
            else:
                unmarked = _descent_mark(ss, b, cert_digits)
                if unmarked:
                    checks["iii"] = AxiomCheck(
                        "inconclusive", witness=sorted(unmarked)[:5],
                        note=f"{len(unmarked)} box points not reached by digit descent")
                else:
                    checks["iii"] = AxiomCheck("certified")
    return AxiomReport(checks, height, cert_digits)


def _descent_mark(ss: SpanningSet, radius: int, cert_digits: dict[Vec, int]) -> set[Vec]:
    """Fixpoint marking of expressible points on the sup-norm box.

    The box of radius N/(c-1) is closed under stripping one digit, so marking
    it completely certifies axiom (iii).  Records, per marked non-digit point,
    the digit whose removal leads to an already-marked point.
    """
    box = box_points(radius, ss.dim)
    marked = set()
    for x in box:
        if x == zero_vec(ss.dim) or x in ss.digit_index:
            marked.add(x)
    pending = [x for x in box if x not in marked]
    progress = True
    while pending and progress:
        progress = False
        still = []
        for x in pending:
            r = ss.image_lattice.coset_reduce(x)
            hit = None
            for i in ss.residue_digits.get(r, ()):
                y = ss.eff.inverse_apply(vsub(x, ss.digits[i]))
                assert y is not None
                if y in marked:
                    hit = i
                    break
            if hit is None:
                still.append(x)
            else:
                marked.add(x)
                cert_digits[x] = hit
                progress = True
        pending = still
    return set(pending)


# ---------------------------------------------------------------------------
# construction and search

def ball_spanning(endo: Endomorphism, power: int, radius: int) -> SpanningSet:
    """The sup-norm ball of the given radius as an (unverified) digit set."""
    return SpanningSet.make(endo, power, box_points(radius, endo.dim))


def default_spanning(k: int, dim: int = 1) -> SpanningSet:
    """The classical digit set {-(k-1), ..., k-1}^dim for multiplication by k.

    Only k >= 4 carries; smaller k raises, and callers should then search for
    a power of the map instead (see find_spanning).
    """
    if k < 4:
        raise InputError(
            f"the ball digit set only satisfies the carry axioms for k >= 4 (got {k})")
    ss = ball_spanning(Endomorphism.scalar(k, dim), 1, k - 1)
    report = verify_spanning(ss)
    if not report.all_pass():
        raise InconclusiveError(f"default digit set failed axioms {report.failures()}")
    object.__setattr__(ss, "report", report)
    return ss


def _corner_carry_ok(ss: SpanningSet) -> bool:
    """Cheap necessary test of axiom (iv) on extreme five-digit sums."""
    n = ss.radius
    for signs in itertools.product((-5 * n, 5 * n), repeat=ss.dim):
        target = as_vec(signs)
        if not any(ss.digit_index.get(vsub(target, gd)) is not None
                   for gd in ss._g_digit):
            return False
    return True


def find_spanning(endo: Endomorphism,
                  max_power: int = 8,
                  max_radius: int = 24,
                  box_point_cap: int = 300_000,
                  classical_first: bool = True) -> SpanningSet:
    """Search for a verified digit set for some power of the endomorphism.

    Powers are tried in increasing order.  When F^r is scalar multiplication
    by k with |k| >= 4 the classical ball of radius |k| - 1 is tried first
    (it always verifies); pass classical_first=False to skip that shortcut
    and take the smallest ball that verifies instead.  Otherwise sup-norm
    balls of increasing radius are tried, starting from the smallest radius
    that can cover all residues.  Raises InconclusiveError when the budget
    is exhausted.
    """
    d = endo.dim
    for r in range(1, max_power + 1):
        g = endo.power(r)
        if g.expansion_factor() <= 1:
            continue
        if classical_first and g.is_scalar() and abs(g.scalar_value()) >= 4:
            ss = ball_spanning(endo, r, abs(g.scalar_value()) - 1)
            report = verify_spanning(ss, box_point_cap)
            if report.all_pass():
                object.__setattr__(ss, "report", report)
                return ss
        det = abs(g.det())
        n0 = 1
        while (2 * n0 + 1) ** d < det:
            n0 += 1
        for n in range(n0, max_radius + 1):
            ss = ball_spanning(endo, r, n)
            if not _corner_carry_ok(ss):
                continue
            report = verify_spanning(ss, box_point_cap)
            if report.all_pass():
                object.__setattr__(ss, "report", report)
                return ss
    raise InconclusiveError(
        f"no verified digit set found with power <= {max_power}, radius <= {max_radius}")


def attached_report(ss: SpanningSet) -> AxiomReport:
    """The verification report riding on ss, computing (and caching) it if absent."""
    report = getattr(ss, "report", None)
    if report is None:
        report = verify_spanning(ss)
        object.__setattr__(ss, "report", report)
    return report


# ---------------------------------------------------------------------------
# derived digit sets

def _word_values(ss: SpanningSet, length: int, cap: int = 2_000_000) -> set[Vec]:
    values = {zero_vec(ss.dim)}
    for _ in range(length):
        nxt = set()
        for v in values:
            gv = ss.eff(v)
            for d in ss.digits:
                nxt.add(vadd(d, gv))
                if len(nxt) > cap:
                    raise InconclusiveError("digit power set grew past the cap")
        values = nxt
    return values


def sigma_power(ss: SpanningSet, m: int) -> SpanningSet:
    """Digit set of all length-m values, spanning for G^m (power multiplies)."""
    if m < 1:
        raise InputError("m must be >= 1")
    return SpanningSet.make(ss.endo, ss.power * m, _word_values(ss, m))


def enlarge_digits(ss: SpanningSet, m: int) -> SpanningSet:
    """Enlarged digit set for the *same* G: all values of words of length <= m."""
    if m < 1:
        raise InputError("m must be >= 1")
    return SpanningSet.make(ss.endo, ss.power, _word_values(ss, m))


# ---------------------------------------------------------------------------
# words

def eval_expansion(ss: SpanningSet, word: Word) -> Vec:
    """Value of a least-significant-first digit word; the empty word is 0."""
    v = zero_vec(ss.dim)
    for idx in reversed(word):
        v = vadd(ss.eff(v), ss.digits[idx])
    return v


def word_digits(ss: SpanningSet, word: Word) -> tuple[Vec, ...]:
    return tuple(ss.digits[i] for i in word)


def word_from_digits(ss: SpanningSet, digits) -> Word:
    out = []
    for d in digits:
        i = ss.digit_index.get(as_vec(d))
        if i is None:
            raise InputError(f"{tuple(d)} is not a digit of this spanning set")
        out.append(i)
    return tuple(out)


def expand_greedy(ss: SpanningSet, x, max_len: int = 512) -> Word:
    """A radix expansion of x: empty for 0, (x,) when x is a digit, otherwise
    strip the nearest digit in x's residue class and recurse on the quotient.

    Inside the certified descent box the digits recorded during verification
    are followed, which guarantees termination for certified sets.
    """
    x = as_vec(x)
    if len(x) != ss.dim:
        raise InputError("dimension mismatch")
    report = attached_report(ss)
    box_radius = report.height.box_radius if report.height else None
    word = []
    seen = set()
    while True:
        if x == zero_vec(ss.dim):
            return tuple(word)
        i = ss.digit_index.get(x)
        if i is not None:
            word.append(i)
            return tuple(word)
        if x in seen:
            raise InconclusiveError(
                f"greedy expansion cycled at {x}; the digit set is not certified complete")
        seen.add(x)
        if (box_radius is not None and supnorm(x) <= box_radius
                and x in report.cert_digits):
            i = report.cert_digits[x]
        else:
            r = ss.image_lattice.coset_reduce(x)
            cands = ss.residue_digits.get(r)
            if not cands:
                raise InconclusiveError(
                    f"no digit in the residue class of {x}; expansion impossible")
            i = cands[0]
        word.append(i)
        x = ss.eff.inverse_apply(vsub(x, ss.digits[i]))
        if len(word) > max_len:
            raise InconclusiveError("expansion exceeded the length cap")


def _add_carry(ss: SpanningSet, words: list[Word]) -> Word:
    """Digitwise addition of up to four words with one digit of carry.

    Columns see at most four addend digits plus the running carry — five
    digits total, exactly what the carry table covers.
    """
    assert len(words) <= 4
    length = max((len(w) for w in words), default=0)
    if length == 0:
        return ()
    cols = []
    for pos in range(length):
        cols.append([w[pos] for w in words if pos < len(w)])
    out = []
    carry = 0  # digit index; 0 is the zero digit
    for col in cols:
        s = ss.digits[carry]
        for i in col:
            s = vadd(s, ss.digits[i])
        hit = ss.carry_table.get(s)
        if hit is None:
            raise InconclusiveError(
                f"carry table cannot split {s}; axiom (iv) fails for this digit set")
        t, carry = hit
        out.append(t)
    out.append(carry)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def add_words(ss: SpanningSet, w1: Word, w2: Word, w3: Word) -> Word:
    """A word whose value is the sum of the three input values.

    Output length is at most one more than the longest input (before
    trailing-zero trimming, which never empties a nonempty result).
    """
    return _add_carry(ss, [w1, w2, w3])


def divide_words(ss: SpanningSet, w1: Word, w2: Word, w3: Word) -> Word:
    """A word u with G(value of u) == sum of the three input values.

    The sum must lie in G(Z^d) — equivalently its low digit column must
    divide (axiom (v)); otherwise InputError is raised.
    """
    total = eval_expansion(ss, w1)
    total = vadd(total, eval_expansion(ss, w2))
    total = vadd(total, eval_expansion(ss, w3))
    if ss.eff.inverse_apply(total) is None:
        raise InputError(f"sum {total} is not divisible by the endomorphism")
    if not (w1 or w2 or w3):
        return ()
    low = ss.digits[0]
    for w in (w1, w2, w3):
        if w:
            low = vadd(low, ss.digits[w[0]])
    t0 = ss.divide_table.get(low)
    if t0 is None:
        raise InconclusiveError(
            f"divide table cannot split {low}; axiom (v) fails for this digit set")
    tails = [w[1:] for w in (w1, w2, w3)]
    return _add_carry(ss, [*tails, (t0,)])
