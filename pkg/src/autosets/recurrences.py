"""Zero sets of linear recurrences over function fields of characteristic p.

A sequence given in closed form a_n = sum_i b_i alpha_i^n, with b_i and
alpha_i drawn from the perfect closure of F_{p^s}(t), has a vanishing set
{ n >= 0 : a_n = 0 } recognized by a finite automaton reading base-p digits
least significant first.  The automaton is built by a kernel search whose
states are coefficient tuples (c_1..c_mu) standing for the sequence
n -> sum_i c_i alpha_i^n: reading digit j maps c_i to the p-th root of
c_i * alpha_i^j, and a state accepts when sum_i c_i = 0.

Raw coefficient tuples need not repeat, so states are identified when their
zero patterns agree on a sampled window of the original sequence; the
resulting automaton is validated against brute-force evaluation and a
per-state semantic check rather than taken on faith (see the tests).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .automata import Dfa, equivalent, minimize
from .errors import CapExceededError, InputError
from .sparse import SparseCertificate, certificate

__all__ = [
    "FiniteField", "FiniteFieldElem", "PerfectClosureElem", "pth_root",
    "ClosedFormSequence", "LinearRecurrence", "SequenceSpec", "eval_sequence",
    "zero_pattern", "zero_set_automaton", "zero_set_kernel",
    "zero_set_bidirectional", "analyze_zero_set", "Periodicity",
    "ZeroSetReport", "lsd_digits", "accepts_number", "digit_kernel",
]

ITERATION_BUDGET = 1 << 16


# ---------------------------------------------------------------------------
# the coefficient field F_{p^s}

class FiniteField:
    """F_{p^s} as F_p[w] modulo a fixed monic irreducible of degree s.

    The modulus is the lexicographically smallest monic irreducible, so two
    fields with the same (p, s) are interchangeable.
    """

    def __init__(self, p: int, s: int = 1):
        if p < 2 or any(p % d == 0 for d in range(2, p)):
            raise InputError("characteristic must be prime")
        if s < 1:
            raise InputError("extension degree must be positive")
        self.p = p
        self.s = s
        self.order = p ** s
        self.modulus = self._find_modulus()

    def _find_modulus(self) -> tuple[int, ...]:
        p, s = self.p, self.s
        if s == 1:
            return (0, 1)
        for tail in itertools.product(range(p), repeat=s):
            cand = tuple(tail) + (1,)
            if self._irreducible(cand):
                return cand
        raise AssertionError("no irreducible modulus found")

    def _irreducible(self, poly: tuple[int, ...]) -> bool:
        # trial division by all monic polynomials of degree <= s // 2
        p, s = self.p, len(poly) - 1
        for d in range(1, s // 2 + 1):
            for tail in itertools.product(range(p), repeat=d):
                div = tuple(tail) + (1,)
                if not any(self._polymod(poly, div)):
                    return False
        return True

    def _polymod(self, a, b):
        a = list(a)
        db, lead = len(b) - 1, b[-1]
        inv = pow(lead, -1, self.p)
        while len(a) - 1 >= db and any(a):
            while a and a[-1] == 0:
                a.pop()
            if len(a) - 1 < db:
                break
            factor = a[-1] * inv % self.p
            shift = len(a) - 1 - db
            for i, c in enumerate(b):
                a[shift + i] = (a[shift + i] - factor * c) % self.p
            while a and a[-1] == 0:
                a.pop()
        return tuple(a)

    # elements -------------------------------------------------------------
    def elem(self, coeffs) -> "FiniteFieldElem":
        if isinstance(coeffs, int):
            coeffs = (coeffs,)
        vec = [c % self.p for c in coeffs]
        if len(vec) > self.s:
            raise InputError("coefficient vector longer than extension degree")
        vec += [0] * (self.s - len(vec))
        return FiniteFieldElem(self, tuple(vec))

    def zero(self) -> "FiniteFieldElem":
        return self.elem(0)

    def one(self) -> "FiniteFieldElem":
        return self.elem(1)

    def generator(self) -> "FiniteFieldElem":
        return self.elem((0, 1)) if self.s > 1 else self.elem(1)

    def elements(self):
        for vec in itertools.product(range(self.p), repeat=self.s):
            yield FiniteFieldElem(self, vec)

    def __eq__(self, other):
        return (isinstance(other, FiniteField)
                and (self.p, self.s) == (other.p, other.s))

    def __hash__(self):
        return hash(("FiniteField", self.p, self.s))

    def __repr__(self):
        return f"FiniteField({self.p}, {self.s})"


@dataclass(frozen=True)
class FiniteFieldElem:
    field: FiniteField
    coeffs: tuple[int, ...]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, other):
        p = self.field.p
        return FiniteFieldElem(self.field, tuple(
            (a + b) % p for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        p = self.field.p
        return FiniteFieldElem(self.field, tuple(
            (a - b) % p for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        p = self.field.p
        return FiniteFieldElem(self.field, tuple(-a % p for a in self.coeffs))

    def __mul__(self, other):
        f = self.field
        p = f.p
        prod = [0] * (2 * f.s - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    prod[i + j] = (prod[i + j] + a * b) % p
        rem = f._polymod(tuple(prod), f.modulus)
        rem = (tuple(rem) + (0,) * f.s)[:f.s]
        return FiniteFieldElem(f, rem)

    def inverse(self) -> "FiniteFieldElem":
        if self.is_zero():
            raise InputError("division by zero in the coefficient field")
        return self ** (self.field.order - 2)

    def __pow__(self, n: int) -> "FiniteFieldElem":
        if n < 0:
            return self.inverse() ** (-n)
        out = self.field.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def p_root(self) -> "FiniteFieldElem":
        """The unique p-th root (the inverse of x -> x^p)."""
        return self ** (self.field.p ** (self.field.s - 1))

    def __repr__(self):
        return f"ff{self.coeffs}"


# ---------------------------------------------------------------------------
# polynomials over the coefficient field (low-degree-first tuples)

def _ptrim(poly):
    n = len(poly)
    while n and poly[n - 1].is_zero():
        n -= 1
    return tuple(poly[:n])


def _padd(a, b, field):
    out = []
    for i in range(max(len(a), len(b))):
        x = a[i] if i < len(a) else field.zero()
        y = b[i] if i < len(b) else field.zero()
        out.append(x + y)
    return _ptrim(out)


def _pmul(a, b, field):
    if not a or not b:
        return ()
    out = [field.zero()] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x.is_zero():
            for j, y in enumerate(b):
                out[i + j] = out[i + j] + x * y
    return _ptrim(out)


def _pscale(a, c):
    return _ptrim([x * c for x in a])


def _pdivmod(a, b, field):
    if not b:
        raise InputError("polynomial division by zero")
    a = list(a)
    q = [field.zero()] * max(len(a) - len(b) + 1, 0)
    inv = b[-1].inverse()
    while len(_ptrim(a)) >= len(b):
        a = list(_ptrim(a))
        shift = len(a) - len(b)
        factor = a[-1] * inv
        q[shift] = factor
        for i, c in enumerate(b):
            a[shift + i] = a[shift + i] - factor * c
    return _ptrim(q), _ptrim(a)


def _pgcd(a, b, field):
    a, b = _ptrim(a), _ptrim(b)
    while b:
        _, a = _pdivmod(a, b, field)
        a, b = b, a
    if a:
        a = _pscale(a, a[-1].inverse())  # monic
    return a


# ---------------------------------------------------------------------------
# the perfect closure of F_{p^s}(t)

class PerfectClosureElem:
    """A rational function of u = t^(1/p^level) over F_{p^s}, stored in
    lowest terms with monic denominator and the smallest possible level."""

    __slots__ = ("field", "level", "num", "den")

    def __init__(self, field: FiniteField, num, den=None, level: int = 0):
        if level < 0:
            raise InputError("level must be nonnegative")
        num = _ptrim(tuple(num))
        den = _ptrim(tuple(den)) if den is not None else (field.one(),)
        if not den:
            raise InputError("zero denominator")
        if not num:
            den = (field.one(),)
        else:
            g = _pgcd(num, den, field)
            if len(g) > 1:
                num, _ = _pdivmod(num, g, field)
                den, _ = _pdivmod(den, g, field)
            inv = den[-1].inverse()
            den = _pscale(den, inv)
            num = _pscale(num, inv)
        # drop the level while every exponent in sight is a multiple of p
        p = field.p
        while level > 0 and _compressible(num, p) and _compressible(den, p):
            num = _compress(num, p)
            den = _compress(den, p)
            level -= 1
        self.field = field
        self.level = level
        self.num = num
        self.den = den

    # --- construction helpers
    @staticmethod
    def constant(field: FiniteField, value: FiniteFieldElem) -> "PerfectClosureElem":
        return PerfectClosureElem(field, (value,))

    @staticmethod
    def t_power(field: FiniteField, k: int = 1) -> "PerfectClosureElem":
        return PerfectClosureElem(
            field, (field.zero(),) * k + (field.one(),))

    @staticmethod
    def from_int_polys(field: FiniteField, num, den=(1,), level: int = 0):
        """Convenience: coefficients given as ints (or int vectors)."""
        return PerfectClosureElem(
            field, tuple(field.elem(c) for c in num),
            tuple(field.elem(c) for c in den), level)

    # --- predicates and canonical identity
    def is_zero(self) -> bool:
        return not self.num

    def _key(self):
        return (self.level, self.num, self.den)

    def __eq__(self, other):
        return (isinstance(other, PerfectClosureElem)
                and self.field == other.field and self._key() == other._key())

    def __hash__(self):
        return hash(self._key())

    # --- arithmetic
    def _at_level(self, level: int):
        """num/den rewritten with u = t^(1/p^level); level >= self.level."""
        stretch = self.field.p ** (level - self.level)
        return _stretch(self.num, stretch, self.field), \
            _stretch(self.den, stretch, self.field)

    def __mul__(self, other):
        lv = max(self.level, other.level)
        n1, d1 = self._at_level(lv)
        n2, d2 = other._at_level(lv)
        return PerfectClosureElem(
            self.field, _pmul(n1, n2, self.field), _pmul(d1, d2, self.field), lv)

    def __add__(self, other):
        lv = max(self.level, other.level)
        n1, d1 = self._at_level(lv)
        n2, d2 = other._at_level(lv)
        num = _padd(_pmul(n1, d2, self.field), _pmul(n2, d1, self.field),
                    self.field)
        return PerfectClosureElem(
            self.field, num, _pmul(d1, d2, self.field), lv)

    def __sub__(self, other):
        return self + PerfectClosureElem(
            other.field, _pscale(other.num, -(other.field.one())),
            other.den, other.level)

    def inverse(self) -> "PerfectClosureElem":
        if self.is_zero():
            raise InputError("division by zero in the function field")
        return PerfectClosureElem(self.field, self.den, self.num, self.level)

    def __pow__(self, n: int) -> "PerfectClosureElem":
        if n < 0:
            return self.inverse() ** (-n)
        out = PerfectClosureElem.constant(self.field, self.field.one())
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def p_power(self) -> "PerfectClosureElem":
        """x -> x^p, dropping a level when one is available."""
        f = self.field
        num = tuple(c ** f.p for c in self.num)
        den = tuple(c ** f.p for c in self.den)
        if self.level > 0:
            return PerfectClosureElem(f, num, den, self.level - 1)
        return PerfectClosureElem(
            f, _stretch(num, f.p, f), _stretch(den, f.p, f), 0)

    def degree_hint(self) -> Fraction:
        """deg_t(num) - deg_t(den), as a rational (diagnostics only)."""
        scale = Fraction(1, self.field.p ** self.level)
        return (len(self.num) - len(self.den)) * scale

    # --- serialization
    def to_json_obj(self):
        return {"num": [list(c.coeffs) for c in self.num],
                "den": [list(c.coeffs) for c in self.den],
                "level": self.level}

    @staticmethod
    def from_json_obj(field: FiniteField, obj) -> "PerfectClosureElem":
        num = tuple(field.elem(tuple(c)) for c in obj["num"])
        den = tuple(field.elem(tuple(c)) for c in obj.get("den", [[1]]))
        return PerfectClosureElem(field, num, den, obj.get("level", 0))

    def __repr__(self):
        return (f"PerfectClosureElem(level={self.level}, "
                f"num={self.num}, den={self.den})")


def _compressible(poly, p: int) -> bool:
    return all(c.is_zero() for i, c in enumerate(poly) if i % p)


def _compress(poly, p: int):
    # u^(jp) at level e equals u^j at level e-1; coefficients are untouched
    return tuple(poly[::p])


def _stretch(poly, factor: int, field: FiniteField):
    if factor == 1 or not poly:
        return tuple(poly)
    out = [field.zero()] * ((len(poly) - 1) * factor + 1)
    for i, c in enumerate(poly):
        out[i * factor] = c
    return tuple(out)


def pth_root(x: PerfectClosureElem) -> PerfectClosureElem:
    """The unique y with y^p = x, one level up when x is not a p-th power."""
    f = x.field
    num = tuple(c.p_root() for c in x.num)
    den = tuple(c.p_root() for c in x.den)
    return PerfectClosureElem(f, num, den, x.level + 1)


# ---------------------------------------------------------------------------
# sequences

@dataclass(frozen=True)
class ClosedFormSequence:
    """a_n = sum_i b_i * alpha_i^n with nonzero coefficients and pairwise
    distinct nonzero bases."""
    field: FiniteField
    b: tuple[PerfectClosureElem, ...]
    alpha: tuple[PerfectClosureElem, ...]

    def __post_init__(self):
        if len(self.b) != len(self.alpha) or not self.b:
            raise InputError("need matching nonempty coefficient/base lists")
        if any(x.is_zero() for x in self.b):
            raise InputError("closed-form coefficients must be nonzero")
        if any(a.is_zero() for a in self.alpha):
            raise InputError("closed-form bases must be nonzero")
        if len(set(self.alpha)) != len(self.alpha):
            raise InputError("closed-form bases must be pairwise distinct")

    def term_count(self) -> int:
        return len(self.b)

    def inverted(self) -> "ClosedFormSequence":
        """The sequence m -> a_{-m} (bases inverted)."""
        return ClosedFormSequence(
            self.field, self.b, tuple(a.inverse() for a in self.alpha))

    def to_json_obj(self):
        return {"b": [x.to_json_obj() for x in self.b],
                "alpha": [x.to_json_obj() for x in self.alpha]}


@dataclass(frozen=True)
class LinearRecurrence:
    """a_{n+d} = c_{d-1} a_{n+d-1} + ... + c_0 a_n, with c_0 != 0 so the
    sequence extends to negative indices."""
    field: FiniteField
    c: tuple[PerfectClosureElem, ...]
    initial: tuple[PerfectClosureElem, ...]

    def __post_init__(self):
        if not self.c or len(self.c) != len(self.initial):
            raise InputError("need d coefficients and d initial values")
        if self.c[0].is_zero():
            raise InputError("lowest recurrence coefficient must be nonzero")

    def to_json_obj(self):
        return {"c": [x.to_json_obj() for x in self.c],
                "init": [x.to_json_obj() for x in self.initial]}


@dataclass(frozen=True)
class SequenceSpec:
    """A sequence given by closed form, recurrence, or both."""
    field: FiniteField
    closed_form: ClosedFormSequence | None = None
    recurrence: LinearRecurrence | None = None

    def __post_init__(self):
        if self.closed_form is None and self.recurrence is None:
            raise InputError("need a closed form or a recurrence")

    def to_json_obj(self):
        obj = {"p": self.field.p, "s": self.field.s}
        if self.closed_form is not None:
            obj["closedForm"] = self.closed_form.to_json_obj()
        if self.recurrence is not None:
            obj["recurrence"] = self.recurrence.to_json_obj()
        return obj

    @staticmethod
    def from_json_obj(obj) -> "SequenceSpec":
        field = FiniteField(obj["p"], obj.get("s", 1))

        def ratfun(o):
            return PerfectClosureElem.from_json_obj(field, o)

        cf = rec = None
        if "closedForm" in obj:
            part = obj["closedForm"]
            cf = ClosedFormSequence(
                field, tuple(ratfun(x) for x in part["b"]),
                tuple(ratfun(x) for x in part["alpha"]))
        if "recurrence" in obj:
            part = obj["recurrence"]
            rec = LinearRecurrence(
                field, tuple(ratfun(x) for x in part["c"]),
                tuple(ratfun(x) for x in part["init"]))
        return SequenceSpec(field, cf, rec)


def eval_sequence(src, n: int, budget: int = ITERATION_BUDGET) -> PerfectClosureElem:
    """Exact value a_n, by closed-form powering or recurrence iteration."""
    if n < 0:
        raise InputError("eval_sequence takes n >= 0")
    if n > budget:
        raise CapExceededError(f"n={n} beyond the iteration budget {budget}")
    if isinstance(src, ClosedFormSequence):
        out = None
        for b, a in zip(src.b, src.alpha):
            term = b * a ** n
            out = term if out is None else out + term
        return out
    if isinstance(src, LinearRecurrence):
        d = len(src.c)
        window = list(src.initial)
        if n < d:
            return window[n]
        for _ in range(n - d + 1):
            nxt = None
            for cj, aj in zip(src.c, window):
                term = cj * aj
                nxt = term if nxt is None else nxt + term
            window = window[1:] + [nxt]
        return window[-1]
    raise InputError("unsupported sequence description")


# ---------------------------------------------------------------------------
# fast zero-pattern evaluation (the brute-force oracle)

def _all_scalar(cf: ClosedFormSequence) -> bool:
    return all(x.level == 0 and len(x.den) == 1 and len(x.num) <= 1
               for x in itertools.chain(cf.b, cf.alpha))


def _char2_poly(cf: ClosedFormSequence) -> bool:
    f = cf.field
    return (f.p == 2 and f.s == 1
            and all(x.level == 0 and len(x.den) == 1
                    for x in itertools.chain(cf.b, cf.alpha)))


def _as_bitmask(x: PerfectClosureElem) -> int:
    out = 0
    for i, c in enumerate(x.num):
        if not c.is_zero():
            out |= 1 << i
    return out


def _clear_denominators(cf: ClosedFormSequence) -> ClosedFormSequence:
    """An equal-zero-set closed form whose coefficients and bases are all
    polynomial: a_m is rescaled by the nonzero factor B * (prod_j d_j)^m,
    where d_j are the base denominators and B clears the coefficients."""
    if all(len(x.den) == 1 for x in itertools.chain(cf.b, cf.alpha)):
        return cf
    field = cf.field
    lv = max(x.level for x in itertools.chain(cf.b, cf.alpha))
    anum, aden = zip(*(a._at_level(lv) for a in cf.alpha))
    bnum, bden = zip(*(b._at_level(lv) for b in cf.b))

    def others(polys, i):
        out = (field.one(),)
        for j, q in enumerate(polys):
            if j != i:
                out = _pmul(out, q, field)
        return out

    beta = tuple(
        PerfectClosureElem(field, _pmul(anum[i], others(aden, i), field),
                           None, lv)
        for i in range(len(cf.alpha)))
    newb = tuple(
        PerfectClosureElem(field, _pmul(bnum[i], others(bden, i), field),
                           None, lv)
        for i in range(len(cf.b)))
    return ClosedFormSequence(field, newb, beta)


def zero_pattern(cf: ClosedFormSequence, limit: int) -> list[bool]:
    """[a_0 == 0, ..., a_{limit-1} == 0], via the fastest applicable route."""
    cf = _clear_denominators(cf)
    if _all_scalar(cf):
        # values live in F_{p^s}; constant-size steps
        bs = [x.num[0] if x.num else cf.field.zero() for x in cf.b]
        als = [x.num[0] for x in cf.alpha]
        acc = list(bs)
        out = []
        for _ in range(limit):
            total = acc[0]
            for v in acc[1:]:
                total = total + v
            out.append(total.is_zero())
            acc = [v * a for v, a in zip(acc, als)]
        return out
    if _char2_poly(cf):
        # F_2[t] polynomials as python int bitmasks: multiply = shift-xor
        acc = [_as_bitmask(x) for x in cf.b]
        als = [_as_bitmask(a) for a in cf.alpha]
        shifts = [[i for i in range(a.bit_length()) if a >> i & 1] for a in als]
        out = []
        for _ in range(limit):
            total = 0
            for v in acc:
                total ^= v
            out.append(total == 0)
            acc = [0 if not v else
                   _xor_shifts(v, sh) for v, sh in zip(acc, shifts)]
        return out
    # exact fallback: incremental products in the perfect closure
    acc = list(cf.b)
    out = []
    for _ in range(limit):
        total = acc[0]
        for v in acc[1:]:
            total = total + v
        out.append(total.is_zero())
        acc = [v * a for v, a in zip(acc, cf.alpha)]
    return out


def _xor_shifts(v: int, shifts: list[int]) -> int:
    out = 0
    for s in shifts:
        out ^= v << s
    return out


# ---------------------------------------------------------------------------
# the kernel automaton

_SIG_WINDOW = 64
_MIN_WINDOW = 8


@dataclass(frozen=True)
class KernelResult:
    """The zero-set automaton plus the coefficient tuple behind each state
    (for the semantic spot checks)."""
    sequence: ClosedFormSequence
    dfa: Dfa
    states: tuple[tuple[PerfectClosureElem, ...], ...]
    raw_dfa: Dfa

    def state_value(self, idx: int, m: int) -> PerfectClosureElem:
        """sum_i c_i alpha_i^m for the coefficient tuple of state idx."""
        cs = self.states[idx]
        out = None
        for c, a in zip(cs, self.sequence.alpha):
            term = c * a ** m
            out = term if out is None else out + term
        return out


def zero_set_kernel(cf: ClosedFormSequence, state_cap: int = 100_000,
                    sample: int = 1 << 14) -> KernelResult:
    """Kernel search for the vanishing-set automaton.

    States are coefficient tuples; exact duplicates are folded first, and
    states whose windowed zero patterns of the underlying sequence coincide
    are identified (the raw tuple space can be infinite while the language
    is regular).  The output is validated by the callers' brute-force and
    per-state checks, not assumed correct by construction.
    """
    field = cf.field
    p = field.p
    cleared = _clear_denominators(cf)
    if _all_scalar(cleared):
        sample = min(sample, 1 << 12)
    elif not _char2_poly(cleared):
        sample = min(sample, 1 << 10)
    zeros = zero_pattern(cleared, sample)

    alpha_pow = [[a ** j for j in range(p)] for a in cf.alpha]

    def signature(n: int, length: int):
        step = p ** length
        bits = []
        idx = n
        while len(bits) < _SIG_WINDOW and idx < len(zeros):
            bits.append(zeros[idx])
            idx += step
        if len(bits) < _MIN_WINDOW:
            return None
        return (len(bits), tuple(bits))

    initial = tuple(cf.b)
    states: list[tuple[PerfectClosureElem, ...]] = [initial]
    meta: list[tuple[int, int]] = [(0, 0)]  # (value, length) of first word
    by_tuple = {initial: 0}
    by_sig = {}
    sig0 = signature(0, 0)
    if sig0 is not None:
        by_sig[sig0] = 0
    rows: list[tuple[int, ...]] = []
    head = 0
    while head < len(states):
        cs = states[head]
        n, length = meta[head]
        row = []
        for j in range(p):
            child = tuple(pth_root(c * alpha_pow[i][j])
                          for i, c in enumerate(cs))
            cn, clen = n + j * p ** length, length + 1
            tid = by_tuple.get(child)
            if tid is None:
                sig = signature(cn, clen)
                tid = by_sig.get(sig) if sig is not None else None
                if tid is None:
                    if len(states) >= state_cap:
                        raise CapExceededError(
                            "zero-set kernel exceeded the state cap "
                            f"({state_cap}); the state space is expected "
                            "to be finite")
                    tid = len(states)
                    states.append(child)
                    meta.append((cn, clen))
                    if sig is not None:
                        by_sig[sig] = tid
                by_tuple[child] = tid
            row.append(tid)
        rows.append(tuple(row))
        head += 1

    accepting = frozenset(
        i for i, cs in enumerate(states)
        if _sum_elems(cs).is_zero())
    raw = Dfa(tuple((d,) for d in range(p)), 1, 0, accepting, tuple(rows))
    return KernelResult(cf, minimize(raw), tuple(states), raw)


def _sum_elems(elems):
    out = elems[0]
    for e in elems[1:]:
        out = out + e
    return out


def zero_set_automaton(cf: ClosedFormSequence,
                       state_cap: int = 100_000) -> Dfa:
    """DFA over digits 0..p-1 (least significant first) accepting exactly
    the base-p expansions of { n >= 0 : a_n = 0 }."""
    return zero_set_kernel(cf, state_cap).dfa


def zero_set_bidirectional(cf: ClosedFormSequence,
                           rec: LinearRecurrence | None = None,
                           state_cap: int = 100_000) -> tuple[Dfa, Dfa]:
    """Zero-set automata for n >= 0 and for n < 0 (the negative side reads
    expansions of m = -n, using the inverted bases)."""
    if rec is not None and rec.c[0].is_zero():
        raise InputError("running the recurrence backwards needs c_0 != 0")
    return (zero_set_automaton(cf, state_cap),
            zero_set_automaton(cf.inverted(), state_cap))


# ---------------------------------------------------------------------------
# number <-> word helpers

def lsd_digits(n: int, p: int) -> tuple[int, ...]:
    if n < 0:
        raise InputError("only nonnegative integers have base-p expansions")
    if n == 0:
        return (0,)
    out = []
    while n:
        n, d = divmod(n, p)
        out.append(d)
    return tuple(out)


def accepts_number(dfa: Dfa, n: int) -> bool:
    return dfa.accepts_indices(lsd_digits(n, len(dfa.symbols)))


# ---------------------------------------------------------------------------
# analysis of the resulting set

@dataclass(frozen=True)
class Periodicity:
    """Above ``threshold`` the set is exactly {n : n mod modulus in residues};
    below it the members are listed in ``exceptional``."""
    threshold: int
    modulus: int
    residues: tuple[int, ...]
    exceptional: tuple[int, ...]

    def to_json_obj(self):
        return {"threshold": self.threshold, "modulus": self.modulus,
                "residues": list(self.residues),
                "exceptional": list(self.exceptional)}


@dataclass(frozen=True)
class ZeroSetReport:
    certificate: SparseCertificate
    periodic: Periodicity | None

    def to_json_obj(self):
        obj = self.certificate.to_json_obj()
        obj["periodic"] = (None if self.periodic is None
                           else self.periodic.to_json_obj())
        return obj


def _progression_dfa(p: int, threshold: int, modulus: int, residues,
                     exceptional) -> Dfa:
    """LSD base-p automaton of {n < threshold : n in exceptional} union
    {n >= threshold : n mod modulus in residues}."""
    res = frozenset(residues)
    exc = frozenset(exceptional)

    # track the exact value saturated at the threshold, the saturated digit
    # weight, the true digit weight mod modulus, and the value mod modulus
    def step(key, digit):
        value, mult, powm, rem = key
        return (min(value + digit * mult, threshold),
                min(mult * p, threshold + 1),
                powm * p % modulus,
                (rem + digit * powm) % modulus)

    def accept(key):
        value, _, _, rem = key
        return value in exc if value < threshold else rem in res

    return minimize(digit_kernel(p, (0, 1, 1 % modulus, 0), step, accept))


def digit_kernel(p: int, initial_key, step_fn, accept_fn,
                 state_cap: int = 1 << 20) -> Dfa:
    """BFS closure of ``step_fn`` over scalar digit symbols 0..p-1."""
    index = {initial_key: 0}
    order = [initial_key]
    rows = []
    head = 0
    while head < len(order):
        key = order[head]
        head += 1
        row = []
        for digit in range(p):
            nxt = step_fn(key, digit)
            if nxt not in index:
                if len(index) >= state_cap:
                    raise CapExceededError(
                        f"digit kernel exceeded the state cap ({state_cap})")
                index[nxt] = len(order)
                order.append(nxt)
            row.append(index[nxt])
        rows.append(tuple(row))
    accepting = frozenset(i for i, k in enumerate(order) if accept_fn(k))
    return Dfa(tuple((d,) for d in range(p)), 1, 0, accepting, tuple(rows))


def analyze_zero_set(dfa: Dfa, scan: int = 4096,
                     max_modulus: int = 64) -> ZeroSetReport:
    """Sparse analysis of a zero-set automaton, plus an exact eventually-
    periodic description when one exists (candidates are guessed from a
    scan and then confirmed by DFA equivalence)."""
    cert = certificate(dfa)
    p = len(dfa.symbols)
    members = [n for n in range(scan) if accepts_number(dfa, n)]
    periodic = None
    for modulus in range(1, max_modulus + 1):
        for threshold in [0, 1, 2, 4, 8, 16, 32, 64]:
            tail = [n for n in members if n >= threshold]
            residues = sorted({n % modulus for n in tail})
            expected = [n for n in range(threshold, scan)
                        if n % modulus in set(residues)]
            if tail != expected:
                continue
            exceptional = tuple(n for n in members if n < threshold)
            cand = _progression_dfa(p, threshold, modulus,
                                    residues, exceptional)
            if equivalent(dfa, cand):
                periodic = Periodicity(threshold, modulus,
                                       tuple(residues), exceptional)
                break
        if periodic is not None:
            break
    return ZeroSetReport(cert, periodic)
