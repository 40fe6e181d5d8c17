"""Zero sets of recurrences over function fields: field arithmetic, the
perfect-closure representation, kernel automata, and set analysis."""

import random

import pytest

from autosets.automata import Dfa, equivalent, is_empty, minimize
from autosets.errors import CapExceededError, InputError
from autosets.recurrences import (
    ClosedFormSequence,
    FiniteField,
    LinearRecurrence,
    PerfectClosureElem,
    SequenceSpec,
    accepts_number,
    analyze_zero_set,
    digit_kernel,
    eval_sequence,
    lsd_digits,
    pth_root,
    zero_pattern,
    zero_set_automaton,
    zero_set_bidirectional,
    zero_set_kernel,
)

F2 = FiniteField(2, 1)
F4 = FiniteField(2, 2)
F3 = FiniteField(3, 1)


def rf(field, num, den=(1,), level=0):
    return PerfectClosureElem.from_int_polys(field, num, den, level)


def derksen():
    """a_n = (1+t)^n + t^n + 1 over F_2(t); vanishes exactly at powers of 2."""
    return ClosedFormSequence(
        F2,
        (rf(F2, (1,)), rf(F2, (1,)), rf(F2, (1,))),
        (rf(F2, (1, 1)), rf(F2, (0, 1)), rf(F2, (1,))))


def fib_f4():
    """Fibonacci mod 2 in closed form over F_4: b=(1,1), bases the two
    primitive cube roots of unity."""
    w = F4.generator()
    return ClosedFormSequence(
        F4,
        (PerfectClosureElem.constant(F4, F4.one()),) * 2,
        (PerfectClosureElem.constant(F4, w),
         PerfectClosureElem.constant(F4, w * w)))


# ---------------------------------------------------------------------------
# finite fields

def test_field_moduli_are_smallest_irreducible():
    assert F2.modulus == (0, 1)
    assert F4.modulus == (1, 1, 1)          # w^2 + w + 1
    assert FiniteField(3, 2).modulus == (1, 0, 1)  # w^2 + 1


def test_field_axioms_exhaustive_f4_f9():
    for field in (F4, FiniteField(3, 2)):
        elems = list(field.elements())
        one = field.one()
        for a in elems:
            for b in elems:
                assert a * b == b * a
                assert a + b == b + a
                for c in elems:
                    assert a * (b + c) == a * b + a * c
            if not a.is_zero():
                assert a * a.inverse() == one
                assert a.p_root() ** field.p == a


def test_f4_generator_relations():
    w = F4.generator()
    assert w * w == w + F4.one()
    assert w ** 3 == F4.one()
    assert w.inverse() == w * w


def test_bad_field_parameters():
    with pytest.raises(InputError):
        FiniteField(4, 1)
    with pytest.raises(InputError):
        FiniteField(2, 0)


# ---------------------------------------------------------------------------
# the perfect closure

def test_pth_root_examples():
    t_sq = rf(F2, (0, 0, 1))
    assert pth_root(t_sq) == rf(F2, (0, 1))           # t^2 -> t
    assert pth_root(rf(F2, (1, 0, 1))) == rf(F2, (1, 1))  # 1+t^2 -> 1+t
    half = pth_root(rf(F2, (0, 1)))                   # t -> t^(1/2)
    assert half.level == 1
    assert half.num == (F2.zero(), F2.one())
    assert half.p_power() == rf(F2, (0, 1))


def test_pth_root_inverts_p_power_random():
    rng = random.Random(91)
    for field in (F2, F3, F4):
        for _ in range(40):
            num = [rng.randrange(field.order) for _ in range(rng.randint(1, 4))]
            den = [rng.randrange(field.order) for _ in range(rng.randint(1, 3))]
            num = [field.elem(divmod(c, field.p)[::-1] if field.s > 1 else c)
                   for c in num]
            den = [field.elem(divmod(c, field.p)[::-1] if field.s > 1 else c)
                   for c in den]
            if not any(not c.is_zero() for c in den):
                den = [field.one()]
            x = PerfectClosureElem(field, num, den, rng.randint(0, 2))
            r = pth_root(x)
            assert r ** field.p == x
            assert pth_root(x.p_power()) == x
            assert x.p_power() == x ** field.p


def test_canonical_lowest_terms_and_monic_denominator():
    # (t^2 + t)/t reduces to t + 1
    assert rf(F2, (0, 1, 1), (0, 1)) == rf(F2, (1, 1))
    # denominator is normalised monic over F_3: 1/(2t) = 2/t
    assert rf(F3, (1,), (0, 2)) == rf(F3, (2,), (0, 1))
    # zero is level-0 zero no matter how it is written
    z = rf(F2, (), (1, 1), level=2)
    assert z.is_zero() and z.level == 0 and z.den == (F2.one(),)


def test_level_is_minimal():
    # u^2 at level 1 is just t
    assert PerfectClosureElem(F2, (F2.zero(), F2.zero(), F2.one()),
                              level=1) == rf(F2, (0, 1))
    # u at level 1 stays at level 1
    assert PerfectClosureElem(F2, (F2.zero(), F2.one()), level=1).level == 1


def test_closure_ring_identities_random():
    rng = random.Random(17)
    for _ in range(60):
        field = rng.choice((F2, F3))
        def rand_elem():
            num = [field.elem(rng.randrange(field.p))
                   for _ in range(rng.randint(0, 3))]
            den = [field.elem(rng.randrange(field.p))
                   for _ in range(rng.randint(1, 3))]
            if not any(not c.is_zero() for c in den):
                den = [field.one()]
            return PerfectClosureElem(field, num, den, rng.randint(0, 2))
        a, b, c = rand_elem(), rand_elem(), rand_elem()
        assert (a + b) * c == a * c + b * c
        assert a - a == PerfectClosureElem(field, ())
        assert a * b == b * a
        if not a.is_zero():
            assert a * a.inverse() == PerfectClosureElem.constant(
                field, field.one())


def test_division_by_zero_rejected():
    with pytest.raises(InputError):
        rf(F2, (1,), ())
    with pytest.raises(InputError):
        rf(F2, ()).inverse()


# ---------------------------------------------------------------------------
# sequences and evaluation

def test_fibonacci_recurrence_values():
    rec = LinearRecurrence(
        F2, (rf(F2, (1,)), rf(F2, (1,))), (rf(F2, ()), rf(F2, (1,))))
    vals = [eval_sequence(rec, n).is_zero() for n in range(10)]
    assert vals == [n % 3 == 0 for n in range(10)]


def test_closed_form_matches_recurrence_derksen():
    cf = derksen()
    # characteristic polynomial (X+1+t)(X+t)(X+1) expanded over F_2
    rec = LinearRecurrence(
        F2,
        (rf(F2, (0, 1, 1)), rf(F2, (1, 1, 1)), rf(F2, ())),
        (rf(F2, (1,)), rf(F2, ()), rf(F2, ())))
    for n in range(64):
        assert eval_sequence(cf, n) == eval_sequence(rec, n)


def test_closed_form_matches_recurrence_fibonacci_f4():
    cf = fib_f4()
    rec = LinearRecurrence(
        F2, (rf(F2, (1,)), rf(F2, (1,))), (rf(F2, ()), rf(F2, (1,))))
    for n in range(64):
        v = eval_sequence(cf, n)
        r = eval_sequence(rec, n)
        assert v.level == 0 and len(v.num) <= 1 and len(v.den) == 1
        coeffs = v.num[0].coeffs if v.num else (0, 0)
        assert coeffs[1] == 0  # values stay in the prime field
        assert (coeffs[0] == 1) == (not r.is_zero())


def test_validation_errors():
    one = rf(F2, (1,))
    t = rf(F2, (0, 1))
    with pytest.raises(InputError):
        ClosedFormSequence(F2, (rf(F2, ()),), (t,))       # zero coefficient
    with pytest.raises(InputError):
        ClosedFormSequence(F2, (one, one), (t, t))        # repeated base
    with pytest.raises(InputError):
        ClosedFormSequence(F2, (one,), (rf(F2, ()),))     # zero base
    with pytest.raises(InputError):
        LinearRecurrence(F2, (rf(F2, ()), one), (one, one))  # c_0 = 0
    with pytest.raises(InputError):
        SequenceSpec(F2)


def test_eval_budget():
    with pytest.raises(CapExceededError):
        eval_sequence(derksen(), 1 << 17)
    rec = LinearRecurrence(F2, (rf(F2, (1,)),), (rf(F2, (1,)),))
    with pytest.raises(CapExceededError):
        eval_sequence(rec, 100, budget=50)


# ---------------------------------------------------------------------------
# zero patterns

def test_zero_pattern_derksen():
    powers = {1 << k for k in range(12)}
    assert zero_pattern(derksen(), 256) == [n in powers for n in range(256)]


def test_zero_pattern_scalar_fibonacci():
    assert zero_pattern(fib_f4(), 100) == [n % 3 == 0 for n in range(100)]


def test_zero_pattern_with_denominators():
    # a_n = t^(n-1) + 1 vanishes only at n = 1
    cf = ClosedFormSequence(
        F2, (rf(F2, (1,), (0, 1)), rf(F2, (1,))),
        (rf(F2, (0, 1)), rf(F2, (1,))))
    assert zero_pattern(cf, 32) == [n == 1 for n in range(32)]


def test_zero_pattern_agrees_with_exact_eval():
    rng = random.Random(29)
    for _ in range(10):
        while True:
            alphas = []
            seen = set()
            for _ in range(rng.randint(1, 3)):
                a = rf(F2, [rng.randrange(2) for _ in range(3)])
                if not a.is_zero() and a not in seen:
                    seen.add(a)
                    alphas.append(a)
            if alphas:
                break
        bs = tuple(rf(F2, [rng.randrange(2) for _ in range(2)] + [1])
                   for _ in alphas)
        cf = ClosedFormSequence(F2, bs, tuple(alphas))
        pattern = zero_pattern(cf, 96)
        assert pattern == [eval_sequence(cf, n).is_zero() for n in range(96)]


# ---------------------------------------------------------------------------
# the zero-set automaton

def power_dfa():
    """Base-2 LSD expansions of {2^k}: zeros, one 1, zeros."""
    return Dfa(((0,), (1,)), 1, 0, frozenset({1}), ((0, 1), (1, 2), (2, 2)))


def div3_dfa():
    return minimize(digit_kernel(
        2, (0, 1),
        lambda key, d: ((key[0] + d * key[1]) % 3, key[1] * 2 % 3),
        lambda key: key[0] == 0))


def test_derksen_zero_set_is_powers_of_two():
    dfa = zero_set_automaton(derksen())
    assert equivalent(dfa, power_dfa())
    assert len(dfa.transitions) == 3
    powers = {1 << k for k in range(13)}
    pattern = zero_pattern(derksen(), 4096)
    for n in range(4096):
        assert accepts_number(dfa, n) == (n in powers) == pattern[n]


def test_fibonacci_f4_zero_set_is_multiples_of_three():
    dfa = zero_set_automaton(fib_f4())
    assert equivalent(dfa, div3_dfa())
    for n in range(512):
        assert accepts_number(dfa, n) == (n % 3 == 0)


def test_kernel_semantic_invariant():
    """Running the raw automaton from any discovered state on the expansion
    of m accepts exactly when the state's coefficient tuple vanishes at m."""
    for cf in (derksen(), fib_f4()):
        kr = zero_set_kernel(cf)
        acc = kr.raw_dfa.accepting
        for idx in range(len(kr.states)):
            for m in range(64):
                reached = kr.raw_dfa.run_from(idx, lsd_digits(m, cf.field.p))
                assert (reached in acc) == kr.state_value(idx, m).is_zero()


def test_zero_set_state_cap():
    with pytest.raises(CapExceededError):
        zero_set_kernel(derksen(), state_cap=2)


def test_bidirectional_fibonacci_symmetric():
    pos, neg = zero_set_bidirectional(fib_f4())
    assert equivalent(pos, neg)
    assert equivalent(pos, div3_dfa())


def test_bidirectional_derksen_negative_side_empty():
    cf = derksen()
    pos, neg = zero_set_bidirectional(cf)
    assert equivalent(pos, power_dfa())
    assert is_empty(neg)
    inv = cf.inverted()
    assert not any(zero_pattern(inv, 256))
    for m in range(1, 48):
        assert not eval_sequence(inv, m).is_zero()


def test_nowhere_vanishing_gives_empty_automaton():
    cf = ClosedFormSequence(F2, (rf(F2, (1,)),), (rf(F2, (0, 1)),))
    assert is_empty(zero_set_automaton(cf))


# ---------------------------------------------------------------------------
# analysis

def test_analyze_derksen_sparse_not_periodic():
    report = analyze_zero_set(zero_set_automaton(derksen()))
    assert report.certificate.sparse
    assert report.certificate.degree == 2  # zeros*, the single 1, zeros*
    assert report.periodic is None


def test_analyze_fibonacci_periodic():
    report = analyze_zero_set(zero_set_automaton(fib_f4()))
    assert not report.certificate.sparse
    assert report.certificate.witness is not None
    assert report.periodic is not None
    pr = report.periodic
    assert (pr.threshold, pr.modulus, pr.residues, pr.exceptional) == \
        (0, 3, (0,), ())


def test_analyze_empty_set():
    cf = ClosedFormSequence(F2, (rf(F2, (1,)),), (rf(F2, (0, 1)),))
    report = analyze_zero_set(zero_set_automaton(cf))
    assert report.certificate.sparse
    assert report.certificate.decomposition == ()
    assert report.periodic is not None
    assert report.periodic.residues == ()


# ---------------------------------------------------------------------------
# serialization

def test_sequence_spec_json_roundtrip():
    cf = derksen()
    rec = LinearRecurrence(
        F2,
        (rf(F2, (0, 1, 1)), rf(F2, (1, 1, 1)), rf(F2, ())),
        (rf(F2, (1,)), rf(F2, ()), rf(F2, ())))
    spec_obj = SequenceSpec(F2, cf, rec).to_json_obj()
    assert spec_obj["p"] == 2 and spec_obj["s"] == 1
    assert set(spec_obj["closedForm"]) == {"b", "alpha"}
    assert set(spec_obj["recurrence"]) == {"c", "init"}
    assert spec_obj["closedForm"]["alpha"][0] == {
        "num": [[1], [1]], "den": [[1]], "level": 0}
    back = SequenceSpec.from_json_obj(spec_obj)
    assert back.closed_form == cf
    assert back.recurrence == rec


def test_ratfun_json_roundtrip_with_level():
    x = pth_root(rf(F3, (1, 2), (0, 1)))
    obj = x.to_json_obj()
    assert obj["level"] == x.level
    assert PerfectClosureElem.from_json_obj(F3, obj) == x
