import random

import pytest

from autosets.automata import accepts_value, enumerate_values
from autosets.errors import InputError
from autosets.groups import Endomorphism, Lattice
from autosets.orbitsets import (
    Cycle,
    PNormalSet,
    SetExpr,
    SetTerm,
    _lattice_points_within,
    compile_expr,
    compile_fset,
    coset_kernel_dfa,
    cycle_base_point,
    cycle_dfa,
    cycle_partials_within,
    cycle_to_power,
    expr_to_str,
    expr_values_within,
    from_pnormal,
    image_dfa,
    image_under_F,
    normalize,
    parse_expr,
    singleton_dfa,
    subgroup_dfa,
    term_values_within,
    to_pnormal,
    translate_dfa,
    working_spanning,
)
from autosets.spanning import ball_spanning

F2 = Endomorphism.scalar(2)
F4 = Endomorphism.scalar(4)
F5 = Endomorphism.scalar(5)
JORDAN = Endomorphism.from_rows(((2, 1), (0, 2)))

SS4 = ball_spanning(F4, 1, 3)       # digits -3..3, G = 4
SS2 = ball_spanning(F2, 2, 2)       # digits -2..2, G = 4 over F = 2


def dfa_value_set(ss, dfa, radius, dim=1):
    if dim == 1:
        return {v for v in range(-radius, radius + 1)
                if accepts_value(ss, dfa, (v,))}
    return {(x, y)
            for x in range(-radius, radius + 1)
            for y in range(-radius, radius + 1)
            if accepts_value(ss, dfa, (x, y))}


# ---------------------------------------------------------------------------
# parsing

def test_parse_roundtrip():
    cases = [
        "{5}",
        "{1}+C(1;1)",
        "{0}+C(1;1)+C(2;1)",
        "{2}+H[5]",
        "{(1,2)}+C((0,1);2)",
        "{1}+C(1;1) ∪ {3}",
    ]
    for text in cases:
        expr = parse_expr(text)
        assert parse_expr(expr_to_str(expr)) == expr


def test_parse_bare_atoms_and_pipe_union():
    expr = parse_expr("1 + C(1;1) | 3")
    assert len(expr.terms) == 2
    assert expr.terms[0].base == (1,)
    assert expr.terms[0].cycles == (Cycle((1,), 1),)
    assert expr.terms[1].base == (3,)
    # multiple subgroup atoms merge into one lattice
    t = parse_expr("H[4]+H[6]").terms[0]
    assert t.subgroup == Lattice.from_rows(1, [(4,), (6,)])
    assert t.subgroup.rows == ((2,),)


def test_parse_errors():
    with pytest.raises(InputError):
        parse_expr("")
    with pytest.raises(InputError):
        parse_expr("C(1;0)")
    with pytest.raises(InputError):
        parse_expr("1+(1,2)")
    with pytest.raises(InputError):
        parse_expr("1 ∪ (1,2)")
    with pytest.raises(InputError):
        parse_expr("1)")
    with pytest.raises(InputError):
        parse_expr("what")


# ---------------------------------------------------------------------------
# cycle geometry and the brute-force oracle

def test_cycle_partials_frozen():
    assert cycle_partials_within(F2, Cycle((1,), 1), 40) == \
        [(1,), (3,), (7,), (15,), (31,)]
    assert cycle_partials_within(F4, Cycle((3,), 1), 90) == [(3,), (15,), (63,)]
    assert cycle_partials_within(F2, Cycle((0,), 3), 10) == [(0,)]


def test_cycle_partials_match_naive():
    # for positive scalar data the partial sums grow monotonically, so a
    # naive cut-off loop is itself exact and makes an independent oracle
    for k, g, e in [(2, 3, 1), (3, 1, 2), (5, 2, 1), (4, 7, 3)]:
        endo = Endomorphism.scalar(k)
        radius = 10_000
        naive = []
        s, term = g, g
        while abs(s) <= radius:
            naive.append((s,))
            term *= k ** e
            s += term
        assert cycle_partials_within(endo, Cycle((g,), e), radius) == naive


def test_lattice_points_within():
    pts = _lattice_points_within(Lattice.from_rows(1, [(3,)]), 10)
    assert sorted(pts) == [(v,) for v in range(-9, 10, 3)]
    grid = _lattice_points_within(Lattice.from_rows(2, [(2, 0), (0, 3)]), 6)
    assert sorted(grid) == sorted((x, y) for x in range(-6, 7, 2)
                                  for y in range(-6, 7, 3))
    assert _lattice_points_within(Lattice.zero(2), 5) == [(0, 0)]


def test_cycle_to_power_frozen():
    pieces = cycle_to_power(F2, Cycle((1,), 1), 2)
    assert pieces == [((1,), Cycle((6,), 2)), ((3,), Cycle((12,), 2))]


def test_cycle_to_power_reassembles_the_cycle():
    for endo, cyc, s in [
        (F2, Cycle((1,), 1), 2),
        (F2, Cycle((1,), 1), 1),
        (F4, Cycle((3,), 1), 3),
        (JORDAN, Cycle((1, 0), 1), 2),
    ]:
        d = endo.dim
        original = term_values_within(endo, SetTerm(((0,) * d), (cyc,)), 400)
        rebuilt = set()
        for t_m, inner in cycle_to_power(endo, cyc, s):
            rebuilt |= term_values_within(endo, SetTerm(t_m), 400)
            rebuilt |= term_values_within(endo, SetTerm(t_m, (inner,)), 400)
        assert rebuilt == original


# ---------------------------------------------------------------------------
# the point, subgroup, translate and image machines

def test_singleton_states_and_tags():
    d = singleton_dfa(SS4, (5,))
    assert d.n_states == 5
    assert set(d.tags) == {"5", "1", "0", "2", "∅"}
    assert d.tags[d.initial] == "5"


def test_singleton_membership_and_saturation():
    d = singleton_dfa(SS4, (5,))
    assert dfa_value_set(SS4, d, 40) == {5}
    # a non-greedy expansion of 5: 5 = -3 + 4*2
    assert d.accepts(((-3,), (2,)))
    assert not d.accepts(((1,), (2,)))


def test_subgroup_even_numbers():
    lat = Lattice.from_rows(1, [(2,)])
    d = subgroup_dfa(SS2, lat)
    assert dfa_value_set(SS2, d, 60) == set(range(-60, 61, 2))


def test_subgroup_stable_case():
    lat = Lattice.from_rows(1, [(3,)])
    d = subgroup_dfa(SS2, lat)
    assert dfa_value_set(SS2, d, 60) == set(range(-60, 61, 3))
    # the G-stable hull automaton alone already recognizes it (rho = 0)
    core = coset_kernel_dfa(SS2, lat)
    assert dfa_value_set(SS2, core, 60) == set(range(-60, 61, 3))


def test_subgroup_dim2():
    ss = ball_spanning(Endomorphism.scalar(5, dim=2), 1, 2)
    lat = Lattice.from_rows(2, [(1, 1), (0, 3)])
    d = subgroup_dfa(ss, lat)
    assert dfa_value_set(ss, d, 12, dim=2) == \
        {p for p in ((x, y) for x in range(-12, 13) for y in range(-12, 13))
         if p in lat}


def test_subgroup_requires_invariance():
    # 2Z x {0} is not invariant under the shear part of the Jordan block
    ss = working_spanning(JORDAN)
    with pytest.raises(InputError):
        subgroup_dfa(ss, Lattice.from_rows(2, [(0, 2)]))


def test_subgroup_preimage_chain_jordan():
    # these lattices grow under G^{-1} (rho >= 1), which used to force an
    # image construction whose carries blow up over the 2-d digit alphabet;
    # the chain-following kernel keeps them tiny
    ss = working_spanning(JORDAN)
    for rows in ([(2, 0)], [(4, 0), (0, 4)], [(2, 0), (0, 4)]):
        lat = Lattice.from_rows(2, rows)
        d = subgroup_dfa(ss, lat)
        assert d.n_states <= 8
        assert dfa_value_set(ss, d, 25, dim=2) == \
            {p for p in ((x, y) for x in range(-25, 26) for y in range(-25, 26))
             if p in lat}


def test_translate():
    d = translate_dfa(SS4, singleton_dfa(SS4, (3,)), (4,))
    assert dfa_value_set(SS4, d, 60) == {7}
    d2 = translate_dfa(SS4, cycle_dfa(SS4, Cycle((1,), 1)), (-2,))
    assert dfa_value_set(SS4, d2, 100) == {-1, 3, 19, 83}


def test_image_divisibility_recovers_late():
    # value 4 = [0, 1] in base 4; the borrow for M = 2 is odd after the first
    # digit and only becomes divisible through the G^n factor — the image
    # automaton must not prune that path
    d = singleton_dfa(SS2, (2,))
    img = image_dfa(SS2, d, F2)
    assert dfa_value_set(SS2, img, 60) == {4}
    zero = SS2.digit_index[(0,)]
    one = SS2.digit_index[(1,)]
    assert img.accepts_indices((zero, one))


def test_image_under_the_base_map():
    cyc = cycle_dfa(SS4, Cycle((1,), 1))
    img = image_under_F(SS4, cyc)
    assert dfa_value_set(SS4, img, 250) == {4, 20, 84}


# ---------------------------------------------------------------------------
# cycle automata

def test_cycle_dfa_zero():
    d = cycle_dfa(SS4, Cycle((0,), 2))
    assert dfa_value_set(SS4, d, 30) == {0}


def test_cycle_dfa_frozen_enumeration():
    d = cycle_dfa(SS4, Cycle((1,), 1))
    vals = {v[0] for v in enumerate_values(SS4, d, 4)}
    assert vals == {1, 5, 21, 85}
    oracle = {v[0] for v in term_values_within(F4, SetTerm((0,), (Cycle((1,), 1),)), 100)}
    assert dfa_value_set(SS4, d, 100) == oracle


def test_cycle_dfa_longer_step():
    d = cycle_dfa(SS4, Cycle((2,), 2))
    assert dfa_value_set(SS4, d, 300) == {2, 34}
    assert d.accepts(((2,), (0,), (2,)))  # 2 + 16 * 2 = 34, literal pattern
    assert accepts_value(SS4, d, (546,))  # 2 + 32 + 512


def test_cycle_dfa_point_outside_digits():
    ss = working_spanning(F4)  # minimal ball: digits -2..2
    assert (7,) not in ss.digit_index
    d = cycle_dfa(ss, Cycle((7,), 1))
    assert dfa_value_set(ss, d, 250) == {7, 35, 147}


def test_cycle_dfa_step_below_power():
    # over F = 2 with power-2 digits, C(1;1) splits into two step-2 pieces
    d = cycle_dfa(SS2, Cycle((1,), 1))
    assert dfa_value_set(SS2, d, 100) == {1, 3, 7, 15, 31, 63}


def test_cycle_dfa_jordan():
    ss = working_spanning(JORDAN)
    d = cycle_dfa(ss, Cycle((1, 0), 4))
    assert dfa_value_set(ss, d, 40, dim=2) == {(1, 0), (17, 0)}


# ---------------------------------------------------------------------------
# compilation

def test_compile_translate_plus_cycle():
    expr = parse_expr("1+C(1;1)")
    d = compile_expr(SS4, expr)
    oracle = {v[0] for v in expr_values_within(F4, expr, 150)}
    assert dfa_value_set(SS4, d, 150) == oracle


def test_compile_union_with_subgroup():
    expr = parse_expr("C(1;1) ∪ 2+H[5]")
    d = compile_expr(SS4, expr)
    oracle = {v[0] for v in expr_values_within(F4, expr, 100)}
    assert dfa_value_set(SS4, d, 100) == oracle


def test_compile_sum_of_cycles():
    expr = parse_expr("C(1;1)+C(2;1)")
    d = compile_expr(SS4, expr)
    oracle = {v[0] for v in expr_values_within(F4, expr, 150)}
    assert dfa_value_set(SS4, d, 150) == oracle


def test_compile_seeded_random_scalar():
    rng = random.Random(20260823)
    for _ in range(8):
        endo = rng.choice([F4, F5])
        terms = []
        for _ in range(rng.randint(1, 2)):
            base = (rng.randint(-6, 6),)
            cycles = tuple(Cycle((rng.randint(1, 4),), rng.randint(1, 3))
                           for _ in range(rng.randint(0, 2)))
            sub = Lattice.from_rows(1, [(rng.choice([2, 3, 4]),)]) \
                if rng.random() < 0.3 else None
            terms.append(SetTerm(base, cycles, sub))
        expr = SetExpr(1, tuple(terms))
        ss, d = compile_fset(endo, expr)
        oracle = {v[0] for v in expr_values_within(endo, expr, 120)}
        assert dfa_value_set(ss, d, 120) == oracle, expr_to_str(expr)


def test_compile_jordan_expression():
    expr = parse_expr("{(5,3)} ∪ C((1,0);4)")
    ss, d = compile_fset(JORDAN, expr)
    oracle = expr_values_within(JORDAN, expr, 20)
    assert dfa_value_set(ss, d, 20, dim=2) == oracle


def test_compile_jordan_low_step_cycle():
    # step below the working power: the decomposition into power-step pieces
    # produces points far outside the digit ball, which must compile through
    # the continuation kernel rather than an enlarged alphabet
    expr = parse_expr("C((0,1);1)")
    ss, d = compile_fset(JORDAN, expr)
    oracle = expr_values_within(JORDAN, expr, 30)
    assert dfa_value_set(ss, d, 30, dim=2) == oracle
    assert (0, 1) in oracle and (1, 3) in oracle  # (0,1) + J(0,1)


def test_cycle_continuation_matches_saturated_literal():
    from autosets.automata import distinguishing_word, saturate
    from autosets.orbitsets import _cycle_continuation_dfa, _literal_cycle_dfa
    ss = working_spanning(F4)
    for pt, period in [((1,), 1), ((-2,), 2), ((2,), 3)]:
        lit = saturate(ss, _literal_cycle_dfa(ss, pt, period))
        kern = _cycle_continuation_dfa(ss, pt, period)
        assert distinguishing_word(lit, kern) is None


def test_cycle_continuation_far_point_values():
    from autosets.orbitsets import _cycle_continuation_dfa
    ss = working_spanning(F4)
    for pt, period in [((7,), 1), ((-9,), 2), ((100,), 3)]:
        d = _cycle_continuation_dfa(ss, pt, period)
        want = {v[0] for v in cycle_partials_within(
            F4, Cycle(pt, period * ss.power), 5000)}
        assert dfa_value_set(ss, d, 5000) == want


def test_lattice_absorbs_far_cycle_partials():
    # -999 = (partial sum at level 3) + 7 * 113988: membership through the
    # subgroup reaches arbitrarily far partials, so the box enumeration must
    # reason modulo the lattice instead of truncating
    expr = parse_expr("C(-3;3)+H[7]")
    vals = {v[0] for v in expr_values_within(F4, expr, 1000)}
    assert -999 in vals
    assert vals == set(range(-1000, 1001))  # partial residues cover Z/7
    ss, d = compile_fset(F4, expr)
    assert dfa_value_set(ss, d, 1000) == vals


def test_rank_one_lattice_with_cycle():
    expr = parse_expr("C((0,1);4)+H[(1,0)]")
    vals = expr_values_within(JORDAN, expr, 40)
    # partial sums have y-components 1, 17, 273, ...; the lattice sweeps x
    assert vals == {(x, y) for x in range(-40, 41) for y in (1, 17)}
    ss, d = compile_fset(JORDAN, expr)
    assert dfa_value_set(ss, d, 40, dim=2) == vals


def test_cycle_needs_no_unit_eigenvalue():
    rotation = Endomorphism.from_rows(((0, -1), (1, 0)))
    with pytest.raises(InputError):
        cycle_base_point(rotation, Cycle((1, 0), 4))


# ---------------------------------------------------------------------------
# p-normal sets

def test_pnormal_validation():
    with pytest.raises(InputError):
        PNormalSet(2, 2, 1, (1,))  # 3 does not divide 2
    with pytest.raises(InputError):
        PNormalSet(1, 1, 0, ())
    s = PNormalSet(2, 2, -3, (12,))
    assert s.unit == 3


def test_pnormal_single_cycle_formula():
    expr = parse_expr("C(3;2)")
    pf = to_pnormal(F2, expr)
    assert pf.cosets == ()
    assert pf.sets == (PNormalSet(2, 2, -3, (12,)),)
    oracle = {v[0] for v in expr_values_within(F2, expr, 400)}
    assert pf.values_within(400) == oracle


def test_pnormal_translate_and_two_cycles():
    expr = parse_expr("2+C(1;1)+C(3;1)")
    pf = to_pnormal(F2, expr)
    assert pf.sets == (PNormalSet(2, 1, -2, (2, 6)),)
    oracle = {v[0] for v in expr_values_within(F2, expr, 300)}
    assert pf.values_within(300) == oracle


def test_pnormal_mixed_steps():
    expr = parse_expr("C(1;1)+C(1;2)")
    pf = to_pnormal(F2, expr)
    assert all(s.delta == 2 for s in pf.sets)
    oracle = {v[0] for v in expr_values_within(F2, expr, 300)}
    assert pf.values_within(300) == oracle


def test_pnormal_subgroup_cosets():
    pf = to_pnormal(F2, parse_expr("1+H[3]"))
    assert pf.sets == () and pf.cosets == ((1, 3),)
    pf2 = to_pnormal(F2, parse_expr("C(1;1)+H[3]"))
    assert pf2.cosets == ((0, 3), (1, 3))
    oracle = {v[0] for v in expr_values_within(F2, parse_expr("C(1;1)+H[3]"), 60)}
    assert pf2.values_within(60) == oracle


def test_from_pnormal_frozen():
    expr = from_pnormal(F2, PNormalSet(2, 1, -1, (2,)))
    got = {v[0] for v in expr_values_within(F2, expr, 500)}
    want = {v[0] for v in expr_values_within(F2, parse_expr("C(1;1)"), 500)}
    assert got == want


def test_from_pnormal_roundtrip_values():
    rng = random.Random(7)
    for _ in range(6):
        p = rng.choice([2, 3])
        delta = rng.randint(1, 2)
        unit = p ** delta - 1
        cs = tuple(rng.randint(1, 5) for _ in range(rng.randint(1, 2)))
        c0 = rng.randint(-3, 3) * unit - sum(cs)
        pn = PNormalSet(p, delta, c0, cs)
        expr = from_pnormal(Endomorphism.scalar(p), pn)
        oracle = {v[0] for v in
                  expr_values_within(Endomorphism.scalar(p), expr, 400)}
        assert pn.values_within(400) == oracle


# ---------------------------------------------------------------------------
# the sorted-block normal form

def test_normalize_two_cycles_block_languages():
    nf = normalize(F4, parse_expr("C(1;1)+C(2;1)"))
    assert nf.adjust_add == () and nf.adjust_remove == ()
    assert len(nf.components) == 2
    langs = set()
    for comp in nf.components:
        assert comp.translate == (0,)
        assert comp.subgroup.is_trivial()
        first = comp.language
        assert first.accepts(((3,),))
        langs.add(
            tuple(sym for sym in [(3,), (2,), (1,)] if first.accepts(((3,), sym))))
    # one component continues 3* with 2*, the other with 1*
    assert langs == {((3,), (2,)), ((3,), (1,))}
    oracle = {v[0] for v in
              expr_values_within(F4, parse_expr("C(1;1)+C(2;1)"), 300)}
    assert {v[0] for v in nf.values_within(300, 6)} == oracle


def test_normalize_json_shape():
    nf = normalize(F4, parse_expr("C(1;1)+C(2;1)"))
    obj = nf.to_json_obj()
    assert set(obj) == {"adjustAdd", "adjustRemove", "components"}
    assert obj["adjustAdd"] == [] and obj["adjustRemove"] == []
    for comp in obj["components"]:
        assert set(comp) == {"gamma", "sparseDfa", "subgroup"}


def test_normalize_point_and_subgroup():
    nf = normalize(F4, parse_expr("{4}"))
    assert len(nf.components) == 1
    assert {v[0] for v in nf.values_within(50, 3)} == {4}
    nf2 = normalize(F4, parse_expr("2+H[3]"))
    assert {v[0] for v in nf2.values_within(30, 3)} == set(range(-28, 30, 3))


def test_normalize_step_above_power():
    nf = normalize(F4, parse_expr("C(1;2)"))
    assert len(nf.components) == 1
    comp = nf.components[0]
    assert comp.spanning.eff.scalar_value() == 16
    assert {v[0] for v in nf.values_within(300, 4)} == {1, 17, 273}


def test_normalize_matches_compiled_set():
    expr = parse_expr("C(1;1)+C(2;1) ∪ 3")
    nf = normalize(F4, expr)
    ss, d = compile_fset(F4, expr)
    assert {v[0] for v in nf.values_within(200, 6)} == \
        dfa_value_set(ss, d, 200)
