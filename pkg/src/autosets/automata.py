"""Deterministic finite automata over digit alphabets.

Words are read least significant digit first; a word w over the digits of a
spanning set has the value w0 + G w1 + G^2 w2 + ...  All machines here are
total (every state has a transition on every symbol) and states are numbered
canonically: breadth-first from the initial state in symbol order.  With the
symbol order fixed by the spanning set, every construction in this module is
therefore deterministic down to the byte level of its serialised output.

Alphabets may be k-fold products of a digit set (arity 2 for the equality
relation, 3 for addition); a product symbol is the concatenation of its
component digit vectors.

The two workhorse constructions are

- :func:`value_relation_dfa` — the carry automaton deciding a signed relation
  sum_i s_i [w_i] == 0 between equal-length digit words, with one digit-pair
  of carry as state; and
- :func:`relation_image` — given automata for the non-output coordinates of
  such a relation, the subset construction for the language of output words
  related to some choice of accepted inputs.  Saturation (closing a language
  under all re-expansions of its values) and value sums are both instances.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import CapExceededError, InconclusiveError, InputError
from .groups import Vec, as_vec, vadd, vsub, zero_vec
from .spanning import SpanningSet, eval_expansion, expand_greedy

Symbol = tuple[int, ...]

DEFAULT_STATE_CAP = 10 ** 6


@dataclass(frozen=True)
class Dfa:
    """A total DFA.  ``transitions[q][s]`` is the successor of state q on
    symbol index s; ``symbols`` are tuples of ints (concatenated digit
    vectors for product alphabets, ``arity`` of them)."""

    symbols: tuple[Symbol, ...]
    arity: int
    initial: int
    accepting: frozenset[int]
    transitions: tuple[tuple[int, ...], ...]
    tags: tuple | None = field(default=None, compare=False)

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @cached_property
    def symbol_index(self) -> dict[Symbol, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def step(self, state: int, symbol_idx: int) -> int:
        return self.transitions[state][symbol_idx]

    def run_from(self, state: int, word_indices) -> int:
        for s in word_indices:
            state = self.transitions[state][s]
        return state

    def accepts_indices(self, word_indices) -> bool:
        return self.run_from(self.initial, word_indices) in self.accepting

    def accepts(self, word_symbols) -> bool:
        try:
            idx = [self.symbol_index[tuple(s)] for s in word_symbols]
        except KeyError as exc:
            raise InputError(f"symbol {exc.args[0]} is not in the alphabet") from exc
        return self.accepts_indices(idx)

    # -- serialisation -------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "alphabet": [list(s) for s in self.symbols],
            "arity": self.arity,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "transitions": [list(row) for row in self.transitions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json_obj(obj) -> "Dfa":
        try:
            symbols = tuple(tuple(int(x) for x in s) for s in obj["alphabet"])
            arity = int(obj["arity"])
            initial = int(obj["initial"])
            accepting = frozenset(int(q) for q in obj["accepting"])
            transitions = tuple(tuple(int(t) for t in row) for row in obj["transitions"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad DFA object: {exc}") from exc
        dfa = Dfa(symbols, arity, initial, accepting, transitions)
        _validate(dfa)
        return dfa

    def to_dot(self, name: str = "dfa") -> str:
        def sym_label(s: Symbol) -> str:
            if self.arity == 1:
                return ",".join(map(str, s)) if len(s) > 1 else str(s[0])
            dim = len(s) // self.arity
            parts = [s[i * dim:(i + 1) * dim] for i in range(self.arity)]
            return "|".join(",".join(map(str, p)) for p in parts)

        lines = [f"digraph {name} {{", "  rankdir=LR;", '  start [shape=point];',
                 f"  start -> q{self.initial};"]
        for q in range(self.n_states):
            shape = "doublecircle" if q in self.accepting else "circle"
            label = f"q{q}"
            if self.tags is not None and self.tags[q] is not None:
                label += f"\\n{self.tags[q]}"
            lines.append(f'  q{q} [shape={shape},label="{label}"];')
        for q, row in enumerate(self.transitions):
            by_target: dict[int, list[str]] = {}
            for s, target in enumerate(row):
                by_target.setdefault(target, []).append(sym_label(self.symbols[s]))
            for target, labels in sorted(by_target.items()):
                text = ",".join(labels)
                if len(text) > 40:
                    text = text[:37] + "..."
                lines.append(f'  q{q} -> q{target} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines)


def _validate(dfa: Dfa) -> None:
    n = dfa.n_states
    m = len(dfa.symbols)
    if not (0 <= dfa.initial < n):
        raise InputError("initial state out of range")
    if any(len(row) != m for row in dfa.transitions):
        raise InputError("transition rows must cover the whole alphabet")
    if any(not (0 <= t < n) for row in dfa.transitions for t in row):
        raise InputError("transition target out of range")
    if any(not (0 <= q < n) for q in dfa.accepting):
        raise InputError("accepting state out of range")


# ---------------------------------------------------------------------------
# alphabets

def digit_symbols(ss: SpanningSet) -> tuple[Symbol, ...]:
    return ss.digits


def product_symbols(ss: SpanningSet, arity: int) -> tuple[Symbol, ...]:
    """The arity-fold product alphabet, component indices varying fastest last."""
    out = []
    for combo in itertools.product(range(len(ss.digits)), repeat=arity):
        flat: tuple[int, ...] = ()
        for i in combo:
            flat = flat + ss.digits[i]
        out.append(flat)
    return tuple(out)


def split_symbol(sym: Symbol, arity: int) -> tuple[Vec, ...]:
    dim = len(sym) // arity
    return tuple(sym[i * dim:(i + 1) * dim] for i in range(arity))


# ---------------------------------------------------------------------------
# canonical form and combinators

def canonical_renumber(dfa: Dfa) -> Dfa:
    """Renumber states breadth-first from the initial state in symbol order;
    unreachable states are dropped."""
    order = {dfa.initial: 0}
    queue = [dfa.initial]
    while queue:
        q = queue.pop(0)
        for t in dfa.transitions[q]:
            if t not in order:
                order[t] = len(order)
                queue.append(t)
    trans = [None] * len(order)
    tags = [None] * len(order) if dfa.tags is not None else None
    for old, new in order.items():
        trans[new] = tuple(order[t] for t in dfa.transitions[old])
        if tags is not None:
            tags[new] = dfa.tags[old]
    accepting = frozenset(order[q] for q in dfa.accepting if q in order)
    return Dfa(dfa.symbols, dfa.arity, 0, accepting, tuple(trans),
               tuple(tags) if tags is not None else None)


def minimize(dfa: Dfa) -> Dfa:
    """Language-minimal canonical form (partition refinement, then BFS order)."""
    n = dfa.n_states
    trans = np.array(dfa.transitions, dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)
    for q in dfa.accepting:
        labels[q] = 1
    n_classes = len(np.unique(labels))
    while True:
        key = np.concatenate([labels[:, None], labels[trans]], axis=1)
        _, new = np.unique(key, axis=0, return_inverse=True)
        k = int(new.max()) + 1 if n else 0
        if k == n_classes:
            labels = new
            break
        labels, n_classes = new, k
    reps: dict[int, int] = {}
    for q in range(n):
        reps.setdefault(int(labels[q]), q)
    class_trans = tuple(
        tuple(int(labels[dfa.transitions[reps[c]][s]]) for s in range(len(dfa.symbols)))
        for c in range(n_classes)
    )
    accepting = frozenset(int(labels[q]) for q in dfa.accepting)
    out = Dfa(dfa.symbols, dfa.arity, int(labels[dfa.initial]), accepting, class_trans)
    return canonical_renumber(out)


def product(d1: Dfa, d2: Dfa, rule) -> Dfa:
    """Reachable product machine; ``rule(in1, in2)`` decides acceptance."""
    if d1.symbols != d2.symbols:
        raise InputError("product requires identical alphabets")
    pairs = {(d1.initial, d2.initial): 0}
    order = [(d1.initial, d2.initial)]
    rows = []
    accepting = set()
    head = 0
    while head < len(order):
        q1, q2 = order[head]
        head += 1
        if rule(q1 in d1.accepting, q2 in d2.accepting):
            accepting.add(head - 1)
        row = []
        for s in range(len(d1.symbols)):
            nxt = (d1.transitions[q1][s], d2.transitions[q2][s])
            if nxt not in pairs:
                pairs[nxt] = len(order)
                order.append(nxt)
            row.append(pairs[nxt])
        rows.append(tuple(row))
    return Dfa(d1.symbols, d1.arity, 0, frozenset(accepting), tuple(rows))


def union(d1: Dfa, d2: Dfa) -> Dfa:
    return minimize(product(d1, d2, lambda a, b: a or b))


def intersection(d1: Dfa, d2: Dfa) -> Dfa:
    return minimize(product(d1, d2, lambda a, b: a and b))


def difference(d1: Dfa, d2: Dfa) -> Dfa:
    return minimize(product(d1, d2, lambda a, b: a and not b))


def complement(dfa: Dfa) -> Dfa:
    return replace(dfa, accepting=frozenset(range(dfa.n_states)) - dfa.accepting,
                   tags=dfa.tags)


def is_empty(dfa: Dfa) -> bool:
    seen = {dfa.initial}
    queue = [dfa.initial]
    while queue:
        q = queue.pop(0)
        if q in dfa.accepting:
            return False
        for t in dfa.transitions[q]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return True


def distinguishing_word(d1: Dfa, d2: Dfa):
    """A shortest word accepted by exactly one machine, or None if equivalent."""
    if d1.symbols != d2.symbols:
        raise InputError("equivalence requires identical alphabets")
    start = (d1.initial, d2.initial)
    seen = {start: ()}
    queue = [start]
    while queue:
        q1, q2 = queue.pop(0)
        if (q1 in d1.accepting) != (q2 in d2.accepting):
            return seen[(q1, q2)]
        for s in range(len(d1.symbols)):
            nxt = (d1.transitions[q1][s], d2.transitions[q2][s])
            if nxt not in seen:
                seen[nxt] = seen[(q1, q2)] + (s,)
                queue.append(nxt)
    return None


def equivalent(d1: Dfa, d2: Dfa) -> bool:
    return distinguishing_word(d1, d2) is None


def trim_coaccessible(dfa: Dfa) -> Dfa:
    """Send every state that cannot reach acceptance to one dead sink."""
    rev: dict[int, set[int]] = {q: set() for q in range(dfa.n_states)}
    for q, row in enumerate(dfa.transitions):
        for t in row:
            rev[t].add(q)
    live = set(dfa.accepting)
    queue = list(dfa.accepting)
    while queue:
        q = queue.pop()
        for p in rev[q]:
            if p not in live:
                live.add(p)
                queue.append(p)
    if dfa.initial not in live:
        return dfa_none_like(dfa)
    dead = dfa.n_states
    trans = [tuple(t if t in live else dead for t in row) for row in dfa.transitions]
    trans.append(tuple(dead for _ in dfa.symbols))
    out = Dfa(dfa.symbols, dfa.arity, dfa.initial, dfa.accepting, tuple(trans))
    return canonical_renumber(out)


def word_dfa(symbols, word_indices, arity: int = 1) -> Dfa:
    """The DFA accepting exactly one word, given by symbol indices."""
    word = tuple(word_indices)
    n = len(word)
    dead = n + 1
    rows = []
    for i, w in enumerate(word):
        rows.append(tuple(i + 1 if s == w else dead for s in range(len(symbols))))
    rows.append(tuple(dead for _ in symbols))  # state n: nothing more to read
    rows.append(tuple(dead for _ in symbols))  # dead sink
    return Dfa(tuple(symbols), arity, 0, frozenset([n]), tuple(rows))


def dfa_all(symbols, arity: int = 1) -> Dfa:
    return Dfa(tuple(symbols), arity, 0, frozenset([0]), ((0,) * len(symbols),))


def dfa_none(symbols, arity: int = 1) -> Dfa:
    return Dfa(tuple(symbols), arity, 0, frozenset(), ((0,) * len(symbols),))


def dfa_none_like(dfa: Dfa) -> Dfa:
    return dfa_none(dfa.symbols, dfa.arity)


# ---------------------------------------------------------------------------
# generic kernel BFS

def dfa_from_kernel(symbols, arity, initial_key, step_fn, accept_fn,
                    state_cap: int = DEFAULT_STATE_CAP, tag_fn=None) -> Dfa:
    """Build the DFA whose states are the distinct keys reachable from
    ``initial_key`` under ``step_fn(key, symbol)``; ``accept_fn(key)`` marks
    acceptance.  Exploration is breadth-first in symbol order, so state
    numbering is canonical.  Raises CapExceededError past ``state_cap``.
    """
    symbols = tuple(tuple(s) for s in symbols)
    index = {initial_key: 0}
    order = [initial_key]
    trans: list[tuple[int, ...]] = []
    head = 0
    while head < len(order):
        key = order[head]
        head += 1
        row = []
        for sym in symbols:
            nxt = step_fn(key, sym)
            if nxt not in index:
                if len(index) >= state_cap:
                    raise CapExceededError(
                        f"kernel exploration exceeded the state cap ({state_cap})")
                index[nxt] = len(order)
                order.append(nxt)
            row.append(index[nxt])
        trans.append(tuple(row))
    accepting = frozenset(i for i, k in enumerate(order) if accept_fn(k))
    tags = tuple(tag_fn(k) for k in order) if tag_fn else None
    return Dfa(symbols, arity, 0, accepting, tuple(trans), tags)


# ---------------------------------------------------------------------------
# carry relations between digit words

_DEAD = "dead"


def value_relation_dfa(ss: SpanningSet, signs: tuple[int, ...],
                       state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """The relation automaton for  sum_i signs[i] * [w_i] == 0  over
    equal-length digit words, as an explicit DFA on the product alphabet.

    States are carry pairs (x, y) of digits: after n symbols the running
    signed difference of values equals G^{n-1} x + G^n y, so acceptance is
    the state-local condition x + G y == 0.  A signed column sum that leaves
    the image of G kills the run (dead state).
    """
    if any(s not in (-1, 1) for s in signs) or not 2 <= len(signs) <= 3:
        raise InputError("signs must be +-1 with arity 2 or 3")
    arity = len(signs)
    dim = ss.dim
    zero = zero_vec(dim)

    def step(key, sym):
        if key == _DEAD:
            return _DEAD
        x, y = key
        xi = ss.digit_index[x]
        xhat = ss.digit_div[xi]
        if xhat is None:
            return _DEAD
        parts = split_symbol(sym, arity)
        s = vadd(ss.digits[xhat], y)
        for sg, p in zip(signs, parts):
            s = vadd(s, p) if sg > 0 else vsub(s, p)
        hit = ss.carry_table.get(s)
        if hit is None:
            raise InconclusiveError(
                f"carry table cannot split {s}; verify the spanning set first")
        t, tp = hit
        return (ss.digits[t], ss.digits[tp])

    def accept(key):
        if key == _DEAD:
            return False
        x, y = key
        return vadd(x, ss.eff(y)) == zero

    return dfa_from_kernel(product_symbols(ss, arity), arity, (zero, zero),
                           step, accept, state_cap, tag_fn=lambda k: k)


def equality_automaton(ss: SpanningSet, state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """[u] == [w] on pairs (u, w) of equal-length digit words."""
    return value_relation_dfa(ss, (1, -1), state_cap)


def addition_automaton(ss: SpanningSet, state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """[u] + [v] == [w] on triples (u, v, w) of equal-length digit words."""
    return value_relation_dfa(ss, (1, 1, -1), state_cap)


# ---------------------------------------------------------------------------
# the same relation, stepped implicitly for subset constructions

class _BoxEncoder:
    """Linear encoding of the sup-norm box of a given radius."""

    def __init__(self, radius: int, dim: int):
        self.radius = radius
        self.dim = dim
        side = 2 * radius + 1
        self.strides = tuple(side ** (dim - 1 - i) for i in range(dim))
        self.size = side ** dim

    def lin(self, v: Vec) -> int:
        return sum((x + self.radius) * s for x, s in zip(v, self.strides))

    def shift(self, v: Vec) -> int:
        return sum(x * s for x, s in zip(v, self.strides))


class _LazyRelation:
    """Carry-pair relation with transitions keyed by the signed column sum v.

    Pair states are pre-registered from the carry table (their set is known up
    front), rows over the v-box are materialised on demand, and everything is
    numpy so subset constructions can gather transitions in bulk.
    State 0 is dead; state 1 is the initial pair (0, 0).
    """

    def __init__(self, ss: SpanningSet, n_slots: int):
        self.ss = ss
        dim = ss.dim
        n = ss.radius
        self.venc = _BoxEncoder(n_slots * n, dim)
        self.senc = _BoxEncoder(5 * n, dim)  # the carry table covers five-digit sums
        zero = zero_vec(dim)

        pair_ids: dict[tuple[int, int], int] = {}

        def register(pair) -> int:
            if pair not in pair_ids:
                pair_ids[pair] = len(pair_ids) + 1  # 0 is dead
            return pair_ids[pair]

        self.initial = register((0, 0))
        tab = np.zeros(self.senc.size, dtype=np.int32)
        for s in sorted(ss.carry_table):
            tab[self.senc.lin(s)] = register(ss.carry_table[s])
        self.tab = tab
        self.n_states = len(pair_ids) + 1
        self.pairs: list[tuple[int, int] | None] = [None] * self.n_states
        for pair, i in pair_ids.items():
            self.pairs[i] = pair

        acc = np.zeros(self.n_states, dtype=bool)
        for pair, i in pair_ids.items():
            x, y = pair
            acc[i] = vadd(ss.digits[x], ss.eff(ss.digits[y])) == zero
        self.accept = acc

        # shift of each v-box point inside the s-box
        shifts = np.empty(self.venc.size, dtype=np.int64)
        radius, dims = self.venc.radius, dim
        coords = np.indices((2 * radius + 1,) * dims).reshape(dims, -1) - radius
        for j in range(self.venc.size):
            shifts[j] = self.senc.shift(tuple(int(c) for c in coords[:, j]))
        self.vshift = shifts

        # dense transition matrix: rows[sid, v-lin] = successor pair id.
        # Row 0 (dead) and rows of pairs whose first digit is not G-divisible
        # stay all-dead.
        base_lin = np.zeros(self.n_states, dtype=np.int64)
        live = np.zeros(self.n_states, dtype=bool)
        for pair, i in pair_ids.items():
            x, y = pair
            xhat = ss.digit_div[x]
            if xhat is not None:
                base_lin[i] = self.senc.lin(vadd(ss.digits[xhat], ss.digits[y]))
                live[i] = True
        self.rows = np.zeros((self.n_states, self.venc.size), dtype=np.int32)
        self.rows[live] = self.tab[base_lin[live][:, None] + shifts[None, :]]

        # pairs from which an accepting pair is still reachable (over any v)
        coacc = acc.copy()
        while True:
            grew = coacc | np.any(coacc[self.rows], axis=1)
            grew[0] = False
            if np.array_equal(grew, coacc):
                break
            coacc = grew
        self.coacc = coacc

    def gather(self, sids: np.ndarray, vlin: np.ndarray) -> np.ndarray:
        """Transition block: out[i, j] = step(sids[i], v index vlin[j])."""
        return self.rows[sids[:, None], vlin[None, :]]


def relation_image(ss: SpanningSet, signs: tuple[int, ...], sources: list[Dfa],
                   state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """{ w : exists u_i accepted by sources[i] with sum_i signs[i][u_i] ==
    -signs[-1] [w] } — the output coordinate of the signed value relation,
    with the other coordinates ranging over the source languages.

    All words are consumed in lockstep (equal lengths); wrap sources in
    :func:`zero_pad_closure` and post-compose :func:`quotient_zeros` for the
    value-set semantics.
    """
    k = len(sources)
    if len(signs) != k + 1:
        raise InputError("need one sign per source plus one for the output")
    digits = ss.digits
    n = len(digits)
    for src in sources:
        if src.arity != 1 or src.symbols != digits:
            raise InputError("sources must be digit automata over the same spanning set")

    rel = _LazyRelation(ss, len(signs))
    dig = np.array(digits, dtype=np.int64)

    # all combinations of source digit indices
    if k:
        grids = np.indices((n,) * k).reshape(k, -1)
        a_idx = [grids[j] for j in range(k)]
        n_combo = n ** k
    else:
        a_idx = []
        n_combo = 1

    # v-box linear index of the signed source sum, to be shifted per out-digit
    vsum = np.zeros((n_combo, ss.dim), dtype=np.int64)
    for j in range(k):
        vsum += signs[j] * dig[a_idx[j]]
    base_lin = np.full(n_combo, rel.venc.lin(zero_vec(ss.dim)), dtype=np.int64)
    for c in range(ss.dim):
        base_lin += vsum[:, c] * rel.venc.strides[c]
    out_shift = np.array([rel.venc.shift(tuple(signs[-1] * x for x in d))
                          for d in digits], dtype=np.int64)

    src_trans = [np.array(s.transitions, dtype=np.int64) for s in sources]
    src_acc = [np.zeros(s.n_states, dtype=bool) for s in sources]
    for s, acc in zip(sources, src_acc):
        acc[list(s.accepting)] = True

    # states of each source from which acceptance is still reachable; members
    # outside this set (in any coordinate) can never fire and are dropped so
    # subsets stay small
    src_coacc = []
    for s, tr, acc in zip(sources, src_trans, src_acc):
        mask = acc.copy()
        while True:
            grew = mask | np.any(mask[tr], axis=1)
            if np.array_equal(grew, mask):
                break
            mask = grew
        src_coacc.append(mask)

    # member encoding: ((s_1 * n_2 + s_2) ... ) * n_rel + r
    n_rel = rel.n_states
    sizes = [s.n_states for s in sources]

    def encode_init() -> int:
        m = 0
        for s in sources:
            m = m * s.n_states + s.initial
        return m * n_rel + rel.initial

    subsets: dict[bytes, int] = {}
    subset_members: list[np.ndarray] = []
    queue: list[int] = []

    def register(members: np.ndarray) -> int:
        key = members.tobytes()
        sid = subsets.get(key)
        if sid is None:
            if len(subset_members) >= state_cap:
                raise CapExceededError(
                    f"subset construction exceeded the state cap ({state_cap})")
            sid = len(subset_members)
            subsets[key] = sid
            subset_members.append(members)
            queue.append(sid)
        return sid

    init_alive = bool(rel.coacc[rel.initial]) and all(
        bool(src_coacc[j][sources[j].initial]) for j in range(k))
    init = np.array([encode_init()] if init_alive else [], dtype=np.int64)
    register(init)
    trans_rows: list[tuple[int, ...]] = []
    accepting: set[int] = set()
    head = 0
    while head < len(queue):
        sid = queue[head]
        head += 1
        members = subset_members[sid]
        if members.size == 0:
            trans_rows.append(tuple(sid for _ in range(n)))
            continue
        r = members % n_rel
        rest = members // n_rel
        scoord = []
        for j in range(k - 1, -1, -1):
            scoord.append(rest % sizes[j])
            rest = rest // sizes[j]
        scoord.reverse()  # scoord[j] = state of source j, per member

        ok = np.ones(len(members), dtype=bool)
        for j in range(k):
            ok &= src_acc[j][scoord[j]]
        if bool(np.any(ok & rel.accept[r])):
            accepting.add(sid)

        # successor blocks, b-independent parts first
        if k:
            nxt_base = np.zeros((len(members), n_combo), dtype=np.int64)
            alive_src = np.ones((len(members), n_combo), dtype=bool)
            for j in range(k):
                step_j = src_trans[j][scoord[j][:, None], a_idx[j][None, :]]
                nxt_base = nxt_base * sizes[j] + step_j
                alive_src &= src_coacc[j][step_j]
        else:
            nxt_base = np.zeros((len(members), 1), dtype=np.int64)
            alive_src = np.ones((len(members), 1), dtype=bool)
        row = []
        if len(members) * n * n_combo <= (1 << 23):
            # hoist the out-digit loop: one gather for every (member, b, combo)
            vlin_all = base_lin[None, :] + out_shift[:, None]
            rel_all = rel.rows[r[:, None, None], vlin_all[None, :, :]]
            flat_all = nxt_base[:, None, :] * n_rel + rel_all
            for b in range(n):
                live = rel.coacc[rel_all[:, b, :]] & alive_src
                row.append(register(np.unique(flat_all[:, b, :][live])))
        else:
            for b in range(n):
                rel_next = rel.gather(r, base_lin + out_shift[b])
                live = rel.coacc[rel_next] & alive_src
                flat = (nxt_base * n_rel + rel_next)[live]
                row.append(register(np.unique(flat)))
        trans_rows.append(tuple(row))

    return Dfa(digits, 1, 0, frozenset(accepting), tuple(trans_rows))


# ---------------------------------------------------------------------------
# zero-padding closures and saturation

def _require_zero_symbol(dfa: Dfa) -> int:
    z = tuple(0 for _ in dfa.symbols[0])
    idx = dfa.symbol_index.get(z)
    if idx is None:
        raise InputError("alphabet has no zero symbol")
    return idx


def zero_pad_closure(dfa: Dfa) -> Dfa:
    """The language L . 0* (closure under appending zero digits)."""
    z = _require_zero_symbol(dfa)

    def step(key, sym):
        q, flag = key
        s = dfa.symbol_index[sym]
        return (dfa.transitions[q][s], (flag or q in dfa.accepting) and s == z)

    def accept(key):
        q, flag = key
        return flag or q in dfa.accepting

    return dfa_from_kernel(dfa.symbols, dfa.arity, (dfa.initial, False), step, accept)


def quotient_zeros(dfa: Dfa) -> Dfa:
    """{ w : w 0^j in L for some j >= 0 } — strip trailing zeros."""
    z = _require_zero_symbol(dfa)
    accepting = set(dfa.accepting)
    changed = True
    while changed:
        changed = False
        for q in range(dfa.n_states):
            if q not in accepting and dfa.transitions[q][z] in accepting:
                accepting.add(q)
                changed = True
    return replace(dfa, accepting=frozenset(accepting), tags=dfa.tags)


def saturate(ss: SpanningSet, dfa: Dfa, state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Close a digit-word language under value equality: the result accepts
    exactly the words whose value is the value of some word of the input.

    This is the pipeline: zero-pad the input, take the image under the
    equality relation, strip trailing zeros, minimise.
    """
    dz = zero_pad_closure(dfa)
    img = relation_image(ss, (1, -1), [dz], state_cap)
    return minimize(quotient_zeros(img))


def sum_automaton(ss: SpanningSet, d1: Dfa, d2: Dfa,
                  state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Automaton for the value sumset S1 + S2 of two saturated automata."""
    img = relation_image(ss, (1, 1, -1),
                         [zero_pad_closure(d1), zero_pad_closure(d2)], state_cap)
    return minimize(quotient_zeros(img))


# ---------------------------------------------------------------------------
# base change

def rebase(dfa: Dfa, ss_from: SpanningSet, ss_to: SpanningSet,
           state_cap: int = 100_000) -> Dfa:
    """Re-express a saturated digit automaton over another digit system for a
    power of the same base map.

    Each target digit is expanded into ``m`` source digits (m = power ratio)
    plus a bounded carry; acceptance runs the source machine on the greedy
    expansion of the final carry.  The input must be saturated — otherwise
    membership would depend on which expansion the carry construction feeds
    it, and the carry states typically blow past the cap.
    """
    if ss_to.endo != ss_from.endo or ss_to.power % ss_from.power:
        raise InputError("target digit system must belong to a power of the same map")
    m = ss_to.power // ss_from.power
    if dfa.symbols != ss_from.digits:
        raise InputError("automaton alphabet does not match the source digit system")
    gm = ss_from.eff.power(m)

    def feed(val: Vec) -> tuple[tuple[int, ...], Vec]:
        w = expand_greedy(ss_from, val)
        low = w[:m] + (0,) * (m - len(w)) if len(w) < m else w[:m]
        carry = eval_expansion(ss_from, w[m:]) if len(w) > m else zero_vec(ss_from.dim)
        return low, carry

    def step(key, sym):
        q, c = key
        low, carry = feed(vadd(c, sym))
        return (dfa.run_from(q, low), carry)

    def accept(key):
        q, c = key
        return dfa.run_from(q, expand_greedy(ss_from, c)) in dfa.accepting

    try:
        out = dfa_from_kernel(ss_to.digits, 1, (dfa.initial, zero_vec(ss_from.dim)),
                              step, accept, state_cap)
    except CapExceededError as exc:
        raise CapExceededError(
            f"{exc}; carry states diverged — is the input automaton saturated?") from exc
    return minimize(out)


# ---------------------------------------------------------------------------
# value enumeration and membership

def accepts_value(ss: SpanningSet, dfa: Dfa, v) -> bool:
    """Membership of a group element in the value set of a saturated automaton."""
    return dfa.accepts_indices(expand_greedy(ss, as_vec(v)))


def enumerate_values(ss: SpanningSet, dfa: Dfa, max_len: int,
                     cap: int = 500_000) -> list[Vec]:
    """All values of accepted words of length <= max_len, sorted."""
    if dfa.arity != 1 or dfa.symbols != ss.digits:
        raise InputError("enumeration needs a digit automaton over this spanning set")
    # prefixes that cannot reach acceptance contribute no values; dropping
    # them keeps the frontier polynomial on sparse languages
    rev: dict[int, set[int]] = {q: set() for q in range(dfa.n_states)}
    for q, row in enumerate(dfa.transitions):
        for q2 in row:
            rev[q2].add(q)
    coacc = set(dfa.accepting)
    stack = list(coacc)
    while stack:
        for q in rev[stack.pop()]:
            if q not in coacc:
                coacc.add(q)
                stack.append(q)
    out: set[Vec] = set()
    if dfa.initial not in coacc:
        return []
    level: dict[tuple[int, Vec], None] = {(dfa.initial, zero_vec(ss.dim)): None}
    scale = [ss.eff.power(j) if j else None for j in range(max_len + 1)]
    if dfa.initial in dfa.accepting:
        out.add(zero_vec(ss.dim))
    for j in range(max_len):
        gj = scale[j]
        nxt: dict[tuple[int, Vec], None] = {}
        for (q, val) in level:
            for s, digit in enumerate(ss.digits):
                q2 = dfa.transitions[q][s]
                if q2 not in coacc:
                    continue
                v2 = vadd(val, gj(digit) if j else digit)
                key = (q2, v2)
                if key not in nxt:
                    nxt[key] = None
                    if q2 in dfa.accepting:
                        out.add(v2)
            if len(nxt) > cap:
                raise CapExceededError("value enumeration exceeded the cap")
        level = nxt
    return sorted(out)


# ---------------------------------------------------------------------------
# classical base-k comparison

@dataclass(frozen=True)
class ClassicalBaseK:
    """Membership of integers by automata on ordinary base-k digits of |n|,
    least significant first, with separate machines for n >= 0 and n < 0."""

    k: int
    pos: Dfa
    neg: Dfa

    def contains(self, n: int) -> bool:
        word = base_digits(abs(n), self.k)
        dfa = self.pos if n >= 0 else self.neg
        return dfa.accepts(word)


def base_digits(n: int, k: int) -> tuple[Symbol, ...]:
    if n < 0:
        raise InputError("base_digits takes a nonnegative integer")
    out = []
    while n:
        out.append((n % k,))
        n //= k
    return tuple(out)


def classical_agreement_check(ss: SpanningSet, dfa: Dfa, classical: ClassicalBaseK,
                              bound: int) -> list[int]:
    """Integers n with |n| <= bound where the saturated digit automaton and the
    classical base-k pair disagree (empty list = full agreement)."""
    if ss.dim != 1:
        raise InputError("classical comparison is for subsets of the integers")
    bad = []
    for n in range(-bound, bound + 1):
        if accepts_value(ss, dfa, (n,)) != classical.contains(n):
            bad.append(n)
    return bad
