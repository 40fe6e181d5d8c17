"""Growth analysis of digit languages.

A regular language is *sparse* when the number of accepted words of length
at most n grows polynomially; otherwise the count grows like C^n for some
C > 1.  On a trimmed automaton the two cases are separated by a structural
criterion: every strongly connected component of useful states must be a
single simple cycle, so each state lies on at most one first-return loop.

This module decides that criterion, produces a checkable witness in the
exponential case (words u, a, b, v with |a| = |b|, a != b and
u{a,b}*v inside the language), and in the sparse case constructs an
explicit decomposition of the language as a finite union of chains

    v1 w1* v2 w2* ... vk wk* v(k+1)

of literal words and starred cycle words.  The number of starred blocks
bounds the polynomial degree of the growth function.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx

from .automata import Dfa, canonical_renumber, minimize
from .errors import InputError

__all__ = [
    "Block", "SparseCertificate", "growth_count", "length_counts",
    "is_sparse", "decompose_sparse", "degree_bound", "certificate",
    "decomposition_json_obj", "compile_decomposition",
]


@dataclass(frozen=True)
class Block:
    """One block of a decomposition piece: a literal word, or w* if starred."""
    word: tuple[int, ...]
    starred: bool = False


Piece = tuple[Block, ...]
Decomposition = tuple[Piece, ...]


@dataclass(frozen=True)
class SparseCertificate:
    """Outcome of the growth analysis.

    ``witness`` is set exactly when the language is not sparse; it is the
    quadruple (u, a, b, v) of symbol-index words.  ``decomposition`` and
    ``degree`` are filled by :func:`certificate` in the sparse case.
    """
    sparse: bool
    witness: tuple[tuple[int, ...], tuple[int, ...],
                   tuple[int, ...], tuple[int, ...]] | None = None
    decomposition: Decomposition | None = None
    degree: int | None = None

    def to_json_obj(self):
        obj: dict = {"sparse": self.sparse}
        if self.witness is not None:
            u, a, b, v = self.witness
            obj["witness"] = {"u": list(u), "a": list(a),
                              "b": list(b), "v": list(v)}
        if self.decomposition is not None:
            obj["decomposition"] = decomposition_json_obj(self.decomposition)
        if self.degree is not None:
            obj["degree"] = self.degree
        return obj


# ---------------------------------------------------------------------------
# growth counting

def length_counts(dfa: Dfa, n: int) -> list[int]:
    """Exact number of accepted words of each length 0..n (big integers)."""
    ways = [0] * dfa.n_states
    ways[dfa.initial] = 1
    acc = dfa.accepting
    out = [sum(w for q, w in enumerate(ways) if q in acc)]
    for _ in range(n):
        nxt = [0] * dfa.n_states
        for q, w in enumerate(ways):
            if w:
                for t in dfa.transitions[q]:
                    nxt[t] += w
        ways = nxt
        out.append(sum(w for q, w in enumerate(ways) if q in acc))
    return out


def growth_count(dfa: Dfa, n: int) -> list[int]:
    """Cumulative counts: entry m is the number of accepted words of
    length at most m, for m = 0..n."""
    return list(itertools.accumulate(length_counts(dfa, n)))


# ---------------------------------------------------------------------------
# the simple-cycle criterion

def _useful_states(dfa: Dfa) -> set[int]:
    """States both reachable from the initial state and able to reach
    acceptance."""
    fwd = {dfa.initial}
    queue = [dfa.initial]
    while queue:
        q = queue.pop()
        for t in dfa.transitions[q]:
            if t not in fwd:
                fwd.add(t)
                queue.append(t)
    rev: dict[int, set[int]] = {q: set() for q in range(dfa.n_states)}
    for q, row in enumerate(dfa.transitions):
        for t in row:
            rev[t].add(q)
    bwd = set(dfa.accepting)
    queue = list(bwd)
    while queue:
        q = queue.pop()
        for p in rev[q]:
            if p not in bwd:
                bwd.add(p)
                queue.append(p)
    return fwd & bwd


def _bfs_word(dfa: Dfa, source: int, targets: set[int],
              allowed: set[int] | None = None) -> tuple[int, ...] | None:
    """Shortest symbol-index word from ``source`` to any state in
    ``targets``, moving only through ``allowed`` states (targets exempt)."""
    if source in targets:
        return ()
    seen = {source: ()}
    queue = [source]
    while queue:
        q = queue.pop(0)
        for s, t in enumerate(dfa.transitions[q]):
            if t in seen:
                continue
            word = seen[q] + (s,)
            if t in targets:
                return word
            if allowed is not None and t not in allowed:
                continue
            seen[t] = word
            queue.append(t)
    return None


def _first_return(dfa: Dfa, q: int, scc: set[int], first: int) -> tuple[int, ...]:
    """The first-return word at q that starts with symbol ``first`` and
    stays inside the component."""
    t = dfa.transitions[q][first]
    inner = scc - {q}
    tail = _bfs_word(dfa, t, {q}, allowed=inner) if t != q else ()
    assert tail is not None
    return (first,) + tail


def is_sparse(dfa: Dfa) -> SparseCertificate:
    """Decide polynomial growth; on failure return the witness (u, a, b, v).

    The automaton is first trimmed to useful states.  The language is sparse
    exactly when every strongly connected component of the useful part is a
    single simple cycle; a component with a branch yields two distinct
    first-return words w, w' at some state, from which the witness is built
    as a = w^|w'| and b = w'^|w|.
    """
    useful = _useful_states(dfa)
    graph = nx.DiGraph()
    graph.add_nodes_from(useful)
    for q in useful:
        for t in set(dfa.transitions[q]):
            if t in useful:
                graph.add_edge(q, t)
    for comp in nx.strongly_connected_components(graph):
        for q in comp:
            inner = [s for s, t in enumerate(dfa.transitions[q]) if t in comp]
            if len(comp) == 1 and not graph.has_edge(q, q):
                continue
            if len(inner) <= 1:
                continue
            w = _first_return(dfa, q, comp, inner[0])
            w2 = _first_return(dfa, q, comp, inner[1])
            u = _bfs_word(dfa, dfa.initial, {q})
            v = _bfs_word(dfa, q, set(dfa.accepting))
            assert u is not None and v is not None
            return SparseCertificate(
                False, witness=(u, w * len(w2), w2 * len(w), v))
    return SparseCertificate(True)


# ---------------------------------------------------------------------------
# constructive decomposition

def _clean_piece(blocks: list[Block]) -> Piece:
    out: list[Block] = []
    for bl in blocks:
        if bl.starred:
            out.append(bl)
        elif bl.word:
            if out and not out[-1].starred:
                out[-1] = Block(out[-1].word + bl.word)
            else:
                out.append(bl)
    if not out:
        return (Block(()),)
    return tuple(out)


def _reachable_avoiding(dfa: Dfa, start: int, banned: frozenset[int]) -> set[int]:
    if start in banned:
        return set()
    seen = {start}
    queue = [start]
    while queue:
        q = queue.pop()
        for t in dfa.transitions[q]:
            if t not in seen and t not in banned:
                seen.add(t)
                queue.append(t)
    return seen


def _coreachable_avoiding(dfa: Dfa, targets: frozenset[int],
                          banned: frozenset[int]) -> set[int]:
    rev: dict[int, set[int]] = {q: set() for q in range(dfa.n_states)}
    for q, row in enumerate(dfa.transitions):
        if q in banned:
            continue
        for t in row:
            rev[t].add(q)
    seen = set(targets) - set(banned)
    queue = list(seen)
    while queue:
        q = queue.pop()
        for p in rev[q]:
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def _enumerate_dag_words(dfa: Dfa, initial: int, accepting: frozenset[int],
                         useful: set[int]) -> list[tuple[int, ...]]:
    """All accepted words when the useful subgraph is acyclic."""
    words: list[tuple[int, ...]] = []

    def walk(q: int, prefix: tuple[int, ...]):
        if q in accepting:
            words.append(prefix)
        for s, t in enumerate(dfa.transitions[q]):
            if t in useful:
                walk(t, prefix + (s,))

    if initial in useful:
        walk(initial, ())
    return words


def _decompose(dfa: Dfa, initial: int, accepting: frozenset[int],
               banned: frozenset[int],
               memo: dict) -> list[Piece]:
    key = (initial, accepting, banned)
    if key in memo:
        return memo[key]
    fwd = _reachable_avoiding(dfa, initial, banned)
    bwd = _coreachable_avoiding(dfa, accepting, banned)
    useful = fwd & bwd
    if not useful:
        memo[key] = []
        return []

    graph = nx.DiGraph()
    graph.add_nodes_from(useful)
    for q in useful:
        for t in set(dfa.transitions[q]):
            if t in useful:
                graph.add_edge(q, t)
    cycle_class = None
    for comp in sorted(nx.strongly_connected_components(graph), key=min):
        if len(comp) > 1 or graph.has_edge(min(comp), min(comp)):
            cycle_class = comp
            break

    if cycle_class is None:
        pieces = [(Block(w),) if w else (Block(()),)
                  for w in _enumerate_dag_words(dfa, initial, accepting, useful)]
        memo[key] = pieces
        return pieces

    # order the class along its unique cycle, starting from the smallest state
    start = min(cycle_class)
    order = [start]
    letters = []
    q = start
    while True:
        inner = [(s, t) for s, t in enumerate(dfa.transitions[q])
                 if t in cycle_class]
        assert len(inner) == 1, "decomposition requires the simple-cycle property"
        s, t = inner[0]
        letters.append(s)
        if t == start:
            break
        order.append(t)
        q = t
    d = len(order)
    index = {q: i for i, q in enumerate(order)}
    blocked = banned | frozenset(cycle_class)

    # words that avoid the class entirely
    pieces = _decompose(dfa, initial, accepting, blocked, memo)[:]

    # words that enter the class: literal prefix into q_i, whole loops at q_i,
    # the arc from q_i to q_j, then either stop (q_j accepting) or step out
    entries: list[tuple[int, list[Piece], tuple[int, ...]]] = []
    for r in fwd - set(cycle_class):
        for s, t in enumerate(dfa.transitions[r]):
            if t in cycle_class:
                prefix = _decompose(dfa, initial, frozenset([r]), blocked, memo)
                if prefix:
                    entries.append((index[t], prefix, (s,)))
    if initial in cycle_class:
        entries.append((index[initial], [(Block(()),)], ()))

    for i, prefix_pieces, step_in in entries:
        loop = tuple(letters[i:] + letters[:i])
        for j in range(d):
            arc = tuple(letters[(i + m) % d] for m in range((j - i) % d))
            mid = [Block(step_in), Block(loop, starred=True), Block(arc)]
            tails: list[list[Block]] = []
            if order[j] in accepting:
                tails.append([])
            for s, t in enumerate(dfa.transitions[order[j]]):
                if t not in blocked:
                    for suffix in _decompose(dfa, t, accepting, blocked, memo):
                        tails.append([Block((s,))] + list(suffix))
            for left in prefix_pieces:
                for tail in tails:
                    pieces.append(_clean_piece(list(left) + mid + tail))

    memo[key] = pieces
    return pieces


def decompose_sparse(dfa: Dfa) -> Decomposition:
    """Write the accepted language as a finite union of chains of literal
    words and starred cycle words.  Requires a sparse input."""
    verdict = is_sparse(dfa)
    if not verdict.sparse:
        raise InputError("language grows exponentially; no decomposition exists")
    pieces = _decompose(dfa, dfa.initial, frozenset(dfa.accepting),
                        frozenset(), {})
    return tuple(dict.fromkeys(pieces))


def degree_bound(decomposition: Decomposition) -> int:
    """Max number of starred blocks in any piece; the cumulative growth
    count is O(n^d) for this d."""
    return max((sum(1 for b in piece if b.starred) for piece in decomposition),
               default=0)


def certificate(dfa: Dfa) -> SparseCertificate:
    """Full analysis: verdict plus decomposition and degree, or witness."""
    verdict = is_sparse(dfa)
    if not verdict.sparse:
        return verdict
    dec = decompose_sparse(dfa)
    return SparseCertificate(True, decomposition=dec, degree=degree_bound(dec))


# ---------------------------------------------------------------------------
# serialization and re-compilation

def decomposition_json_obj(decomposition: Decomposition) -> dict:
    pieces = []
    for piece in decomposition:
        blocks = [{"wStar": list(b.word)} if b.starred else {"v": list(b.word)}
                  for b in piece]
        pieces.append({"blocks": blocks})
    return {"pieces": pieces}


def decomposition_from_json_obj(obj) -> Decomposition:
    pieces = []
    for piece in obj["pieces"]:
        blocks = []
        for b in piece["blocks"]:
            if "wStar" in b:
                blocks.append(Block(tuple(b["wStar"]), starred=True))
            else:
                blocks.append(Block(tuple(b["v"])))
        pieces.append(tuple(blocks))
    return tuple(pieces)


def compile_decomposition(symbols, decomposition: Decomposition,
                          arity: int = 1) -> Dfa:
    """Build the DFA of a decomposition (union of the pieces), for
    equivalence checks against the automaton it came from."""
    n_sym = len(symbols)
    # epsilon-NFA: node -> per-symbol successor sets, plus epsilon edges
    edges: list[list[set[int]]] = []
    eps: list[set[int]] = []

    def node() -> int:
        edges.append([set() for _ in range(n_sym)])
        eps.append(set())
        return len(edges) - 1

    start = node()
    finals: set[int] = set()
    for piece in decomposition:
        cur = node()
        eps[start].add(cur)
        for bl in piece:
            if bl.starred:
                entry = node()  # fresh loop node keeps consecutive stars ordered
                eps[cur].add(entry)
                cur = entry
                for i, s in enumerate(bl.word):
                    nxt = entry if i == len(bl.word) - 1 else node()
                    edges[cur][s].add(nxt)
                    cur = nxt
            else:
                for s in bl.word:
                    nxt = node()
                    edges[cur][s].add(nxt)
                    cur = nxt
        finals.add(cur)

    def closure(states: frozenset[int]) -> frozenset[int]:
        out = set(states)
        queue = list(states)
        while queue:
            q = queue.pop()
            for t in eps[q]:
                if t not in out:
                    out.add(t)
                    queue.append(t)
        return frozenset(out)

    init = closure(frozenset([start]))
    ids = {init: 0}
    queue = [init]
    rows: list[tuple[int, ...]] = []
    accepting: set[int] = set()
    while queue:
        states = queue.pop(0)
        if states & finals:
            accepting.add(ids[states])
        row = []
        for s in range(n_sym):
            nxt = closure(frozenset(t for q in states for t in edges[q][s]))
            if nxt not in ids:
                ids[nxt] = len(ids)
                queue.append(nxt)
            row.append(ids[nxt])
        rows.append(tuple(row))
    dfa = Dfa(tuple(symbols), arity, 0, frozenset(accepting), tuple(rows))
    return minimize(canonical_renumber(dfa))
