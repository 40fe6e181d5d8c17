"""Exact arithmetic in Z^d: vectors, integer matrices, endomorphisms, lattices.

Everything in this module is exact.  Vectors are tuples of Python ints,
matrices are tuples of row tuples, and the few places that need division go
through fractions.Fraction.  Lattices (subgroups of Z^d) are kept in row
Hermite normal form so that equality, membership tests and coset reduction
are all canonical.

The workhorse is :func:`hermite_rows`, row reduction over Z with an optional
unimodular transform.  Kernels, solvability, lattice intersections and
preimages are all phrased as left-kernel computations on stacked matrices so
that a single reduction routine carries the whole module.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

Vec = tuple[int, ...]
Mat = tuple[tuple[int, ...], ...]


# ---------------------------------------------------------------------------
# vectors

def as_vec(seq) -> Vec:
    return tuple(int(x) for x in seq)


def zero_vec(dim: int) -> Vec:
    return (0,) * dim


def vadd(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def vsub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def vneg(a: Vec) -> Vec:
    return tuple(-x for x in a)


def vscale(k: int, a: Vec) -> Vec:
    return tuple(k * x for x in a)


def supnorm(a: Vec) -> int:
    return max(abs(x) for x in a) if a else 0


def box_points(radius: int, dim: int):
    """All integer vectors with sup-norm <= radius, in lexicographic order."""
    return [as_vec(p) for p in itertools.product(range(-radius, radius + 1), repeat=dim)]


# ---------------------------------------------------------------------------
# dense integer matrices (rows of tuples)

def mat_identity(n: int) -> Mat:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def mat_mul(a: Mat, b: Mat) -> Mat:
    bt = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def mat_vec(a: Mat, v: Vec) -> Vec:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def vec_mat(v: Vec, a: Mat) -> Vec:
    # row vector times matrix
    cols = list(zip(*a))
    return tuple(sum(x * y for x, y in zip(v, col)) for col in cols)


def mat_sub(a: Mat, b: Mat) -> Mat:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_transpose(a: Mat) -> Mat:
    return tuple(zip(*a))


def mat_pow(a: Mat, n: int) -> Mat:
    if n < 0:
        raise ValueError("negative matrix power")
    result = mat_identity(len(a))
    base = a
    while n:
        if n & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        n >>= 1
    return result


def mat_det(a: Mat) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = len(a)
    if n == 0:
        return 1
    m = [list(r) for r in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k]:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def mat_inverse_frac(a: Mat) -> tuple[tuple[Fraction, ...], ...]:
    """Exact inverse over Q.  Raises ValueError if singular."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(a)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col]), None)
        if piv is None:
            raise ValueError("matrix is singular")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for i in range(n):
            if i != col and m[i][col]:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[col])]
    return tuple(tuple(row[n:]) for row in m)


def mat_inverse_unimodular(a: Mat) -> Mat:
    """Integer inverse of a unimodular matrix."""
    inv = mat_inverse_frac(a)
    out = []
    for row in inv:
        if any(x.denominator != 1 for x in row):
            raise ValueError("matrix is not unimodular")
        out.append(tuple(int(x) for x in row))
    return tuple(out)


# ---------------------------------------------------------------------------
# integer row reduction

def hermite_rows(rows, ncols: int | None = None, track: bool = False):
    """Row Hermite normal form over Z.

    Returns ``(H, T, rank)`` where ``H`` has the same row span as the input,
    pivots are positive with entries above each pivot reduced into
    ``[0, pivot)``, zero rows are at the bottom, and — when ``track`` is set —
    ``T`` is unimodular with ``T @ M == H``.  Rows ``rank:`` of ``T`` are then
    a basis for the left kernel of ``M``.
    """
    m = [list(r) for r in rows]
    n = len(m)
    if ncols is None:
        ncols = len(m[0]) if n else 0
    t = [[int(i == j) for j in range(n)] for i in range(n)] if track else None

    def addmul(dst, src, q):
        mr, ms = m[dst], m[src]
        for j in range(ncols):
            mr[j] += q * ms[j]
        if track:
            tr, ts = t[dst], t[src]
            for j in range(n):
                tr[j] += q * ts[j]

    def swap(i, j):
        m[i], m[j] = m[j], m[i]
        if track:
            t[i], t[j] = t[j], t[i]

    def negate(i):
        m[i] = [-x for x in m[i]]
        if track:
            t[i] = [-x for x in t[i]]

    pivot = 0
    for col in range(ncols):
        row = next((i for i in range(pivot, n) if m[i][col]), None)
        if row is None:
            continue
        swap(pivot, row)
        for i in range(pivot + 1, n):
            # euclidean loop leaves gcd of the two column entries at `pivot`
            while m[i][col]:
                q = m[pivot][col] // m[i][col]
                addmul(pivot, i, -q)
                swap(pivot, i)
        if m[pivot][col] < 0:
            negate(pivot)
        for i in range(pivot):
            q = m[i][col] // m[pivot][col]
            if q:
                addmul(i, pivot, -q)
        pivot += 1
        if pivot == n:
            break
    H = tuple(tuple(r) for r in m)
    T = tuple(tuple(r) for r in t) if track else None
    return H, T, pivot


def left_kernel(rows, ncols: int | None = None) -> list[Vec]:
    """Basis for {c : c @ M == 0} as row vectors."""
    _, T, rank = hermite_rows(rows, ncols, track=True)
    return [T[i] for i in range(rank, len(T))]


def _pivot_col(row) -> int | None:
    for j, x in enumerate(row):
        if x:
            return j
    return None


def express_in_hermite(H, rank: int, target: Vec):
    """Coefficients c with c @ H[:rank] == target, or None if impossible."""
    v = list(target)
    coeffs = [0] * rank
    for i in range(rank):
        p = _pivot_col(H[i])
        if v[p] % H[i][p]:
            return None
        q = v[p] // H[i][p]
        coeffs[i] = q
        if q:
            for j in range(len(v)):
                v[j] -= q * H[i][j]
    if any(v):
        return None
    return coeffs


# ---------------------------------------------------------------------------
# Smith normal form

def smith_normal_form(mat: Mat):
    """(D, U, V) with U @ mat @ V == D, U, V unimodular, D diagonal and each
    diagonal entry nonnegative and dividing the next."""
    A = [list(r) for r in mat]
    nrows = len(A)
    ncols = len(A[0]) if nrows else 0
    U = [[int(i == j) for j in range(nrows)] for i in range(nrows)]
    V = [[int(i == j) for j in range(ncols)] for i in range(ncols)]

    def row_addmul(i, j, q):
        A[i] = [x + q * y for x, y in zip(A[i], A[j])]
        U[i] = [x + q * y for x, y in zip(U[i], U[j])]

    def col_addmul(i, j, q):
        for r in A:
            r[i] += q * r[j]
        for r in V:
            r[i] += q * r[j]

    def row_swap(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def col_swap(i, j):
        for r in A:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]

    def row_negate(i):
        A[i] = [-x for x in A[i]]
        U[i] = [-x for x in U[i]]

    def clear(t) -> bool:
        piv = None
        for i in range(t, nrows):
            for j in range(t, ncols):
                if A[i][j] and (piv is None or abs(A[i][j]) < abs(A[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            return False
        row_swap(t, piv[0])
        col_swap(t, piv[1])
        while True:
            for i in range(t + 1, nrows):
                while A[i][t]:
                    q = A[i][t] // A[t][t]
                    row_addmul(i, t, -q)
                    if A[i][t]:
                        row_swap(i, t)
            for j in range(t + 1, ncols):
                while A[t][j]:
                    q = A[t][j] // A[t][t]
                    col_addmul(j, t, -q)
                    if A[t][j]:
                        col_swap(j, t)
            if all(A[i][t] == 0 for i in range(t + 1, nrows)):
                break
        if A[t][t] < 0:
            row_negate(t)
        return True

    k = min(nrows, ncols)
    for t in range(k):
        if not clear(t):
            break
    # enforce the divisibility chain
    changed = True
    while changed:
        changed = False
        for t in range(k - 1):
            a, b = A[t][t], A[t + 1][t + 1]
            if a and b % a:
                # pull the next diagonal entry into column t and re-clear
                col_addmul(t, t + 1, 1)
                clear(t)
                for s in range(t + 1, k):
                    clear(s)
                changed = True
                break
    D = tuple(tuple(r) for r in A)
    return D, tuple(tuple(r) for r in U), tuple(tuple(r) for r in V)


# ---------------------------------------------------------------------------
# endomorphisms of Z^d

@dataclass(frozen=True)
class Endomorphism:
    """An injective endomorphism of Z^d given by an integer matrix.

    Use :meth:`scalar` for multiplication-by-k maps and :meth:`from_rows`
    for general matrices; both reject non-injective input.
    """

    rows: Mat

    @staticmethod
    def scalar(k: int, dim: int = 1) -> "Endomorphism":
        if abs(int(k)) < 2:
            raise ValueError(f"scalar endomorphism needs |k| >= 2, got {k}")
        return Endomorphism(tuple(tuple(int(k) if i == j else 0 for j in range(dim))
                                  for i in range(dim)))

    @staticmethod
    def from_rows(rows) -> "Endomorphism":
        m = tuple(tuple(int(x) for x in row) for row in rows)
        if not m or any(len(r) != len(m) for r in m):
            raise ValueError("endomorphism matrix must be square and nonempty")
        if mat_det(m) == 0:
            raise ValueError("endomorphism matrix must have nonzero determinant")
        return Endomorphism(m)

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __call__(self, v: Vec) -> Vec:
        return mat_vec(self.rows, v)

    def det(self) -> int:
        return mat_det(self.rows)

    def is_scalar(self) -> bool:
        k = self.rows[0][0]
        return self.rows == tuple(tuple(k if i == j else 0 for j in range(self.dim))
                                  for i in range(self.dim))

    def scalar_value(self) -> int:
        if not self.is_scalar():
            raise ValueError("not a scalar endomorphism")
        return self.rows[0][0]

    def power(self, n: int) -> "Endomorphism":
        if n < 1:
            raise ValueError("endomorphism power must be >= 1")
        return Endomorphism(mat_pow(self.rows, n))

    def inverse_apply(self, v: Vec) -> Vec | None:
        """The unique x with F(x) == v, or None if v is outside the image."""
        inv = self._inverse_frac()
        out = []
        for row in inv:
            x = sum(a * b for a, b in zip(row, v))
            if x.denominator != 1:
                return None
            out.append(int(x))
        return tuple(out)

    def _inverse_frac(self):
        cached = _INVERSE_CACHE.get(self.rows)
        if cached is None:
            cached = _INVERSE_CACHE[self.rows] = mat_inverse_frac(self.rows)
        return cached

    def inverse_sup_norm(self) -> Fraction:
        """Operator sup-norm of F^{-1}: the max row sum of absolute values."""
        return max(sum(abs(x) for x in row) for row in self._inverse_frac())

    def expansion_factor(self) -> Fraction:
        """1 / ||F^{-1}||_inf — every vector's sup-norm grows by at least this."""
        return 1 / self.inverse_sup_norm()

    def shifted_det(self, power: int = 1) -> int:
        """det(F^power - identity); nonzero iff no eigenvalue of F^power is 1."""
        return mat_det(mat_sub(mat_pow(self.rows, power), mat_identity(self.dim)))

    def image_lattice(self) -> "Lattice":
        return Lattice.from_rows(self.dim, self.rows)

    def __repr__(self) -> str:
        if self.is_scalar():
            return f"Endomorphism.scalar({self.rows[0][0]}, dim={self.dim})"
        return f"Endomorphism.from_rows({[list(r) for r in self.rows]!r})"


_INVERSE_CACHE: dict[Mat, tuple] = {}


# ---------------------------------------------------------------------------
# lattices (subgroups of Z^d)

@dataclass(frozen=True)
class Lattice:
    """A subgroup of Z^d, stored as a canonical row-Hermite basis.

    Two Lattice objects are equal iff they are the same subgroup.
    """

    dim: int
    rows: tuple[Vec, ...]

    @staticmethod
    def from_rows(dim: int, gens) -> "Lattice":
        gens = [as_vec(g) for g in gens]
        for g in gens:
            if len(g) != dim:
                raise ValueError(f"generator {g} has wrong dimension (want {dim})")
        if not gens:
            return Lattice(dim, ())
        H, _, rank = hermite_rows(gens, dim)
        return Lattice(dim, tuple(H[:rank]))

    @staticmethod
    def zero(dim: int) -> "Lattice":
        return Lattice(dim, ())

    @staticmethod
    def full(dim: int) -> "Lattice":
        return Lattice(dim, mat_identity(dim))

    @property
    def rank(self) -> int:
        return len(self.rows)

    def is_trivial(self) -> bool:
        return not self.rows

    def is_full(self) -> bool:
        return self == Lattice.full(self.dim)

    def contains(self, v: Vec) -> bool:
        if len(v) != self.dim:
            raise ValueError("dimension mismatch")
        return express_in_hermite(self.rows, self.rank, v) is not None

    __contains__ = contains

    def coset_reduce(self, v: Vec) -> Vec:
        """Canonical representative of v + L (pivot coordinates into [0, pivot))."""
        w = list(v)
        for row in self.rows:
            p = _pivot_col(row)
            q = w[p] // row[p]
            if q:
                for j in range(self.dim):
                    w[j] -= q * row[j]
        return tuple(w)

    def index_in_full(self) -> int | None:
        """[Z^d : L] when finite (full rank), else None."""
        if self.rank != self.dim:
            return None
        result = 1
        for row in self.rows:
            result *= row[_pivot_col(row)]
        return result

    def sum(self, other: "Lattice") -> "Lattice":
        self._check_dim(other)
        return Lattice.from_rows(self.dim, list(self.rows) + list(other.rows))

    def intersect(self, other: "Lattice") -> "Lattice":
        """x in L1 cap L2 via the left kernel of the stacked bases."""
        self._check_dim(other)
        if self.is_trivial() or other.is_trivial():
            return Lattice.zero(self.dim)
        stacked = list(self.rows) + [vneg(r) for r in other.rows]
        gens = []
        for c in left_kernel(stacked, self.dim):
            x = zero_vec(self.dim)
            for coeff, row in zip(c[:self.rank], self.rows):
                x = vadd(x, vscale(coeff, row))
            gens.append(x)
        return Lattice.from_rows(self.dim, gens)

    def image_under(self, endo: Endomorphism) -> "Lattice":
        return Lattice.from_rows(self.dim, [endo(r) for r in self.rows])

    def preimage_under(self, endo: Endomorphism) -> "Lattice":
        """{x : F(x) in L}.  Computed from the left kernel of [F^T ; -B]."""
        if endo.dim != self.dim:
            raise ValueError("dimension mismatch")
        if self.is_trivial():
            return Lattice.zero(self.dim)
        d = self.dim
        stacked = list(mat_transpose(endo.rows)) + [vneg(r) for r in self.rows]
        gens = [c[:d] for c in left_kernel(stacked, d)]
        return Lattice.from_rows(d, gens)

    def quotient_reps(self, sub: "Lattice") -> list[Vec]:
        """Coset representatives for L / sub, sorted; requires a finite quotient.

        ``sub`` must be contained in L with equal rank.
        """
        self._check_dim(sub)
        if sub.rank != self.rank:
            raise ValueError("quotient is infinite (rank drop)")
        k = self.rank
        if k == 0:
            return [zero_vec(self.dim)]
        X = []
        for row in sub.rows:
            c = express_in_hermite(self.rows, k, row)
            if c is None:
                raise ValueError("not a sublattice")
            X.append(tuple(c))
        D, _, V = smith_normal_form(tuple(X))
        diag = [D[i][i] for i in range(k)]
        if any(d == 0 for d in diag):
            raise ValueError("quotient is infinite")
        W = mat_inverse_unimodular(V)
        reps = []
        for z in itertools.product(*[range(d) for d in diag]):
            coeffs = vec_mat(z, W)
            x = zero_vec(self.dim)
            for coeff, row in zip(coeffs, self.rows):
                x = vadd(x, vscale(coeff, row))
            reps.append(x)
        reps.sort()
        return reps

    def saturate_under_preimage(self, endo: Endomorphism, max_steps: int = 64):
        """Iterate L -> F^{-1}(L) until stable; returns (steps, stable lattice).

        Requires F(L) ⊆ L so that the chain is increasing.
        """
        for row in self.rows:
            if endo(row) not in self:
                raise ValueError("lattice is not invariant under the endomorphism")
        current = self
        for step in range(max_steps + 1):
            nxt = current.preimage_under(endo)
            if nxt == current:
                return step, current
            current = nxt
        raise RuntimeError("saturation did not stabilize (is F injective?)")

    def _check_dim(self, other: "Lattice") -> None:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")

    def __repr__(self) -> str:
        return f"Lattice(dim={self.dim}, rows={[list(r) for r in self.rows]!r})"


def solve_columns(rows: Mat, target: Vec):
    """One integer solution x of M @ x == target (M given by rows), or None."""
    cols = mat_transpose(rows)
    H, T, rank = hermite_rows(cols, len(rows), track=True)
    c = express_in_hermite(H, rank, target)
    if c is None:
        return None
    x = [0] * len(cols)
    for coeff, trow in zip(c, T):
        for j in range(len(cols)):
            x[j] += coeff * trow[j]
    return tuple(x)
