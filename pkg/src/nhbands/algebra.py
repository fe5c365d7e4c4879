"""Exact integer algebra for the N-band classification group.

The relevant group is Z^{N-1} / <columns of (1 - s1), (1 - s2)>, where s1 and
s2 are the permutations induced by the two braids on the one-skeleton of the
torus, acting on the sum-zero lattice spanned by e_i - e_{i+1}. Its invariant
factors come from the Smith normal form. All arithmetic uses Python ints.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import gcd
from typing import Sequence

from .errors import SizeMismatch


@dataclass(frozen=True)
class Permutation:
    """Bijection of {1..N}: ``images[i-1] = sigma(i)``."""

    images: tuple

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        if sorted(imgs) != list(range(1, len(imgs) + 1)):
            raise ValueError(f"not a permutation of 1..{len(imgs)}: {imgs}")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_zero_based(cls, seq):
        return cls(tuple(int(x) + 1 for x in seq))

    @classmethod
    def transposition(cls, n, i, j):
        imgs = list(range(1, n + 1))
        imgs[i - 1], imgs[j - 1] = j, i
        return cls(tuple(imgs))

    @classmethod
    def cycle(cls, n, *elems):
        imgs = list(range(1, n + 1))
        for a, b in zip(elems, elems[1:] + elems[:1]):
            imgs[a - 1] = b
        return cls(tuple(imgs))

    @classmethod
    def from_cycles(cls, text, n):
        """Parse cycle notation, e.g. ``"(1 2)(3 4 5)"``; empty string is the identity."""
        text = text.strip()
        imgs = list(range(1, n + 1))
        if not text:
            return cls(tuple(imgs))
        if not re.fullmatch(r"(\(\s*\d+(?:[\s,]+\d+)*\s*\)\s*)+", text):
            raise ValueError(f"bad cycle notation {text!r}")
        # compose right-to-left, so "(1 2)(2 3)" means (1 2) after (2 3)
        perm = cls(tuple(imgs))
        for group in reversed(re.findall(r"\(([^)]*)\)", text)):
            elems = [int(x) for x in re.split(r"[\s,]+", group.strip())]
            if any(not 1 <= e <= n for e in elems) or len(set(elems)) != len(elems):
                raise ValueError(f"cycle {group!r} is not valid on {n} points")
            perm = cls.cycle(n, *elems) * perm
        return perm

    @property
    def n(self):
        return len(self.images)

    def __call__(self, i):
        return self.images[i - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        """Composition: (self * other)(i) = self(other(i))."""
        if self.n != other.n:
            raise SizeMismatch("permutations of different sizes")
        return Permutation(tuple(self(other(i)) for i in range(1, self.n + 1)))

    def inverse(self):
        inv = [0] * self.n
        for i, s in enumerate(self.images, start=1):
            inv[s - 1] = i
        return Permutation(tuple(inv))

    def is_identity(self):
        return self.images == tuple(range(1, self.n + 1))

    def parity(self):
        """0 for even, 1 for odd."""
        seen, odd = set(), 0
        for i in range(1, self.n + 1):
            if i in seen:
                continue
            length, j = 0, i
            while j not in seen:
                seen.add(j)
                j = self(j)
                length += 1
            odd ^= (length - 1) & 1
        return odd

    def cycles(self):
        seen, out = set(), []
        for i in range(1, self.n + 1):
            if i in seen:
                continue
            cyc, j = [], i
            while j not in seen:
                seen.add(j)
                cyc.append(j)
                j = self(j)
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def __str__(self):
        return "".join("(" + " ".join(map(str, c)) + ")" for c in self.cycles()) or "()"

    def matrix(self):
        """N x N integer matrix sending e_i to e_sigma(i)."""
        m = [[0] * self.n for _ in range(self.n)]
        for i in range(1, self.n + 1):
            m[self(i) - 1][i - 1] = 1
        return m


def _diff_coords(a, b, n):
    """Coordinates of e_a - e_b in the basis f_k = e_k - e_{k+1}, k = 1..n-1."""
    v = [0] * (n - 1)
    if a < b:
        for k in range(a, b):
            v[k - 1] += 1
    elif a > b:
        for k in range(b, a):
            v[k - 1] -= 1
    return v


def reduced_perm_matrix(sigma: Permutation):
    """Action of ``sigma`` on the sum-zero lattice in the basis {e_i - e_{i+1}}.

    Column i holds the coordinates of sigma(e_i - e_{i+1}).
    """
    n = sigma.n
    cols = [_diff_coords(sigma(i), sigma(i + 1), n) for i in range(1, n)]
    return [[cols[j][i] for j in range(n - 1)] for i in range(n - 1)]


@dataclass(frozen=True)
class SNFResult:
    U: list
    D: list
    V: list
    divisors: tuple

    @property
    def rank(self):
        return len(self.divisors)


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def snf(M: Sequence[Sequence[int]]) -> SNFResult:
    """Smith normal form ``U M V = D`` with unimodular U, V.

    Pivots on the nonzero entry of least absolute value in the active block,
    reduces its row and column by Euclidean division, and repeats until the
    pivot divides everything below and to the right of it.
    """
    A = [[int(x) for x in row] for row in M]
    m = len(A)
    n = len(A[0]) if m else 0
    if any(len(r) != n for r in A):
        raise ValueError("ragged matrix")
    U, V = _identity(m), _identity(n)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst += q * row_src
        if q:
            A[dst] = [x + q * y for x, y in zip(A[dst], A[src])]
            U[dst] = [x + q * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, q):  # col_dst += q * col_src
        if q:
            for row in A:
                row[dst] += q * row[src]
            for row in V:
                row[dst] += q * row[src]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                for j in range(t, n):
                    if A[i][j] and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                break
            swap_rows(t, best[0])
            swap_cols(t, best[1])
            p = A[t][t]
            clean = True
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
                    clean &= A[i][t] == 0
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
                    clean &= A[t][j] == 0
            if not clean:
                continue
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if A[i][j] % p), None)
            if bad is None:
                break
            add_row(t, bad[0], 1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            U[t] = [-x for x in U[t]]
        if A[t][t] == 0:
            break

    divisors = tuple(A[i][i] for i in range(min(m, n)) if A[i][i])
    return SNFResult(U=U, D=A, V=V, divisors=divisors)


def int_det(M):
    """Exact determinant (fraction-free Bareiss elimination)."""
    A = [[int(x) for x in row] for row in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if A[i][k]), None)
            if piv is None:
                return 0
            A[k], A[piv] = A[piv], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def matmul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


@dataclass(frozen=True)
class ClassGroup:
    """Finitely generated abelian group Z_{t1} x ... x Z_{tk} x Z^r."""

    torsion: tuple
    free_rank: int

    def __str__(self):
        parts = [f"Z_{t}" for t in self.torsion]
        if self.free_rank == 1:
            parts.append("Z")
        elif self.free_rank > 1:
            parts.append(f"Z^{self.free_rank}")
        return " x ".join(parts) if parts else "0"

    def order(self):
        """Order of the torsion subgroup."""
        out = 1
        for t in self.torsion:
            out *= t
        return out

    def to_json(self):
        return {"torsion": list(self.torsion), "free_rank": self.free_rank}


def group_from_relations(M, n):
    """Z^n modulo the column span of the n x k integer matrix M."""
    if n == 0:
        return ClassGroup((), 0)
    res = snf(M) if M and M[0] else SNFResult(_identity(n), M, [], ())
    torsion = tuple(d for d in res.divisors if d > 1)
    return ClassGroup(torsion, n - len(res.divisors))


def relation_matrix(s1: Permutation, s2: Permutation):
    """[1 - P(s1) | 1 - P(s2)] in the difference basis, (N-1) x 2(N-1)."""
    if s1.n != s2.n:
        raise SizeMismatch(f"permutations act on {s1.n} and {s2.n} bands")
    n = s1.n - 1
    I = _identity(n)
    blocks = []
    for s in (s1, s2):
        R = reduced_perm_matrix(s)
        blocks.append([[I[i][j] - R[i][j] for j in range(n)] for i in range(n)])
    return [blocks[0][i] + blocks[1][i] for i in range(n)]


def classification_group(s1: Permutation, s2: Permutation) -> ClassGroup:
    if s1.n != s2.n:
        raise SizeMismatch(f"permutations act on {s1.n} and {s2.n} bands")
    if s1.n < 2:
        raise ValueError("need at least two bands")
    return group_from_relations(relation_matrix(s1, s2), s1.n - 1)


def gcd_list(xs):
    g = 0
    for x in xs:
        g = gcd(g, int(x))
    return g
