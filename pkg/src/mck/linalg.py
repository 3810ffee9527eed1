"""Small exact linear algebra over the rationals.

Matrices are lists of lists of Fraction (rows).  Everything here is
fraction-free in spirit but lazy in practice: Fraction arithmetic keeps the
code short and the matrices involved are tiny (at most ~20 x ~20).
"""

from fractions import Fraction


def frac_rows(rows):
    """Copy `rows` into a fresh matrix of Fractions."""
    return [[Fraction(x) for x in row] for row in rows]


def rref(matrix):
    """Reduced row echelon form.

    Returns (R, pivots) where R is the reduced matrix and pivots the list of
    pivot column indices.  The input is not modified.
    """
    R = frac_rows(matrix)
    if not R:
        return R, []
    ncols = len(R[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(R)):
            if R[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        R[r], R[pivot] = R[pivot], R[r]
        inv = R[r][c]
        R[r] = [x / inv for x in R[r]]
        for i in range(len(R)):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == len(R):
            break
    return R, pivots


def rank(matrix):
    return len(rref(matrix)[1])


def solve(A, b):
    """Solve A x = b exactly.

    Returns one solution as a list of Fractions, or None if inconsistent.
    If the system is underdetermined, free variables are set to 0.
    """
    if not A:
        return [] if all(x == 0 for x in b) else None
    n = len(A[0])
    aug = [list(map(Fraction, row)) + [Fraction(bi)] for row, bi in zip(A, b)]
    R, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = R[i][n]
    return x


def solve_unique(A, b):
    """Solve A x = b when A is square and invertible; raises on failure."""
    x = solve(A, b)
    if x is None or rank(A) != len(A[0]):
        raise ValueError("linear system is not uniquely solvable")
    return x


def solve_square(A, b):
    """Solve a square system in one elimination pass.

    Returns the unique solution, or None when A is singular (regardless of
    consistency).  Input rows must already be Fractions or ints.
    """
    n = len(A)
    if n == 0:
        return []
    M = [[Fraction(x) for x in row] + [Fraction(bv)]
         for row, bv in zip(A, b)]
    for c in range(n):
        pivot = None
        for i in range(c, n):
            if M[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            return None
        M[c], M[pivot] = M[pivot], M[c]
        inv = M[c][c]
        if inv != 1:
            M[c] = [x / inv for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * bb for a, bb in zip(M[i], M[c])]
    return [M[i][n] for i in range(n)]


def mat_mul(A, B):
    n, k = len(A), len(B)
    m = len(B[0]) if B else 0
    out = [[Fraction(0)] * m for _ in range(n)]
    for i in range(n):
        Ai = A[i]
        for t in range(k):
            a = Ai[t]
            if a == 0:
                continue
            Bt = B[t]
            row = out[i]
            for j in range(m):
                row[j] += a * Bt[j]
    return out


def mat_vec(A, v):
    return [sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in A]


def identity(n):
    return [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]


def mat_eq(A, B):
    return len(A) == len(B) and all(ra == rb for ra, rb in zip(A, B))


def affine_rank(points):
    """Dimension of the affine hull of `points` (each a rational vector)."""
    if not points:
        return -1
    base = points[0]
    diffs = [[Fraction(x) - Fraction(y) for x, y in zip(p, base)] for p in points[1:]]
    return rank(diffs)
