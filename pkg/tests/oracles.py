"""Independent reference computations used by the tests.

Nothing here imports the package: the oracles use exact rationals or
closed forms so that agreement is meaningful.
"""

from fractions import Fraction
from itertools import product
import math


def exact_rigidity_rows(points, edges):
    """Rigidity matrix over the rationals (interleaved x, y columns)."""
    n = len(points)
    rows = []
    for i, j in edges:
        row = [Fraction(0)] * (2 * n)
        dx = Fraction(points[i][0]) - Fraction(points[j][0])
        dy = Fraction(points[i][1]) - Fraction(points[j][1])
        row[2 * i], row[2 * i + 1] = dx, dy
        row[2 * j], row[2 * j + 1] = -dx, -dy
        rows.append(row)
    return rows


def exact_rank(rows):
    """Rank by fraction-exact Gaussian elimination."""
    m = [list(r) for r in rows]
    if not m:
        return 0
    rank, ncol = 0, len(m[0])
    for c in range(ncol):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def exact_nullity(points, edges):
    return 2 * len(points) - exact_rank(exact_rigidity_rows(points, edges))


def four_bar_p3(p2):
    """Unit rhombus with p0=(0,0), p1=(1,0) pinned: p3 = p2 - (1, 0)."""
    return (p2[0] - 1.0, p2[1])


def harmonic_classes(n):
    """Congruence classes of the 2**n signed harmonic chains.

    Points lie on a line with vertex 0 at the origin, so a labelled
    isometry is x -> x or x -> -x; classes are canonical sign-normalised
    tuples of exact positions.
    """
    seen = set()
    for signs in product((1, -1), repeat=n):
        pos = [Fraction(0)]
        for k, s in enumerate(signs, start=1):
            pos.append(pos[-1] + Fraction(s, k))
        neg = tuple(-p for p in pos)
        seen.add(min(tuple(pos), neg))
    return len(seen)


def basel_tail(N):
    """sum_{n > N} 1/n^2 in closed form via the trigamma value."""
    return math.pi ** 2 / 6 - sum(1.0 / k ** 2 for k in range(1, N + 1))


def cos_series_inv_square(t):
    """sum_{n>=1} cos(n t)/n^2 for 0 <= t <= 2 pi."""
    return math.pi ** 2 / 6 - math.pi * t / 2 + t * t / 4
