"""Exact integer arithmetic for linear sequences modulo M.

These are the primitives behind the shortest-vector search on the slit
torus: finding the first ``x`` for which ``(A x + B) mod M`` lands in a
window is the big-integer form of "the first n with ||n kappa - c|| < eps".
"""

from fractions import Fraction
import math


def first_in_range(a, m, lo, hi):
    """Smallest x >= 0 with lo <= (a x) mod m <= hi, or None.

    Requires 0 <= lo <= hi < m. Runs a Euclid-style descent on (a, m),
    iteratively so that very large moduli do not hit the recursion limit.
    """
    if not (0 <= lo <= hi < m):
        raise ValueError("need 0 <= lo <= hi < m")
    frames = []
    while True:
        if lo == 0:
            x = 0
            break
        a %= m
        if a == 0:
            x = None
            break
        k = -(-lo // a)
        if a * k <= hi:
            x = k
            break
        # no multiple of a inside [lo, hi]; pass to the reduced problem
        # m y mod a in [(-hi) mod a, (-lo) mod a]
        frames.append((a, m, lo))
        lo, hi, a, m = (-hi) % a, (-lo) % a, m % a, a
    while frames:
        if x is None:
            return None
        a, m, lo = frames.pop()
        x = -(-(lo + m * x) // a)
    return x


def first_hit(a, b, m, w):
    """Smallest x >= 0 with (a x + b) mod m <= w, or None."""
    a %= m
    b %= m
    if b <= w:
        return 0
    return first_in_range(a, m, m - b, m - b + w)


def floor_sum(n, m, a, b):
    """Sum of floor((a i + b) / m) for i in [0, n), any integers, m > 0."""
    if n <= 0:
        return 0
    ans = 0
    if a < 0 or a >= m:
        q, a = divmod(a, m)
        ans += q * n * (n - 1) // 2
    if b < 0 or b >= m:
        q, b = divmod(b, m)
        ans += q * n
    while True:
        if a >= m:
            ans += (n - 1) * n // 2 * (a // m)
            a %= m
        if b >= m:
            ans += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            break
        n, b = divmod(y_max, m)
        m, a = a, m
    return ans


def count_hits(a, b, m, w, n):
    """Number of x in [0, n) with (a x + b) mod m <= w (0 <= w < m).

    Uses the identity [r <= w] = floor((r + m - w - 1) / m) ... expressed
    through floor sums, giving an independent check of :func:`first_hit`.
    """
    # (a x + b) mod m <= w  <=>  floor((a x + b + m - 1 - w) / m) - floor((a x + b) / m) == 0
    # the difference is 0 or 1, and equals 1 exactly when the residue > w
    over = floor_sum(n, m, a, b + m - 1 - w) - floor_sum(n, m, a, b)
    return n - over


def first_hit_brute(a, b, m, w, limit):
    for x in range(limit):
        if (a * x + b) % m <= w:
            return x
    return None


def best_rational(x, max_den):
    """Closest fraction with denominator at most ``max_den``."""
    return Fraction(x).limit_denominator(max_den) if not isinstance(x, Fraction) \
        else x.limit_denominator(max_den)


def is_rational(x, max_den=10 ** 6, tol=1e-12):
    """Rationality test with a denominator bound.

    Fractions are rational by construction; other numbers count as
    rational when a fraction with denominator <= ``max_den`` lies within
    ``tol``.
    """
    if isinstance(x, (int, Fraction)):
        return True
    f = Fraction(str(x)) if not isinstance(x, float) else Fraction(x)
    r = f.limit_denominator(max_den)
    return abs(f - r) <= tol


def gcd(a, b):
    return math.gcd(a, b)
