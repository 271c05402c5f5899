"""The double cover of the square torus branched over two points.

Holonomies of saddle connections are slits ``lam + m + n i`` (joining the
two cone points z0, z1) and primitive lattice loops ``m + n i``. The
shortest-vector sequence along the Teichmueller geodesic of a direction
is computed on this lattice data alone, with exact big-integer search,
and classified by the area-exchange criterion.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import mpmath
import numpy as np

from .arith import first_hit
from .errors import OutOfRange, PrecisionExhausted
from .surface import validate_surface

DEFAULT_DPS = 60
MAX_DEN = 10 ** 6


# numbers: Fractions when exact, mpf otherwise

def parse_real(x, dps=DEFAULT_DPS):
    """Read a real number given as Fraction, int, float, decimal string,
    ``"a/b"``, ``"golden"`` or ``"sqrt2-1"``.

    Returns (value, exact). Fractions, integers and ``"a/b"`` strings are
    exact. A float or decimal string is exact when its reduced denominator
    is at most ``MAX_DEN`` (so ``0.5`` is 1/2); a longer decimal such as
    ``1.6180339887`` is read as a truncated real and becomes an mpf.
    """
    if isinstance(x, Fraction):
        return x, True
    if isinstance(x, int):
        return Fraction(x), True
    if isinstance(x, mpmath.mpf):
        return x, False
    s = repr(x) if isinstance(x, float) else str(x).strip().lower()
    with mpmath.workdps(dps):
        if s in ("golden", "phi"):
            return (1 + mpmath.sqrt(5)) / 2, False
        if s in ("sqrt2-1", "silver"):
            return mpmath.sqrt(2) - 1, False
    try:
        q = Fraction(s)
    except ValueError:
        with mpmath.workdps(dps):
            return mpmath.mpf(s), False
    if "/" in s or q.denominator <= MAX_DEN:
        return q, True
    with mpmath.workdps(dps):
        return mpmath.mpf(s), False


def denominator_rational(x, max_den=MAX_DEN, dps=DEFAULT_DPS):
    """Rational with denominator at most ``max_den``, as given.

    An mpf counts as rational when such a fraction agrees with it to
    ``dps - 5`` digits.
    """
    if isinstance(x, Fraction):
        return x.denominator <= max_den
    man, exp = x.man_exp
    f = Fraction(man) * Fraction(2) ** exp
    r = f.limit_denominator(max_den)
    return abs(f - r) <= abs(f) * Fraction(1, 10 ** (dps - 5))


def _nint(x):
    if isinstance(x, Fraction):
        return round(x)
    return int(mpmath.nint(x))


def _floor(x):
    if isinstance(x, Fraction):
        return math.floor(x)
    return int(mpmath.floor(x))


def _to_float(x):
    return float(x)


def _log(x):
    return float(mpmath.log(mpmath.mpf(x.numerator) / x.denominator)) \
        if isinstance(x, Fraction) else float(mpmath.log(x))


# the surface

@dataclass
class SlitTorus:
    lam: object  # Fraction or mpf
    rational: bool
    surface: object
    z0: int
    z1: int
    dps: int = DEFAULT_DPS

    @property
    def lam_float(self):
        return float(self.lam)


def slit_torus_polygons(lam):
    """Two unit squares slit along [0, lam] x {0}, as hexagons."""
    poly = [(0.0, 0.0), (lam, 0.0), (1.0, 0.0), (1.0, 1.0), (lam, 1.0), (0.0, 1.0)]
    return {
        "polygons": [poly, poly],
        "gluings": [
            [[0, 0], [1, 4]], [[1, 0], [0, 4]],  # slit crossings change sheet
            [[0, 1], [0, 3]], [[1, 1], [1, 3]],
            [[0, 2], [0, 5]], [[1, 2], [1, 5]],
        ],
    }


def build_slit_torus(lam, dps=DEFAULT_DPS):
    """Double of the square torus along a horizontal slit of length ``lam``."""
    val, exact = parse_real(lam, dps)
    if not 0 < val < 1:
        raise OutOfRange("lambda must lie in (0, 1)")
    rational = denominator_rational(val, dps=dps)
    surf = validate_surface(slit_torus_polygons(float(val)))
    z0 = surf.vertex_class(0, 0)
    z1 = surf.vertex_class(0, 1)
    return SlitTorus(val, rational, surf, z0, z1, dps)


def involution_point(point):
    """The deck transformation swaps the two sheets."""
    from .surface import SurfacePoint
    return SurfacePoint(1 - point.poly, point.x, point.y)


# lattice brute force for the set of holonomies

def _lam_exact(lam):
    return lam if isinstance(lam, Fraction) else None


def _is_int(x):
    return x.denominator == 1


def loop_is_connection(m, n, lam):
    """Whether the lattice vector (m, n) is the holonomy of a saddle connection.

    It must be primitive and avoid the other branch point from at least
    one of z0, z1.
    """
    if math.gcd(abs(m), abs(n)) != 1:
        return False
    q = _lam_exact(lam)
    if n == 0:
        # the horizontal closed curve through z0 meets z1 and vice versa
        return False
    if q is None:
        return True
    for sign in (1, -1):
        blocked = any(_is_int(Fraction(k * m, abs(n)) - sign * q) for k in range(1, abs(n)))
        if not blocked:
            return True
    return False


def slit_is_connection(m, n, lam):
    """Whether lam + m + n i is the holonomy of a slit (z0 to z1)."""
    if n == 0:
        return m in (0, -1)
    q = _lam_exact(lam)
    if q is None:
        return True
    x = q + m
    for k in range(1, abs(n)):
        s = Fraction(k, abs(n))
        if _is_int(s * x) or _is_int(s * x - q):
            return False
    return True


def lattice_holonomies(lam, L, norm_kind="euclid"):
    """Set of (kind, m, n) with holonomy length at most L.

    Loops are labelled in canonical orientation (n > 0, or n = 0 and
    m > 0); slits by ``lam + m + n i``.
    """
    lamf = float(lam)
    R = int(math.ceil(L)) + 2
    out = set()

    def length(x, y):
        return math.hypot(x, y) if norm_kind == "euclid" else max(abs(x), abs(y))

    for m in range(-R, R + 1):
        for n in range(-R, R + 1):
            if (m, n) != (0, 0) and (n > 0 or (n == 0 and m > 0)):
                if length(m, n) <= L * (1 + 1e-12) and loop_is_connection(m, n, lam):
                    out.add(("loop", m, n))
            if length(lamf + m, n) <= L * (1 + 1e-12) and slit_is_connection(m, n, lam):
                out.add(("slit", m, n))
    return out


def classify_holonomy(conn, st, tol=1e-9):
    """(kind, m, n) of a kernel saddle connection on the built slit torus."""
    h, v = conn.h, conn.v
    lam = st.lam_float
    if conn.start == conn.end:
        m, n = round(h), round(v)
        if abs(h - m) > tol or abs(v - n) > tol:
            raise ValueError(f"loop holonomy {(h, v)} is not a lattice vector")
        return ("loop", m, n)
    if conn.start == st.z0:
        x, y = h - lam, v
    else:
        x, y = -h - lam, -v
    m, n = round(x), round(y)
    if abs(x - m) > tol or abs(y - n) > tol:
        raise ValueError(f"slit holonomy {(h, v)} is not in lam + Z^2")
    return ("slit", m, n)


# shortest-vector sequence

@dataclass(frozen=True)
class LatticeVector:
    """The vector (m + c lam, n) with c in {-1, 0, 1}, in canonical orientation."""

    m: int
    n: int
    c: int

    @property
    def kind(self):
        return "loop" if self.c == 0 else "slit"

    @property
    def label(self):
        """(m, n) with holonomy m + n i (loop) or +-(lam + m + n i) (slit)."""
        if self.c >= 0:
            return (self.m, self.n)
        return (-self.m, -self.n)

    @property
    def separating(self):
        if self.c == 0:
            return False
        a, b = self.label
        return a % 2 == 0 and b % 2 == 0

    def xy(self, lam):
        return (self.m + self.c * lam, self.n)


@dataclass
class SequenceElement:
    vector: LatticeVector
    h: object  # |x - y kappa| up to the common factor u_y
    v: object  # x kappa + y, same factor
    t: float  # bottom time log(v / |h|)

    @property
    def kind(self):
        return self.vector.kind


@dataclass
class DirectionAnalysis:
    lam: object
    theta: object  # slope dy/dx as given
    kappa: object  # dx/dy
    sequence: list
    pattern: str = "mixed"
    runs: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    b: list = field(default_factory=list)
    partial_sums: list = field(default_factory=list)
    verdict: str = "INCONCLUSIVE"
    cutoff: int = 0
    terminated: bool = False  # rational slope: a vertical vector ends the sequence
    precision_exhausted: bool = False
    stats: dict = field(default_factory=dict)
    rational_lambda: bool = False
    rational_slope: bool = False


class Frontier:
    """Successive minima of the sup length along the geodesic.

    Works with the unnormalized direction (kappa, 1): for a vector (x, y),
    h = x - y kappa and v = x kappa + y, both the true rotated components
    divided by u_y. Ratios and orderings are unaffected.
    """

    def __init__(self, lam, kappa, dps=DEFAULT_DPS):
        self.exact = isinstance(lam, Fraction) and isinstance(kappa, Fraction)
        self.dps = dps
        if self.exact:
            self.lam, self.kappa = lam, kappa
        else:
            with mpmath.workdps(dps):
                self.lam = mpmath.mpf(lam.numerator) / lam.denominator \
                    if isinstance(lam, Fraction) else mpmath.mpf(lam)
                self.kappa = mpmath.mpf(kappa.numerator) / kappa.denominator \
                    if isinstance(kappa, Fraction) else mpmath.mpf(kappa)
        # search parameters for the inexact mode
        self.D = dps
        self.M = 10 ** self.D
        self.y_cap = 10 ** max(1, (dps - 12) // 2)

    def _ctx(self):
        return mpmath.workdps(self.dps) if not self.exact else _Null()

    def hv(self, vec):
        x = vec.m + vec.c * self.lam
        return x - vec.n * self.kappa, x * self.kappa + vec.n

    def element(self, vec):
        with self._ctx():
            h, v = self.hv(vec)
            ah = abs(h)
            if ah == 0 or (not self.exact and ah < mpmath.mpf(10) ** (-(self.dps * 3) // 4)):
                t = math.inf
            else:
                t = _log(v / ah) if self.exact else float(mpmath.log(v / ah))
            return SequenceElement(vec, h, v, t)

    def first(self):
        """Realizer of the sup-norm minimum at t = 0."""
        best = None
        with self._ctx():
            for n in range(0, 4):
                for m in range(-4, 5):
                    for c in (0, 1, -1):
                        if c == 0 and (m, n) == (0, 0):
                            continue
                        vec = LatticeVector(m, n, c)
                        h, v = self.hv(vec)
                        if v <= 0:
                            continue
                        key = (max(abs(h), abs(v)), abs(h))
                        if best is None or key < best[0]:
                            best = (key, vec)
        return self.element(best[1])

    def next(self, cur):
        """Next staircase point: minimal v among vectors with |h| < |h(cur)|."""
        with self._ctx():
            H = abs(cur.h)
            if H == 0:
                return None
            cands = []
            if 4 * H >= 1:
                cands = self._brute(H, cur)
            else:
                for c in (0, 1, -1):
                    vec = self._first_for(c, H)
                    if vec is not None:
                        cands.append(vec)
                # horizontal vectors (y = 0) only matter while H exceeds lam or 1 - lam
                for c in (1, -1):
                    for m in (-1, 0, 1):
                        vec = LatticeVector(m, 0, c)
                        h, v = self.hv(vec)
                        if abs(h) < H and v > 0:
                            cands.append(vec)
            best = None
            for vec in cands:
                h, v = self.hv(vec)
                if not (abs(h) < H and v > 0):
                    continue
                key = (v, abs(h))
                if best is None or key < best[0]:
                    best = (key, vec)
            if best is None:
                return None
            return self.element(best[1])

    def _brute(self, H, cur):
        out = []
        for y in range(0, 64):
            for c in (0, 1, -1):
                centre = y * self.kappa - c * self.lam
                lo = _floor(centre - H) - 1
                for m in range(lo, lo + int(2 * float(H)) + 4):
                    if c == 0 and (m, y) == (0, 0):
                        continue
                    vec = LatticeVector(m, y, c)
                    h, v = self.hv(vec)
                    if abs(h) < H and v > 0:
                        out.append(vec)
            if out:
                # v grows with y by at least 1 once |h| < 1/2 is enforced
                break
        return out

    def _first_for(self, c, eps):
        """Vector (m + c lam, y), y >= 1 minimal, with |m + c lam - y kappa| < eps."""
        off = c * self.lam
        if self.exact:
            # exact: all quantities are rationals with a common denominator
            M = math.lcm(self.kappa.denominator, Fraction(off).denominator,
                         Fraction(eps).denominator)
            A = int(self.kappa * M) % M
            # f(y) = y kappa - off + eps, y = x + 1; hit iff frac(f) < 2 eps
            B = int((self.kappa - off + eps) * M) % M
            W = int(2 * eps * M) - 1
            if W < 0:
                return None
            x = first_hit(A, B, M, W)
            if x is None:
                return None
            y = x + 1
            m = _nint(y * self.kappa - off)
            return LatticeVector(m, y, c)
        M = self.M
        A = _nint(self.kappa * M) % M
        pad = self.y_cap + 2
        B = (_nint((self.kappa - off + eps) * M) + pad) % M
        W = _nint(2 * eps * M) + 2 * pad
        start = 0
        while True:
            x = first_hit(A, (B + A * start) % M, M, W)
            if x is None:
                return None
            y = start + x + 1
            if y > self.y_cap:
                raise PrecisionExhausted(
                    f"search passed y = {self.y_cap:.3g} at {self.dps} digits", 0)
            m = _nint(y * self.kappa - off)
            if abs(m + off - y * self.kappa) < eps:
                return LatticeVector(m, y, c)
            start = y


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def direction_kappa(theta, dps=DEFAULT_DPS):
    """kappa = dx/dy from a slope dy/dx (or a (dx, dy) pair)."""
    if isinstance(theta, tuple):
        dx, dy = (parse_real(c, dps)[0] for c in theta)
        if isinstance(dx, Fraction) and isinstance(dy, Fraction):
            return dx / dy, True
        with mpmath.workdps(dps):
            return mpmath.mpf(dx) / mpmath.mpf(dy), False
    s, exact = parse_real(theta, dps)
    if exact:
        if s == 0:
            raise ValueError("horizontal direction has no vertical flow")
        return 1 / s, True
    with mpmath.workdps(dps):
        return 1 / s, False


def raw_sequence(lam, kappa, J=None, t_max=None, dps=DEFAULT_DPS):
    """Staircase points in increasing bottom time, up to J elements or t_max.

    Returns (elements, terminated, precision_exhausted).
    """
    fr = Frontier(lam, kappa, dps)
    cur = fr.first()
    seq = [cur]
    terminated = False
    exhausted = False
    while True:
        if J is not None and len(seq) >= J:
            break
        if t_max is not None and seq[-1].t > t_max:
            break
        if math.isinf(seq[-1].t):
            terminated = True
            break
        try:
            nxt = fr.next(seq[-1])
        except PrecisionExhausted:
            exhausted = True
            break
        if nxt is None:
            terminated = True
            break
        seq.append(nxt)
    return seq, terminated, exhausted


# analysis of the sequence

TAIL_RATIO = 1e-3
MIN_RUN = 4  # delta values needed before a summability call
PAIR_WINDOW = 3  # consecutive-slit pairs in the late half standing in for "infinitely many"


def _lam_mpf(lam, dps):
    with mpmath.workdps(dps):
        if isinstance(lam, Fraction):
            return mpmath.mpf(lam.numerator) / lam.denominator
        return mpmath.mpf(lam)


def exchange(loop, slit, lam):
    """|v x w| for a loop v = (a, b) and a slit w = lam + m + n i, given by labels.

    The integer part is exact, so deep sequences lose no digits to cancellation.
    """
    a, b = loop
    m, n = slit
    return abs((a * n - b * m) - b * lam)


def _loop_vec(vec):
    return (vec.m, vec.n)


def _slit_vec(vec):
    """(m, n, sign): the canonical vector is sign * (lam + m + n i)."""
    m, n = vec.label
    return m, n, (1 if vec.c > 0 else -1)


def _alternation_b(w0, v, w1):
    """b with w1 - w0 = 2 b v, exactly in integers, or None.

    ``w0``, ``w1`` are canonical slits, ``v`` a loop, all LatticeVectors.
    """
    if w0.c != w1.c:
        return None
    dm, dn = w1.m - w0.m, w1.n - w0.n
    a, b = v.m, v.n
    if dm * b - dn * a != 0:
        return None
    k = dm // a if a != 0 else dn // b
    if (k * a, k * b) != (dm, dn) or k <= 0 or k % 2:
        return None
    return k // 2


def shortest_sequence(st, theta, J=None, t_max=None, norm="sup", dps=None):
    """Local minima of the sup systole along the geodesic of direction ``theta``.

    ``st`` is a :class:`SlitTorus` (or a value of lambda); ``theta`` is a
    slope, an ``"a/b"`` string, or a ``(dx, dy)`` pair. Exactly one of
    ``J`` (number of elements) or ``t_max`` bounds the computation.
    """
    if norm != "sup":
        raise ValueError("the shortest-vector sequence is defined for the sup norm")
    if not isinstance(st, SlitTorus):
        st = build_slit_torus(st, dps or DEFAULT_DPS)
    dps = dps or st.dps
    if J is None and t_max is None:
        raise ValueError("give J or t_max")
    kappa, _ = direction_kappa(theta, dps)
    seq, terminated, exhausted = raw_sequence(st.lam, kappa, J=J, t_max=t_max, dps=dps)
    if kappa == 0:
        rational_slope = True
    elif isinstance(kappa, Fraction):
        rational_slope = (1 / kappa).denominator <= MAX_DEN
    else:
        with mpmath.workdps(dps):
            rational_slope = denominator_rational(1 / kappa, dps=dps)
    an = DirectionAnalysis(st.lam, theta, kappa, seq, cutoff=len(seq), terminated=terminated,
                           precision_exhausted=exhausted, rational_lambda=st.rational,
                           rational_slope=rational_slope)
    _fill_runs(an, dps)
    an.verdict = classify(an)
    return an


def _fill_runs(an, dps):
    seq = an.sequence
    lam = _lam_mpf(an.lam, dps)
    kinds = [e.kind for e in seq]
    pairs = [j for j in range(len(seq) - 1) if kinds[j] == kinds[j + 1] == "slit"]
    loops_adjacent = [j for j in range(len(seq) - 1) if kinds[j] == kinds[j + 1] == "loop"]
    # maximal runs w, v, w, v, ..., w of separating slits around loops
    runs = []
    cur = []
    for j in range(1, len(seq) - 1):
        e0, e1, e2 = seq[j - 1], seq[j], seq[j + 1]
        ok = (e1.kind == "loop" and e0.kind == "slit" and e2.kind == "slit"
              and e0.vector.separating and e2.vector.separating)
        b = _alternation_b(e0.vector, e1.vector, e2.vector) if ok else None
        if b is not None:
            with mpmath.workdps(dps):
                d = exchange(_loop_vec(e1.vector), e0.vector.label, lam)
                d2 = exchange(_loop_vec(e1.vector), e2.vector.label, lam)
            if cur and cur[-1]["index"] == j - 2:
                cur.append({"index": j, "b": b, "delta": d, "delta_next": d2})
            else:
                if cur:
                    runs.append(cur)
                cur = [{"index": j, "b": b, "delta": d, "delta_next": d2}]
    if cur:
        runs.append(cur)
    an.runs = runs
    tail = runs[-1] if runs else []
    an.deltas = [r["delta"] for r in tail]
    an.b = [r["b"] for r in tail]
    with mpmath.workdps(dps):
        s = mpmath.mpf(0)
        sums = []
        for d in an.deltas:
            s += d
            sums.append(s)
    an.partial_sums = sums
    late = len(seq) // 2
    an.stats = {
        "elements": len(seq),
        "consecutive_slit_pairs": len(pairs),
        "consecutive_slit_pairs_late": sum(1 for j in pairs if j >= late),
        "loop_loop_pairs": len(loops_adjacent),
        "alternating_tail_start": tail[0]["index"] - 1 if tail else None,
        "tail_ratio": float(an.deltas[-1] / sums[-1]) if sums and sums[-1] > 0 else None,
        "delta_sum": float(sums[-1]) if sums else None,
    }
    if tail and tail[-1]["index"] >= len(seq) - 3 and not an.stats["consecutive_slit_pairs_late"]:
        an.pattern = "alternating"
    elif an.stats["consecutive_slit_pairs_late"]:
        an.pattern = "consecutive-slits"
    else:
        an.pattern = "mixed"


def classify(an):
    """Verdict from a computed sequence.

    Rational lambda is decided exactly by the slope. Otherwise
    consecutive-slit pairs late in the window are evidence of unique
    ergodicity, and an alternating tail is judged by the summability of the
    area exchanges (last term against the partial sum).
    """
    # an exact input that terminates is periodic; an inexact one that
    # terminates only ran out of digits unless its slope is rational as given
    periodic = an.rational_slope or (an.terminated and isinstance(an.kappa, Fraction))
    if an.rational_lambda:
        return "PERIODIC" if periodic else "UE"
    if periodic:
        return "PERIODIC"
    if len(an.sequence) < MIN_RUN:
        return "INCONCLUSIVE"
    if an.pattern == "consecutive-slits" and an.stats["consecutive_slit_pairs_late"] >= PAIR_WINDOW:
        return "UE_EVIDENCE"
    if an.pattern == "alternating" and len(an.deltas) >= MIN_RUN:
        ratio = an.stats["tail_ratio"]
        if ratio is not None and ratio < TAIL_RATIO:
            return "NONERGODIC_EVIDENCE"
        return "UE_EVIDENCE"
    return "INCONCLUSIVE"


# planted directions

@dataclass
class Plant:
    lam: object
    kappa: object  # dx/dy of the planted direction
    w: list  # slit labels (m, n): lam + m + n i
    v: list  # loops (a, b)
    b: list  # b_2, b_3, ...
    deltas: list
    reached: int  # number of b values planted before precision ran out
    dps: int

    @property
    def theta(self):
        """Slope dy/dx."""
        with mpmath.workdps(self.dps):
            return 1 / self.kappa


def _ext_gcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def plant_direction(lam, b, w1=(0, 0), v1=(0, 1), dps=200, strict=False):
    """Direction whose shortest vectors alternate w_1, v_1, w_2, v_2, ...

    Builds w_{j+1} = w_j + 2 b_{j+1} v_j and takes for v_{j+1} the loop with
    det(v_j, v_{j+1}) = sign(v_j x w_{j+1}) and
    w_{j+1} = delta_j v_{j+1} - delta_{j+1} v_j, 0 <= delta_{j+1} < delta_j.
    The direction is that of w_{J+1} + 2 v_{J+1}, one virtual step past the
    last planted slit, so that the planted part of the sequence is generic
    (aiming exactly at w_{J+1} would make it vertical). Planting stops when the
    frontier search could no longer resolve the vectors at ``dps`` digits;
    ``reached`` says how many b values were used (``strict`` raises then).
    """
    if w1[0] % 2 or w1[1] % 2:
        raise ValueError("the seed slit must be separating (even m, n)")
    if any(int(x) < 1 for x in b):
        raise ValueError("b_j must be positive integers")
    val, _ = parse_real(lam, dps)
    lamm = _lam_mpf(val, dps)
    y_cap = 10 ** max(1, (dps - 12) // 2)
    ws, vs, bs = [tuple(w1)], [tuple(v1)], []
    with mpmath.workdps(dps):
        ds = [exchange(v1, w1, lamm)]
        for bj in b:
            bj = int(bj)
            vj, wj = vs[-1], ws[-1]
            w = (wj[0] + 2 * bj * vj[0], wj[1] + 2 * bj * vj[1])
            c = (vj[0] * w[1] - vj[1] * w[0]) - vj[1] * lamm  # v_j x w
            s = 1 if c > 0 else -1
            g, x, y = _ext_gcd(vj[0], vj[1])
            # v0 with v_j x v0 = s
            v0 = (-y * g * s, x * g * s)
            wx_v0 = (w[0] * v0[1] - w[1] * v0[0]) + lamm * v0[1]  # w x v0
            k = int(mpmath.ceil(s * wx_v0 / abs(c)))
            vn = (v0[0] + k * vj[0], v0[1] + k * vj[1])
            d = exchange(vn, w, lamm)
            if max(abs(w[1]), abs(vn[1]), abs(vn[0])) > y_cap or d < mpmath.mpf(10) ** (-(dps // 3)):
                if strict:
                    raise PrecisionExhausted(
                        f"plant needs more than {dps} digits after {len(bs)} steps", len(bs))
                break
            ws.append(w)
            vs.append(vn)
            bs.append(bj)
            ds.append(d)
        m, n = ws[-1]
        a, bb = vs[-1]
        kappa = (lamm + m + 2 * a) / (n + 2 * bb)
    return Plant(val, kappa, ws, vs, bs, ds, len(bs), dps)


def analyze_plant(plant, J=None):
    """Shortest sequence along a planted direction, and the recovered data."""
    st = SlitTorus(plant.lam, denominator_rational(plant.lam, dps=plant.dps), None, 0, 1,
                   plant.dps)
    n = J or 2 * len(plant.w)  # w_1, v_1, ..., w_{J+1}, v_{J+1}
    seq, terminated, exhausted = raw_sequence(plant.lam, plant.kappa, J=n, dps=plant.dps)
    an = DirectionAnalysis(plant.lam, plant.theta, plant.kappa, seq, cutoff=len(seq),
                           terminated=False, precision_exhausted=exhausted,
                           rational_lambda=st.rational)
    _fill_runs(an, plant.dps)
    an.verdict = classify(an)
    return an


def recovered(an):
    """(w labels, b values) of the first alternating run of an analysis."""
    if not an.runs:
        return [], []
    run = an.runs[0]
    seq = an.sequence
    ws = [seq[run[0]["index"] - 1].vector.label] + [seq[r["index"] + 1].vector.label for r in run]
    return ws, [r["b"] for r in run]


# Birkhoff experiment

@dataclass
class ClusterReport:
    averages: list  # per start: (sheet-0 average, sheet-1 average)
    statistic: list  # sheet-0 share per start
    clusters: list  # lists of start indices
    spread: float  # relative spread of the largest cluster
    gap: float  # largest relative gap between consecutive sorted values
    T: float
    restarts: int


def sheet_arcs(st):
    """The horizontal closed curves at height 1/2 on the two sheets."""
    from .surface import Arc, SurfacePoint
    return [Arc(SurfacePoint(k, 0.0, 0.5), 1.0, (1.0, 0.0)) for k in (0, 1)]


def birkhoff_experiment(st, theta, starts=10, T=1e4, seed=0, gap_threshold=0.2):
    """Birkhoff crossing averages of the two sheet arcs along direction ``theta``.

    The statistic per start is the share of crossings on sheet 0. Starts
    are grouped by single linkage: consecutive sorted values whose relative
    gap exceeds ``gap_threshold`` fall in different clusters.
    """
    from .surface import birkhoff_average, arc_pieces, sample_points, SurfacePoint
    from .errors import SingularityHit
    if isinstance(theta, Plant):
        kappa = theta.kappa
    else:
        kappa, _ = direction_kappa(theta)
    kf = float(kappa)
    norm_ = math.hypot(kf, 1.0)
    direction = (kf / norm_, 1.0 / norm_)
    surf = st.surface
    arcs = sheet_arcs(st)
    pieces = [arc_pieces(surf, a) for a in arcs]
    rng = np.random.default_rng(seed)
    pts = sample_points(surf, int(starts), rng)
    avgs, stat = [], []
    restarts = 0
    for p in pts:
        while True:
            try:
                a = [birkhoff_average(surf, p, arcs[k], T, pieces[k], direction).average
                     for k in (0, 1)]
                break
            except SingularityHit:
                restarts += 1
                p = SurfacePoint(p.poly, p.x + 1e-7 * rng.uniform(-1, 1), p.y)
        avgs.append(tuple(a))
        tot = a[0] + a[1]
        stat.append(a[0] / tot if tot > 0 else 0.0)
    order = sorted(range(len(stat)), key=lambda i: stat[i])
    clusters = [[order[0]]] if order else []
    gap = 0.0
    for i, j in zip(order, order[1:]):
        lo, hi = stat[i], stat[j]
        rel = (hi - lo) / hi if hi > 0 else 0.0
        gap = max(gap, rel)
        if rel > gap_threshold:
            clusters.append([j])
        else:
            clusters[-1].append(j)
    big = max(clusters, key=len) if clusters else []
    vals = [stat[i] for i in big]
    spread = (max(vals) - min(vals)) / max(vals) if vals and max(vals) > 0 else 0.0
    return ClusterReport(avgs, stat, clusters, spread, gap, float(T), restarts)
