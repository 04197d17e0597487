"""Exact arithmetic layer: real quadratic numbers, integer matrices, spectra.

Everything here is immutable. Floating point only enters through
:func:`spectral_data` and the ``approx`` renderings, which always carry an
error bound alongside the value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import IndeterminateError, PrecisionExhausted

Rational = Union[int, Fraction]
Vector = tuple  # lattice vector: tuple of Python ints

_UNIT_ROUNDOFF = 2.0**-53


def is_squarefree(n: int) -> bool:
    if n < 0:
        raise ValueError("squarefree test needs n >= 0")
    if n < 2:
        return True
    d = 2
    while d * d <= n:
        if n % (d * d) == 0:
            return False
        d += 1
    return True


def squarefree_decompose(n: int) -> tuple[int, int]:
    """Return (f, D) with n = f**2 * D and D squarefree (n > 0)."""
    if n <= 0:
        raise ValueError("need n > 0")
    f, D = 1, n
    d = 2
    while d * d <= D:
        while D % (d * d) == 0:
            D //= d * d
            f *= d
        d += 1
    return f, D


def _bitlen(q: Fraction) -> int:
    """Crude upper bound on log2|q|."""
    return max(0, abs(q.numerator).bit_length() - q.denominator.bit_length() + 1)


def _sqrt_enclosure(D: int, p: int) -> tuple[Fraction, Fraction]:
    s = math.isqrt(D << (2 * p))
    if s * s == D << (2 * p):
        v = Fraction(s, 1 << p)
        return v, v
    return Fraction(s, 1 << p), Fraction(s + 1, 1 << p)


def _round_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


@total_ordering
@dataclass(frozen=True)
class QuadNumber:
    """Exact element ``a + b*sqrt(D)`` of a real quadratic field.

    ``D`` must be squarefree. Values with ``b == 0`` are normalised to
    ``D == 0`` so that equality and hashing only see the value.
    """

    a: Fraction
    b: Fraction = Fraction(0)
    D: int = 0

    def __post_init__(self):
        a, b, D = Fraction(self.a), Fraction(self.b), int(self.D)
        if D < 0 or not is_squarefree(D):
            raise ValueError(f"D={D} is not a non-negative squarefree integer")
        if D == 1:
            a, b, D = a + b, Fraction(0), 0
        if D == 0 and b != 0:
            raise ValueError("D = 0 forces b = 0")
        if b == 0:
            D = 0
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "D", D)

    # -- construction -------------------------------------------------
    @classmethod
    def rational(cls, a: Rational) -> QuadNumber:
        return cls(Fraction(a))

    @classmethod
    def sqrt(cls, D: int) -> QuadNumber:
        return cls(0, 1, D)

    @staticmethod
    def _coerce(other) -> QuadNumber | None:
        if isinstance(other, QuadNumber):
            return other
        if isinstance(other, (int, Fraction)):
            return QuadNumber(Fraction(other))
        return None

    def _field(self, other: QuadNumber) -> int:
        if self.D and other.D and self.D != other.D:
            raise ValueError(f"incompatible fields sqrt({self.D}) and sqrt({other.D})")
        return self.D or other.D

    # -- ring operations ---------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QuadNumber(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self) -> QuadNumber:
        return QuadNumber(-self.a, -self.b, self.D)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        D = self._field(o)
        return QuadNumber(self.a * o.a + self.b * o.b * D, self.a * o.b + self.b * o.a, D)

    __rmul__ = __mul__

    def conjugate(self) -> QuadNumber:
        return QuadNumber(self.a, -self.b, self.D)

    def norm(self) -> Fraction:
        """Field norm ``a^2 - b^2 D``; zero only for the zero element."""
        return self.a * self.a - self.b * self.b * self.D

    def inverse(self) -> QuadNumber:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("QuadNumber division by zero")
        c = self.conjugate()
        return QuadNumber(c.a / n, c.b / n, self.D)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int) -> QuadNumber:
        if n < 0:
            return self.inverse() ** (-n)
        result, base = QuadNumber(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- order --------------------------------------------------------
    def sign(self) -> int:
        """Exact sign, decided by comparing a^2 with b^2 D."""
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0 or self.D == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: the larger magnitude wins
        return sa if self.a * self.a > self.b * self.b * self.D else sb

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.a == o.a and self.b == o.b and self.D == o.D

    def __hash__(self):
        return hash((self.a, self.b, self.D))

    def __lt__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __abs__(self) -> QuadNumber:
        return -self if self.sign() < 0 else self

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    # -- enclosures ---------------------------------------------------
    def enclose(self, bits: int) -> tuple[Fraction, Fraction]:
        """Rational interval containing the value, of width at most ``2**-bits``."""
        if self.b == 0:
            return self.a, self.a
        p = bits + _bitlen(self.b) + 1
        lo, hi = _sqrt_enclosure(self.D, p)
        x0, x1 = self.a + self.b * lo, self.a + self.b * hi
        return (x0, x1) if x0 <= x1 else (x1, x0)

    def enclose_relative(self, bits: int) -> tuple[Fraction, Fraction]:
        """Interval with relative width at most ``2**-bits``.

        When ``a`` and ``b*sqrt(D)`` nearly cancel, the value is rebuilt as
        ``norm / conjugate``; the conjugate has no cancellation and the norm
        is an exact rational, so relative accuracy survives any amount of
        cancellation.
        """
        if self.b == 0:
            return self.a, self.a
        if self.a == 0 or (self.a > 0) == (self.b > 0):
            lo, hi = _sqrt_enclosure(self.D, bits + 2)
            x0, x1 = self.a + self.b * lo, self.a + self.b * hi
            return (x0, x1) if x0 <= x1 else (x1, x0)
        c0, c1 = self.conjugate().enclose_relative(bits + 3)
        n = self.norm()
        x0, x1 = n / c0, n / c1
        return (x0, x1) if x0 <= x1 else (x1, x0)

    def __float__(self) -> float:
        lo, hi = self.enclose_relative(64)
        return float((lo + hi) / 2)

    def approx(self) -> tuple[float, float]:
        """Float value and a rigorous absolute error bound for it."""
        if self.b == 0:
            f = float(self.a)
            return f, _round_up(abs(Fraction(f) - self.a))
        lo, hi = self.enclose_relative(64)
        f = float((lo + hi) / 2)
        F = Fraction(f)
        return f, _round_up(max(hi - F, F - lo))

    def floor(self) -> int:
        if self.b == 0:
            return math.floor(self.a)
        bits = 16
        while True:
            lo, hi = self.enclose(bits)
            if math.floor(lo) == math.floor(hi):
                return math.floor(lo)
            bits *= 2

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        sb = "-" if self.b < 0 else "+"
        coef = "" if abs(self.b) == 1 else f"{abs(self.b)}*"
        head = f"{self.a} {sb} " if self.a != 0 else ("-" if self.b < 0 else "")
        return f"{head}{coef}sqrt({self.D})"


@dataclass(frozen=True)
class Residue:
    """Result of a mod-2 reduction: ``x = value + 2*shift`` with value in [0, 2)."""

    value: QuadNumber
    shift: int
    approx: float
    error: float

    @cached_property
    def signed(self) -> QuadNumber:
        """The same class mod 2, represented in (-1, 1]."""
        return self.value if self.value <= 1 else self.value - 2

    @cached_property
    def signed_approx(self) -> float:
        return float(self.signed)


def quad_reduce_mod2(x: QuadNumber, precision_bits: int = 64) -> Residue:
    """Reduce ``x`` modulo 2 at a fixed working precision.

    The even shift is read off an enclosure of ``x`` of width
    ``2**-precision_bits``; if the enclosure straddles an even integer the
    shift is undetermined and :class:`PrecisionExhausted` is raised.
    """
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    if x.is_rational:
        k = math.floor(x.a / 2)
    else:
        lo, hi = x.enclose(precision_bits)
        k = math.floor(lo / 2)
        if k != math.floor(hi / 2):
            raise PrecisionExhausted(
                f"{x} lies within 2^-{precision_bits} of an even integer"
            )
    r = x - 2 * k
    f, err = r.approx()
    return Residue(r, k, f, err)


def reduce_mod2(x: QuadNumber, precision_bits: int = 64, max_bits: int = 1 << 16) -> Residue:
    """:func:`quad_reduce_mod2` with precision doubling on exhaustion."""
    bits = precision_bits
    while True:
        try:
            return quad_reduce_mod2(x, bits)
        except PrecisionExhausted:
            if bits >= max_bits:
                raise
            bits *= 2


# ---------------------------------------------------------------------------
# lattice vectors and integer matrices


def vadd(u: Vector, v: Vector) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def vsub(u: Vector, v: Vector) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def vneg(u: Vector) -> Vector:
    return tuple(-a for a in u)


def vzero(m: int) -> Vector:
    return (0,) * m


def _bareiss_det(rows: Sequence[Sequence[int]]) -> int:
    m = len(rows)
    if m == 0:
        return 1
    A = [list(r) for r in rows]
    sign, prev = 1, 1
    for k in range(m - 1):
        if A[k][k] == 0:
            for i in range(k + 1, m):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, m):
            for j in range(k + 1, m):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[m - 1][m - 1]


@dataclass(frozen=True)
class IntMatrix:
    """Square matrix with exact integer entries."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValueError("IntMatrix must be square and non-empty")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls, m: int) -> IntMatrix:
        return cls(tuple(tuple(int(i == j) for j in range(m)) for i in range(m)))

    @property
    def dim(self) -> int:
        return len(self.rows)

    @cached_property
    def det(self) -> int:
        return _bareiss_det(self.rows)

    @property
    def trace(self) -> int:
        return sum(self.rows[i][i] for i in range(self.dim))

    def apply(self, v: Vector) -> Vector:
        return tuple(sum(a * b for a, b in zip(r, v)) for r in self.rows)

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            cols = list(zip(*other.rows))
            return IntMatrix(tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows))
        if isinstance(other, tuple):
            return self.apply(other)
        return NotImplemented

    def transpose(self) -> IntMatrix:
        return IntMatrix(tuple(zip(*self.rows)))

    def inverse(self) -> IntMatrix:
        """Exact inverse; only unimodular matrices have one over the integers."""
        if abs(self.det) != 1:
            raise ValueError(f"det = {self.det}: no integer inverse")
        m = self.dim
        if m == 1:
            return IntMatrix(((self.det,),))
        adj = []
        for i in range(m):
            row = []
            for j in range(m):
                minor = [r[:i] + r[i + 1:] for k, r in enumerate(self.rows) if k != j]
                row.append((-1) ** (i + j) * _bareiss_det(minor))
            adj.append(row)
        return IntMatrix(tuple(tuple(v * self.det for v in r) for r in adj))

    def to_numpy(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def tolist(self) -> list:
        return [list(r) for r in self.rows]


def mat_pow(T: IntMatrix, n: int) -> IntMatrix:
    """Exact ``T**n`` by binary exponentiation; negative ``n`` needs det = +-1."""
    if n < 0:
        T, n = T.inverse(), -n
    result, base = IntMatrix.identity(T.dim), T
    while n:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result


def trace_sequence(T: IntMatrix, N: int) -> list[int]:
    """Traces of T^0 .. T^N for a 2x2 matrix of determinant 1.

    Uses t_{n+1} = Tr(T) t_n - t_{n-1}; the first ten terms are checked
    against explicit powers.
    """
    if T.dim != 2 or T.det != 1:
        raise ValueError("trace_sequence needs a 2x2 matrix with det 1")
    if N < 0:
        raise ValueError("N must be non-negative")
    t = T.trace
    seq = [2, t]
    while len(seq) <= N:
        seq.append(t * seq[-1] - seq[-2])
    seq = seq[: N + 1]
    for n in range(min(N, 10) + 1):
        if mat_pow(T, n).trace != seq[n]:
            raise ArithmeticError(f"trace recurrence disagrees with T^{n}")
    return seq


# ---------------------------------------------------------------------------
# spectra


def quadratic_eigenvalues(T: IntMatrix) -> tuple[QuadNumber, QuadNumber] | None:
    """Exact real eigenvalues of a 2x2 integer matrix, larger modulus first.

    Returns None when the eigenvalues are not real.
    """
    if T.dim != 2:
        raise ValueError("quadratic_eigenvalues needs a 2x2 matrix")
    t, d = T.trace, T.det
    disc = t * t - 4 * d
    if disc < 0:
        return None
    if disc == 0:
        lam = QuadNumber(Fraction(t, 2))
        return lam, lam
    f, D = squarefree_decompose(disc)
    root = QuadNumber(0, f, D)
    l1 = (QuadNumber(t) + root) / 2
    l2 = (QuadNumber(t) - root) / 2
    return (l1, l2) if abs(l1) >= abs(l2) else (l2, l1)


def dominant_eigenvalue(T: IntMatrix) -> QuadNumber:
    eig = quadratic_eigenvalues(T)
    if eig is None:
        raise ValueError("T has no real eigenvalues")
    return eig[0]


@dataclass(frozen=True)
class Aperiodicity:
    aperiodic: bool
    margin: float  # min_i ||lambda_i| - 1|
    exact: bool

    def __bool__(self) -> bool:
        return self.aperiodic


def aperiodicity_check(T: IntMatrix) -> Aperiodicity:
    """Decide whether T has no eigenvalue on the unit circle.

    Exact for every m: a closed form for m <= 2, otherwise a Sturm count on
    gcd(p, p*) where p is the characteristic polynomial. ``margin`` is the
    numerical distance of the spectrum from the circle, for reporting only.
    """
    if T.det == 0:
        raise ValueError("T must be injective (det != 0)")
    m = T.dim
    if m == 1:
        a = T.rows[0][0]
        return Aperiodicity(abs(a) != 1, float(abs(abs(a) - 1)), True)
    if m == 2:
        t, d = T.trace, T.det
        # a unimodular root is +-1 (p(1) or p(-1) vanishes) or complex with d = 1
        on_circle = (1 - t + d == 0) or (1 + t + d == 0) or (d == 1 and t * t < 4)
        mods = np.abs(np.linalg.eigvals(T.to_numpy()))
        margin = float(np.min(np.abs(mods - 1.0)))
        if on_circle:
            margin = 0.0
        return Aperiodicity(not on_circle, margin, True)
    p = charpoly(T)
    mods = np.abs(np.linalg.eigvals(T.to_numpy()))
    margin = float(np.min(np.abs(mods - 1.0)))
    # a root z on the unit circle has 1/z = conj(z) as a root too, so it is
    # shared by p and its reciprocal polynomial
    g = _poly_gcd(p, p[::-1])
    if len(g) > 1 and _has_unimodular_root(g):
        return Aperiodicity(False, 0.0, True)
    return Aperiodicity(True, margin, True)


def _peval(poly, x):
    acc = Fraction(0)
    for c in poly:
        acc = acc * x + c
    return acc


def _has_unimodular_root(g: list[Fraction]) -> bool:
    """Exact test for a root of modulus 1 of a self-reciprocal polynomial."""
    if _peval(g, 1) == 0 or _peval(g, -1) == 0:
        return True
    deg = len(g) - 1
    if deg % 2:
        return False  # odd reciprocal polynomials vanish at -1 or 1
    d = deg // 2
    c = g[::-1]  # c[i] is the coefficient of x^i
    # g(x) / x^d = h(x + 1/x), with x^j + x^-j = D_j(y)
    D_prev, D_cur = [Fraction(2)], [Fraction(1), Fraction(0)]  # D_0, D_1 (leading first)
    h = [c[d]]
    for j in range(1, d + 1):
        h = _padd(h, [c[d + j] * v for v in D_cur])
        D_prev, D_cur = D_cur, _padd(D_cur + [Fraction(0)], [-v for v in D_prev])
    while h and h[0] == 0:
        h.pop(0)
    if len(h) <= 1:
        return False
    return _sturm_count(h, Fraction(-2), Fraction(2)) > 0


def _padd(p, q):
    n = max(len(p), len(q))
    p = [Fraction(0)] * (n - len(p)) + list(p)
    q = [Fraction(0)] * (n - len(q)) + list(q)
    return [a + b for a, b in zip(p, q)]


def _sturm_count(h, lo, hi) -> int:
    """Number of distinct real roots of h in (lo, hi]."""
    deriv = [c * (len(h) - 1 - i) for i, c in enumerate(h[:-1])]
    seq = [list(h), deriv]
    while len(seq[-1]) > 1:
        _, r = _poly_divmod(seq[-2], seq[-1])
        while r and r[0] == 0:
            r.pop(0)
        if not r:
            break
        seq.append([-v for v in r])

    def changes(x):
        vals = [_peval(q, x) for q in seq]
        vals = [v for v in vals if v != 0]
        return sum(1 for u, v in zip(vals, vals[1:]) if (u > 0) != (v > 0))

    return changes(lo) - changes(hi)


def charpoly(T: IntMatrix) -> list[int]:
    """Characteristic polynomial det(x - T), leading coefficient first (Faddeev-LeVerrier)."""
    m = T.dim
    A = [[Fraction(v) for v in r] for r in T.rows]
    M = [[Fraction(0)] * m for _ in range(m)]
    coeffs = [Fraction(1)]
    for k in range(1, m + 1):
        # M <- A M + c_{k-1} I ; c_k = -tr(A M) / k
        AM = [[sum(A[i][l] * M[l][j] for l in range(m)) for j in range(m)] for i in range(m)]
        M = [[AM[i][j] + (coeffs[-1] if i == j else 0) for j in range(m)] for i in range(m)]
        AM = [[sum(A[i][l] * M[l][j] for l in range(m)) for j in range(m)] for i in range(m)]
        coeffs.append(-sum(AM[i][i] for i in range(m)) / k)
    return [int(c) for c in coeffs]


def _poly_divmod(a: list[Fraction], b: list[Fraction]):
    a = list(a)
    q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
    while len(a) >= len(b) and any(a):
        f = a[0] / b[0]
        q[len(q) - (len(a) - len(b)) - 1] = f
        for i in range(len(b)):
            a[i] -= f * b[i]
        a.pop(0)
    return q, a


def _poly_gcd(p: Sequence[int], q: Sequence[int]) -> list[Fraction]:
    a = [Fraction(c) for c in p]
    b = [Fraction(c) for c in q]
    while b and b[0] == 0:
        b.pop(0)
    while b and any(b):
        _, r = _poly_divmod(a, b)
        while r and r[0] == 0:
            r.pop(0)
        a, b = b, r
    return [c / a[0] for c in a]


def _numeric_eigen(T: IntMatrix):
    A = T.to_numpy()
    vals = np.linalg.eigvals(A)
    norm = max(1.0, float(np.linalg.norm(A, ord=2)))
    radius = []
    for v in vals:
        k = int(np.sum(np.abs(vals - v) <= 1e-6 * max(1.0, abs(v))))
        # a k-fold eigenvalue moves by O(eps^(1/k)) under an eps perturbation
        radius.append(4 * (16 * _UNIT_ROUNDOFF) ** (1.0 / k) * norm)
    return vals, radius


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues, root-space projections and Jordan growth constants of T.

    ``jordan[i] = (C_i, delta_i)`` certifies
    ``||T^n P_i|| <= C_i (|lambda_i| + delta_i)^n`` for 0 <= n <= 50.
    """

    eigenvalues: tuple
    error_radius: tuple
    multiplicities: tuple
    projections: tuple
    projection_error: float
    jordan: tuple
    exact_eigenvalues: tuple | None = field(default=None, compare=False)

    @property
    def moduli(self) -> list[float]:
        return [abs(complex(v)) for v in self.eigenvalues]


_JORDAN_HORIZON = 50
_JORDAN_SAFETY = 1.1


def restrict(A: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Factor P = V W through its range and return (V, B, W) with A V = V B.

    Powers A^n P are then formed as V B^n W, which never leaks rounding
    error into the complementary (possibly expanding) root spaces.
    """
    u, s, vh = np.linalg.svd(P)
    r = int(np.sum(s > 1e-9 * max(1.0, s[0])))
    V = u[:, :r]
    W = V.conj().T @ P
    B = W @ A @ V
    return V, B, W


def jordan_constant(A: np.ndarray, P: np.ndarray, modulus: float) -> tuple[float, float]:
    """Constants (C, delta) bounding ||A^n P|| by C (modulus + delta)^n, n <= 50.

    delta is half the gap between the modulus and 1. P must project onto an
    A-invariant subspace.
    """
    delta = abs(1.0 - modulus) / 2.0
    rho = modulus + delta
    V, B, W = restrict(A, P.astype(complex))
    norms = []
    Bn = np.eye(B.shape[0], dtype=complex)
    for n in range(_JORDAN_HORIZON + 1):
        norms.append(np.linalg.norm(V @ Bn @ W, ord=2))
        Bn = Bn @ B
    C = _JORDAN_SAFETY * max(v / rho**n for n, v in enumerate(norms))
    if any(v > C * rho**n for n, v in enumerate(norms)):
        raise ArithmeticError("Jordan bound validation failed")
    return C, delta


def _cluster(vals, tol=1e-6):
    groups: list[list[complex]] = []
    for v in vals:
        for g in groups:
            if abs(g[0] - v) <= tol * max(1.0, abs(v)):
                g.append(v)
                break
        else:
            groups.append([v])
    return groups


def spectral_data(T: IntMatrix) -> SpectralData:
    """Spectral decomposition of an aperiodic integer matrix.

    2x2 matrices with real spectrum are handled exactly in the quadratic
    field of the characteristic polynomial (projections are
    ``(T - mu)/(lambda - mu)``); everything else goes through numerical root
    spaces, computed as null spaces of ``(T - lambda)^mult``.
    """
    if not aperiodicity_check(T):
        raise ValueError("spectral_data needs an aperiodic matrix")
    A = T.to_numpy()
    m = T.dim
    exact = None
    if m == 2 and quadratic_eigenvalues(T) is not None:
        l1, l2 = quadratic_eigenvalues(T)
        exact = (l1, l2) if l1 != l2 else (l1,)
    if exact is not None and len(exact) == 2:
        l1, l2 = exact
        projs = []
        for lam, mu in ((l1, l2), (l2, l1)):
            inv = (lam - mu).inverse()
            rows = [[(QuadNumber(T.rows[i][j]) - (mu if i == j else 0)) * inv for j in range(2)] for i in range(2)]
            projs.append(np.array([[float(x) for x in r] for r in rows], dtype=complex))
        vals = [complex(float(l1)), complex(float(l2))]
        radius = [abs(float(l1)) * 4 * _UNIT_ROUNDOFF, abs(float(l2)) * 4 * _UNIT_ROUNDOFF]
        mults = (1, 1)
    elif exact is not None:
        vals = [complex(float(exact[0]))]
        radius = [abs(vals[0]) * 4 * _UNIT_ROUNDOFF]
        projs = [np.eye(2, dtype=complex)]
        mults = (2,)
    else:
        raw, rad = _numeric_eigen(T)
        groups = _cluster(list(raw))
        vals, radius, mults, bases = [], [], [], []
        for g in groups:
            lam = complex(np.mean(g))
            k = len(g)
            B = np.linalg.matrix_power(A.astype(complex) - lam * np.eye(m), k)
            _, s, vh = np.linalg.svd(B)
            basis = vh[m - k:].conj().T
            vals.append(lam)
            radius.append(max(rad[list(raw).index(g[0])], max(abs(v - lam) for v in g)))
            mults.append(k)
            bases.append(basis)
        V = np.hstack(bases)
        W = np.linalg.inv(V)
        projs, start = [], 0
        for basis in bases:
            k = basis.shape[1]
            projs.append(basis @ W[start:start + k])
            start += k
        mults = tuple(mults)
    err = float(np.linalg.norm(sum(projs) - np.eye(m), ord=2))
    for i in range(len(projs)):
        for j in range(len(projs)):
            if i != j:
                err = max(err, float(np.linalg.norm(projs[i] @ projs[j], ord=2)))
    if err > 1e-8:
        raise IndeterminateError(f"root spaces not separable (projection error {err:.3g})")
    jordan = tuple(jordan_constant(A, P, abs(lam)) for P, lam in zip(projs, vals))
    return SpectralData(
        eigenvalues=tuple(vals),
        error_radius=tuple(radius),
        multiplicities=tuple(mults),
        projections=tuple(projs),
        projection_error=err,
        jordan=jordan,
        exact_eigenvalues=exact,
    )


def lattice_points_box(shape: Iterable[int]) -> list[Vector]:
    """All integer points of the box [0, N_1) x ... x [0, N_m), lexicographic."""
    return [tuple(p) for p in itertools.product(*(range(n) for n in shape))]
