"""Injectivity horizon for spaced orbit sums.

For a finite Y containing 0 there is an n0 beyond which

    y_1 + T^n y_2 + ... + T^{n(k-1)} y_k = 0,   y_l in Y,

forces every y_l = 0. :func:`certificate_n0` produces such an n0 from
spectral bounds, :func:`brute_force_min_n` searches for relations directly,
and :func:`sum_bijection` realises the resulting injection X^k -> X_nk.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .arith import (
    IntMatrix,
    Vector,
    aperiodicity_check,
    jordan_constant,
    lattice_points_box,
    mat_pow,
    spectral_data,
    vadd,
    vneg,
    vsub,
)
from .errors import AperiodicityError, BudgetExhausted, CollisionError, HorizonError

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class Window:
    """A finite, ordered set of lattice points."""

    points: tuple

    def __post_init__(self):
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        if not pts:
            raise ValueError("a window must be non-empty")
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate points in window")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("window points must share one dimension")
        object.__setattr__(self, "points", pts)

    @classmethod
    def box(cls, shape: Iterable[int], offset: int = 0) -> Window:
        return cls(tuple(tuple(c + offset for c in p) for p in lattice_points_box(shape)))

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, p) -> bool:
        return tuple(p) in self.index

    @property
    def index(self) -> dict:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = {p: i for i, p in enumerate(self.points)}
            object.__setattr__(self, "_index", idx)
        return idx

    def difference_set(self) -> Window:
        return difference_set(self)

    def to_json(self) -> list:
        return [list(p) for p in self.points]


def difference_set(X: Window) -> Window:
    """{x - x' : x, x' in X}, sorted."""
    return Window(tuple(sorted({vsub(x, y) for x in X for y in X})))


# ---------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class EigenCertificate:
    eigenvalue: complex
    modulus: float
    C: float
    delta: float
    M: float
    n_i: int
    direction: str  # "contracting-first" or "expanding-first"

    @property
    def rho(self) -> float:
        m = self.modulus if self.direction == "contracting-first" else 1.0 / self.modulus
        return m + self.delta


@dataclass(frozen=True)
class HorizonCertificate:
    per_eigenvalue: tuple
    n0: int

    def to_json(self) -> dict:
        return {
            "n0": self.n0,
            "per_eigenvalue": [
                {"eigenvalue": [e.eigenvalue.real, e.eigenvalue.imag], "modulus": e.modulus,
                 "C": e.C, "delta": e.delta, "M": e.M, "n_i": e.n_i, "direction": e.direction}
                for e in self.per_eigenvalue
            ],
        }


_ZERO_TOL = 1e-10
_NONZERO_TOL = 1e-7
_INFLATE = 1 + 1e-12


def _tail_holds(n: int, rho: float, C: float, M: float) -> bool:
    """M C rho^n / (1 - rho) < 1/M, evaluated in exact rationals after
    rounding every input outward."""
    rho_u = Fraction(math.nextafter(rho * _INFLATE, math.inf))
    if rho_u >= 1:
        return False
    C_u = Fraction(math.nextafter(C * _INFLATE, math.inf))
    M_u = Fraction(math.nextafter(M * _INFLATE, math.inf))
    return M_u * C_u * rho_u**n / (1 - rho_u) < 1 / M_u


def _tail_index(rho: float, C: float, M: float) -> int:
    n = math.ceil(math.log((1 - rho) / (M * M * C)) / math.log(rho))
    n = max(1, n)
    while not _tail_holds(n, rho, C, M):
        n += 1
    return n


def certificate_n0(Y: Window, T: IntMatrix) -> HorizonCertificate:
    """n0 such that no nontrivial spaced relation over Y exists for n >= n0.

    Contracting root spaces bound the first term of a relation by the tail
    of the rest; expanding ones run the same argument on T^-1 with the tuple
    reversed. Each space contributes n_i from

        sum_{n >= n_i} M C rho^n < 1/M,

    and n0 is the maximum.
    """
    m = T.dim
    if Y.dim != m:
        raise ValueError("window and matrix dimensions differ")
    if (0,) * m not in Y:
        raise ValueError("Y must contain 0")
    if T.det == 0:
        raise HorizonError("T must be injective")
    if not aperiodicity_check(T):
        raise AperiodicityError("certificate_n0 needs an aperiodic T")
    sd = spectral_data(T)
    A = T.to_numpy()
    Ainv = np.linalg.inv(A)
    nonzero = [np.array(y, dtype=float) for y in Y if any(y)]
    certs = []
    for lam, P, (C, delta) in zip(sd.eigenvalues, sd.projections, sd.jordan):
        mod = abs(lam)
        if mod < 1:
            direction = "contracting-first"
            rho = mod + delta
        else:
            direction = "expanding-first"
            C, delta = jordan_constant(Ainv, P, 1.0 / mod)
            rho = 1.0 / mod + delta
        norms = []
        for y in nonzero:
            v = float(np.linalg.norm(P @ y))
            scale = max(1.0, float(np.linalg.norm(y)))
            if v < _ZERO_TOL * scale:
                continue
            if v < _NONZERO_TOL * scale:
                raise HorizonError(f"cannot decide whether P_i y = 0 for y = {tuple(y)}")
            norms.append(v)
        if not norms:
            certs.append(EigenCertificate(lam, mod, C, delta, 1.0, 1, direction))
            continue
        M = max(max(norms), 1.0 / min(norms))
        certs.append(EigenCertificate(lam, mod, C, delta, M, _tail_index(rho, C, M), direction))
    n0 = max([1] + [c.n_i for c in certs])
    return HorizonCertificate(tuple(certs), n0)


# ---------------------------------------------------------------------------
# brute force


@dataclass(frozen=True)
class Relation:
    """sum_l T^{n(l-1)} y_l = 0 with y_1 != 0."""

    n: int
    terms: tuple

    @property
    def k(self) -> int:
        return len(self.terms)

    def holds(self, T: IntMatrix) -> bool:
        total = (0,) * T.dim
        Tn = mat_pow(T, self.n)
        P = IntMatrix.identity(T.dim)
        for y in self.terms:
            total = vadd(total, P.apply(y))
            P = P @ Tn
        return not any(total) and any(self.terms[0])

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "terms": [list(y) for y in self.terms]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> Relation:
        return cls(int(d["n"]), tuple(tuple(int(c) for c in y) for y in d["terms"]))


def _spaced_images(points, T: IntMatrix, n: int, k: int) -> list[dict]:
    Tn = mat_pow(T, n)
    P = IntMatrix.identity(T.dim)
    out = []
    for _ in range(k):
        out.append({y: P.apply(y) for y in points})
        P = P @ Tn
    return out


def _partial_sums(images: list[dict], choices: list[list[Vector]], m: int):
    """Yield (sum, tuple) over the product of the per-slot choices."""
    layer = [((0,) * m, ())]
    for img, opts in zip(images, choices):
        layer = [(vadd(s, img[y]), t + (y,)) for s, t in layer for y in opts]
    return layer


def find_relation(Y: Window, T: IntMatrix, n: int, k: int, budget: int = DEFAULT_BUDGET) -> Relation | None:
    """A shortest nontrivial relation of length <= k at spacing n, or None.

    A relation starting with zeros can be shifted left (Ker T = 0), so only
    y_1 != 0 is searched. Meet in the middle on exact integer sums, trying
    lengths 2, 3, ..., k in turn.
    """
    if k < 2:
        return None
    pts = list(Y)
    nz = [y for y in pts if any(y)]
    if not nz:
        return None
    a = (k + 1) // 2
    cost = len(nz) * len(pts) ** (a - 1) + len(pts) ** (k - a)
    if cost > budget:
        raise BudgetExhausted(f"relation search at k={k} needs {cost} > budget {budget} sums")
    images = _spaced_images(pts, T, n, k)
    for length in range(2, k + 1):
        rel = _relation_of_length(images[:length], pts, nz, T.dim, n)
        if rel is not None:
            return rel
    return None


def _relation_of_length(images: list[dict], pts, nz, m: int, n: int) -> Relation | None:
    k = len(images)
    a = (k + 1) // 2
    right = {}
    for s, t in _partial_sums(images[a:], [pts] * (k - a), m):
        right.setdefault(s, t)
    for s, t in _partial_sums(images[:a], [nz] + [pts] * (a - 1), m):
        hit = right.get(vneg(s))
        if hit is not None:
            terms = t + hit
            while not any(terms[-1]):
                terms = terms[:-1]
            return Relation(n, terms)
    return None


@dataclass(frozen=True)
class BruteForceResult:
    min_n: int | None  # None: relations at every n <= n_max
    witnesses: dict = field(default_factory=dict)  # n -> Relation for n < min_n
    k_max: int = 0
    n_max: int = 0

    def to_json(self) -> dict:
        return {
            "min_n": self.min_n,
            "k_max": self.k_max,
            "n_max": self.n_max,
            "witnesses": [self.witnesses[n].to_json() for n in sorted(self.witnesses)],
        }


def brute_force_min_n(Y: Window, T: IntMatrix, k_max: int, n_max: int,
                      budget: int = DEFAULT_BUDGET) -> BruteForceResult:
    """Smallest n >= 1 with no nontrivial relation of length <= k_max.

    Every smaller n comes with a witness relation. Budget exhaustion raises
    :class:`BudgetExhausted`; running out of n gives ``min_n = None``.
    """
    if T.det == 0:
        raise HorizonError("T must be injective")
    witnesses = {}
    for n in range(1, n_max + 1):
        rel = find_relation(Y, T, n, k_max, budget)
        if rel is None:
            return BruteForceResult(n, witnesses, k_max, n_max)
        witnesses[n] = rel
    return BruteForceResult(None, witnesses, k_max, n_max)


def relation_free(Y: Window, T: IntMatrix, n: int, k_max: int, budget: int = DEFAULT_BUDGET) -> bool:
    return find_relation(Y, T, n, k_max, budget) is None


# ---------------------------------------------------------------------------
# bijection X^k -> X_nk


@dataclass(frozen=True, eq=False)
class SumBijection:
    """(x_1..x_k) -> sum_l T^{n(l-1)} x_l, with its inverse on the image.

    Tuples are stored as index tuples into ``window.points`` in
    ``itertools.product`` order.
    """

    window: Window
    n: int
    k: int
    tuples: tuple
    sums: tuple
    inverse: dict

    def forward(self, t) -> Vector:
        idx = self.window.index
        return self.sums[_flat_index(tuple(idx[p] for p in t), len(self.window))]

    def preimage(self, point: Vector) -> tuple:
        return tuple(self.window.points[i] for i in self.tuples[self.inverse[tuple(point)]])

    @property
    def image(self) -> Window:
        return Window(self.sums)

    def __len__(self) -> int:
        return len(self.sums)


def _flat_index(t: tuple, size: int) -> int:
    i = 0
    for v in t:
        i = i * size + v
    return i


@lru_cache(maxsize=256)
def sum_bijection(X: Window, T: IntMatrix, n: int, k: int, budget: int = DEFAULT_BUDGET) -> SumBijection:
    """Enumerate all |X|^k spaced sums; a repeated sum raises :class:`CollisionError`."""
    if k < 1:
        raise ValueError("k must be >= 1")
    size = len(X) ** k
    if size > budget:
        raise BudgetExhausted(f"|X|^k = {size} exceeds budget {budget}")
    pts = X.points
    images = _spaced_images(pts, T, n, k)
    img_rows = [[images[l][p] for p in pts] for l in range(k)]
    tuples, sums, inverse = [], [], {}
    for t in itertools.product(range(len(pts)), repeat=k):
        s = img_rows[0][t[0]]
        for l in range(1, k):
            s = vadd(s, img_rows[l][t[l]])
        prev = inverse.get(s)
        if prev is not None:
            raise CollisionError(
                f"spaced sums collide at n={n}, k={k}",
                first=tuple(pts[i] for i in tuples[prev]),
                second=tuple(pts[i] for i in t),
                point=s,
            )
        inverse[s] = len(tuples)
        tuples.append(t)
        sums.append(s)
    return SumBijection(X, n, k, tuple(tuples), tuple(sums), inverse)
