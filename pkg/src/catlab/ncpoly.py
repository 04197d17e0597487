"""Finite elements of the twisted group algebra and the maps i_X, j_X, sigma_nk.

An :class:`NCPolynomial` is a finite sum ``sum_g c_g u_g`` with
``u_g u_h = omega(g, h) u_{g+h}``. Every coefficient carries an absolute
error bound, propagated through each operation; comparisons are made within
the accumulated bounds.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .arith import IntMatrix, Vector, mat_pow, vadd, vneg, vsub
from .bicharacter import BicharacterSpec
from .errors import BudgetExhausted, ConsistencyError
from .horizon import DEFAULT_BUDGET, Window, sum_bijection

_U = 2.0**-53
_ETA = 2.0**-1070  # absolute underflow allowance per rounded product
PSD_TOL = 1e-10


def _fsum_complex(terms: Sequence[complex]) -> complex:
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def _collect(groups: Mapping, scale: float = 1.0):
    """Sum grouped (term, err) lists with fsum; returns coeff and err dicts."""
    coeffs, errs = {}, {}
    for g, items in groups.items():
        c = _fsum_complex([t for t, _ in items])
        e = math.fsum(e for _, e in items) + 2 * _U * abs(c)
        if scale != 1.0:
            c = c / scale
            e = e / scale + 2 * _U * abs(c)
        coeffs[g] = c
        errs[g] = e
    return coeffs, errs


class NCPolynomial:
    """``sum_g c_g u_g`` over a fixed bicharacter."""

    __slots__ = ("spec", "coeffs", "errs")

    def __init__(self, spec: BicharacterSpec, coeffs: Mapping | None = None, errs: Mapping | None = None):
        self.spec = spec
        errs = dict(errs or {})
        self.coeffs = {}
        self.errs = {}
        for g, c in (coeffs or {}).items():
            g = tuple(g)
            c = complex(c)
            e = float(errs.get(g, 0.0))
            if c == 0 and e == 0:
                continue
            self.coeffs[g] = c
            self.errs[g] = e

    # -- construction ----------------------------------------------------
    @classmethod
    def unit(cls, spec: BicharacterSpec, g: Vector, c: complex = 1.0) -> NCPolynomial:
        return cls(spec, {tuple(g): c})

    @classmethod
    def identity(cls, spec: BicharacterSpec) -> NCPolynomial:
        return cls.unit(spec, (0,) * spec.dim)

    @classmethod
    def sum(cls, spec: BicharacterSpec, polys: Iterable[NCPolynomial]) -> NCPolynomial:
        groups = defaultdict(list)
        for p in polys:
            p._check(spec)
            for g, c in p.coeffs.items():
                groups[g].append((c, p.errs[g]))
        if not groups:
            return cls(spec)
        if all(len(v) == 1 for v in groups.values()):
            return cls(spec, {g: v[0][0] for g, v in groups.items()}, {g: v[0][1] for g, v in groups.items()})
        return cls(spec, *_collect(groups))

    def _check(self, spec: BicharacterSpec) -> None:
        if spec is not self.spec:
            raise ValueError("polynomials over different bicharacters")

    def copy(self) -> NCPolynomial:
        return NCPolynomial(self.spec, self.coeffs, self.errs)

    # -- inspection ------------------------------------------------------
    @property
    def support(self) -> list:
        return sorted(self.coeffs)

    def coefficient(self, g: Vector) -> complex:
        return self.coeffs.get(tuple(g), 0j)

    def error(self, g: Vector) -> float:
        return self.errs.get(tuple(g), 0.0)

    @property
    def max_error(self) -> float:
        return max(self.errs.values(), default=0.0)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})u{g}" for g, c in sorted(self.coeffs.items()))
        return f"NCPolynomial({body or '0'})"

    # -- linear structure ------------------------------------------------
    def __add__(self, other: NCPolynomial) -> NCPolynomial:
        if not isinstance(other, NCPolynomial):
            return NotImplemented
        self._check(other.spec)
        coeffs, errs = dict(self.coeffs), dict(self.errs)
        for g, c in other.coeffs.items():
            s = coeffs.get(g, 0j) + c
            coeffs[g] = s
            errs[g] = errs.get(g, 0.0) + other.errs[g] + 2 * _U * abs(s)
        return NCPolynomial(self.spec, coeffs, errs)

    def __neg__(self) -> NCPolynomial:
        return NCPolynomial(self.spec, {g: -c for g, c in self.coeffs.items()}, self.errs)

    def __sub__(self, other: NCPolynomial) -> NCPolynomial:
        if not isinstance(other, NCPolynomial):
            return NotImplemented
        return self + (-other)

    def scale(self, a: complex) -> NCPolynomial:
        a = complex(a)
        return NCPolynomial(
            self.spec,
            {g: a * c for g, c in self.coeffs.items()},
            {g: abs(a) * e + 4 * _U * abs(a * self.coeffs[g]) for g, e in self.errs.items()},
        )

    # -- algebra ----------------------------------------------------------
    def __mul__(self, other):
        if isinstance(other, NCPolynomial):
            return multiply(self, other)
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def adjoint(self) -> NCPolynomial:
        """(c u_g)* = conj(c) u_{-g}, since sigma(g, -g) = 0."""
        return NCPolynomial(
            self.spec,
            {vneg(g): c.conjugate() for g, c in self.coeffs.items()},
            {vneg(g): e for g, e in self.errs.items()},
        )

    def trace(self) -> complex:
        return self.coefficient((0,) * self.spec.dim)

    def trace_error(self) -> float:
        return self.error((0,) * self.spec.dim)

    def alpha(self, T: IntMatrix, n: int = 1) -> NCPolynomial:
        """alpha_T^n: relabel u_g -> u_{T^n g}."""
        Tn = mat_pow(T, n)
        return NCPolynomial(
            self.spec,
            {Tn.apply(g): c for g, c in self.coeffs.items()},
            {Tn.apply(g): e for g, e in self.errs.items()},
        )

    # -- comparison and norms -------------------------------------------
    def close_to(self, other: NCPolynomial, slack: float = 0.0) -> bool:
        """Every coefficient agrees within the sum of both error bounds."""
        self._check(other.spec)
        for g in set(self.coeffs) | set(other.coeffs):
            d = abs(self.coefficient(g) - other.coefficient(g))
            if d > self.error(g) + other.error(g) + slack:
                return False
        return True

    def distance(self, other: NCPolynomial) -> float:
        return max((abs(self.coefficient(g) - other.coefficient(g))
                    for g in set(self.coeffs) | set(other.coeffs)), default=0.0)

    def l2_norm(self) -> float:
        return math.sqrt(math.fsum(abs(c) ** 2 for c in self.coeffs.values()))

    def l1_norm(self) -> float:
        return math.fsum(abs(c) for c in self.coeffs.values())

    def norm_interval(self) -> tuple[float, float]:
        """Lower and upper bounds on the C*-norm: (l2, l1) of the coefficients."""
        return self.l2_norm(), self.l1_norm()

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.close_to(self.adjoint(), slack=tol)

    # -- serialisation ----------------------------------------------------
    def to_json(self) -> list:
        return [
            {"coords": list(g), "re": c.real, "im": c.imag, "err": self.errs[g]}
            for g, c in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_json(cls, spec: BicharacterSpec, data: list) -> NCPolynomial:
        coeffs = {tuple(d["coords"]): complex(d["re"], d["im"]) for d in data}
        errs = {tuple(d["coords"]): float(d.get("err", 0.0)) for d in data}
        return cls(spec, coeffs, errs)


def multiply(p: NCPolynomial, q: NCPolynomial) -> NCPolynomial:
    """Twisted product, bilinear extension of u_g u_h = omega(g, h) u_{g+h}."""
    p._check(q.spec)
    spec = p.spec
    groups = defaultdict(list)
    for g, a in p.coeffs.items():
        ea, aa = p.errs[g], abs(a)
        for h, b in q.coeffs.items():
            w, ew = spec.value(spec.sigma(g, h))
            eb, ab = q.errs[h], abs(b)
            t = a * b * w
            err = aa * eb + ea * ab + ea * eb + aa * ab * (ew + 8 * _U) + _ETA
            groups[vadd(g, h)].append((t, err))
    return NCPolynomial(spec, *_collect(groups))


def adjoint(p: NCPolynomial) -> NCPolynomial:
    return p.adjoint()


def trace(p: NCPolynomial) -> complex:
    return p.trace()


def alpha_T(p: NCPolynomial, T: IntMatrix, n: int = 1) -> NCPolynomial:
    return p.alpha(T, n)


def trace_product(p: NCPolynomial, q: NCPolynomial) -> complex:
    """tau(p q) = sum_g p_g q_{-g}, without forming the product."""
    return _fsum_complex([c * q.coeffs[vneg(g)] for g, c in p.coeffs.items() if vneg(g) in q.coeffs])


# ---------------------------------------------------------------------------
# matrices over a window


@dataclass(frozen=True, eq=False)
class WindowMatrix:
    """An element of Mat(X), indexed by the lattice points of X."""

    window: Window
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.shape != (len(self.window), len(self.window)):
            raise ValueError("entries do not match the window size")
        object.__setattr__(self, "entries", a)

    @classmethod
    def identity(cls, X: Window) -> WindowMatrix:
        return cls(X, np.eye(len(X), dtype=complex))

    @classmethod
    def zeros(cls, X: Window) -> WindowMatrix:
        return cls(X, np.zeros((len(X), len(X)), dtype=complex))

    @classmethod
    def unit(cls, X: Window, x: Vector, y: Vector) -> WindowMatrix:
        a = np.zeros((len(X), len(X)), dtype=complex)
        a[X.index[tuple(x)], X.index[tuple(y)]] = 1.0
        return cls(X, a)

    def __getitem__(self, xy) -> complex:
        x, y = xy
        return complex(self.entries[self.window.index[tuple(x)], self.window.index[tuple(y)]])

    def __add__(self, other: WindowMatrix) -> WindowMatrix:
        self._same(other)
        return WindowMatrix(self.window, self.entries + other.entries)

    def __sub__(self, other: WindowMatrix) -> WindowMatrix:
        self._same(other)
        return WindowMatrix(self.window, self.entries - other.entries)

    def __matmul__(self, other: WindowMatrix) -> WindowMatrix:
        self._same(other)
        return WindowMatrix(self.window, self.entries @ other.entries)

    def __mul__(self, a) -> WindowMatrix:
        return WindowMatrix(self.window, self.entries * a)

    __rmul__ = __mul__

    def _same(self, other: WindowMatrix) -> None:
        if other.window != self.window:
            raise ValueError("matrices over different windows")

    def adjoint(self) -> WindowMatrix:
        return WindowMatrix(self.window, self.entries.conj().T)

    @cached_property
    def is_hermitian(self) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= PSD_TOL)

    @cached_property
    def min_eigenvalue(self) -> float:
        h = (self.entries + self.entries.conj().T) / 2
        return float(np.linalg.eigvalsh(h)[0])

    @cached_property
    def is_psd(self) -> bool:
        return self.is_hermitian and self.min_eigenvalue >= -PSD_TOL

    def normalized_trace(self) -> complex:
        return complex(np.trace(self.entries)) / len(self.window)

    def nonzero_entries(self) -> list[tuple[int, int, complex]]:
        rows, cols = np.nonzero(self.entries)
        return [(int(i), int(j), complex(self.entries[i, j])) for i, j in zip(rows, cols)]

    def to_json(self) -> dict:
        return {
            "window": self.window.to_json(),
            "entries": [[c.real, c.imag] for c in self.entries.ravel()],
        }

    @classmethod
    def from_json(cls, data: dict) -> WindowMatrix:
        X = Window(tuple(tuple(p) for p in data["window"]))
        vals = np.array([complex(re, im) for re, im in data["entries"]], dtype=complex)
        return cls(X, vals.reshape(len(X), len(X)))


# ---------------------------------------------------------------------------
# the completely positive maps


def i_X(a: WindowMatrix, spec: BicharacterSpec) -> NCPolynomial:
    """e_xy -> (1/|X|) u_x u_y^* = conj(omega(x - y, y)) / |X| u_{x-y}, extended linearly."""
    X = a.window
    pts = X.points
    groups = defaultdict(list)
    for i, j, v in a.nonzero_entries():
        x, y = pts[i], pts[j]
        w, ew = spec.value(spec.sigma(x, y))
        groups[vsub(x, y)].append((v * w.conjugate(), abs(v) * (ew + 4 * _U)))
    return NCPolynomial(spec, *_collect(groups, float(len(X))))


def j_X(p: NCPolynomial, X: Window) -> WindowMatrix:
    """Compression of the twisted left regular representation to l^2(X).

    u_g delta_y = omega(g, y) delta_{g+y}, so the (x, y) entry of j_X(u_g) is
    omega(g, y) when x = g + y.
    """
    spec = p.spec
    out = np.zeros((len(X), len(X)), dtype=complex)
    idx = X.index
    for j, y in enumerate(X.points):
        for g, c in p.coeffs.items():
            i = idx.get(vadd(g, y))
            if i is not None:
                w, _ = spec.value(spec.sigma(g, y))
                out[i, j] += c * w
    return WindowMatrix(X, out)


def fejer_multiplier(X: Window, g: Vector) -> float:
    """|X intersect (X - g)| / |X|: the factor by which i_X o j_X scales u_g."""
    return sum(1 for y in X if vadd(g, y) in X) / len(X)


def sigma_nk(factors: Sequence[WindowMatrix], T: IntMatrix, n: int, spec: BicharacterSpec,
             budget: int = DEFAULT_BUDGET) -> NCPolynomial:
    """Image of a1 (x) ... (x) ak under Mat(X)^{(x)k} ~ Mat(X_nk) -> algebra.

    The tensor is read as a matrix over X_nk through the spaced-sum
    bijection, then mapped by i_{X_nk}. Raises :class:`CollisionError`
    when the bijection fails at this n.
    """
    k = len(factors)
    if k == 0:
        raise ValueError("need at least one factor")
    X = factors[0].window
    for f in factors:
        f._same(factors[0])
    if k == 1:
        return i_X(factors[0], spec)
    sum_bijection(X, T, n, k, budget)
    nz = [f.nonzero_entries() for f in factors]
    count = math.prod(len(v) for v in nz)
    if count > budget:
        raise BudgetExhausted(f"sigma_nk needs {count} entry products > budget {budget}")
    pts = X.points
    Tn = mat_pow(T, n)
    P = IntMatrix.identity(T.dim)
    imgs = []
    for _ in range(k):
        imgs.append([P.apply(x) for x in pts])
        P = P @ Tn
    zero = (0,) * T.dim
    layer = [(zero, zero, 1 + 0j)]
    for img, entries in zip(imgs, nz):
        layer = [(vadd(xs, img[i]), vadd(ys, img[j]), c * v) for xs, ys, c in layer for i, j, v in entries]
    groups = defaultdict(list)
    rel = (k + 1) * 4 * _U
    for xs, ys, c in layer:
        w, ew = spec.value(spec.sigma(xs, ys))
        groups[vsub(xs, ys)].append((c * w.conjugate(), abs(c) * (ew + rel)))
    return NCPolynomial(spec, *_collect(groups, float(len(X)) ** k))


def sigma_nk_sum(terms: Sequence[tuple[complex, Sequence[WindowMatrix]]], T: IntMatrix, n: int,
                 spec: BicharacterSpec, budget: int = DEFAULT_BUDGET) -> NCPolynomial:
    """sigma_nk on a sum of elementary tensors given as (coefficient, factors)."""
    return NCPolynomial.sum(spec, [sigma_nk(f, T, n, spec, budget).scale(c) for c, f in terms])


def embed_factor(a: WindowMatrix, k: int, l: int) -> list[WindowMatrix]:
    """1 (x) ... (x) a (x) ... (x) 1 with a in slot l (1-based)."""
    if not 1 <= l <= k:
        raise ValueError("need 1 <= l <= k")
    one = WindowMatrix.identity(a.window)
    return [a if i == l else one for i in range(1, k + 1)]


# ---------------------------------------------------------------------------
# deviation of the marginals


def _spaced_average_one_minus(spec: BicharacterSpec, d: Vector, X: Window, M: IntMatrix) -> complex:
    """1 - avg_{z in X} omega(d, M z), accurately."""
    return _fsum_complex([spec.one_minus(spec.sigma(d, M.apply(z))) for z in X]) / len(X)


def _product_minus_one(eps: Iterable[complex]) -> complex:
    """prod (1 + e) - 1 for small e without cancellation."""
    delta = 0j
    for e in eps:
        delta = delta + e + delta * e
    return delta


def unit_deviation(spec: BicharacterSpec, X: Window, T: IntMatrix, n: int, k: int, l: int, d: Vector) -> complex:
    """prod_{i != l} avg_z conj(omega(d, T^{n(i-l)} z)) - 1."""
    eps = []
    for i in range(1, k + 1):
        if i == l:
            continue
        M = mat_pow(T, n * (i - l))
        eps.append(-_spaced_average_one_minus(spec, d, X, M).conjugate())
    return _product_minus_one(eps)


def sup_deviation(spec: BicharacterSpec, X: Window, T: IntMatrix, n: int, k: int, l: int) -> float:
    """max over matrix units e_xy of ||alpha^{-n(l-1)} sigma_nk theta_l (e_xy) - i_X(e_xy)||.

    Each image is a multiple of the single unitary u_{x-y}, so the norm is
    the modulus of the scalar, (1/|X|) |prod - 1|.
    """
    diffs = {vsub(x, y) for x in X for y in X}
    return max(abs(unit_deviation(spec, X, T, n, k, l, d)) for d in sorted(diffs)) / len(X)


# Relative slack covering the floating-point evaluation of both the tail sum and
# the deviation it bounds (each is a short fsum of accurately computed terms).
_TAIL_SLACK = 1 + 64 * _U


def tail_bound(spec: BicharacterSpec, X: Window, T: IntMatrix, n: int, max_terms: int = 64) -> float:
    """max_d (1/|X|) sum_{j != 0} |1 - avg_z omega(d, T^{nj} z)|, both tails summed to convergence.

    Each avg_z omega has modulus <= 1, and |ab - 1| <= |a - 1| + |b - 1| for
    such numbers, so this dominates :func:`sup_deviation` for every k and l.
    The bound is close to tight (the j = +-1 terms dominate), so the result
    is rounded outward by a small relative slack.
    """
    diffs = sorted({vsub(x, y) for x in X for y in X})
    best = 0.0
    for d in diffs:
        terms = []
        for j in range(1, max_terms + 1):
            pair = [abs(_spaced_average_one_minus(spec, d, X, mat_pow(T, s * n * j))) for s in (1, -1)]
            terms.extend(pair)
            total = math.fsum(terms)
            if sum(pair) <= 1e-18 * total or total == 0.0 and j >= 3:
                break
        best = max(best, math.fsum(terms) / len(X))
    return best * _TAIL_SLACK


@dataclass(frozen=True)
class MarginalDeviation:
    polynomial: NCPolynomial  # closed form
    direct: NCPolynomial
    sup_deviation: float


def marginal_deviation(a: WindowMatrix, T: IntMatrix, n: int, k: int, l: int, spec: BicharacterSpec,
                       budget: int = DEFAULT_BUDGET) -> MarginalDeviation:
    """alpha^{-n(l-1)}(sigma_nk(theta_l(a))) - i_X(a), computed two ways.

    The direct route runs sigma_nk on 1 (x) .. a .. (x) 1; the closed form
    multiplies each i_X(e_xy) term by prod_{i != l} avg_z conj(omega(x-y,
    T^{n(i-l)} z)) - 1. Disagreement beyond the error bounds raises
    :class:`ConsistencyError`.
    """
    X = a.window
    direct = sigma_nk(embed_factor(a, k, l), T, n, spec, budget).alpha(T, -n * (l - 1)) - i_X(a, spec)
    pts = X.points
    cache = {}
    groups = defaultdict(list)
    rel = (k + 4) * 8 * _U
    for i, j, v in a.nonzero_entries():
        x, y = pts[i], pts[j]
        d = vsub(x, y)
        if d not in cache:
            cache[d] = unit_deviation(spec, X, T, n, k, l, d)
        w, ew = spec.value(spec.sigma(x, y))
        t = v * w.conjugate() * cache[d]
        groups[d].append((t, abs(t) * rel + abs(v) * abs(cache[d]) * ew))
    closed = NCPolynomial(spec, *_collect(groups, float(len(X))))
    if not closed.close_to(direct):
        raise ConsistencyError(
            f"marginal deviation mismatch at n={n}, k={k}, l={l}: {closed.distance(direct):.3g}"
        )
    return MarginalDeviation(closed, direct, sup_deviation(spec, X, T, n, k, l))


@dataclass(frozen=True)
class ClassicalCheck:
    ok: bool
    first_failure: tuple | None
    checked: int


def classical_factor_check(partition: Sequence[WindowMatrix], T: IntMatrix, n: int, k: int,
                           spec: BicharacterSpec, budget: int = DEFAULT_BUDGET) -> ClassicalCheck:
    """Compare sigma_nk(a_i1 (x) ... (x) a_ik) with b_i1 alpha^n(b_i2) ... alpha^{n(k-1)}(b_ik).

    The identity is expected at theta = 0 and to fail for generic partitions
    otherwise.
    """
    bs = [i_X(a, spec) for a in partition]
    shifted = [[b.alpha(T, n * l) for b in bs] for l in range(k)]
    checked = 0
    for idx in itertools.product(range(len(partition)), repeat=k):
        lhs = sigma_nk([partition[i] for i in idx], T, n, spec, budget)
        rhs = shifted[0][idx[0]]
        for l in range(1, k):
            rhs = rhs * shifted[l][idx[l]]
        checked += 1
        if not lhs.close_to(rhs):
            return ClassicalCheck(False, idx, checked)
    return ClassicalCheck(True, None, checked)
