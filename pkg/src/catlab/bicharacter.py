"""The bicharacter omega_theta(g, h) = exp(i pi theta sigma(g, h)) and its decay.

Phases are reduced modulo 2 exactly in the quadratic field of theta; a float
only appears when the reduced phase is exponentiated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arith import (
    IntMatrix,
    QuadNumber,
    Residue,
    Vector,
    aperiodicity_check,
    dominant_eigenvalue,
    reduce_mod2,
)

_U = 2.0**-53


@dataclass(frozen=True)
class ThetaSpec:
    """A deformation parameter theta in [0, 1).

    ``mode`` is ``"quadratic"`` (theta = 2 s lambda^2 + 2 m), ``"rational"``
    (theta = p/q) or ``"zero"``.
    """

    mode: str
    value: QuadNumber
    s: int | None = None
    m: int | None = None
    p: int | None = None
    q: int | None = None
    lambda_sq: QuadNumber | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (0 <= self.value < 1):
            raise ValueError(f"theta = {self.value} is not in [0, 1)")

    @classmethod
    def zero(cls) -> ThetaSpec:
        return cls("zero", QuadNumber(0))

    @classmethod
    def rational(cls, p: int, q: int) -> ThetaSpec:
        if q <= 0 or math.gcd(p, q) != 1:
            raise ValueError("rational theta needs coprime p, q with q > 0")
        if p == 0:
            return cls.zero()
        return cls("rational", QuadNumber(Fraction(p, q)), p=p, q=q)

    @classmethod
    def quadratic(cls, T: IntMatrix, s: int, m: int | None = None) -> ThetaSpec:
        """theta = 2 s lambda^2 + 2 m for the dominant eigenvalue lambda of T.

        With ``m`` omitted the unique m putting the value in [0, 2) is used;
        a value outside [0, 1) is rejected either way.
        """
        lam_sq = _lambda_squared(T)
        x = 2 * s * lam_sq
        if m is None:
            m = -reduce_mod2(x).shift
        value = x + 2 * m
        if s == 0 and value == 0:
            return cls("zero", QuadNumber(0), s=0, m=0, lambda_sq=lam_sq)
        return cls("quadratic", value, s=s, m=m, lambda_sq=lam_sq)

    def satisfies_congruence(self) -> bool:
        """Exact check that theta - 2 s (lambda^2 - 1) is an even integer."""
        if self.s is None or self.lambda_sq is None:
            return self.mode == "zero"
        diff = self.value - 2 * self.s * (self.lambda_sq - 1)
        return diff.is_rational and diff.a.denominator == 1 and diff.a.numerator % 2 == 0

    def to_json(self) -> dict:
        out = {"mode": self.mode, "a": str(self.value.a), "b": str(self.value.b), "D": self.value.D,
               "approx": float(self.value)}
        for key in ("s", "m", "p", "q"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    def __str__(self) -> str:
        return str(self.value)


def _lambda_squared(T: IntMatrix) -> QuadNumber:
    if T.dim != 2 or T.det != 1:
        raise ValueError("quadratic theta needs a 2x2 matrix with det 1")
    if not aperiodicity_check(T):
        raise ValueError("quadratic theta needs an aperiodic (hyperbolic) matrix")
    lam = dominant_eigenvalue(T)
    return lam * lam


def admissible_thetas(T: IntMatrix, s_range: tuple[int, int] = (-5, 5)) -> list[ThetaSpec]:
    """All theta in [0,1) of the form 2 s lambda^2 + 2 m, s in the closed range."""
    lam_sq = _lambda_squared(T)
    out = []
    for s in range(s_range[0], s_range[1] + 1):
        r = reduce_mod2(2 * s * lam_sq)
        if r.value < 1:
            out.append(ThetaSpec.quadratic(T, s, -r.shift))
    return out


@dataclass(frozen=True)
class Omega:
    phase: QuadNumber  # exact residue in [0, 2)
    value: complex
    error: float


class BicharacterSpec:
    """omega(g, h) = exp(i pi theta sigma(g, h)) for an integer antisymmetric form.

    Phases depend on (g, h) only through the integer sigma(g, h), so they are
    cached per sigma value.
    """

    def __init__(self, theta: ThetaSpec, form: Sequence[Sequence[int]] | None = None,
                 precision_bits: int = 64):
        if form is None:
            form = ((0, 1), (-1, 0))
        form = tuple(tuple(int(v) for v in r) for r in form)
        m = len(form)
        if any(len(r) != m for r in form):
            raise ValueError("form must be square")
        for i in range(m):
            for j in range(m):
                if form[i][j] != -form[j][i]:
                    raise ValueError("form must be antisymmetric")
        if precision_bits < 64:
            raise ValueError("precision_bits must be >= 64")
        self.theta = theta
        self.form = form
        self.precision_bits = precision_bits
        self._phases: dict[int, Residue] = {}
        self._values: dict[int, tuple[complex, float]] = {}

    @classmethod
    def standard(cls, theta: ThetaSpec, precision_bits: int = 64) -> BicharacterSpec:
        return cls(theta, ((0, 1), (-1, 0)), precision_bits)

    @property
    def dim(self) -> int:
        return len(self.form)

    @property
    def is_classical(self) -> bool:
        return self.theta.value == 0

    def __repr__(self) -> str:
        return f"BicharacterSpec(theta={self.theta}, form={self.form})"

    def sigma(self, g: Vector, h: Vector) -> int:
        F = self.form
        return sum(g[i] * F[i][j] * h[j] for i in range(len(F)) for j in range(len(F)) if F[i][j])

    def phase(self, sigma: int) -> Residue:
        """theta * sigma reduced mod 2, exactly."""
        r = self._phases.get(sigma)
        if r is None:
            r = reduce_mod2(self.theta.value * sigma, self.precision_bits)
            self._phases[sigma] = r
        return r

    def value(self, sigma: int) -> tuple[complex, float]:
        """exp(i pi theta sigma) and an absolute error bound."""
        v = self._values.get(sigma)
        if v is None:
            r = self.phase(sigma)
            s = r.signed_approx
            z = complex(math.cos(math.pi * s), math.sin(math.pi * s))
            v = (z, math.pi * r.error + 16 * _U)
            self._values[sigma] = v
        return v

    def one_minus(self, sigma: int) -> complex:
        """1 - omega, without the cancellation of forming 1 - exp(...)."""
        s = self.phase(sigma).signed_approx
        half = math.sin(math.pi * s / 2)
        return complex(2 * half * half, -math.sin(math.pi * s))

    def omega(self, g: Vector, h: Vector) -> Omega:
        sig = self.sigma(g, h)
        z, err = self.value(sig)
        return Omega(self.phase(sig).value, z, err)

    def is_invariant(self, T: IntMatrix) -> bool:
        """Exact check of sigma(Tg, Th) = sigma(g, h) on basis pairs."""
        m = self.dim
        if T.dim != m:
            return False
        cols = list(zip(*T.rows))
        for i in range(m):
            for j in range(m):
                if self.sigma(cols[i], cols[j]) != self.form[i][j]:
                    return False
        return True


def symplectic(spec: BicharacterSpec, g: Vector, h: Vector) -> int:
    if len(g) != spec.dim or len(h) != spec.dim:
        raise ValueError("dimension mismatch")
    return spec.sigma(g, h)


def omega(spec: BicharacterSpec, g: Vector, h: Vector) -> Omega:
    return spec.omega(g, h)


# ---------------------------------------------------------------------------
# decay of |1 - omega(g, T^n h)|


@dataclass(frozen=True)
class DecayRow:
    n: int
    sigma: int
    phase: Residue
    abs_one_minus_omega: float
    error: float
    partial_sum: float
    ratio: float | None  # outward ratio |1-w(n)| / |1-w(n -+ 1)|


@dataclass(frozen=True)
class DecayTable:
    rows: tuple
    lam: float
    c_hat: float

    def row(self, n: int) -> DecayRow:
        return self.rows[n - self.rows[0].n]

    def symmetric_partial_sum(self, N: int) -> float:
        """Sum of |1 - omega(g, T^n h)| over |n| <= N."""
        return math.fsum(r.abs_one_minus_omega for r in self.rows if abs(r.n) <= N)

    CSV_COLUMNS = ("n", "sigma", "phase_num", "phase_quad_a", "phase_quad_b",
                   "abs_one_minus_omega", "partial_sum", "error_bound")

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, r.sigma, f"{r.phase.approx:.17g}", str(r.phase.value.a),
                        str(r.phase.value.b), f"{r.abs_one_minus_omega:.17g}",
                        f"{r.partial_sum:.17g}", f"{r.error:.3g}"])


def _orbit(T: IntMatrix, h: Vector, N: int) -> dict[int, Vector]:
    out = {0: tuple(h)}
    v = tuple(h)
    for n in range(1, N + 1):
        v = T.apply(v)
        out[n] = v
    Tinv = T.inverse()
    v = tuple(h)
    for n in range(1, N + 1):
        v = Tinv.apply(v)
        out[-n] = v
    return out


def decay_table(spec: BicharacterSpec, g: Vector, h: Vector, T: IntMatrix, N: int) -> DecayTable:
    """|1 - omega(g, T^n h)| for n = -N..N from exact phase residues.

    ``partial_sum`` accumulates in row order; ``c_hat`` is the fitted
    constant max_n |1 - omega| |lambda|^|n|.
    """
    if not aperiodicity_check(T):
        raise ValueError("decay_table needs an aperiodic T")
    if abs(T.det) != 1:
        raise ValueError("decay_table needs det T = +-1 for negative powers")
    lam = max(abs(complex(v)) for v in _eigs(T))
    orbit = _orbit(T, h, N)
    vals = {}
    for n in range(-N, N + 1):
        sig = spec.sigma(g, orbit[n])
        r = spec.phase(sig)
        mag = abs(spec.one_minus(sig))
        vals[n] = (sig, r, mag, math.pi * r.error + 8 * _U * mag + 4 * _U)
    rows, running = [], []
    c_hat = 0.0
    for n in range(-N, N + 1):
        sig, r, mag, err = vals[n]
        running.append(mag)
        prev = vals.get(n - 1 if n > 0 else n + 1) if n != 0 else None
        ratio = None
        if prev is not None and prev[2] > 0:
            ratio = mag / prev[2]
        c_hat = max(c_hat, mag * lam ** abs(n))
        rows.append(DecayRow(n, sig, r, mag, err, math.fsum(running), ratio))
    return DecayTable(tuple(rows), lam, c_hat)


def _eigs(T: IntMatrix):
    return np.linalg.eigvals(T.to_numpy())


def float_phase_decay(theta: float, g: Vector, h: Vector, T: IntMatrix, N: int) -> list[float]:
    """|1 - omega(g, T^n h)|, n = 0..N, computed the naive way in doubles.

    Kept to show what goes wrong: theta*sigma is of size lambda^n while the
    residue that matters is of size lambda^-n.
    """
    out = []
    v = tuple(h)
    for _ in range(N + 1):
        sig = float(g[0] * v[1] - g[1] * v[0])
        ph = math.fmod(theta * sig, 2.0)
        out.append(abs(1 - complex(math.cos(math.pi * ph), math.sin(math.pi * ph))))
        v = T.apply(v)
    return out


@dataclass(frozen=True)
class ContractingResidue:
    estimate: float
    exact: QuadNumber | None  # set when every extraction in the window agrees exactly
    values: tuple
    converged: bool


def contracting_residue(spec: BicharacterSpec, g: Vector, h: Vector, T: IntMatrix,
                        window: tuple[int, int] = (15, 25), rtol: float = 1e-6) -> ContractingResidue:
    """Limit of lambda^n times the signed residue of theta sigma(g, T^n h) mod 2.

    The product is formed exactly in the quadratic field before conversion,
    so the extraction itself adds no cancellation error.
    """
    if T.dim != 2:
        raise ValueError("contracting_residue needs a 2x2 matrix")
    lam = dominant_eigenvalue(T)
    lo, hi = window
    v = tuple(h)
    for _ in range(lo):
        v = T.apply(v)
    exact_vals = []
    for n in range(lo, hi + 1):
        sig = spec.sigma(g, v)
        signed = spec.phase(sig).signed
        exact_vals.append(signed * lam**n)
        v = T.apply(v)
    floats = tuple(float(x) for x in exact_vals)
    est = floats[-1]
    scale = max(abs(f) for f in floats)
    spread = max(floats) - min(floats)
    converged = spread <= rtol * scale if scale > 0 else True
    same = all(x == exact_vals[0] for x in exact_vals)
    return ContractingResidue(est, exact_vals[0] if same else None, floats, converged)
