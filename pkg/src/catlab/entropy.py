"""Entropy functionals on finite matrix algebras and the multichannel lower bound.

Entropies are in nats. For a density phi and a subnormalized density psi
(typically a piece of a decomposition of phi) the relative entropy is

    S(phi, psi) = Tr psi (log psi - log phi),

which is <= 0 when psi <= phi and equals lam * log(lam) when psi = lam * phi,
so that for a scalar partition it cancels eta(lam) = -lam * log(lam) exactly.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .arith import IntMatrix
from .bicharacter import BicharacterSpec
from .errors import BudgetExhausted, ConfigError, ConsistencyError
from .horizon import Window
from .ncpoly import (
    PSD_TOL,
    NCPolynomial,
    WindowMatrix,
    i_X,
    sigma_nk,
    sup_deviation,
    trace_product,
)

ZERO_EIG = 1e-12
NEG_EIG = 1e-9
ENTROPY_BUDGET = 10**6


def eta(x: float) -> float:
    """-x log x with eta(0) = 0."""
    if x < -1e-12 or x > 1 + 1e-12:
        raise ValueError(f"eta is defined on [0, 1], got {x!r}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 0.0
    return -x * math.log(x)


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True, eq=False)
class StateDensity:
    """The functional a -> Tr(matrix @ a)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if np.max(np.abs(m - m.conj().T), initial=0.0) > PSD_TOL * scale:
            raise ValueError("density is not Hermitian")
        m = (m + m.conj().T) / 2
        object.__setattr__(self, "matrix", m)
        if self.eigenvalues.size and self.eigenvalues[0] < -NEG_EIG:
            raise ValueError(f"density has eigenvalue {self.eigenvalues[0]:.3g} < 0")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eigh(self):
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigh[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eigh[1]

    @property
    def normalization(self) -> float:
        return float(np.trace(self.matrix).real)

    def reconstruction_error(self) -> float:
        w, v = self._eigh
        return float(np.max(np.abs((v * w) @ v.conj().T - self.matrix), initial=0.0))

    def expectation(self, a: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ a))

    def scale(self, lam: float) -> StateDensity:
        return StateDensity(self.matrix * lam)


def relative_entropy(phi: StateDensity, psi: StateDensity) -> float:
    """Tr psi (log psi - log phi); +inf when supp(psi) is not inside supp(phi)."""
    if phi.dim != psi.dim:
        raise ValueError("densities of different dimension")
    p, V = phi.eigenvalues, phi.eigenvectors
    q, W = psi.eigenvalues, psi.eigenvectors
    keep_q = q > ZERO_EIG
    q, W = q[keep_q], W[:, keep_q]
    if q.size == 0:
        return 0.0
    overlap = np.abs(V.conj().T @ W) ** 2  # overlap[i, j] = |<v_i|w_j>|^2
    weight = overlap @ q  # weight[i] = <v_i| psi |v_i>
    live = p > ZERO_EIG
    if np.any(weight[~live] > ZERO_EIG):
        return math.inf
    psi_log_psi = math.fsum(q * np.log(q))
    psi_log_phi = math.fsum(weight[live] * np.log(p[live]))
    return psi_log_psi - psi_log_phi


# ---------------------------------------------------------------------------
# partitions of unity


@dataclass(frozen=True, eq=False)
class Partition:
    elements: tuple[WindowMatrix, ...]

    def __post_init__(self):
        elems = tuple(self.elements)
        if not elems:
            raise ConfigError("empty partition")
        X = elems[0].window
        for a in elems:
            if a.window != X:
                raise ConfigError("partition elements over different windows")
        pruned = tuple(a for a in elems if np.max(np.abs(a.entries)) > PSD_TOL)
        for i, a in enumerate(pruned):
            if not a.is_psd:
                raise ConfigError(f"partition element {i} is not positive semidefinite")
        total = sum((a.entries for a in pruned), np.zeros((len(X), len(X)), dtype=complex))
        if np.max(np.abs(total - np.eye(len(X)))) > PSD_TOL:
            raise ConfigError("partition elements do not sum to the identity")
        object.__setattr__(self, "elements", pruned)

    @property
    def window(self) -> Window:
        return self.elements[0].window

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i) -> WindowMatrix:
        return self.elements[i]

    @classmethod
    def trivial(cls, X: Window) -> Partition:
        return cls((WindowMatrix.identity(X),))

    @classmethod
    def diagonal(cls, X: Window) -> Partition:
        return cls(tuple(WindowMatrix.unit(X, x, x) for x in X))

    @classmethod
    def conjugated(cls, X: Window, U: np.ndarray) -> Partition:
        """{U e_xx U*}: the diagonal partition rotated by a unitary."""
        return cls(tuple(WindowMatrix(X, np.outer(U[:, i], U[:, i].conj())) for i in range(len(X))))

    @classmethod
    def random_unitary(cls, X: Window, seed: int) -> Partition:
        return cls.conjugated(X, random_unitary(len(X), np.random.default_rng(seed)))

    @classmethod
    def random_psd(cls, X: Window, size: int, seed: int) -> Partition:
        """S^{-1/2} A_i S^{-1/2} for random positive A_i with S = sum A_i."""
        rng = np.random.default_rng(seed)
        d = len(X)
        mats = []
        for _ in range(size):
            G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            mats.append(G @ G.conj().T)
        w, v = np.linalg.eigh(sum(mats))
        root = (v / np.sqrt(w)) @ v.conj().T
        elems = []
        for A in mats:
            B = root @ A @ root
            elems.append(WindowMatrix(X, (B + B.conj().T) / 2))
        # absorb the last rounding residue so the sum is the identity to machine precision
        residue = np.eye(d) - sum(e.entries for e in elems)
        elems[-1] = WindowMatrix(X, elems[-1].entries + residue)
        return cls(tuple(elems))

    @classmethod
    def scalar(cls, X: Window, weights: Sequence[float]) -> Partition:
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ConfigError("scalar partition weights must sum to 1")
        return cls(tuple(WindowMatrix(X, np.eye(len(X)) * w) for w in weights))

    def to_json(self) -> list:
        return [a.to_json()["entries"] for a in self.elements]


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with the phase of R's diagonal removed."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class Channel:
    """A linear map from d x d matrices into the algebra, given on matrix units."""

    spec: BicharacterSpec
    source_dim: int
    images: dict = field(repr=False)  # (r, s) -> NCPolynomial image of e_rs

    def __post_init__(self):
        d = self.source_dim
        if set(self.images) != {(r, s) for r in range(d) for s in range(d)}:
            raise ValueError("channel images must cover every matrix unit")
        unit = NCPolynomial.sum(self.spec, [self.images[r, r] for r in range(d)])
        if not unit.close_to(NCPolynomial.identity(self.spec), slack=1e-12):
            raise ValueError("channel is not unital")
        for (r, s), p in self.images.items():
            if r <= s and not p.adjoint().close_to(self.images[s, r], slack=1e-12):
                raise ValueError("channel does not preserve adjoints")

    @classmethod
    def from_i_X(cls, X: Window, spec: BicharacterSpec) -> Channel:
        images = {}
        for r, x in enumerate(X.points):
            for s, y in enumerate(X.points):
                images[r, s] = i_X(WindowMatrix.unit(X, x, y), spec)
        return cls(spec, len(X), images)

    def apply(self, a: np.ndarray) -> NCPolynomial:
        a = np.asarray(a)
        return NCPolynomial.sum(
            self.spec,
            [p.scale(a[r, s]) for (r, s), p in sorted(self.images.items()) if a[r, s] != 0],
        )


def channel_density(gamma: Channel, b: NCPolynomial) -> StateDensity:
    """Q with Tr(Q a) = tau(gamma(a) b), i.e. Q[s, r] = tau(gamma(e_rs) b)."""
    d = gamma.source_dim
    Q = np.zeros((d, d), dtype=complex)
    for (r, s), p in gamma.images.items():
        Q[s, r] = trace_product(p, b)
    try:
        return StateDensity(Q)
    except ValueError as exc:
        raise ConsistencyError(f"channel density is not a valid state: {exc}") from None


# ---------------------------------------------------------------------------
# scores


def _real_trace(p: NCPolynomial) -> float:
    t = p.trace()
    if abs(t.imag) > 1e-10:
        raise ConsistencyError(f"trace {t} of a positive element is not real")
    return min(max(t.real, 0.0), 1.0)


def single_channel_score(gamma: Channel, P: Partition) -> float:
    """sum_i eta(tau(b_i)) + sum_i S(tau gamma, tau(gamma(.) b_i)) with b_i = i_X(a_i)."""
    bs = [i_X(a, gamma.spec) for a in P]
    ref = channel_density(gamma, NCPolynomial.identity(gamma.spec))
    first = math.fsum(eta(_real_trace(b)) for b in bs)
    second = math.fsum(relative_entropy(ref, channel_density(gamma, b)) for b in bs)
    return first + second


@dataclass(frozen=True)
class LowerBound:
    value: float
    first_term: float
    second_term: float
    first_term_factorized: float


def multichannel_lower_bound(gamma: Channel, P: Partition, T: IntMatrix, n: int, k: int,
                             budget: int = ENTROPY_BUDGET) -> LowerBound:
    """(1/k) sum_I eta(tau(b(n,k)_I)) + (1/k) sum_l sum_i S(tau gamma, tau(gamma(.) alpha^{-n(l-1)} b(n,k)^{(l)}_i)).

    b(n,k)_I = sigma_nk(a_{i1} (x) ... (x) a_{ik}); the marginal b(n,k)^{(l)}_i
    sums b(n,k)_I over all I with I_l = i. The first term is also computed
    from tau(b(n,k)_I) = prod_l tau(b_{i_l}) and the two must agree.
    """
    spec = gamma.spec
    m = len(P)
    if m**k > budget:
        raise BudgetExhausted(f"{m}^{k} multi-indices exceed the budget {budget}")
    bs = [i_X(a, spec) for a in P]
    taus = [_real_trace(b) for b in bs]
    ref = channel_density(gamma, NCPolynomial.identity(spec))
    first_direct, first_fact = [], []
    marginals = [[[] for _ in range(m)] for _ in range(k)]
    for I in itertools.product(range(m), repeat=k):
        b = sigma_nk([P[i] for i in I], T, n, spec)
        t = b.trace()
        tf = math.prod(taus[i] for i in I)
        if abs(t - tf) > max(b.trace_error(), 1e-15) + 1e-12:
            raise ConsistencyError(f"trace factorization fails at {I}: {t} vs {tf}")
        first_direct.append(eta(_real_trace(b)))
        first_fact.append(eta(tf))
        for l, i in enumerate(I):
            marginals[l][i].append(b)
    second = []
    for l in range(k):
        for i in range(m):
            marg = NCPolynomial.sum(spec, marginals[l][i]).alpha(T, -n * l)
            second.append(relative_entropy(ref, channel_density(gamma, marg)))
    first = math.fsum(first_direct) / k
    fact = math.fsum(first_fact) / k
    sec = math.fsum(second) / k
    return LowerBound(first + sec, first, sec, fact)


@dataclass(frozen=True)
class ReportRow:
    n: int
    k: int
    value: float
    first_term: float
    second_term: float
    gap: float
    sup_deviation: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ReportRow, ...]
    score: float

    def for_k(self, k: int) -> list[ReportRow]:
        return [r for r in self.rows if r.k == k]

    def converging(self, k: int, tol: float = 1e-9) -> bool:
        """|gap| at the last n does not exceed |gap| at the first n, and heads to 0 with the deviation."""
        rows = self.for_k(k)
        if len(rows) < 2:
            return True
        return abs(rows[-1].gap) <= abs(rows[0].gap) + tol

    def summary(self) -> dict:
        out = {"single_channel_score": self.score, "k": {}}
        for k in sorted({r.k for r in self.rows}):
            rows = self.for_k(k)
            out["k"][str(k)] = {
                "n": [r.n for r in rows],
                "first_gap": rows[0].gap,
                "last_gap": rows[-1].gap,
                "max_abs_gap": max(abs(r.gap) for r in rows),
                "converging": self.converging(k),
            }
        return out

    def write_csv(self, fh, header: Iterable[str] = ()) -> None:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "k", "value", "first_term", "second_term", "gap", "sup_deviation"])
        for r in self.rows:
            w.writerow([r.n, r.k] + [f"{v:.17g}" for v in
                                     (r.value, r.first_term, r.second_term, r.gap, r.sup_deviation)])

    def write_json(self, fh) -> None:
        json.dump(self.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def convergence_report(gamma: Channel, P: Partition, T: IntMatrix, n_range: Iterable[int],
                       k_list: Iterable[int], budget: int = ENTROPY_BUDGET,
                       strict: bool = True) -> ConvergenceReport:
    """Tabulate the lower bound, its gap to the single-channel score and the marginal deviation.

    With ``strict`` a k whose final |gap| exceeds its first |gap| raises
    :class:`ConsistencyError`.
    """
    score = single_channel_score(gamma, P)
    X = P.window
    rows = []
    for k in sorted(set(k_list)):
        for n in sorted(set(n_range)):
            lb = multichannel_lower_bound(gamma, P, T, n, k, budget)
            dev = max(sup_deviation(gamma.spec, X, T, n, k, l) for l in range(1, k + 1))
            rows.append(ReportRow(n, k, lb.value, lb.first_term, lb.second_term, lb.value - score, dev))
    report = ConvergenceReport(tuple(rows), score)
    if strict:
        for k in {r.k for r in rows}:
            if not report.converging(k):
                raise ConsistencyError(f"gap does not shrink over the n range for k={k}")
    return report


def best_effort_score(gamma: Channel, X: Window, trials: int, seed: int) -> tuple[float, Partition]:
    """Max of the single-channel score over random unitary rotations of the diagonal partition.

    No optimality claim: this only samples partitions.
    """
    rng = np.random.default_rng(seed)
    best = Partition.diagonal(X)
    best_score = single_channel_score(gamma, best)
    for _ in range(trials):
        P = Partition.conjugated(X, random_unitary(len(X), rng))
        s = single_channel_score(gamma, P)
        if s > best_score:
            best, best_score = P, s
    return best_score, best
