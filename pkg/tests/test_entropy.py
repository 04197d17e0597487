import cmath
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import logm

from catlab.arith import IntMatrix
from catlab.bicharacter import BicharacterSpec, ThetaSpec
from catlab.entropy import (
    Channel,
    Partition,
    StateDensity,
    best_effort_score,
    channel_density,
    convergence_report,
    eta,
    multichannel_lower_bound,
    relative_entropy,
    single_channel_score,
)
from catlab.errors import BudgetExhausted, ConfigError
from catlab.horizon import Window
from catlab.ncpoly import NCPolynomial, WindowMatrix, i_X, marginal_deviation, sup_deviation

CAT = IntMatrix(((2, 1), (1, 1)))
THETA = 7 - 3 * 5**0.5
QS = BicharacterSpec.standard(ThetaSpec.quadratic(CAT, -1))
ZS = BicharacterSpec.standard(ThetaSpec.zero())
X4 = Window.box((2, 2))
N0 = 10
GAMMA = Channel.from_i_X(X4, QS)


def random_density(d, rng, rank=None, trace=1.0):
    G = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    M = G @ G.conj().T
    return M * (trace / np.trace(M).real)


def oracle_S(phi, psi):
    """Tr psi (log psi - log phi) through scipy's matrix logarithm (full-rank inputs)."""
    return float(np.trace(psi @ (logm(psi) - logm(phi))).real)


# -- raw-definition oracle for tau, i_X and the densities -----------------------


def raw_i_X(x, y, theta, X):
    """Coefficient dict of i_X(e_xy) straight from the formula."""
    d = (x[0] - y[0], x[1] - y[1])
    sig = d[0] * y[1] - d[1] * y[0]
    return {d: cmath.exp(-1j * math.pi * theta * sig) / len(X)}


def raw_product_trace(p, q, theta):
    """tau(p q) by expanding the twisted product term by term."""
    total = 0j
    for g, a in p.items():
        for h, b in q.items():
            if (g[0] + h[0], g[1] + h[1]) == (0, 0):
                total += a * b * cmath.exp(1j * math.pi * theta * (g[0] * h[1] - g[1] * h[0]))
    return total


def raw_i_X_matrix(a, theta, X):
    out = {}
    for r, x in enumerate(X.points):
        for s, y in enumerate(X.points):
            if a[r, s] != 0:
                for g, c in raw_i_X(x, y, theta, X).items():
                    out[g] = out.get(g, 0) + a[r, s] * c
    return out


def raw_density(b, theta, X):
    d = len(X)
    Q = np.zeros((d, d), dtype=complex)
    for r, x in enumerate(X.points):
        for s, y in enumerate(X.points):
            Q[s, r] = raw_product_trace(raw_i_X(x, y, theta, X), b, theta)
    return Q


def raw_score(partition, theta, X):
    ref = raw_density({(0, 0): 1.0}, theta, X)
    total = 0.0
    for a in partition:
        b = raw_i_X_matrix(a.entries, theta, X)
        t = b.get((0, 0), 0).real
        total += -t * math.log(t) if t > 0 else 0.0
        total += oracle_S(ref, raw_density(b, theta, X))
    return total


# -- eta --------------------------------------------------------------------------


def test_eta_values():
    assert eta(0) == 0 and eta(1) == 0
    assert eta(0.5) == pytest.approx(0.5 * math.log(2))
    assert eta(-1e-13) == 0
    with pytest.raises(ValueError):
        eta(-0.1)
    with pytest.raises(ValueError):
        eta(1.5)


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6))
def test_eta_sum_maximal_at_uniform(ws):
    s = sum(ws)
    lam = [w / s for w in ws]
    assert sum(eta(v) for v in lam) <= math.log(len(lam)) + 1e-12


# -- densities and relative entropy --------------------------------------------------


def test_density_validation():
    with pytest.raises(ValueError):
        StateDensity(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        StateDensity(np.diag([1.0, -0.1]))


def test_density_reconstruction(rng):
    for _ in range(10):
        rho = StateDensity(random_density(5, rng))
        assert rho.reconstruction_error() < 1e-10


def test_relative_entropy_identities(rng):
    phi = StateDensity(random_density(4, rng))
    assert abs(relative_entropy(phi, phi)) < 1e-12
    for lam in (1.0, 0.5, 0.1, 1e-3):
        assert relative_entropy(phi, phi.scale(lam)) == pytest.approx(lam * math.log(lam), abs=1e-12)


def test_relative_entropy_support():
    phi = StateDensity(np.diag([1.0, 0.0]))
    psi = StateDensity(np.diag([0.0, 1.0]))
    assert relative_entropy(phi, psi) == math.inf
    assert relative_entropy(psi, StateDensity(np.zeros((2, 2)))) == 0.0
    assert relative_entropy(phi, StateDensity(np.diag([0.3, 0.0]))) == pytest.approx(0.3 * math.log(0.3))


def test_relative_entropy_matches_logm(rng):
    for _ in range(20):
        phi = random_density(4, rng)
        psi = random_density(4, rng, trace=0.4)
        got = relative_entropy(StateDensity(phi), StateDensity(psi))
        assert got == pytest.approx(oracle_S(phi, psi), abs=1e-9)


def test_relative_entropy_joint_convexity_spot(rng):
    for _ in range(20):
        phi = StateDensity(random_density(3, rng))
        p1, p2 = random_density(3, rng, trace=0.5), random_density(3, rng, trace=0.5)
        mid = relative_entropy(phi, StateDensity((p1 + p2) / 2))
        avg = (relative_entropy(phi, StateDensity(p1)) + relative_entropy(phi, StateDensity(p2))) / 2
        assert mid <= avg + 1e-9


def test_decomposition_bound(rng):
    d = 4
    phi = random_density(d, rng)
    w, v = np.linalg.eigh(phi)
    root = (v * np.sqrt(w)) @ v.conj().T
    P = Partition.random_psd(Window.box((d,)), 3, 5)
    parts = [root @ a.entries @ root for a in P]
    total = sum(eta(np.trace(p).real) + relative_entropy(StateDensity(phi), StateDensity(p)) for p in parts)
    assert total <= math.log(d) + 1e-9
    scalar = sum(eta(lam) + relative_entropy(StateDensity(phi), StateDensity(lam * phi)) for lam in (0.2, 0.3, 0.5))
    assert scalar == pytest.approx(0.0, abs=1e-14)


# -- partitions --------------------------------------------------------------------------


def test_partition_validation():
    with pytest.raises(ConfigError):
        Partition((WindowMatrix.unit(X4, (0, 0), (0, 0)),))
    with pytest.raises(ConfigError):
        Partition((WindowMatrix(X4, np.diag([2, 0, 0, 0])), WindowMatrix(X4, np.diag([-1, 1, 1, 1]))))


def test_partition_pruning():
    P = Partition(tuple(WindowMatrix.unit(X4, x, x) for x in X4) + (WindowMatrix.zeros(X4),))
    assert len(P) == 4


def test_partition_constructors_valid():
    Partition.diagonal(X4)
    Partition.trivial(X4)
    Partition.random_psd(X4, 5, 0)
    Partition.scalar(X4, [0.25, 0.75])
    a = Partition.random_unitary(X4, 11)
    b = Partition.random_unitary(X4, 11)
    assert all(np.array_equal(x.entries, y.entries) for x, y in zip(a, b))


# -- channels and densities ----------------------------------------------------------------


def test_channel_checks():
    Channel.from_i_X(X4, ZS)
    images = dict(GAMMA.images)
    images[0, 0] = images[0, 0].scale(2)
    with pytest.raises(ValueError):
        Channel(QS, 4, images)


def test_density_of_identity():
    Q = channel_density(GAMMA, NCPolynomial.identity(QS))
    assert np.allclose(Q.matrix, np.eye(4) / 4, atol=1e-15)
    assert Q.normalization == pytest.approx(1.0)
    Q2 = channel_density(GAMMA, NCPolynomial.identity(QS).scale(0.3))
    assert np.allclose(Q2.matrix, 0.3 * Q.matrix)


@pytest.mark.parametrize("x", [(0, 0), (1, 0), (1, 1)])
def test_density_matches_brute_force(x):
    b = i_X(WindowMatrix.unit(X4, x, x), QS).scale(len(X4))
    Q = channel_density(GAMMA, b)
    assert np.max(np.abs(Q.matrix - raw_density({k: v for k, v in b.coeffs.items()}, THETA, X4))) < 1e-14


def test_density_matches_brute_force_generic():
    P = Partition.random_unitary(X4, 7)
    for a in P:
        b = i_X(a, QS)
        raw = raw_density(raw_i_X_matrix(a.entries, THETA, X4), THETA, X4)
        assert np.max(np.abs(channel_density(GAMMA, b).matrix - raw)) < 1e-13


def test_density_defines_the_functional(rng):
    b = i_X(WindowMatrix(X4, random_density(4, rng)), QS)
    Q = channel_density(GAMMA, b)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    lhs = Q.expectation(a)
    rhs = (GAMMA.apply(a) * b).trace()
    assert abs(lhs - rhs) < 1e-13


# -- scores -----------------------------------------------------------------------------------


def test_trivial_partition_scores_zero():
    assert single_channel_score(GAMMA, Partition.trivial(X4)) == pytest.approx(0, abs=1e-15)


def test_scalar_partition_cancels_exactly():
    P = Partition.scalar(X4, [0.125, 0.375, 0.5])
    assert abs(single_channel_score(GAMMA, P)) < 1e-15


@pytest.mark.parametrize("theta,spec", [(THETA, QS), (0.0, ZS)])
def test_score_matches_raw_definitions(theta, spec):
    gamma = Channel.from_i_X(X4, spec)
    for P in (Partition.diagonal(X4), Partition.random_unitary(X4, 7), Partition.random_psd(X4, 3, 2)):
        assert single_channel_score(gamma, P) == pytest.approx(raw_score(P, theta, X4), abs=1e-9)


def test_score_bounded_by_log_dim():
    for seed in range(5):
        s = single_channel_score(GAMMA, Partition.random_unitary(X4, seed))
        assert -1e-12 <= s <= math.log(4) + 1e-12


def test_best_effort_score():
    best, P = best_effort_score(GAMMA, X4, 5, seed=2)
    assert best >= single_channel_score(GAMMA, Partition.diagonal(X4))
    assert best == pytest.approx(single_channel_score(GAMMA, P))


# -- multichannel lower bound ---------------------------------------------------------------------


@pytest.mark.parametrize("P", [Partition.diagonal(X4), Partition.random_unitary(X4, 7)])
def test_k1_equals_single_score(P):
    lb = multichannel_lower_bound(GAMMA, P, CAT, N0, 1)
    assert lb.value == single_channel_score(GAMMA, P)


@pytest.mark.parametrize("k", [2, 3])
def test_first_term_factorizes(k):
    P = Partition.random_unitary(X4, 7)
    taus = [i_X(a, QS).trace().real for a in P]
    for n in (N0, N0 + 2):
        lb = multichannel_lower_bound(GAMMA, P, CAT, n, k)
        assert lb.first_term == pytest.approx(lb.first_term_factorized, abs=1e-12)
        assert lb.first_term == pytest.approx(sum(eta(t) for t in taus), abs=1e-12)


def test_lower_bound_budget():
    with pytest.raises(BudgetExhausted):
        multichannel_lower_bound(GAMMA, Partition.diagonal(X4), CAT, N0, 4, budget=100)


def test_convergence_report_rotated_partition():
    P = Partition.random_unitary(X4, 7)
    rep = convergence_report(GAMMA, P, CAT, range(N0 + 2, N0 + 9), [1, 2])
    assert all(r.gap == 0 for r in rep.for_k(1))
    gaps = [abs(r.gap) for r in rep.for_k(2)]
    assert gaps[0] > 1e-10
    for a, b in zip(gaps, gaps[1:]):
        assert b <= a + 1e-9
    # regression fixture: gap at n = 12 for seed 7
    assert rep.for_k(2)[0].gap == pytest.approx(-3.2754863e-09, rel=1e-4)
    for r in rep.for_k(2):
        standalone = max(marginal_deviation(WindowMatrix.identity(X4), CAT, r.n, 2, l, QS).sup_deviation
                         for l in (1, 2))
        assert r.sup_deviation == standalone


def test_convergence_report_classical_zero_gap():
    gamma = Channel.from_i_X(X4, ZS)
    rep = convergence_report(gamma, Partition.diagonal(X4), CAT, range(N0, N0 + 4), [1, 2, 3])
    assert all(r.gap == 0 for r in rep.rows)


def test_convergence_report_outputs():
    P = Partition.random_unitary(X4, 7)
    rep = convergence_report(GAMMA, P, CAT, [12, 13], [2])
    buf = io.StringIO()
    rep.write_csv(buf, header=["test"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# test"
    assert lines[1] == "n,k,value,first_term,second_term,gap,sup_deviation"
    assert len(lines) == 4
    buf = io.StringIO()
    rep.write_json(buf)
    summary = json.loads(buf.getvalue())
    assert summary["k"]["2"]["converging"] is True
