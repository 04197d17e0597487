import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catlab.arith import (
    IntMatrix,
    QuadNumber,
    aperiodicity_check,
    charpoly,
    dominant_eigenvalue,
    is_squarefree,
    mat_pow,
    quad_reduce_mod2,
    reduce_mod2,
    spectral_data,
    squarefree_decompose,
    trace_sequence,
)
from catlab.errors import PrecisionExhausted

CAT = IntMatrix(((2, 1), (1, 1)))

DIGITS = 200


def oracle_mod2(a: int, b: int, D: int) -> tuple[int, Fraction]:
    """Reduce a + b sqrt(D) mod 2 with a 200-digit integer square root.

    Returns (k, approximate residue) with x = residue + 2k.
    """
    scale = 10**DIGITS
    root = math.isqrt(D * scale * scale)  # floor(sqrt(D) * 10^200)
    lo = a * scale + b * root if b >= 0 else a * scale + b * (root + 1)
    hi = a * scale + b * (root + 1) if b >= 0 else a * scale + b * root
    k = lo // (2 * scale)
    assert k == hi // (2 * scale), "oracle enclosure straddles an even integer"
    return k, Fraction(lo, scale) - 2 * k


quads = st.builds(
    QuadNumber,
    st.fractions(max_denominator=50, min_value=-1000, max_value=1000),
    st.fractions(max_denominator=50, min_value=-1000, max_value=1000),
    st.sampled_from([2, 3, 5, 7]),
)


def test_quad_normalisation():
    assert QuadNumber(3, 0, 5).D == 0
    assert QuadNumber(1, 2, 1) == QuadNumber(3)
    with pytest.raises(ValueError):
        QuadNumber(1, 1, 4)
    with pytest.raises(ValueError):
        QuadNumber(1, 1, 0)


def test_squarefree_helpers():
    assert is_squarefree(5) and is_squarefree(30)
    assert not is_squarefree(12)
    assert squarefree_decompose(45) == (3, 5)


def test_quad_ring_ops_exact():
    r5 = QuadNumber.sqrt(5)
    lam = (3 + r5) / 2
    assert lam * lam == QuadNumber(Fraction(7, 2), Fraction(3, 2), 5)
    assert lam * lam.conjugate() == 1
    assert lam.inverse() == lam.conjugate()
    assert lam**-3 * lam**3 == 1
    assert (r5 - r5) == 0


@given(quads, quads)
def test_quad_arithmetic_matches_floats(x, y):
    if x.D and y.D and x.D != y.D:
        return
    fx, fy = float(x), float(y)
    tol = 1e-9 * (1 + abs(fx) + abs(fy)) ** 2
    assert abs(float(x + y) - (fx + fy)) <= tol
    assert abs(float(x * y) - fx * fy) <= tol
    if y != 0:
        q = x / y
        assert q * y == x


@given(quads)
def test_sign_is_exact(x):
    lo, hi = x.enclose(300)
    if lo > 0:
        assert x.sign() == 1
    elif hi < 0:
        assert x.sign() == -1
    else:
        assert x.sign() == 0


def test_sign_under_heavy_cancellation():
    # Fibonacci ratio: F_{n+1} - F_n * phi ~ phi^-n, invisible in doubles for n large
    phi = (1 + QuadNumber.sqrt(5)) / 2
    a, b = 0, 1
    for n in range(1, 120):
        a, b = b, a + b
        x = b - a * phi
        assert x.sign() == (1 if n % 2 == 0 else -1)


def test_approx_error_is_certified():
    x = QuadNumber(-5, -3, 5)
    f, err = x.approx()
    lo, hi = x.enclose(200)
    assert float(lo) - err <= f <= float(hi) + err
    assert err < 1e-15


def test_floor_exact():
    assert QuadNumber(7, 3, 5).floor() == 13
    assert QuadNumber(-7, -3, 5).floor() == -14
    assert QuadNumber(Fraction(7, 2)).floor() == 3


def test_reduce_even_integer():
    r = quad_reduce_mod2(QuadNumber(4))
    assert r.value == 0 and r.shift == 2


@pytest.mark.parametrize("a,b,expected", [
    (7, 3, QuadNumber(7 - 12, 3, 5)),
    (-5, -3, QuadNumber(7, -3, 5)),
])
def test_reduce_fixtures(a, b, expected):
    r = reduce_mod2(QuadNumber(a, b, 5))
    assert r.value == expected
    k, approx = oracle_mod2(a, b, 5)
    assert r.shift == k
    assert abs(r.approx - float(approx)) <= r.error + 1e-300
    assert r.error < 2.0 ** (-32)


def test_reduce_fixture_values():
    assert abs(reduce_mod2(QuadNumber(7, 3, 5)).approx - 1.7082039324993694) < 1e-15
    assert abs(reduce_mod2(QuadNumber(-5, -3, 5)).approx - 0.2917960675006309) < 1e-15


@given(st.integers(-10**30, 10**30), st.integers(-10**30, 10**30), st.sampled_from([2, 3, 5, 13]))
def test_reduce_matches_integer_sqrt_oracle(a, b, D):
    x = QuadNumber(a, b, D)
    k, approx = oracle_mod2(a, b, D)
    r = reduce_mod2(x)
    assert r.shift == k
    assert r.value == x - 2 * k
    assert 0 <= r.value < 2
    assert abs(r.approx - float(approx)) <= r.error + 1e-15


@given(quads, st.integers(-10**6, 10**6))
def test_reduce_invariant_under_even_shift(x, y):
    assert reduce_mod2(x + 2 * y).value == reduce_mod2(x).value


def test_fixed_precision_exhaustion_is_signalled():
    # phi^200 + phi^-200 is an integer L, so phi^200 sits just below L
    phi = (1 + QuadNumber.sqrt(5)) / 2
    x = phi**200
    L = x.floor() + 1
    near_even = x if L % 2 == 0 else x + 1
    with pytest.raises(PrecisionExhausted):
        quad_reduce_mod2(near_even, 64)
    r = reduce_mod2(near_even)
    assert 0 <= r.value < 2


def test_precision_floor():
    with pytest.raises(ValueError):
        quad_reduce_mod2(QuadNumber(1), 32)


def test_mat_pow_fixtures():
    I = IntMatrix.identity(2)
    assert mat_pow(I, 17) == I
    assert mat_pow(CAT, 2) == IntMatrix(((5, 3), (3, 2)))
    inv = mat_pow(CAT, -1)
    assert inv == IntMatrix(((1, -1), (-1, 2)))
    assert CAT @ inv == I


def test_negative_power_needs_unimodular():
    with pytest.raises(ValueError):
        mat_pow(IntMatrix(((2, 0), (0, 1))), -1)


small = st.integers(-3, 3)
mats2 = st.builds(lambda a, b, c, d: IntMatrix(((a, b), (c, d))), small, small, small, small)


@given(mats2, st.integers(0, 20), st.integers(0, 20))
def test_mat_pow_additive(T, a, b):
    assert mat_pow(T, a + b) == mat_pow(T, a) @ mat_pow(T, b)


def test_det_is_exact_for_large_entries():
    T = mat_pow(CAT, 60)
    assert T.det == 1
    assert IntMatrix(((2, 0, 0), (0, 3, 0), (1, 1, 5))).det == 30


def test_trace_sequence_fixtures():
    assert trace_sequence(CAT, 4) == [2, 3, 7, 18, 47]
    assert trace_sequence(IntMatrix.identity(2), 6) == [2] * 7
    assert trace_sequence(IntMatrix(((3, -1), (1, 0))), 4) == [2, 3, 7, 18, 47]


@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6))
def test_trace_sequence_matches_powers(a, b, c):
    # any det-1 matrix [[a, b], [c, d]] with a d - b c = 1
    if a == 0 or (1 + b * c) % a:
        return
    T = IntMatrix(((a, b), (c, (1 + b * c) // a)))
    seq = trace_sequence(T, 30)
    assert seq == [mat_pow(T, n).trace for n in range(31)]


def companion(coeffs):
    """Companion matrix of x^m + c_1 x^{m-1} + ... + c_m."""
    m = len(coeffs)
    rows = [[0] * m for _ in range(m)]
    for i in range(1, m):
        rows[i][i - 1] = 1
    for i, c in enumerate(reversed(coeffs)):
        rows[i][m - 1] = -c
    return IntMatrix(tuple(tuple(r) for r in rows))


def numeric_aperiodic(T):
    return bool(np.all(np.abs(np.abs(np.linalg.eigvals(T.to_numpy().astype(float))) - 1) > 1e-6))


@pytest.mark.parametrize("T,expected", [
    (CAT, True),
    (IntMatrix(((0, -1), (1, 0))), False),
    (IntMatrix(((1, 1), (0, 1))), False),
    (IntMatrix.identity(2), False),
    (IntMatrix(((2, 0), (0, 3))), True),
    (IntMatrix(((0, 1), (1, 1))), True),  # det -1, trace 1
    (IntMatrix(((0, 1), (1, 0))), False),  # det -1, trace 0
    (IntMatrix(((0, 0, 1), (1, 0, 0), (0, 1, 0))), False),
    (companion([-1, -1, -1, 1]), False),  # Salem polynomial: two roots on the circle
    (companion([0, -4, 0, 1]), True),
    (companion([0, 1, 0, 1]), False),  # x^4 + x^2 + 1: roots of unity
    (companion([0, 0, 0, -2]), True),
    (companion([3, 3, 1]), False),  # (x + 1)^3, defective eigenvalue -1
])
def test_aperiodicity_fixtures(T, expected):
    ap = aperiodicity_check(T)
    assert ap.aperiodic is expected
    assert ap.exact
    assert bool(ap) is expected


def test_aperiodicity_margin_cat():
    ap = aperiodicity_check(CAT)
    assert ap.margin > 0.6


@given(st.lists(st.integers(-4, 4), min_size=3, max_size=3))
def test_aperiodicity_agrees_with_numerics_3x3(c):
    T = companion(c)
    if T.det == 0:
        return
    ev = np.abs(np.linalg.eigvals(T.to_numpy().astype(float)))
    # repeated roots scatter by ~u^(1/3) in floating point; the numeric oracle
    # is only trusted away from the circle
    if 1e-9 < np.min(np.abs(ev - 1)) < 1e-3:
        return
    assert aperiodicity_check(T).aperiodic == numeric_aperiodic(T)


def test_charpoly():
    assert charpoly(CAT) == [1, -3, 1]
    assert charpoly(companion([2, 3, 5])) == [1, 2, 3, 5]


def test_dominant_eigenvalue_exact():
    lam = dominant_eigenvalue(CAT)
    assert lam == QuadNumber(Fraction(3, 2), Fraction(1, 2), 5)


def test_spectral_data_cat():
    sd = spectral_data(CAT)
    vals = sorted(complex(v).real for v in sd.eigenvalues)
    assert vals == pytest.approx([(3 - 5**0.5) / 2, (3 + 5**0.5) / 2], abs=1e-14)
    total = sum(sd.projections)
    assert np.max(np.abs(total - np.eye(2))) < 1e-12
    for i, P in enumerate(sd.projections):
        assert np.linalg.matrix_rank(P, tol=1e-9) == 1
        for j, Q in enumerate(sd.projections):
            if i != j:
                assert np.max(np.abs(P @ Q)) < 1e-12


def test_spectral_data_diagonal():
    sd = spectral_data(IntMatrix(((2, 0), (0, 3))))
    by_value = dict(zip((round(complex(v).real) for v in sd.eigenvalues), sd.projections))
    assert np.allclose(by_value[2], np.diag([1, 0]))
    assert np.allclose(by_value[3], np.diag([0, 1]))


@pytest.mark.parametrize("T", [
    CAT,
    IntMatrix(((2, 0), (0, 3))),
    IntMatrix(((2, 1), (0, 2))),  # Jordan block
    companion([0, -4, 0, 1]),
    companion([0, 0, 0, -2]),
    IntMatrix(((2, 1, 0), (1, 1, 0), (0, 0, 3))),
])
def test_jordan_bound_holds(T):
    sd = spectral_data(T)
    A = T.to_numpy().astype(float)
    for (C, delta), P, lam in zip(sd.jordan, sd.projections, sd.eigenvalues):
        mod = abs(complex(lam))
        rho = mod + delta
        assert delta == pytest.approx(abs(1 - mod) / 2)
        assert (rho < 1) == (mod < 1)
        An = np.eye(T.dim)
        for n in range(51):
            # exact integer power keeps the reference free of accumulated rounding
            An = mat_pow(T, n).to_numpy().astype(float)
            assert np.linalg.norm(An @ P, 2) <= C * rho**n * (1 + 1e-6) + 1e-9 * np.linalg.norm(An, 2)


def test_spectral_data_rejects_periodic():
    with pytest.raises(ValueError):
        spectral_data(IntMatrix(((1, 1), (0, 1))))
