import itertools
import json

import pytest
from hypothesis import given, strategies as st

from catlab.arith import IntMatrix, mat_pow, vadd
from catlab.errors import BudgetExhausted, CollisionError, HorizonError
from catlab.horizon import (
    Relation,
    Window,
    brute_force_min_n,
    certificate_n0,
    difference_set,
    find_relation,
    relation_free,
    sum_bijection,
)

CAT = IntMatrix(((2, 1), (1, 1)))
Y9 = Window.box((3, 3), offset=-1)


def naive_relation_exists(Y, T, n, k):
    """Plain enumeration over Y^k with y_1 != 0 (small cases only)."""
    Tn = mat_pow(T, n)
    pows = [IntMatrix.identity(T.dim)]
    for _ in range(k - 1):
        pows.append(pows[-1] @ Tn)
    for ys in itertools.product(list(Y), repeat=k):
        if not any(ys[0]):
            continue
        s = (0,) * T.dim
        for P, y in zip(pows, ys):
            s = vadd(s, P.apply(y))
        if not any(s):
            return True
    return False


def test_window_basics():
    X = Window.box((2, 2))
    assert len(X) == 4 and X.dim == 2
    assert (1, 1) in X and (2, 0) not in X
    with pytest.raises(ValueError):
        Window(((0, 0), (0, 0)))
    with pytest.raises(ValueError):
        Window(())


def test_difference_set_fixtures():
    assert list(difference_set(Window(((0, 0),)))) == [(0, 0)]
    D = difference_set(Window.box((2, 2)))
    assert set(D) == set(Y9)
    assert len(D) == 9


@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=8, unique=True))
def test_difference_set_properties(pts):
    X = Window(tuple(pts))
    D = difference_set(X)
    assert (0, 0) in D
    assert len(D) <= len(X) ** 2


def test_certificate_cat_map():
    cert = certificate_n0(Y9, CAT)
    # frozen after cross-checking with the brute-force search below
    assert cert.n0 == 10
    assert len(cert.per_eigenvalue) == 2
    for e in cert.per_eigenvalue:
        assert e.C == pytest.approx(1.1, rel=1e-9)
        assert e.M == pytest.approx(3.0777, rel=1e-4)
        assert e.rho < 1
    json.dumps(cert.to_json())


def test_certificate_trivial_window():
    assert certificate_n0(Window(((0, 0),)), CAT).n0 == 1


def test_certificate_rejects_periodic():
    with pytest.raises((HorizonError, ValueError)):
        certificate_n0(Y9, IntMatrix(((1, 1), (0, 1))))


def test_certificate_other_matrices():
    for T in (IntMatrix(((3, 1), (2, 1))), IntMatrix(((1, 1), (1, 0))), IntMatrix(((2, 0), (0, 3)))):
        cert = certificate_n0(Y9, T)
        for n in range(cert.n0, cert.n0 + 3):
            assert relation_free(Y9, T, n, 4)


def test_brute_force_cat_map():
    res = brute_force_min_n(Y9, CAT, 5, 15)
    assert res.min_n == 2
    rel = res.witnesses[1]
    assert rel.holds(CAT)
    assert rel.k == 2
    assert res.min_n <= certificate_n0(Y9, CAT).n0


def test_spec_witness_holds():
    assert Relation(1, ((1, 0), (-1, 1))).holds(CAT)
    assert CAT.apply((-1, 1)) == (-1, 0)
    assert not Relation(1, ((0, 0), (0, 0))).holds(CAT)


def test_brute_force_trivial_window():
    res = brute_force_min_n(Window(((0, 0),)), CAT, 4, 5)
    assert res.min_n == 1 and res.witnesses == {}


def test_certificate_soundness_k5():
    n0 = certificate_n0(Y9, CAT).n0
    for n in range(n0, n0 + 6):
        assert relation_free(Y9, CAT, n, 5)


@pytest.mark.parametrize("n,k", [(1, 2), (1, 3), (2, 2), (2, 3), (3, 3), (1, 4)])
def test_meet_in_middle_matches_naive(n, k):
    assert (find_relation(Y9, CAT, n, k) is not None) == naive_relation_exists(Y9, CAT, n, k)


def test_monotone_in_k():
    for n in range(1, 6):
        free = [relation_free(Y9, CAT, n, k) for k in range(2, 6)]
        # relation-free at a larger k implies relation-free at every smaller k
        for i in range(len(free)):
            if free[i]:
                assert all(free[:i + 1])


def test_relation_json_roundtrip():
    rel = find_relation(Y9, CAT, 1, 3)
    back = Relation.from_json(json.loads(rel.dumps()))
    assert back == rel and back.holds(CAT)


def test_budget_exhaustion():
    with pytest.raises(BudgetExhausted):
        find_relation(Y9, CAT, 1, 6, budget=100)
    with pytest.raises(BudgetExhausted):
        sum_bijection(Window.box((2, 2)), CAT, 10, 12, budget=1000)


def test_sum_bijection_fixtures():
    X = Window.box((2, 2))
    b1 = sum_bijection(X, CAT, 3, 1)
    assert set(b1.sums) == set(X)
    b3 = sum_bijection(X, CAT, 10, 3)
    assert len(b3) == 64 and len(set(b3.sums)) == 64
    with pytest.raises(CollisionError) as err:
        sum_bijection(X, CAT, 0, 2)
    e = err.value
    assert e.first != e.second
    payload = e.to_json()
    assert payload["error"] == "collision" and len(payload["witnesses"]) == 2


def test_sum_bijection_inverse_and_shift_structure():
    X = Window.box((2, 2))
    n = 10
    b2 = sum_bijection(X, CAT, n, 2)
    b3 = sum_bijection(X, CAT, n, 3)
    for t in itertools.product(list(X), repeat=3):
        assert b3.preimage(b3.forward(t)) == t
    shift = mat_pow(CAT, 2 * n)
    expected = {vadd(s, shift.apply(x)) for s in b2.sums for x in X}
    assert set(b3.sums) == expected
