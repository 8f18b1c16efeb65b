import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcfec.gf import (
    FieldError, Gf2Matrix, gf2_rank, make_field, minimal_polynomial, nullspace, poly_eval, rref,
)


def naive_rank(dense):
    a = [list(r) for r in np.asarray(dense) % 2]
    rank, cols = 0, len(a[0]) if a else 0
    for c in range(cols):
        piv = next((r for r in range(rank, len(a)) if a[r][c]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for r in range(len(a)):
            if r != rank and a[r][c]:
                a[r] = [x ^ y for x, y in zip(a[r], a[rank])]
        rank += 1
    return rank


def test_gf4_elements():
    f = make_field(2, 0b111)
    a = f.alpha(1)
    assert sorted(f.exp[:3]) == [1, 2, 3]
    assert f.mul(a, f.mul(a, a)) == 1


def test_gf64_alpha_order_by_repeated_multiplication():
    f = make_field(6, 0b1000011)
    x = 1
    for i in range(1, 64):
        x = f.mul(x, 2)
        assert (x == 1) == (i == 63)


@pytest.mark.parametrize("poly", [0b1111, 0b1001, 0b101])
def test_bad_polynomials(poly):
    # x^3+x^2+x+1 is reducible, x^3+1 reducible, x^2+1 reducible
    with pytest.raises(FieldError):
        make_field(poly.bit_length() - 1, poly)


def test_wrong_degree_and_constant_term():
    with pytest.raises(FieldError):
        make_field(4, 0b111)
    with pytest.raises(FieldError):
        make_field(3, 0b1010)
    with pytest.raises(FieldError):
        make_field(17)


@pytest.mark.parametrize("m", range(2, 9))
def test_field_axioms_exhaustive(m):
    f = make_field(m)
    q = f.order
    nz = np.arange(1, q + 1)
    assert sorted(f.exp[:q]) == list(nz)
    for a in nz:
        assert f.exp[f.log[a]] == a
        assert f.mul(a, f.inv(a)) == 1
    # commutativity and associativity via log tables against direct calls
    rng = np.random.default_rng(m)
    for a, b, c in rng.integers(1, q + 1, (300, 3)):
        a, b, c = int(a), int(b), int(c)
        assert f.mul(a, b) == f.mul(b, a)
        assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))


def test_minimal_polynomial_of_one():
    assert minimal_polynomial(make_field(4), 1) == 0b11


def test_minimal_polynomial_conjugates_gf8():
    f = make_field(3)
    a = f.alpha(1)
    mp = minimal_polynomial(f, a)
    assert mp.bit_length() - 1 == 3
    for e in (a, f.pow(a, 2), f.pow(a, 4)):
        assert poly_eval(f, mp, e) == 0


def test_minimal_polynomial_alpha9_gf64():
    f = make_field(6)
    e = f.alpha(9)
    mp = minimal_polynomial(f, e)
    deg = mp.bit_length() - 1
    assert 6 % deg == 0
    coset = {(9 * 2**j) % 63 for j in range(6)}
    roots = {f.log[x] for x in range(1, 64) if poly_eval(f, mp, x) == 0}
    assert roots == coset and len(coset) == deg


@pytest.mark.parametrize("m", [4, 6, 7])
def test_minimal_polynomials_vanish_on_conjugates(m):
    f = make_field(m)
    for i in range(1, f.order):
        e = f.alpha(i)
        mp = minimal_polynomial(f, e)
        for j in range(m):
            assert poly_eval(f, mp, f.pow(e, 2**j)) == 0


def test_minimal_polynomial_zero_rejected():
    with pytest.raises(FieldError):
        minimal_polynomial(make_field(3), 0)


def test_rref_identity_and_duplicate_row():
    eye = np.eye(6, dtype=np.uint8)
    red, rank, piv = rref(Gf2Matrix.from_dense(eye))
    assert rank == 6 and piv == list(range(6))
    assert np.array_equal(red.to_dense(), eye)
    dup = np.vstack([eye[:3], eye[1:2]])
    assert rref(Gf2Matrix.from_dense(dup))[1] == 3


def test_rref_random_against_naive():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.integers(0, 2, (20, 40)).astype(np.uint8)
        red, rank, piv = rref(Gf2Matrix.from_dense(a))
        assert rank == naive_rank(a)
        assert naive_rank(a[:, piv]) == rank


def test_rref_column_order_pivots_follow_visiting_order():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 2, (8, 20)).astype(np.uint8)
    order = rng.permutation(20)
    red, rank, piv = rref(Gf2Matrix.from_dense(a), column_order=order)
    pos = {int(c): i for i, c in enumerate(order)}
    assert [pos[c] for c in piv] == sorted(pos[c] for c in piv)
    d = red.to_dense()[:rank]
    assert np.array_equal(d[:, piv], np.eye(rank, dtype=np.uint8))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rref_preserves_row_space(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, (16, 32)).astype(np.uint8)
    red, rank, _ = rref(Gf2Matrix.from_dense(a))
    r = red.to_dense()[:rank]
    assert naive_rank(np.vstack([a, r])) == rank == naive_rank(a)


def test_matrix_bounds_and_product():
    m = Gf2Matrix.from_dense(np.array([[1, 0, 1], [0, 1, 1]]))
    assert m.shape == (2, 3)
    assert m[1, 2] == 1
    with pytest.raises(IndexError):
        m[2, 0]
    with pytest.raises(IndexError):
        m[0, 3]
    prod = (m @ m.transpose()).to_dense()
    assert np.array_equal(prod, np.array([[0, 1], [1, 0]]))


def test_nullspace():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 2, (10, 25)).astype(np.uint8)
    ns = nullspace(a)
    assert ns.shape[0] == 25 - gf2_rank(a)
    assert not ((a.astype(int) @ ns.T.astype(int)) % 2).any()


def test_rank_of_all_2x2():
    for bits in itertools.product([0, 1], repeat=4):
        a = np.array(bits, dtype=np.uint8).reshape(2, 2)
        assert gf2_rank(a) == naive_rank(a)
