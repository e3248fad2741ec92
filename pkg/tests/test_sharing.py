"""Degree-1 secret sharing over a prime field."""

import itertools

import pytest
from hypothesis import given, strategies as st

from rcl.sharing import (DEFAULT_PRIME, LinePoly, check_collinear,
                         make_shares, reconstruct, share_point)

P = 13


def test_share_point_never_zero():
    assert [share_point(a) for a in range(5)] == [1, 2, 3, 4, 5]


def test_line_poly_validates_coefficients():
    with pytest.raises(ValueError):
        LinePoly(P, 0, P)
    assert LinePoly(3, 2, P).eval(5) == (3 + 10) % P


def test_round_trip_exhaustive_small_field():
    points = [1, 2, 3, 4]
    for secret, slope in itertools.product(range(P), repeat=2):
        _, shares = make_shares(secret, slope, points, P)
        for s1, s2 in itertools.combinations(shares, 2):
            assert reconstruct(s1, s2, P) == secret


def test_single_share_posterior_uniform_exhaustive():
    # at every evaluation point, each observed share value is produced by
    # exactly one slope per candidate secret: the share reveals nothing
    for x in range(1, P):
        for secret in range(P):
            seen = {LinePoly(secret, slope, P).eval(x) for slope in range(P)}
            assert seen == set(range(P))


def test_make_shares_rejects_bad_inputs():
    with pytest.raises(ValueError):
        make_shares(P, 0, [1], P)
    with pytest.raises(ValueError):
        make_shares(1, 1, [0, 1], P)
    with pytest.raises(ValueError):
        make_shares(1, 1, [P, 1], P)  # P mod P == 0


def test_reconstruct_rejects_duplicate_point():
    with pytest.raises(ValueError):
        reconstruct((2, 5), (2, 7), P)


def test_check_collinear():
    _, shares = make_shares(4, 9, [1, 2, 3, 4], P)
    assert check_collinear(shares, P)
    bent = shares[:-1] + [(shares[-1][0], (shares[-1][1] + 1) % P)]
    assert not check_collinear(bent, P)
    # two points always lie on a line; conflicting duplicates never do
    assert check_collinear([(1, 3), (2, 7)], P)
    assert not check_collinear([(1, 3), (1, 4), (2, 7)], P)


@given(st.integers(0, DEFAULT_PRIME - 1), st.integers(0, DEFAULT_PRIME - 1),
       st.integers(0, 9), st.integers(0, 9))
def test_round_trip_default_prime(secret, slope, a, b):
    if a == b:
        b = (b + 1) % 10
    pts = [share_point(a), share_point(b)]
    _, shares = make_shares(secret, slope, pts)
    assert reconstruct(shares[0], shares[1]) == secret
    assert check_collinear(shares)
