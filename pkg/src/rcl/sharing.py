"""Degree-1 secret sharing over a prime field.

A secret s is hidden as the constant term of the line q(X) = s + a1*X
with a1 uniform in GF(p).  Agent j's share is q(j+1); evaluation points
start at 1 so that no single agent's point is 0, which would hand that
agent the secret outright.  Any single share is uniform over the field
and reveals nothing; any two shares determine the line.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_PRIME = 2_147_483_647  # 2**31 - 1, Mersenne


@dataclass(frozen=True)
class LinePoly:
    a0: int
    a1: int
    p: int

    def __post_init__(self):
        if not (0 <= self.a0 < self.p and 0 <= self.a1 < self.p):
            raise ValueError("coefficients must be reduced mod p")

    def eval(self, x: int) -> int:
        return (self.a0 + self.a1 * x) % self.p


def share_point(agent: int) -> int:
    """Field evaluation point assigned to an agent id."""
    return agent + 1


def make_shares(secret: int, slope: int, points: list[int],
                p: int = DEFAULT_PRIME) -> tuple[LinePoly, list[tuple[int, int]]]:
    """Split ``secret`` along the line with the given slope.

    The caller supplies the slope (drawn uniformly from GF(p) in the
    protocol); passing it explicitly keeps this function deterministic
    and testable.
    """
    if not 0 <= secret < p:
        raise ValueError("secret must lie in the field")
    if any(x % p == 0 for x in points):
        raise ValueError("evaluation point 0 would expose the secret")
    poly = LinePoly(secret, slope % p, p)
    return poly, [(x, poly.eval(x)) for x in points]


_INV_CACHE: dict[tuple[int, int], int] = {}


def _inv(a: int, p: int) -> int:
    key = (a, p)
    v = _INV_CACHE.get(key)
    if v is None:
        v = _INV_CACHE[key] = pow(a, p - 2, p)
    return v


def reconstruct(s1: tuple[int, int], s2: tuple[int, int],
                p: int = DEFAULT_PRIME) -> int:
    """Interpolate the line through two shares and return q(0)."""
    (x1, y1), (x2, y2) = s1, s2
    d = (x2 - x1) % p
    if d == 0:
        raise ValueError("shares at the same point cannot be interpolated")
    # q(0) = (y1*x2 - y2*x1) / (x2 - x1)
    return (y1 * x2 - y2 * x1) * _inv(d, p) % p


def check_collinear(shares: list[tuple[int, int]], p: int = DEFAULT_PRIME) -> bool:
    """True iff all shares lie on one line (fewer than 3 always do)."""
    distinct: dict[int, int] = {}
    for x, y in shares:
        x, y = x % p, y % p
        if x in distinct:
            if distinct[x] != y:
                return False
        else:
            distinct[x] = y
    pts = sorted(distinct.items())
    if len(pts) < 3:
        return True
    (x1, y1), (x2, y2) = pts[0], pts[1]
    for x, y in pts[2:]:
        # cross-multiplied slope equality avoids division
        if (y - y1) * (x2 - x1) % p != (y2 - y1) * (x - x1) % p:
            return False
    return True
