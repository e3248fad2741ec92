"""Deterministic counter-based randomness.

Every random draw in a run is a pure function of (master seed, trial,
agent key, purpose tag).  There is no shared mutable generator state, so
trials can be evaluated in any order, or in parallel, and still produce
byte-identical results.  Draws destined for a particular peer are keyed
by that peer's identity key rather than by iteration order, which makes
runs equivariant under relabelling of agents.

The mixer is the splitmix64 finalizer, which has full avalanche and is
more than adequate for simulation purposes.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer: bijective on 64-bit ints, full avalanche."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _MIX1) & MASK64
    x ^= x >> 27
    x = (x * _MIX2) & MASK64
    return x ^ (x >> 31)


def derive_key(*parts: int) -> int:
    """Fold an arbitrary tuple of ints into a 64-bit stream key."""
    h = _GOLDEN
    for p in parts:
        h = mix64(h ^ mix64(p & MASK64))
    return h


# Purpose tags for keyed draws.  Packed into the low bits of the tag word
# together with round / peer / secret-index fields; every draw an agent
# makes has a distinct (purpose, round, peer, index) combination.
P_Z_SPECIAL = 1
P_Z_FRESH = 2
P_SECRET = 3
P_SLOPE = 4
P_GUESS = 5


class Keyed:
    """Stateless keyed draws plus an optional sequential stream.

    ``tagged`` draws are pure functions of the key and the tag fields.
    ``randrange``/``random`` advance an internal counter and are used
    where a plain sequential stream is fine (context sampling).
    """

    __slots__ = ("key", "_ctr")

    def __init__(self, *parts: int):
        self.key = derive_key(*parts)
        self._ctr = 0

    # -- keyed (counter-free) draws -------------------------------------

    def tagged(self, bound: int, purpose: int, rnd: int = 0, peer: int = 0,
               idx: int = 0) -> int:
        """Draw from range(bound), keyed by (purpose, rnd, peer, idx).

        Bias from the final modulo is at most bound / 2**64.
        """
        tag = purpose | (rnd << 4) | (idx << 10) | (peer << 20)
        x = (self.key ^ (tag * _GOLDEN)) & MASK64
        x ^= x >> 30
        x = (x * _MIX1) & MASK64
        x ^= x >> 27
        x = (x * _MIX2) & MASK64
        return ((x ^ (x >> 31)) * bound) >> 64

    # -- sequential stream ----------------------------------------------

    def _next(self) -> int:
        v = mix64(self.key ^ mix64(self._ctr))
        self._ctr += 1
        return v

    def randrange(self, bound: int) -> int:
        return (self._next() * bound) >> 64

    def random(self) -> float:
        return self._next() / 2.0**64

    def bernoulli(self, p: float) -> bool:
        return self.random() < p


def agent_rng(master: int, trial: int, agent_key: int) -> Keyed:
    return Keyed(master, trial, 0xA6, agent_key)


def context_rng(master: int, trial: int) -> Keyed:
    return Keyed(master, trial, 0xC0)
