"""Core model types: crash failures, contexts, outcomes, utilities.

A failure ``(agent, round, recipients)`` means the agent completes every
round before ``round`` normally, delivers its round-``round`` messages
only to ``recipients``, and sends nothing afterwards.  Crashing in round
m with an empty recipient set is indistinguishable from crashing in
round m-1 having sent to everyone, so patterns are kept in canonical
form where that identification has been applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class Decision(Enum):
    ZERO = 0
    ONE = 1
    BOT = "bot"          # deliberate "no consensus" decision
    NONE = "none"        # never decided (crashed mid-protocol)

    def __repr__(self) -> str:  # keeps traces compact
        return f"D:{self.value}"


DECISION_BY_VALUE = {0: Decision.ZERO, 1: Decision.ONE}


@dataclass(frozen=True, order=True)
class Failure:
    agent: int
    round: int
    recipients: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "recipients", frozenset(self.recipients))


def canonicalize_failure(fail: Failure, n: int) -> Failure:
    """Map a failure to its canonical representative.

    A crash in round m > 1 that delivers to nobody is rewritten as a
    crash in round m-1 that delivered to all other agents.
    """
    if fail.round > 1 and not fail.recipients:
        everyone = frozenset(j for j in range(n) if j != fail.agent)
        return canonicalize_failure(Failure(fail.agent, fail.round - 1, everyone), n)
    return fail


@dataclass(frozen=True)
class FailurePattern:
    failures: tuple[Failure, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "failures",
                           tuple(sorted(self.failures)))

    def by_agent(self) -> dict[int, Failure]:
        return {f.agent: f for f in self.failures}

    def __len__(self) -> int:
        return len(self.failures)


EMPTY_PATTERN = FailurePattern()


def validate_pattern(pattern: FailurePattern, n: int, f: int) -> list[str]:
    """Return a list of problems; empty means the pattern is admissible."""
    errs = []
    seen = set()
    for fl in pattern.failures:
        if not 0 <= fl.agent < n:
            errs.append(f"agent {fl.agent} out of range")
            continue
        if fl.agent in seen:
            errs.append(f"agent {fl.agent} fails twice")
        seen.add(fl.agent)
        if not 1 <= fl.round <= f + 1:
            errs.append(f"agent {fl.agent}: crash round {fl.round} outside 1..{f + 1}")
        if fl.agent in fl.recipients:
            errs.append(f"agent {fl.agent}: sends to itself")
        if any(not 0 <= r < n for r in fl.recipients):
            errs.append(f"agent {fl.agent}: recipient out of range")
        if canonicalize_failure(fl, n) != fl:
            errs.append(f"agent {fl.agent}: non-canonical (round {fl.round}, empty recipients)")
    if len(pattern) > f:
        errs.append(f"{len(pattern)} failures exceed bound {f}")
    return errs


@dataclass(frozen=True)
class Context:
    """A failure pattern together with the agents' initial preferences."""
    pattern: FailurePattern
    prefs: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.prefs)


def context_to_dict(ctx: Context, f: int) -> dict:
    return {
        "n": ctx.n,
        "f": f,
        "pattern": [
            {"agent": fl.agent, "round": fl.round,
             "recipients": sorted(fl.recipients)}
            for fl in ctx.pattern.failures
        ],
        "prefs": list(ctx.prefs),
    }


def context_from_dict(d: dict) -> tuple[Context, int]:
    pattern = FailurePattern(tuple(
        Failure(e["agent"], e["round"], frozenset(e["recipients"]))
        for e in d["pattern"]))
    return Context(pattern, tuple(d["prefs"])), d["f"]


def context_to_json(ctx: Context, f: int) -> str:
    return json.dumps(context_to_dict(ctx, f), separators=(",", ":"))


@dataclass(frozen=True)
class Outcome:
    """Per-run classification over the correct (nonfaulty, non-deviating) agents."""
    decisions: tuple[Decision, ...]
    consensus: int | None          # 0 or 1 when the correct agents agree on it
    no_consensus: bool             # True unless consensus is 0/1
    violations: tuple[str, ...]    # safety/liveness properties broken this run
    dictator: int | None           # winning agent id, when a value was decided


def classify_outcome(decisions: list[Decision], ctx: Context,
                     deviators: frozenset[int] = frozenset(),
                     dictator: int | None = None) -> Outcome:
    """Classify a run from the correct agents' point of view.

    Deviators are excluded: a rational deviator is not entitled to the
    protocol's guarantees, and its private decision never counts toward
    (or against) consensus.
    """
    n = ctx.n
    faulty = {fl.agent for fl in ctx.pattern.failures}
    correct = [i for i in range(n) if i not in faulty and i not in deviators]

    violations = []
    values = {decisions[i] for i in correct}
    if Decision.NONE in values:
        violations.append("termination")
    decided = values - {Decision.NONE}
    if len(decided) > 1:
        violations.append("agreement")

    consensus = None
    if len(decided) == 1:
        only = next(iter(decided))
        if only in (Decision.ZERO, Decision.ONE):
            consensus = only.value

    if consensus is not None and consensus not in ctx.prefs:
        violations.append("validity")

    return Outcome(tuple(decisions), consensus, consensus is None,
                   tuple(violations), dictator if consensus is not None else None)


@dataclass(frozen=True)
class UtilityParams:
    """beta0: own value wins; beta1: other value wins; beta2: no consensus."""
    beta0: float = 2.0
    beta1: float = 1.0
    beta2: float = 0.0

    def __post_init__(self):
        if not self.beta0 > self.beta1 > self.beta2:
            raise ValueError("utilities must satisfy beta0 > beta1 > beta2")


# Outcome class codes from one agent's point of view; utilities() maps a
# run to one of these, and aggregate statistics count them so that sums
# are exact integers and independent of accumulation order.
U_OWN, U_OTHER, U_NONE = 0, 1, 2


def utility_class(outcome: Outcome, pref: int) -> int:
    if outcome.consensus is None:
        return U_NONE
    return U_OWN if outcome.consensus == pref else U_OTHER


def utility_value(cls: int, params: UtilityParams) -> float:
    return (params.beta0, params.beta1, params.beta2)[cls]


def utilities(outcome: Outcome, ctx: Context,
              params: UtilityParams) -> list[float]:
    """Utility of every agent (faulty ones included: a crashed agent
    still cares about which value the survivors decide)."""
    return [utility_value(utility_class(outcome, v), params)
            for v in ctx.prefs]
