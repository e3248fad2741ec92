"""Deterministic round-by-round execution of a context.

The simulator owns message delivery and crash injection; agents never
see the failure pattern directly.  All randomness flows through keyed
counter-based streams, so a (seed, trial) pair fully determines a run,
trials can be evaluated in any order, and relabelling agents together
with their stream keys relabels the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import (Context, Decision, DECISION_BY_VALUE, FailurePattern,
                   Failure, Outcome, classify_outcome, context_to_dict)
from .deviations import DeviationSpec, apply as apply_deviations
from .protocol import BOT, ConsAgent, INF_ROUND, NaiveAgent
from .rng import Keyed, agent_rng, context_rng
from .sharing import DEFAULT_PRIME


@dataclass(frozen=True)
class PiParams:
    """Independent crash/preference sampler with rejection of patterns
    exceeding the failure bound.

    Each agent crashes in round m with probability q*(1-q)**(m-1); a
    round-1 crasher delivers to a uniform subset of the others, later
    crashers to a uniform nonempty subset (the canonical-form cases).
    Preferences are iid Bernoulli(pref_prob) unless pinned via prefs.
    """
    n: int
    f: int
    crash_prob: float = 0.05
    pref_prob: float = 0.5
    prefs: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.crash_prob < 1 or not 0 <= self.pref_prob <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.prefs is not None and len(self.prefs) != self.n:
            raise ValueError("fixed preference vector has wrong length")


def sample_context(pi: PiParams, rng: Keyed) -> Context:
    n, f, q = pi.n, pi.f, pi.crash_prob
    while True:
        failures = []
        for i in range(n):
            for m in range(1, f + 2):
                if rng.bernoulli(q):
                    others = [j for j in range(n) if j != i]
                    if m == 1:
                        mask = rng.randrange(1 << (n - 1))
                    else:
                        mask = rng.randrange((1 << (n - 1)) - 1) + 1
                    recips = frozenset(others[b] for b in range(n - 1)
                                       if mask >> b & 1)
                    failures.append(Failure(i, m, recips))
                    break
        if len(failures) <= f:
            break
    if pi.prefs is not None:
        prefs = pi.prefs
    else:
        prefs = tuple(int(rng.bernoulli(pi.pref_prob)) for _ in range(n))
    return Context(FailurePattern(tuple(failures)), prefs)


@dataclass
class RunRecord:
    context: Context
    f: int
    decisions: list[Decision]
    outcome: Outcome
    dictator: int | None
    rules: list[int | None]
    decide_rounds: list[int | None]
    m_star: int | None
    t_used: int | None
    trace: list[dict] | None = None
    # naive protocol only: per-agent tuple sets at decision time, which
    # determine the decision distribution given the context
    naive_seen: list[frozenset] | None = None

    def report_dict(self) -> dict:
        out = {
            "context": context_to_dict(self.context, self.f),
            "decisions": [d.value for d in self.decisions],
            "consensus": self.outcome.consensus,
            "no_consensus": self.outcome.no_consensus,
            "violations": list(self.outcome.violations),
            "dictator": self.dictator,
            "rules": self.rules,
            "decide_rounds": self.decide_rounds,
            "m_star": self.m_star,
            "t": self.t_used,
        }
        if self.trace is not None:
            out["trace"] = self.trace
        return out

    def to_jsonl(self) -> str:
        """One line per round of trace plus a final summary line, with a
        stable field order so identical runs are byte-identical."""
        lines = [json.dumps(entry, separators=(",", ":"))
                 for entry in (self.trace or [])]
        summary = self.report_dict()
        summary.pop("trace", None)
        lines.append(json.dumps(summary, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _jsonable_report(report: dict, n: int) -> list:
    out = []
    for j in sorted(report):
        cr, ev = report[j]
        if cr >= INF_ROUND:
            cr = n + 2  # wire sentinel for "never crashed"
            ev = list(ev) if ev is not None else None
        out.append([j, cr, ev])
    return out


def _jsonable_payload(pl: tuple, n: int) -> dict:
    kind = pl[0]
    if kind == "r1":
        return {"kind": kind, "pref": pl[1], "report": _jsonable_report(pl[2], n),
                "shares": list(pl[3]), "z": list(pl[4])}
    if kind == "mid":
        return {"kind": kind, "report": _jsonable_report(pl[1], n),
                "z": list(pl[2])}
    if kind == "fin":
        return {"kind": kind, "report": _jsonable_report(pl[1], n),
                "fwd": [[s, list(sh)] for s, sh in sorted(pl[2].items())]}
    if kind == "ntuple":
        return {"kind": kind,
                "tuples": [[a, p, list(xs)] for a, p, xs in pl[1]]}
    return {"kind": "bad"}


def run(n: int, f: int, context: Context, *, seed: int, trial: int = 0,
        protocol: str = "cons", deviations: dict | None = None,
        se_mode: bool = False, prime: int = DEFAULT_PRIME,
        agent_keys: list[int] | None = None,
        lottery: dict[int, list[int]] | None = None,
        record: bool = False) -> RunRecord:
    """Execute one full run of the given context and return its record.

    ``deviations`` maps a deviating agent id to its DeviationSpec tuple
    (or to the string "naive_exploit" under the naive protocol).
    """
    if context.n != n:
        raise ValueError("context size does not match n")
    keys = agent_keys if agent_keys is not None else list(range(n))
    deviations = deviations or {}
    agents = []
    for i in range(n):
        rng = agent_rng(seed, trial, keys[i])
        lot = lottery.get(i) if lottery else None
        dev = deviations.get(i)
        if dev is not None:
            naive = dev == "naive_exploit"
            specs = () if naive else dev
            factory = apply_deviations(specs, n, f, naive=naive,
                                       se_mode=se_mode)
            agents.append(factory(i, n, f, context.prefs[i], rng, keys,
                                  prime, lottery=lot))
        elif protocol == "naive":
            agents.append(NaiveAgent(i, n, f, context.prefs[i], rng, keys,
                                     prime, lottery=lot))
        else:
            agents.append(ConsAgent(i, n, f, context.prefs[i], rng, keys,
                                    prime, lottery=lot))

    fails = context.pattern.by_agent()
    crashed: set[int] = set()
    trace = [] if record else None
    for m in range(1, f + 2):
        outbox = {}
        for i in range(n):
            if i in crashed:
                continue
            msgs = agents[i].send(m)
            fl = fails.get(i)
            if fl is not None and fl.round == m:
                msgs = {j: pl for j, pl in msgs.items()
                        if j in fl.recipients}
                crashed.add(i)
            outbox[i] = msgs
        deliveries: dict[int, dict] = {j: {} for j in range(n)}
        for s in sorted(outbox):
            for j, pl in outbox[s].items():
                if j not in crashed:
                    deliveries[j][s] = pl
        for j in range(n):
            if j in crashed:
                continue
            agents[j].receive(m, deliveries[j])
            agents[j].update(m)
        if record:
            trace.append({
                "round": m,
                "messages": [
                    {"from": s, "to": j, "payload": _jsonable_payload(pl, n)}
                    for j in sorted(deliveries)
                    for s, pl in deliveries[j].items()
                ],
                "crashed": sorted(crashed),
                "decided": [
                    [i, agents[i].decided] for i in range(n)
                    if agents[i].decided is not None
                ],
            })

    decisions = []
    for a in agents:
        if a.decided is None:
            decisions.append(Decision.NONE)
        elif a.decided == BOT:
            decisions.append(Decision.BOT)
        else:
            decisions.append(DECISION_BY_VALUE[a.decided])

    deviators = frozenset(deviations)
    faulty = set(fails)
    dictator = None
    m_star = t_used = None
    for i in range(n):
        if i in deviators or i in faulty:
            continue
        if agents[i].dictator is not None:
            dictator = agents[i].dictator
            m_star = agents[i].m_star
            t_used = agents[i].t_used
            break
    outcome = classify_outcome(decisions, context, deviators, dictator)
    naive_seen = None
    if isinstance(agents[0], NaiveAgent):
        naive_seen = [frozenset(a.seen) for a in agents]
    return RunRecord(context, f, decisions, outcome, outcome.dictator,
                     [a.rule for a in agents],
                     [a.decide_round for a in agents],
                     m_star, t_used, trace, naive_seen)


def reachable_without(pattern: FailurePattern, n: int, f: int, src: int,
                      avoid: int, start_round: int) -> set[int]:
    """Agents that information held by ``src`` at the start of
    ``start_round`` can reach by the end of round f+1 without ever
    passing through ``avoid``."""
    fails = pattern.by_agent()
    fl = fails.get(src)
    if fl is not None and fl.round < start_round:
        return set()
    holders = {src}
    for r in range(start_round, f + 2):
        nxt = set()
        for a in holders:
            fa = fails.get(a)
            if fa is not None and fa.round < r:
                continue
            if fa is not None and fa.round == r:
                recips = fa.recipients
            else:
                recips = range(n)
                nxt.add(a)
            for b in recips:
                if b != a and b != avoid:
                    fb = fails.get(b)
                    if fb is None or fb.round > r:
                        nxt.add(b)
        holders = nxt
    return {a for a in holders if a not in fails and a != avoid}


def estimate_reachability(pi: PiParams, src: int, avoid: int, start_round: int,
                          known_faulty: frozenset[int] = frozenset(), *,
                          trials: int = 10_000, seed: int = 0) -> dict:
    """Estimate Pr[no nonfaulty agent other than ``avoid`` is reachable
    from ``src``] over patterns drawn from pi, conditioned on the agents
    in ``known_faulty`` actually crashing, and compare it with the
    1/(2M) support threshold (M = agents not known faulty)."""
    n, f = pi.n, pi.f
    m_count = n - len(known_faulty)
    bad = kept = 0
    rng = context_rng(seed, 0x5EAC)
    attempts = 0
    while kept < trials and attempts < trials * 1000:
        attempts += 1
        ctx = sample_context(pi, rng)
        failed = {fl.agent for fl in ctx.pattern.failures}
        if not known_faulty <= failed:
            continue
        kept += 1
        if not reachable_without(ctx.pattern, n, f, src, avoid, start_round):
            bad += 1
    estimate = bad / kept if kept else 0.0
    threshold = 1.0 / (2 * m_count)
    return {"estimate": estimate, "threshold": threshold,
            "supports_reachability": estimate <= threshold,
            "samples": kept}
