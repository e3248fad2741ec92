"""Experiment harness: Monte-Carlo sweeps, fairness checks, paired
deviation-gain estimates and the exact small-n impossibility exhibit.

All aggregation is done with integer counts of outcome classes; means
are formed from the counts at the very end, so results are independent
of accumulation order and reproduce bit-for-bit from (config, seed).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .core import (Context, Decision, Failure, FailurePattern, UtilityParams,
                   context_to_dict, utility_class, utility_value,
                   validate_pattern)
from .deviations import DeviationSpec
from .simulator import PiParams, run, sample_context
from .rng import context_rng
from .sharing import DEFAULT_PRIME

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    f: int
    trials: int = 1000
    seed: int = 0
    protocol: str = "cons"               # "cons" | "naive"
    prime: int = DEFAULT_PRIME
    beta: tuple[float, float, float] = (2.0, 1.0, 0.0)
    crash_prob: float = 0.05
    pref_prob: float = 0.5
    prefs: tuple[int, ...] | None = None
    context: Context | None = None       # pin the context instead of sampling
    deviator: int | None = None
    deviations: tuple[DeviationSpec, ...] = ()
    naive_exploit: bool = False
    se_mode: bool = False

    def __post_init__(self):
        if self.f < 1 or self.f + 1 >= self.n:
            raise ValueError("need 1 <= f and f+1 < n")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.protocol not in ("cons", "naive"):
            raise ValueError("protocol must be 'cons' or 'naive'")
        if (self.deviations or self.naive_exploit) and self.deviator is None:
            raise ValueError("deviations require a deviator id")
        if self.naive_exploit and self.protocol != "naive":
            raise ValueError("the exploit strategy targets the naive protocol")
        if self.naive_exploit and self.deviations:
            raise ValueError("naive_exploit excludes explicit deviations")
        if self.deviations and self.protocol == "naive":
            raise ValueError("explicit deviations target the main protocol")
        if self.context is not None:
            errs = validate_pattern(self.context.pattern, self.n, self.f)
            if self.context.n != self.n:
                errs.append("context size mismatch")
            if errs:
                raise ValueError("; ".join(errs))

    @property
    def params(self) -> UtilityParams:
        return UtilityParams(*self.beta)

    @property
    def pi(self) -> PiParams:
        return PiParams(self.n, self.f, self.crash_prob, self.pref_prob,
                        self.prefs)

    def deviation_map(self) -> dict | None:
        if self.deviator is None:
            return None
        if self.naive_exploit:
            return {self.deviator: "naive_exploit"}
        return {self.deviator: self.deviations}

    def to_dict(self) -> dict:
        d = {
            "n": self.n, "f": self.f, "trials": self.trials,
            "seed": self.seed, "protocol": self.protocol,
            "prime": self.prime, "beta": list(self.beta),
            "crash_prob": self.crash_prob, "pref_prob": self.pref_prob,
        }
        if self.prefs is not None:
            d["prefs"] = list(self.prefs)
        if self.context is not None:
            d["context"] = context_to_dict(self.context, self.f)
        if self.deviator is not None:
            d["deviator"] = self.deviator
        if self.deviations:
            d["deviations"] = [s.to_dict() for s in self.deviations]
        if self.naive_exploit:
            d["naive_exploit"] = True
        if self.se_mode:
            d["se_mode"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kw = dict(d)
        if "beta" in kw:
            kw["beta"] = tuple(kw["beta"])
        if "prefs" in kw and kw["prefs"] is not None:
            kw["prefs"] = tuple(kw["prefs"])
        if "context" in kw and kw["context"] is not None:
            c = kw["context"]
            pattern = FailurePattern(tuple(
                Failure(e["agent"], e["round"], frozenset(e["recipients"]))
                for e in c["pattern"]))
            kw["context"] = Context(pattern, tuple(c["prefs"]))
        if "deviations" in kw:
            kw["deviations"] = tuple(DeviationSpec.from_dict(s)
                                     for s in kw["deviations"])
        return cls(**kw)


@dataclass
class Stats:
    trials: int = 0
    consensus_counts: dict = field(default_factory=lambda: {"0": 0, "1": 0, "none": 0})
    dictator_counts: dict = field(default_factory=dict)
    violation_counts: dict = field(default_factory=dict)
    detector_fires: int = 0
    rule_counts: dict = field(default_factory=dict)
    # class_counts[i] = [own-value wins, other-value wins, no consensus]
    class_counts: list = field(default_factory=list)

    def add(self, rec, n: int) -> None:
        if not self.class_counts:
            self.class_counts = [[0, 0, 0] for _ in range(n)]
        self.trials += 1
        o = rec.outcome
        key = "none" if o.consensus is None else str(o.consensus)
        self.consensus_counts[key] += 1
        if rec.dictator is not None:
            self.dictator_counts[rec.dictator] = \
                self.dictator_counts.get(rec.dictator, 0) + 1
        for v in o.violations:
            self.violation_counts[v] = self.violation_counts.get(v, 0) + 1
        fired = [r for r in rec.rules if r is not None]
        if fired:
            self.detector_fires += 1
            for r in fired:
                self.rule_counts[r] = self.rule_counts.get(r, 0) + 1
        prefs = rec.context.prefs
        for i in range(n):
            self.class_counts[i][utility_class(o, prefs[i])] += 1

    def mean_utilities(self, params: UtilityParams) -> list[float]:
        out = []
        for counts in self.class_counts:
            total = sum(c * utility_value(k, params)
                        for k, c in enumerate(counts))
            out.append(total / self.trials)
        return out

    def report_dict(self, params: UtilityParams) -> dict:
        return {
            "trials": self.trials,
            "consensus_counts": self.consensus_counts,
            "dictator_counts": {str(k): v for k, v in
                                sorted(self.dictator_counts.items())},
            "violation_counts": dict(sorted(self.violation_counts.items())),
            "detector_fires": self.detector_fires,
            "rule_counts": {str(k): v for k, v in
                            sorted(self.rule_counts.items())},
            "mean_utilities": self.mean_utilities(params),
        }


def _trial_context(cfg: ExperimentConfig, trial: int) -> Context:
    if cfg.context is not None:
        return cfg.context
    return sample_context(cfg.pi, context_rng(cfg.seed, trial))


def monte_carlo(cfg: ExperimentConfig) -> Stats:
    stats = Stats()
    for trial in range(cfg.trials):
        ctx = _trial_context(cfg, trial)
        rec = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=trial,
                  protocol=cfg.protocol, deviations=cfg.deviation_map(),
                  se_mode=cfg.se_mode, prime=cfg.prime)
        stats.add(rec, cfg.n)
    return stats


# ---------------------------------------------------------------------------
# fairness


def _lottery_domain(n: int, t: int) -> range:
    return range(n - t)


def _probe(cfg: ExperimentConfig, ctx: Context):
    rec = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=0,
              protocol=cfg.protocol, prime=cfg.prime)
    return rec


def enumerate_dictators(cfg: ExperimentConfig, ctx: Context) -> dict[int, int]:
    """Exact dictator distribution for a fixed honest context, by
    enumerating every assignment of the lottery values that matter."""
    probe = _probe(cfg, ctx)
    if probe.t_used is None:
        raise ValueError("context does not reach a value decision")
    t = probe.t_used
    n, f = cfg.n, cfg.f
    counts: dict[int, int] = {}
    agents = list(range(n))
    for combo in itertools.product(_lottery_domain(n, t), repeat=n):
        lottery = {}
        for i in agents:
            xs = [0] * (f + 1)
            xs[t] = combo[i]
            lottery[i] = xs
        rec = run(n, f, ctx, seed=cfg.seed, trial=0, protocol=cfg.protocol,
                  prime=cfg.prime, lottery=lottery)
        if rec.dictator is None:
            raise AssertionError("honest enumeration run failed to decide")
        counts[rec.dictator] = counts.get(rec.dictator, 0) + 1
    return counts


def fairness_test(cfg: ExperimentConfig, method: str = "auto") -> dict:
    """Check the fairness guarantee for a fixed context.

    Exact mode enumerates the lottery; Monte-Carlo mode samples it and
    applies a chi-square uniformity test over the selected dictators.
    """
    ctx = cfg.context
    if ctx is None:
        ctx = Context(FailurePattern(), tuple(
            i % 2 for i in range(cfg.n)))
        cfg = replace(cfg, context=ctx)
    probe = _probe(cfg, ctx)
    faulty = {fl.agent for fl in ctx.pattern.failures}
    result: dict = {"context": context_to_dict(ctx, cfg.f),
                    "m_star": probe.m_star, "t": probe.t_used}
    if method == "auto":
        method = "exact" if (cfg.n - (probe.t_used or 0)) ** cfg.n <= 200_000 \
            else "mc"
    if method == "exact":
        counts = enumerate_dictators(cfg, ctx)
        total = sum(counts.values())
        probs = {d: c / total for d, c in counts.items()}
    else:
        stats = Stats()
        for trial in range(cfg.trials):
            rec = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=trial,
                      protocol=cfg.protocol, prime=cfg.prime)
            stats.add(rec, cfg.n)
        counts = dict(stats.dictator_counts)
        total = sum(counts.values())
        probs = {d: c / total for d, c in counts.items()}
        members = sorted(counts)
        observed = [counts[d] for d in members]
        from scipy.stats import chisquare
        chi2, pval = chisquare(observed)
        result["chi2"] = float(chi2)
        result["p_value"] = float(pval)
    pr1 = sum(p for d, p in probs.items() if ctx.prefs[d] == 1)
    pr0 = sum(p for d, p in probs.items() if ctx.prefs[d] == 0)
    bounds_ok = True
    for v, pr in ((0, pr0), (1, pr1)):
        c = sum(1 for i in range(cfg.n)
                if i not in faulty and ctx.prefs[i] == v)
        slack = 0.0 if method == "exact" else 3 * math.sqrt(0.25 / max(total, 1))
        if pr + 1e-12 + slack < c / cfg.n:
            bounds_ok = False
    result.update(method=method,
                  dictator_counts={str(k): v for k, v in sorted(counts.items())},
                  dictator_probs={str(k): v for k, v in sorted(probs.items())},
                  pr_decide_0=pr0, pr_decide_1=pr1,
                  fairness_bound_ok=bounds_ok)
    return result


# ---------------------------------------------------------------------------
# deviation gain


@dataclass
class GainResult:
    trials: int
    mean_gain: float
    ci_low: float
    ci_high: float
    epsilon: float
    within_epsilon: bool
    pair_counts: dict
    honest_mean: float
    deviant_mean: float
    alpha_lt: float | None = None
    alpha_eq: float | None = None
    analytic_bound: float | None = None

    def report_dict(self) -> dict:
        d = {
            "trials": self.trials,
            "mean_gain": self.mean_gain,
            "ci95": [self.ci_low, self.ci_high],
            "epsilon": self.epsilon,
            "within_epsilon": self.within_epsilon,
            "honest_mean": self.honest_mean,
            "deviant_mean": self.deviant_mean,
            "pair_counts": {f"{a}-{b}": c for (a, b), c in
                            sorted(self.pair_counts.items())},
        }
        if self.alpha_lt is not None:
            d.update(alpha_lt=self.alpha_lt, alpha_eq=self.alpha_eq,
                     analytic_bound=self.analytic_bound)
        return d


def _naive_conditional_utility(rec, ctx: Context, dev: int,
                               params: UtilityParams):
    """Exact expected utility of the deviator given the context, for a
    naive-protocol run, or None when it depends on the lottery draws in
    a way the tuple sets alone do not determine.

    The tuple sets at decision time are a deterministic function of the
    context and the strategies.  When every correct agent holds the same
    tuple set and decides a value, the dictator is uniform over that set
    (the lottery values are iid uniform, so their sum mod the set size
    is uniform).  When some correct agent refuses to decide a value,
    consensus is impossible outright.
    """
    faulty = {fl.agent for fl in ctx.pattern.failures}
    correct = [i for i in range(ctx.n) if i not in faulty and i != dev]
    if any(rec.decisions[i] == Decision.BOT for i in correct):
        return Fraction(params.beta2)
    seen = {rec.naive_seen[i] for i in correct}
    if len(seen) != 1:
        return None
    pool = next(iter(seen))
    own = sum(1 for j in pool if ctx.prefs[j] == ctx.prefs[dev])
    b0 = Fraction(params.beta0)
    b1 = Fraction(params.beta1)
    return (b0 * own + b1 * (len(pool) - own)) / len(pool)


def deviation_gain(cfg: ExperimentConfig) -> GainResult:
    """Paired comparison of the deviator's utility with and without the
    deviation, consuming identical context and lottery randomness in
    both arms of every trial.

    For the naive protocol the per-trial gain is replaced by its exact
    conditional expectation given the context whenever the tuple sets
    determine it (falling back to the realized pair otherwise); this is
    unbiased and removes the lottery noise from the estimate.
    """
    if cfg.deviator is None:
        raise ValueError("config has no deviator")
    dev = cfg.deviator
    params = cfg.params
    devmap = cfg.deviation_map()
    conditional = cfg.protocol == "naive"
    pair_counts: dict[tuple[int, int], int] = {}
    lt_hits = eq_hits = 0
    total = sq = h_total = d_total = Fraction(0)
    for trial in range(cfg.trials):
        ctx = _trial_context(cfg, trial)
        rec_h = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=trial,
                    protocol=cfg.protocol, prime=cfg.prime)
        rec_d = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=trial,
                    protocol=cfg.protocol, deviations=devmap,
                    se_mode=cfg.se_mode, prime=cfg.prime)
        ch = utility_class(rec_h.outcome, ctx.prefs[dev])
        cd = utility_class(rec_d.outcome, ctx.prefs[dev])
        pair_counts[(ch, cd)] = pair_counts.get((ch, cd), 0) + 1
        uh = ud = None
        if conditional:
            uh = _naive_conditional_utility(rec_h, ctx, dev, params)
            ud = _naive_conditional_utility(rec_d, ctx, dev, params)
        if uh is None or ud is None:
            uh = Fraction(utility_value(ch, params))
            ud = Fraction(utility_value(cd, params))
        g = ud - uh
        total += g
        sq += g * g
        h_total += uh
        d_total += ud
        others = [fl for fl in ctx.pattern.failures if fl.agent != dev]
        if len(ctx.pattern.failures) < cfg.f and any(
                fl.round == 1 and fl.recipients == frozenset({dev})
                for fl in others):
            lt_hits += 1
        if len(others) == cfg.f:
            eq_hits += 1
    trials = cfg.trials
    mean = float(total / trials)
    var = max(float(sq / trials) - mean * mean, 0.0)
    half = Z95 * math.sqrt(var / trials)
    h_total = float(h_total)
    d_total = float(d_total)
    eps = 0.01 * (params.beta0 - params.beta2)
    alpha_lt = alpha_eq = bound = None
    if cfg.naive_exploit:
        alpha_lt = lt_hits / trials
        alpha_eq = eq_hits / trials
        b0, b1, b2 = cfg.beta
        bound = ((b0 - b1) * (1 / (cfg.n - 1) - 1 / cfg.n) * alpha_lt
                 - (b0 - b2) * alpha_eq)
    return GainResult(trials, mean, mean - half, mean + half, eps,
                      mean + half <= eps, pair_counts,
                      h_total / trials, d_total / trials,
                      alpha_lt, alpha_eq, bound)


def naive_exploit_config(n: int = 5, f: int = 3, *, trials: int = 100_000,
                         seed: int = 0, crash_prob: float = 0.02,
                         beta=(2.0, 1.0, 0.0)) -> ExperimentConfig:
    """The baseline-protocol exploit scenario: the deviator prefers the
    minority value, everyone else the majority one."""
    prefs = (1,) + (0,) * (n - 1)
    return ExperimentConfig(n=n, f=f, trials=trials, seed=seed,
                            protocol="naive", beta=beta,
                            crash_prob=crash_prob, prefs=prefs,
                            deviator=0, naive_exploit=True)


# ---------------------------------------------------------------------------
# ex post impossibility exhibit


def _exact_value_prob(cfg: ExperimentConfig, ctx: Context,
                      deviations: dict | None = None) -> tuple[dict, float]:
    """Exact distribution of the deviator-relevant outcome classes for a
    fixed context, enumerating only the lottery values the decision
    actually uses.  Returns (consensus value -> probability, prob none)."""
    probe = run(cfg.n, cfg.f, ctx, seed=cfg.seed, trial=0,
                protocol=cfg.protocol, prime=cfg.prime,
                deviations=deviations, se_mode=cfg.se_mode)
    n, f = cfg.n, cfg.f
    t = probe.t_used
    if t is None:
        # every correct agent refused to decide a value, deterministically
        return {}, 1.0
    counts: dict[int, int] = {}
    none = 0
    total = 0
    for combo in itertools.product(_lottery_domain(n, t), repeat=n):
        lottery = {}
        for i in range(n):
            xs = [0] * (f + 1)
            xs[t] = combo[i]
            lottery[i] = xs
        rec = run(n, f, ctx, seed=cfg.seed, trial=0, protocol=cfg.protocol,
                  prime=cfg.prime, lottery=lottery, deviations=deviations,
                  se_mode=cfg.se_mode)
        total += 1
        if rec.outcome.consensus is None:
            none += 1
        else:
            counts[rec.outcome.consensus] = counts.get(rec.outcome.consensus, 0) + 1
    return {v: c / total for v, c in counts.items()}, none / total


def _pattern_leq(a: Failure, b: Failure) -> bool:
    return a.round < b.round or (a.round == b.round
                                 and a.recipients <= b.recipients)


def expost_exhibit(n: int, f: int, *, beta=(2.0, 1.0, 0.0), seed: int = 0,
                   prime: int = DEFAULT_PRIME) -> dict | None:
    """Construct the minimal-failure counterexample showing the protocol
    is not an equilibrium once the failure pattern is conditioned on.

    One agent prefers 1, everybody else 0.  Over single-failure patterns
    of the 1-preferring agent, find a minimal pattern (in the
    earlier-round / fewer-recipients order) under which the decision is
    1 with positive probability; a 0-preferring recipient of the last
    delivered message then gains, exactly, by pretending it never
    arrived.  Returns None when no exhibit exists (f = 0).
    """
    if f < 1 or f + 1 >= n:
        return None
    if n > 4:
        raise ValueError("exact enumeration is only supported for n <= 4")
    cfg = ExperimentConfig(n=n, f=f, seed=seed, prime=prime, beta=beta)
    prefs = (1,) + (0,) * (n - 1)
    params = UtilityParams(*beta)
    others = list(range(1, n))

    candidates = []
    for rnd in range(1, f + 2):
        subsets = range(1 << (n - 1)) if rnd == 1 else range(1, 1 << (n - 1))
        for mask in subsets:
            recips = frozenset(others[b] for b in range(n - 1)
                               if mask >> b & 1)
            fl = Failure(0, rnd, recips)
            ctx = Context(FailurePattern((fl,)), prefs)
            probs, _ = _exact_value_prob(cfg, ctx)
            candidates.append((fl, probs.get(1, 0.0)))
    positive = [fl for fl, p in candidates if p > 0]
    if not positive:
        return None
    minimal = [fl for fl in positive
               if not any(_pattern_leq(o, fl) and o != fl for o in positive)]
    f_star = min(minimal, key=lambda fl: (fl.round, len(fl.recipients),
                                          sorted(fl.recipients)))
    receiver = max(j for j in f_star.recipients if prefs[j] == 0)
    ctx = Context(FailurePattern((f_star,)), prefs)
    spec = DeviationSpec("ignore_message", subject=0, round=f_star.round)
    devmap = {receiver: (spec,)}

    def expected(deviations):
        probs, none = _exact_value_prob(cfg, ctx, deviations)
        u = none * params.beta2
        for v, p in probs.items():
            u += p * (params.beta0 if v == prefs[receiver] else params.beta1)
        return u

    honest_u = expected(None)
    deviant_u = expected(devmap)
    return {
        "context": context_to_dict(ctx, f),
        "deviator": receiver,
        "deviation": spec.to_dict(),
        "honest_utility": honest_u,
        "deviant_utility": deviant_u,
        "gain": deviant_u - honest_u,
    }
