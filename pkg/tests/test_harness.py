"""Experiment configs, aggregation, fairness and deviation gain."""

import pytest

from rcl.core import Context, Failure, FailurePattern
from rcl.deviations import NOOP, DeviationSpec
from rcl.harness import (ExperimentConfig, Stats, deviation_gain,
                         enumerate_dictators, expost_exhibit, fairness_test,
                         monte_carlo, naive_exploit_config)
from rcl.simulator import run


# -- config validation and serialization ------------------------------------

def test_config_rejects_bad_shapes():
    with pytest.raises(ValueError):
        ExperimentConfig(n=3, f=2)
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, protocol="paxos")
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, deviations=(NOOP,))
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, deviator=0, naive_exploit=True)
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, protocol="naive", deviator=0,
                         deviations=(NOOP,))
    bad_ctx = Context(FailurePattern((Failure(0, 1), Failure(1, 1))),
                      (0, 1, 1, 0))
    with pytest.raises(ValueError):
        ExperimentConfig(n=4, f=1, context=bad_ctx)


def test_config_dict_round_trip():
    ctx = Context(FailurePattern((Failure(0, 2, frozenset({1})),)),
                  (0, 1, 1, 0))
    cfg = ExperimentConfig(
        n=4, f=1, trials=10, seed=3, beta=(3.0, 1.0, -1.0), crash_prob=0.1,
        prefs=(0, 1, 1, 0), context=ctx, deviator=2,
        deviations=(DeviationSpec("malformed", round=2, target=1),))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_deviation_map_variants():
    assert ExperimentConfig(n=4, f=1).deviation_map() is None
    cfg = naive_exploit_config(5, 3)
    assert cfg.deviation_map() == {0: "naive_exploit"}
    cfg2 = ExperimentConfig(n=4, f=1, deviator=1, deviations=(NOOP,))
    assert cfg2.deviation_map() == {1: (NOOP,)}


# -- stats aggregation ------------------------------------------------------

def test_stats_order_independent():
    cfg = ExperimentConfig(n=4, f=1, trials=1, crash_prob=0.3)
    ctx = Context(FailurePattern(), (0, 1, 1, 0))
    recs = [run(4, 1, ctx, seed=0, trial=t) for t in range(40)]
    fwd, rev = Stats(), Stats()
    for r in recs:
        fwd.add(r, 4)
    for r in reversed(recs):
        rev.add(r, 4)
    assert fwd.report_dict(cfg.params) == rev.report_dict(cfg.params)


def test_monte_carlo_honest_is_clean():
    cfg = ExperimentConfig(n=4, f=1, trials=200, seed=1, crash_prob=0.1)
    stats = monte_carlo(cfg)
    assert stats.trials == 200
    assert stats.violation_counts == {}
    assert stats.detector_fires == 0
    assert sum(stats.consensus_counts.values()) == 200
    utils = stats.mean_utilities(cfg.params)
    assert all(0.0 <= u <= 2.0 for u in utils)


# -- fairness ---------------------------------------------------------------

def test_enumerate_dictators_with_a_crash():
    ctx = Context(FailurePattern((Failure(0, 1, frozenset()),)), (1, 0, 0, 1))
    cfg = ExperimentConfig(n=4, f=1, context=ctx)
    counts = enumerate_dictators(cfg, ctx)
    # survivors {1, 2, 3}, t = 1: 3 values each over 4 agents' draws
    assert set(counts) == {1, 2, 3}
    assert len(set(counts.values())) == 1


def test_fairness_exact_uniform():
    out = fairness_test(ExperimentConfig(n=4, f=1), method="exact")
    assert out["method"] == "exact"
    assert out["fairness_bound_ok"]
    probs = set(out["dictator_probs"].values())
    assert probs == {0.25}


def test_fairness_mc_mode():
    cfg = ExperimentConfig(n=4, f=1, trials=2000, seed=2)
    out = fairness_test(cfg, method="mc")
    assert out["method"] == "mc"
    assert out["p_value"] > 0.001
    assert out["fairness_bound_ok"]
    assert abs(out["pr_decide_0"] + out["pr_decide_1"] - 1.0) < 1e-9


# -- deviation gain ---------------------------------------------------------

def test_noop_gain_is_exactly_zero():
    cfg = ExperimentConfig(n=4, f=1, trials=300, seed=4, crash_prob=0.1,
                           deviator=0, deviations=(NOOP,))
    res = deviation_gain(cfg)
    assert res.mean_gain == 0.0
    assert res.ci_low == res.ci_high == 0.0
    assert res.honest_mean == res.deviant_mean
    assert res.within_epsilon
    assert set(res.pair_counts) <= {(0, 0), (1, 1), (2, 2)}


def test_gain_requires_deviator():
    with pytest.raises(ValueError):
        deviation_gain(ExperimentConfig(n=4, f=1))


def test_destructive_deviation_loses():
    cfg = ExperimentConfig(
        n=4, f=1, trials=300, seed=4, crash_prob=0.05, deviator=0,
        deviations=(DeviationSpec("malformed", round=2, target=1),))
    res = deviation_gain(cfg)
    assert res.mean_gain < 0


def test_averaged_ignore_message_gain_not_positive():
    # the receiver-side deviation that wins under one fixed failure
    # pattern does not win on average over contexts
    cfg = ExperimentConfig(
        n=3, f=1, trials=3000, seed=6, crash_prob=0.1, deviator=2,
        deviations=(DeviationSpec("ignore_message", subject=0),))
    res = deviation_gain(cfg)
    assert res.mean_gain <= res.epsilon


# -- exhibit ----------------------------------------------------------------

def test_exhibit_requires_failures_allowed():
    assert expost_exhibit(3, 0) is None
    with pytest.raises(ValueError):
        expost_exhibit(5, 1)


def test_exhibit_small_case():
    out = expost_exhibit(3, 1)
    assert out is not None
    assert out["gain"] > 0
    assert out["deviation"]["kind"] == "ignore_message"
    # seed independence: the enumeration is exact
    assert expost_exhibit(3, 1, seed=99)["gain"] == out["gain"]


def test_naive_exploit_config_shape():
    cfg = naive_exploit_config(5, 3, trials=10)
    assert cfg.protocol == "naive"
    assert cfg.prefs == (1, 0, 0, 0, 0)
    assert cfg.naive_exploit and cfg.deviator == 0
