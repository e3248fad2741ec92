"""Behavioural overrides for a single deviating agent."""

import pytest

from rcl.core import Context, Decision, Failure, FailurePattern
from rcl.deviations import NOOP, DeviationSpec, apply
from rcl.simulator import run

N, F = 4, 1
PREFS = (0, 1, 1, 0)
EMPTY = Context(FailurePattern(), PREFS)


def devrun(specs, dev=0, ctx=EMPTY, seed=0, trial=0, se_mode=False, n=N, f=F):
    return run(n, f, ctx, seed=seed, trial=trial,
               deviations={dev: tuple(specs)}, se_mode=se_mode)


def honest_rules(rec, dev=0, ctx=EMPTY):
    faulty = {fl.agent for fl in ctx.pattern.failures}
    return [rec.rules[i] for i in range(ctx.n)
            if i != dev and i not in faulty]


# -- spec plumbing ----------------------------------------------------------

def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        DeviationSpec("teleport")


def test_spec_dict_round_trip():
    specs = [
        NOOP,
        DeviationSpec("bad_shares", mode="rigged", target=2),
        DeviationSpec("status_lie", variant="b", subject=1, round=2),
        DeviationSpec("crash_then_send", omit_round=1, omit_targets=(1, 2),
                      resume_round=2, resume_target=1),
        DeviationSpec("wrong_decide", round=2, value="flip"),
    ]
    for spec in specs:
        assert DeviationSpec.from_dict(spec.to_dict()) == spec


def test_apply_naive_rejects_specs():
    with pytest.raises(ValueError):
        apply((NOOP,), N, F, naive=True)


# -- no-op invariance -------------------------------------------------------

def test_noop_is_byte_identical_to_honest():
    for trial in range(5):
        base = run(N, F, EMPTY, seed=0, trial=trial, record=True)
        dev = run(N, F, EMPTY, seed=0, trial=trial,
                  deviations={0: (NOOP,)}, record=True)
        assert dev.to_jsonl() == base.to_jsonl()


# -- detection per kind -----------------------------------------------------

def test_malformed_triggers_rule_1():
    rec = devrun([DeviationSpec("malformed", round=2, target=1)])
    assert rec.rules[1] == 1
    assert rec.decisions[1] == Decision.BOT


def test_bad_shares_noncollinear_triggers_rule_4():
    rec = devrun([DeviationSpec("bad_shares", mode="noncollinear", target=1)])
    assert set(honest_rules(rec)) == {4}


def test_bad_shares_rigged_escapes_detection_but_stays_safe():
    # a zero-slope line is still a line; the honest agents cannot tell,
    # and correctness does not depend on the deviator's randomness
    rec = devrun([DeviationSpec("bad_shares", mode="rigged")])
    assert set(honest_rules(rec)) == {None}
    assert rec.outcome.violations == ()


def test_bad_z_triggers_rule_3():
    rec = devrun([DeviationSpec("bad_z")], n=5, f=2,
                 ctx=Context(FailurePattern(), (0, 1, 1, 0, 1)))
    assert 3 in honest_rules(rec, ctx=Context(FailurePattern(),
                                              (0, 1, 1, 0, 1)))


def test_lie_forwarded_share_triggers_rule_4_at_target():
    rec = devrun([DeviationSpec("lie_forwarded_share", target=1, subject=2)])
    assert rec.rules[1] == 4


def test_pretend_crash_looks_like_a_real_crash():
    # final-round silence: too late to matter, nobody objects
    rec = devrun([DeviationSpec("pretend_crash", round=2)])
    assert set(honest_rules(rec)) == {None}
    assert rec.outcome.violations == ()
    # full silence from round 1 drops the deviator from the lottery
    for trial in range(8):
        rec = devrun([DeviationSpec("pretend_crash", round=1)], trial=trial)
        assert set(honest_rules(rec)) == {None}
        assert rec.outcome.violations == ()
        assert rec.dictator != 0


def test_lie_initial_value_to_everyone_is_undetectable():
    rec = devrun([DeviationSpec("lie_initial_value")])
    assert set(honest_rules(rec)) == {None}
    assert rec.outcome.violations == ()


def test_wrong_decide_changes_only_the_deviator():
    base = run(N, F, EMPTY, seed=0)
    rec = devrun([DeviationSpec("wrong_decide", round=2, value="flip")])
    assert rec.outcome.consensus == base.outcome.consensus
    assert rec.decisions[0] != base.decisions[0]


def test_wrong_decide_early_bot():
    rec = devrun([DeviationSpec("wrong_decide", round=1, value="bot")])
    assert rec.decisions[0] == Decision.BOT
    assert rec.decide_rounds[0] == 1
    # the silent round-2 deviator looks crashed; the others still agree
    assert rec.outcome.consensus in (0, 1)
    assert rec.outcome.violations == ()


def test_status_lie_forged_alive_claim_checked_against_first_hand_value():
    subject, dev, target = 1, 0, 2
    recips = frozenset(j for j in range(N) if j not in (subject, dev))
    ctx = Context(FailurePattern((Failure(subject, 1, recips),)), PREFS)
    spec = DeviationSpec("status_lie", variant="a", subject=subject,
                         round=2, target=target)
    caught = sum(
        devrun([spec], ctx=ctx, trial=t).rules[target] is not None
        for t in range(200))
    assert 100 <= caught <= 200  # expected rate 3/4


def test_status_lie_false_crash_claim_triggers_attestation_check():
    # claiming a round-1 crash of an agent everyone heard from
    spec = DeviationSpec("status_lie", variant="b", subject=1, round=2,
                         target=2)
    rec = devrun([spec])
    assert rec.rules[2] is not None


def test_ignore_message_drops_only_that_sender():
    spec = DeviationSpec("ignore_message", subject=1, round=1)
    rec = devrun([spec], dev=2)
    # agent 2 treats 1 as crashed in round 1; with everyone else honest it
    # is outvoted by the round-2 reports and the run still agrees
    assert rec.outcome.violations == ()


def test_crash_then_send_resume_target_detects():
    spec = DeviationSpec("crash_then_send", omit_round=1, omit_targets=(1,),
                         resume_round=2, resume_target=1)
    rec = devrun([spec], se_mode=True)
    # only the resume target holds proof of the two-faced behaviour; it
    # refuses to decide a value
    assert rec.rules[1] == 5
    assert rec.decisions[1] == Decision.BOT


def test_deviant_factory_signature():
    factory = apply(DeviationSpec("noop"), N, F)
    agent = factory(0, N, F, 1, __import__("rcl.rng", fromlist=["agent_rng"])
                    .agent_rng(0, 0, 0), list(range(N)), 2_147_483_647)
    assert agent.pref == 1 and agent.specs == (NOOP,)
