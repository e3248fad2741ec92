"""Unilateral deviations from the consensus protocol.

Each DeviationSpec describes one way a single rational agent can depart
from the honest protocol while every other agent stays honest.  The
catalogue covers pretending to crash, lying about the initial
preference, malformed messages, rigged secret shares, stale one-time
values, deciding early or wrongly, lying when forwarding shares,
sending again after pretending to crash, lying in status reports, and
(for the impossibility exhibit) pretending not to have received a
message.  ``apply`` wires a list of specs into an agent factory usable
by the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rng import P_GUESS
from .protocol import (BOT, ConsAgent, INF_ROUND, K_BAD, K_FIRST,
                       NaiveAgent, NaiveExploitAgent)

KINDS = (
    "noop",
    "pretend_crash",        # 1: send round-m messages to a subset, then silence
    "lie_initial_value",    # 2: announce 1 - v_i to chosen targets
    "malformed",            # 3: garbage payload
    "bad_shares",           # 4: non-collinear shares, or a rigged line
    "bad_z",                # 5: reuse last round's one-time value
    "wrong_decide",         # 6: decide early or decide the wrong value
    "lie_forwarded_share",  # 7: forward a perturbed share in the last round
    "crash_then_send",      # 8: omit messages, then come back later
    "status_lie",           # 9: lie about who crashed when (variants a/b/c)
    "ignore_message",       # pretend a received message never arrived
)


@dataclass(frozen=True)
class DeviationSpec:
    kind: str
    round: int | None = None
    target: int | None = None
    targets: tuple[int, ...] | None = None
    recipients: tuple[int, ...] = ()
    subject: int | None = None
    value: object = None
    mode: str = "noncollinear"          # bad_shares: noncollinear | rigged
    variant: str = "a"                  # status_lie: a | b | c
    omit_round: int = 1
    omit_targets: tuple[int, ...] = ()
    resume_round: int = 2
    resume_target: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown deviation kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k in ("round", "target", "subject", "value", "resume_target"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.targets is not None:
            d["targets"] = list(self.targets)
        if self.recipients:
            d["recipients"] = list(self.recipients)
        if self.kind == "bad_shares":
            d["mode"] = self.mode
        if self.kind == "status_lie":
            d["variant"] = self.variant
        if self.kind == "crash_then_send":
            d.update(omit_round=self.omit_round,
                     omit_targets=list(self.omit_targets),
                     resume_round=self.resume_round)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DeviationSpec":
        kw = dict(d)
        for k in ("targets", "recipients", "omit_targets"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)


NOOP = DeviationSpec("noop")


class DeviantConsAgent(ConsAgent):
    """Honest state machine plus a stack of behavioural overrides."""

    def __init__(self, *args, specs: tuple[DeviationSpec, ...] = (),
                 se_mode: bool = False, **kw):
        super().__init__(*args, **kw)
        self.specs = tuple(specs)
        self.se_mode = se_mode
        self._omitted: dict[int, int] = {}   # peer -> round first omitted to
        self._resumed: dict[int, int] = {}   # peer -> round we sent again
        for spec in self.specs:
            if spec.kind == "bad_shares":
                if spec.mode == "rigged":
                    # all shares on a horizontal line: not random, and the
                    # constant term is just the share value
                    self.slopes = [0] * (self.f + 1)
                else:
                    self.slopes = list(self.slopes)
                self.y_out = {
                    j: tuple((self.x[t] + self.slopes[t] * (j + 1)) % self.p
                             for t in range(self.f + 1))
                    for j in range(self.n)
                }
                self.shares_in[self.id] = self.y_out[self.id]
                if spec.mode == "noncollinear":
                    victim = spec.target if spec.target is not None else self.others[0]
                    sh = list(self.y_out[victim])
                    sh[0] = (sh[0] + 1) % self.p
                    self.y_out[victim] = tuple(sh)

    # -- helpers ----------------------------------------------------------

    def _status_lie_round(self, spec: DeviationSpec, m: int) -> bool:
        if spec.round is not None:
            return m == spec.round
        subject = spec.subject
        if spec.variant == "a":
            return m >= 2 and self.sr[subject][0] < INF_ROUND
        if spec.variant == "b":
            return m == 2 and self.max_alive[subject] >= 1
        return m == max(3, 2)  # variant c needs a checkable relayed slot

    def _forge_vector(self, m: int) -> tuple:
        n = self.n
        return tuple(self.rng.tagged(n, P_GUESS, m, 0, l) for l in range(n))

    # -- overridden phases ------------------------------------------------

    def send(self, m: int):
        if self.se_mode and self._unsalvageable(m):
            self._decide(BOT, m)
            return {}
        out = super().send(m)
        n, f = self.n, self.f
        for spec in self.specs:
            k = spec.kind
            if k == "pretend_crash":
                r = spec.round if spec.round is not None else 2
                if m > r:
                    out = {}
                elif m == r:
                    keep = set(spec.recipients)
                    out = {j: pl for j, pl in out.items() if j in keep}
            elif k == "crash_then_send":
                if m == spec.omit_round:
                    out = {j: pl for j, pl in out.items()
                           if j not in spec.omit_targets}
                elif spec.omit_round < m < spec.resume_round:
                    out = {}
                elif m == spec.resume_round:
                    out = {j: pl for j, pl in out.items()
                           if j == spec.resume_target}
                elif m > spec.resume_round:
                    out = {}
            elif k == "lie_initial_value" and m == 1:
                targets = spec.targets if spec.targets is not None else self.others
                for j in targets:
                    if j in out:
                        pl = out[j]
                        out[j] = (K_FIRST, 1 - self.pref) + pl[2:]
            elif k == "malformed":
                r = spec.round if spec.round is not None else 2
                if m == r:
                    tgt = spec.target if spec.target is not None else self.others[0]
                    if tgt in out:
                        out[tgt] = (K_BAD, 0)
            elif k == "lie_forwarded_share" and m == f + 1:
                tgt = spec.target if spec.target is not None else self.others[0]
                subject = spec.subject if spec.subject is not None else self.others[-1]
                if tgt in out and subject != tgt:
                    kind, report, fwd = out[tgt]
                    if subject in fwd:
                        fwd = dict(fwd)
                        sh = list(fwd[subject])
                        sh[0] = (sh[0] + 1) % self.p
                        fwd[subject] = tuple(sh)
                        out[tgt] = (kind, report, fwd)
            elif k == "status_lie" and self._status_lie_round(spec, m):
                tgt = spec.target if spec.target is not None else self.others[0]
                subject = spec.subject
                if tgt in out and subject is not None and subject != tgt:
                    pl = list(out[tgt])
                    ridx = 1 if pl[0] != K_FIRST else 2
                    report = dict(pl[ridx])
                    if spec.variant == "a":
                        report[subject] = (INF_ROUND, self._forge_vector(m))
                    elif spec.variant == "b":
                        report[subject] = (m - 1, self.id)
                    else:  # c: keep the alive claim, corrupt the slot the
                        # target can cross-check
                        cr, ev = report[subject]
                        if cr >= INF_ROUND and ev is not None:
                            ev = list(ev)
                            ev[tgt] = ((ev[tgt] or 0) + 1) % self.n
                            report[subject] = (INF_ROUND, tuple(ev))
                    pl[ridx] = report
                    out[tgt] = tuple(pl)
        if self.se_mode:
            honest = set(self.others) if self.decided is None else set()
            for j in honest - set(out):
                if j not in self._omitted:
                    self._omitted[j] = m
            for j in set(out):
                if j in self._omitted and j not in self._resumed:
                    self._resumed[j] = m
        return out

    def receive(self, m: int, delivered):
        for spec in self.specs:
            if spec.kind == "ignore_message" and spec.subject in delivered \
                    and (spec.round is None or spec.round == m):
                delivered = {j: pl for j, pl in delivered.items()
                             if j != spec.subject}
        if self.se_mode:
            self._heard_after_resume = [
                j for j in delivered if j in self._resumed
                and m > self._resumed[j]]
        super().receive(m, delivered)

    def _unsalvageable(self, m: int) -> bool:
        """True when some honest agent must already have observed our
        deviation and decided the punishment value: an agent we silently
        dropped, later contacted again, has answered since."""
        return bool(getattr(self, "_heard_after_resume", ()))

    def update(self, m: int):
        stale = self.zvec_next if m <= self.f else None
        super().update(m)
        for spec in self.specs:
            if spec.kind == "bad_z" and self.decided is None \
                    and stale is not None:
                # resend the round-m vectors in round m+1: the echo slot
                # then carries a one-round-old value, which each receiver
                # can recognize as stale
                self.zvec_next = stale
            elif spec.kind == "wrong_decide" and spec.round == m \
                    and self.decided in (None, 0, 1):
                val = spec.value
                if val == "flip" and self.decided in (0, 1):
                    val = 1 - self.decided
                self._decide(val, m)


def apply(specs, n: int, f: int, *, naive: bool = False,
          se_mode: bool = False):
    """Build an agent factory implementing the given deviations.

    ``specs`` may be a single DeviationSpec or a sequence; the special
    kind "naive_exploit" is expressed by passing naive=True with specs
    left empty.
    """
    if isinstance(specs, DeviationSpec):
        specs = (specs,)
    specs = tuple(specs or ())
    if naive:
        if specs:
            raise ValueError("naive protocol supports only the exploit strategy")

        def factory(aid, n_, f_, pref, rng, keys, prime, lottery=None):
            return NaiveExploitAgent(aid, n_, f_, pref, rng, keys, prime,
                                     lottery=lottery)
        return factory

    def factory(aid, n_, f_, pref, rng, keys, prime, lottery=None):
        return DeviantConsAgent(aid, n_, f_, pref, rng, keys, prime,
                                lottery=lottery, specs=specs, se_mode=se_mode)
    return factory
