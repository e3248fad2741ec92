"""Round-based consensus with a hidden leader lottery.

Agents run f+1 synchronous rounds.  In round 1 everybody broadcasts its
preference together with one share of each of its f+1 lottery secrets
(secret t is used when exactly t crashes end up mattering).  Every round
carries a status report (who crashed when, with evidence) and a vector
of one-time random values that act as cheap signatures: the value an
agent hands you this round must be echoed back to everyone next round,
so claiming to have heard from somebody you did not means guessing their
value.  In the last round agents forward the shares they received so
that everybody can reconstruct the secrets of the agents that still
"seem clean"; the secrets are summed to pick a dictator uniformly, and
the dictator's preference is the decision.  Any detected inconsistency
makes the detector decide the special no-consensus value, which is what
removes the incentive to cheat.

The naive variant at the bottom of the module broadcasts lottery values
in the clear and is exploitable; it exists as a baseline.
"""

from __future__ import annotations

from .rng import Keyed, P_Z_SPECIAL, P_Z_FRESH, P_SECRET, P_SLOPE
from .sharing import DEFAULT_PRIME, reconstruct

INF_ROUND = 1 << 30   # "never crashed"; serialized as n+2 on the wire

BOT = "bot"           # deliberate no-consensus decision

# message kinds
K_FIRST = "r1"
K_MID = "mid"
K_FINAL = "fin"
K_BAD = "bad"


class ConsAgent:
    """Honest protocol state machine for one agent.

    Drive it with send(m) / receive(m, delivered) / update(m) for
    m = 1..f+1; afterwards ``decided`` is 0, 1 or BOT and ``rule`` holds
    the inconsistency rule that fired, if any.
    """

    def __init__(self, aid: int, n: int, f: int, pref: int, rng: Keyed,
                 keys: list[int], prime: int = DEFAULT_PRIME,
                 lottery: list[int] | None = None):
        if f < 1 or f + 1 >= n:
            raise ValueError("need 1 <= f and f+1 < n")
        self.id = aid
        self.n = n
        self.f = f
        self.p = prime
        self.pref = pref
        self.rng = rng
        self.keys = keys
        self.others = [j for j in range(n) if j != aid]

        self.decided: int | str | None = None
        self.decide_round: int | None = None
        self.rule: int | None = None
        self.dictator: int | None = None
        self.m_star: int | None = None
        self.t_used: int | None = None

        # lottery secrets: x[t] is used when t agents turn out to have
        # crashed before the first clean round
        if lottery is None:
            self.x = [rng.tagged(n - t, P_SECRET, 0, 0, t) for t in range(f + 1)]
        else:
            self.x = [v % (n - t) for t, v in enumerate(lottery)]
        self.slopes = [rng.tagged(prime, P_SLOPE, 0, 0, t) for t in range(f + 1)]
        # y_out[j][t]: share of x[t] at j's evaluation point j+1
        self.y_out = {
            j: tuple((self.x[t] + self.slopes[t] * (j + 1)) % prime
                     for t in range(f + 1))
            for j in range(n)
        }

        self.z_special = rng.tagged(n, P_Z_SPECIAL)
        self.zvec_next: dict[int, tuple] = {}
        for j in self.others:
            vec = [0] * n
            vec[aid] = rng.tagged(n, P_Z_FRESH, 1, keys[j])
            vec[j] = self.z_special
            self.zvec_next[j] = tuple(vec)

        # status: sr[j] = (crash_round, evidence); evidence is the last
        # z-vector received from j while alive, or the reporter's id
        self.sr: dict[int, tuple] = {j: (INF_ROUND, None) for j in self.others}
        self.st: dict[int, int] = {aid: pref}
        self.shares_in: dict[int, tuple] = {aid: self.y_out[aid]}
        self.z_in: dict[int, tuple] = {}
        self.z1_in: dict[int, tuple] = {}
        self.finals_in: dict[int, dict] = {}
        self.reports_now: dict[int, dict] = {}
        self.reports_prev: dict[int, dict] = {}
        # evidence ledger for cross-round checks
        self.min_claim = {j: INF_ROUND for j in self.others}
        self.max_alive = {j: 0 for j in self.others}
        self.my_reported = {j: {INF_ROUND} for j in self.others}
        self.malformed_from: int | None = None
        self.rule3_hit = False
        self.self_claimed_crashed = False

    # -- send ------------------------------------------------------------

    def send(self, m: int) -> dict[int, tuple]:
        if self.decided is not None:
            return {}
        report = dict(self.sr)
        for j, e in report.items():
            self.my_reported[j].add(e[0])
        out = {}
        if m == 1:
            for j in self.others:
                out[j] = (K_FIRST, self.pref, report, self.y_out[j],
                          self.zvec_next[j])
        elif m <= self.f:
            for j in self.others:
                out[j] = (K_MID, report, self.zvec_next[j])
        else:
            for j in self.others:
                fwd = {s: sh for s, sh in self.shares_in.items() if s != j}
                out[j] = (K_FINAL, report, fwd)
        return out

    # -- receive ---------------------------------------------------------

    def receive(self, m: int, delivered: dict[int, tuple]) -> None:
        if self.decided is not None:
            return
        n, f = self.n, self.f
        self.reports_prev = self.reports_now
        self.reports_now = {}
        self.z_in = {}
        self.malformed_from = None
        new_sr = dict(self.sr)
        for j, pl in delivered.items():
            kind = pl[0]
            report = zvec = None
            ok = False
            if kind == K_FIRST and m == 1 and len(pl) == 5:
                _, pref_j, report, shares, zvec = pl
                if pref_j in (0, 1) and len(shares) == f + 1 and len(zvec) == n:
                    ok = True
                    self.st[j] = pref_j
                    self.shares_in[j] = tuple(shares)
            elif kind == K_MID and 2 <= m <= f and len(pl) == 3:
                _, report, zvec = pl
                ok = len(zvec) == n
            elif kind == K_FINAL and m == f + 1 and len(pl) == 3:
                _, report, fwd = pl
                if isinstance(fwd, dict) and self.id not in fwd:
                    ok = True
                    self.finals_in[j] = fwd
            if (not ok or not isinstance(report, dict)
                    or len(report) != n - 1 or j in report):
                self.malformed_from = j
                continue
            if zvec is not None:
                if m >= 2:
                    # the slot for us must echo the one-time value we
                    # handed j last round
                    want = self.rng.tagged(n, P_Z_FRESH, m - 1, self.keys[j])
                    if zvec[self.id] != want:
                        self.rule3_hit = True
                self.z_in[j] = zvec
            self.reports_now[j] = report
            if m > self.max_alive[j]:
                self.max_alive[j] = m
            new_sr[j] = (INF_ROUND, zvec)
            for l, entry in report.items():
                if l == self.id:
                    # we know our own liveness: any crash claim about a
                    # still-running agent is fabricated
                    if entry[0] < INF_ROUND:
                        self.self_claimed_crashed = True
                    continue
                cr = entry[0]
                if cr < INF_ROUND:
                    if cr < self.min_claim[l]:
                        self.min_claim[l] = cr
                    if cr < new_sr[l][0]:
                        new_sr[l] = (cr, j)
                elif m - 1 > self.max_alive[l]:
                    # an "alive" entry proves l sent a round m-1 message
                    self.max_alive[l] = m - 1
        for j in self.others:
            if j not in delivered and new_sr[j][0] >= INF_ROUND \
                    and self.sr[j][0] >= INF_ROUND:
                new_sr[j] = (m, self.id)
                if m < self.min_claim[j]:
                    self.min_claim[j] = m
        self.sr = new_sr
        if m == 1:
            self.z1_in = self.z_in

    # -- inconsistency rules ----------------------------------------------

    def detect(self, m: int) -> int | None:
        """Return the lowest-numbered rule that fires, if any."""
        n, f = self.n, self.f
        if self.malformed_from is not None:
            return 1
        if m == 2 and self._rule2():
            return 2
        if self.rule3_hit or (m > 2 and self._rule3(m)):
            return 3
        if m == f + 1 and self._rule4():
            return 4
        if self.self_claimed_crashed:
            return 5
        for j in self.others:
            if self.max_alive[j] > self.min_claim[j]:
                return 5
        if self._rule6():
            return 6
        if m >= 2 and self._rule7(m):
            return 7
        if sum(1 for j in self.others if self.sr[j][0] < INF_ROUND) > f:
            return 8
        return None

    def _rule2(self) -> bool:
        # everyone who heard an agent in round 1 got the same special
        # value and relays it inside its evidence vector
        for subject in self.others:
            vals = set()
            own = self.z1_in.get(subject)
            if own is not None:
                vals.add(own[self.id])
            for s, rep in self.reports_now.items():
                if s == subject:
                    continue
                cr, ev = rep[subject]
                if cr >= INF_ROUND and ev is not None:
                    vals.add(ev[s])
            if len(vals) > 1:
                return True
        return False

    def _rule3(self, m: int) -> bool:
        # evidence vectors inside reports: subject's round m-1 vector
        # must echo the one-time value we sent the subject in round m-2
        n = self.n
        for s, rep in self.reports_now.items():
            for subject, entry in rep.items():
                if subject == self.id or entry[0] < INF_ROUND:
                    continue
                ev = entry[1]
                if ev is None or len(ev) != n:
                    continue
                want = self.rng.tagged(n, P_Z_FRESH, m - 2, self.keys[subject])
                if ev[self.id] != want:
                    return True
        return False

    def _rule4(self) -> bool:
        f, p = self.f, self.p
        for subject in range(self.n):
            if subject == self.id:
                # we know our own line exactly
                for s, fwd in self.finals_in.items():
                    sh = fwd.get(subject)
                    if sh is not None and tuple(sh) != self.y_out[s]:
                        return True
                continue
            pts = []
            own = self.shares_in.get(subject)
            if own is not None:
                pts.append((self.id + 1, own))
            for s, fwd in self.finals_in.items():
                sh = fwd.get(subject)
                if sh is not None and len(sh) == f + 1:
                    pts.append((s + 1, sh))
            if len(pts) < 3:
                continue
            (x1, sh1), (x2, sh2) = pts[0], pts[1]
            dx = x2 - x1
            for t in range(f + 1):
                dy = sh2[t] - sh1[t]
                y1 = sh1[t]
                for xk, shk in pts[2:]:
                    if (shk[t] - y1) * dx % p != dy * (xk - x1) % p:
                        return True
        return False

    def _rule6(self) -> bool:
        # a crash claim cites its reporter; the cited reporter must not
        # currently place the crash later (claims only ever move earlier)
        for s, rep in self.reports_now.items():
            for subject, entry in rep.items():
                if subject == self.id or entry[0] >= INF_ROUND:
                    continue
                cr, cited = entry
                if cited == s:
                    continue
                if cited == self.id:
                    if cr not in self.my_reported.get(subject, ()):
                        return True
                else:
                    other = self.reports_now.get(cited)
                    if other is not None:
                        e2 = other.get(subject)
                        if e2 is not None and e2[0] > cr:
                            return True
        return False

    def _rule7(self, m: int) -> bool:
        # s claims j1 alive through round m-1, yet reports a crash of j2
        # later than what j1 itself told us in round m-1: s either
        # ignored j1's report or somebody lied
        for s, rep in self.reports_now.items():
            for j2, e2 in rep.items():
                cr2 = e2[0]
                if j2 == self.id or cr2 >= INF_ROUND or cr2 >= m:
                    continue
                for j1, e1 in rep.items():
                    if e1[0] < INF_ROUND or j1 == self.id or j1 == j2:
                        continue
                    prev = self.reports_prev.get(j1)
                    if prev is None:
                        continue
                    pe = prev.get(j2)
                    if pe is not None and pe[0] < cr2:
                        return True
        return False

    # -- update ------------------------------------------------------------

    def update(self, m: int) -> None:
        if self.decided is not None:
            return
        rule = self.detect(m)
        if rule is not None:
            self.rule = rule
            self._decide(BOT, m)
            return
        if m <= self.f:
            n = self.n
            nxt = {}
            for j in self.others:
                vec = [None] * n
                vec[self.id] = self.rng.tagged(n, P_Z_FRESH, m + 1, self.keys[j])
                for l in self.others:
                    zin = self.z_in.get(l)
                    vec[l] = zin[l] if zin is not None else None
                nxt[j] = tuple(vec)
            self.zvec_next = nxt
        else:
            self._decide_value(m)

    def _decide(self, value, m: int) -> None:
        self.decided = value
        self.decide_round = m

    def compute_nc(self, upto: int) -> set[int]:
        """Agents with no crash placed at round <= upto, plus ourselves."""
        nc = {j for j in self.others if self.sr[j][0] > upto}
        nc.add(self.id)
        return nc

    def first_clean_round(self) -> tuple[int, set[int]] | None:
        prev = set(range(self.n))
        for mp in range(1, self.f + 2):
            cur = self.compute_nc(mp)
            if cur == prev:
                return mp, cur
            prev = cur
        return None

    def _decide_value(self, m: int) -> None:
        n = self.n
        clean = self.first_clean_round()
        if clean is None:
            # only reachable when more crashes than the bound were
            # simulated; the detector would normally have fired first
            self._decide(BOT, m)
            return
        self.m_star, nc = clean
        t = n - len(nc)
        self.t_used = t
        total = 0
        for j in nc:
            if j == self.id:
                xval = self.x[t]
            else:
                own = self.shares_in.get(j)
                pts = [(self.id + 1, own[t])] if own is not None else []
                for s, fwd in self.finals_in.items():
                    sh = fwd.get(j)
                    if sh is not None and len(sh) > t:
                        pts.append((s + 1, sh[t]))
                        if len(pts) == 2:
                            break
                if len(pts) < 2 or j not in self.st:
                    self._decide(BOT, m)
                    return
                xval = reconstruct(pts[0], pts[1], self.p)
            total += xval % (n - t)
        s_val = total % (n - t)
        # rank by identity key (the id itself by default) so that
        # relabelling agents together with their keys relabels the winner
        ranked = sorted(nc, key=lambda j: self.keys[j], reverse=True)
        self.dictator = ranked[s_val]
        self._decide(self.st[self.dictator], m)


def select_dictator(nc: set[int], xvals: dict[int, int],
                    keys: list[int] | None = None) -> int:
    """Reference dictator selection: (S+1)-st highest identity key (the
    id itself by default) where S is the sum of the surviving agents'
    lottery values mod |nc|."""
    s_val = sum(xvals[j] % len(nc) for j in nc) % len(nc)
    rank = (lambda j: j) if keys is None else (lambda j: keys[j])
    return sorted(nc, key=rank, reverse=True)[s_val]


# ---------------------------------------------------------------------------
# naive baseline: lottery values broadcast in the clear


class NaiveAgent:
    """Flood everyone's (pref, lottery values) tuple for f+1 rounds, then
    pick the dictator from the tuples seen.  Correct under crashes but
    exploitable: a rational agent can suppress a poorly-connected
    crasher's tuple by pretending to crash itself."""

    def __init__(self, aid: int, n: int, f: int, pref: int, rng: Keyed,
                 keys: list[int] | None = None, prime: int = 0,
                 lottery: list[int] | None = None):
        self.id = aid
        self.n = n
        self.f = f
        self.pref = pref
        if lottery is None:
            xs = tuple(rng.tagged(n - t, P_SECRET, 0, 0, t) for t in range(f + 1))
        else:
            xs = tuple(v % (n - t) for t, v in enumerate(lottery))
        self.keys = keys if keys is not None else list(range(n))
        self.seen: dict[int, tuple] = {aid: (pref, xs)}
        self.pending = [(aid, pref, xs)]
        self.conflict = False
        self.decided: int | str | None = None
        self.decide_round: int | None = None
        self.rule: int | None = None
        self.dictator: int | None = None
        self.m_star: int | None = None
        self.t_used: int | None = None

    def send(self, m: int) -> dict[int, tuple]:
        if self.decided is not None:
            return {}
        batch = tuple(self.pending)
        self.pending = []
        return {j: ("ntuple", batch) for j in range(self.n) if j != self.id}

    def receive(self, m: int, delivered: dict[int, tuple]) -> None:
        if self.decided is not None:
            return
        for j, pl in delivered.items():
            if pl[0] != "ntuple":
                self.conflict = True
                continue
            for item in pl[1]:
                aid, pref, xs = item
                if aid in self.seen:
                    if self.seen[aid] != (pref, xs):
                        self.conflict = True
                else:
                    self.seen[aid] = (pref, xs)
                    self.pending.append(item)

    def update(self, m: int) -> None:
        if self.decided is not None or m <= self.f:
            return
        n = self.n
        if self.conflict or len(self.seen) < n - self.f:
            self.decided = BOT
            self.decide_round = m
            return
        t = n - len(self.seen)
        self.t_used = t
        s_val = sum(xs[t] % (n - t) for _, xs in self.seen.values()) % (n - t)
        self.dictator = sorted(self.seen, key=lambda j: self.keys[j],
                               reverse=True)[s_val]
        self.decided = self.seen[self.dictator][0]
        self.decide_round = m


class NaiveExploitAgent(NaiveAgent):
    """Participates in round 1, then goes silent whenever its preference
    is in the minority among the round-1 tuples it saw."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.silent = False

    def send(self, m: int) -> dict[int, tuple]:
        if self.silent and m >= 2:
            return {}
        return super().send(m)

    def update(self, m: int) -> None:
        if m == 1:
            own = sum(1 for p, _ in self.seen.values() if p == self.pref)
            if own < len(self.seen) - own:
                self.silent = True
        super().update(m)
