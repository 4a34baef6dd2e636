"""Stable-predicate detection for deletion checks.

Deciding that a target's reference listing is empty (modulo an ignore-set)
"and will stay empty" amounts to termination detection. Replicas gossip
their progress: an announcement carries the announcer's applied clock plus,
for every registered query, a report of whether the condition holds locally.
Every replica runs the same observer machine over the announcements it
receives:

  phase 1 (collecting): every replica reported the condition true at some
      local clock; take the pointwise supremum of those clocks.
  phase 2 (confirming): every replica later reported the condition still
      true at a clock dominating that supremum.

Any false report resets to collecting; completion of phase 2 is terminal.

A replica that reports the condition true thereby pledges never to mint a
new reference to that target (outside the query's ignore-set) itself. The
pledge is what makes the detected property genuinely stable: without it, a
replica could copy one of the ignored references right after confirming.

``oracle_stable`` is the omniscient ground truth used by the test harness.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    AtomicChain,
    OpCall,
    PreconditionFailure,
    ReplicaState,
    World,
    vc_geq,
    vc_glb,
    vc_merge,
)
from .refs import InRefAdd, last_refs_arg

QueryKey = tuple[str, frozenset]


@dataclass(frozen=True, slots=True)
class Report:
    target: str
    last: frozenset
    holds: bool
    clock: tuple  # sorted (replica, count) pairs


@dataclass(frozen=True, slots=True)
class ClockAnnounce:
    announcer: int
    clock: tuple
    reports: tuple


@dataclass(frozen=True, slots=True)
class QueryRegister:
    target: str
    last: frozenset


class QueryObserver:
    """Two-phase detection state for one query, as seen by one replica."""

    __slots__ = ("n", "snapshot", "sup", "confirm", "stable")

    def __init__(self, n: int):
        self.n = n
        self.snapshot: dict[int, dict] = {}
        self.sup: dict | None = None
        self.confirm: set[int] = set()
        self.stable = False

    def clone(self) -> "QueryObserver":
        # Clock dicts are never mutated in place, so sharing them is safe.
        q = QueryObserver(self.n)
        q.snapshot = dict(self.snapshot)
        q.sup = self.sup
        q.confirm = set(self.confirm)
        q.stable = self.stable
        return q

    @property
    def phase(self) -> str:
        if self.stable:
            return "stable"
        if self.sup is not None:
            return "confirming"
        return "collecting"

    def report(self, replica: int, holds: bool, clock: dict) -> None:
        if self.stable:
            return
        if not holds:
            self.snapshot.clear()
            self.confirm.clear()
            self.sup = None
            return
        if self.sup is None:
            self.snapshot[replica] = clock
            if len(self.snapshot) == self.n:
                sup: dict = {}
                for c in self.snapshot.values():
                    sup = vc_merge(sup, c)
                self.sup = sup
            # Snapshot reports never double as confirmations: the
            # confirmation must be a later observation.
            return
        if vc_geq(clock, self.sup):
            self.confirm.add(replica)
            if len(self.confirm) == self.n:
                self.stable = True


def frontier_glb(st: ReplicaState, n: int) -> dict:
    """Pointwise minimum of the latest announced clocks, zero until every
    replica has announced at least once."""
    if len(st.frontier) < n:
        return {}
    return vc_glb(list(st.frontier.values()))


def _query_sort_key(key: QueryKey):
    return (key[0], sorted(key[1]))


def _condition_holds(st: ReplicaState, target: str, last: frozenset) -> bool:
    rec = st.objects.get(target)
    if rec is None:
        return False
    return {r for _s, r in rec.inref.current()} <= last


# ---------------------------------------------------------------------------
# Generators and appliers.

def gen_register_query(world: World, st: ReplicaState, a: dict):
    last = frozenset(tuple(r) for r in a["last"])
    return [(None, QueryRegister(a["target"], last))]


def apply_query_register(world: World, st: ReplicaState, target, p: QueryRegister) -> None:
    key = (p.target, p.last)
    if key not in st.queries:
        st.queries[key] = QueryObserver(world.n)


def gen_announce(world: World, st: ReplicaState, a: dict):
    clock = tuple(sorted((r, c) for r, c in st.seen.items() if c > 0))
    reports = []
    for key in sorted(st.queries, key=_query_sort_key):
        target, last = key
        holds = _condition_holds(st, target, last)
        if holds:
            # Pledge: having vouched that the target is deletable, this
            # replica refuses to mint new references to it from now on.
            st.condemned.add(target)
        reports.append(Report(target, last, holds, clock))
    return [(None, ClockAnnounce(st.rid, clock, tuple(reports)))]


def apply_clock_announce(world: World, st: ReplicaState, target, p: ClockAnnounce) -> None:
    clock = dict(p.clock)
    st.frontier[p.announcer] = vc_merge(st.frontier.get(p.announcer, {}), clock)
    for rep in p.reports:
        q = st.queries.get((rep.target, rep.last))
        if q is None:
            # Registration travels the same causal channel, so it always
            # precedes any report for its query.
            raise RuntimeError(f"report for unregistered query {rep.target} at replica {st.rid}")
        q.report(p.announcer, rep.holds, dict(rep.clock))


# ---------------------------------------------------------------------------
# Queries.

def stably_subset(world: World, replica: int, target: str, last: frozenset) -> bool:
    """True iff this replica has detected, stably, that the target's
    reference listing is contained in ``last``."""
    st = world.states[replica]
    if target not in st.objects:
        raise PreconditionFailure("UnknownObject", target)
    q = st.queries.get((target, last))
    return q is not None and q.stable


def may_delete(world: World, replica: int, target: str, last: frozenset):
    """Deletion check. Registers the stability query on first use (an event
    of its own) and reports False until detection completes. Returns
    (allowed, spawned events). Root objects are never deletable, so no
    query is ever raised for them."""
    st = world.states[replica]
    rec = st.objects.get(target)
    if rec is None:
        raise PreconditionFailure("UnknownObject", target)
    if rec.root:
        return False, []
    key = (target, last)
    if key not in st.queries:
        ev = world.generate(replica, OpCall(
            "register_query",
            {"target": target, "last": sorted(list(r) for r in last)},
        ))
        return False, [ev]
    return stably_subset(world, replica, target, last), []


def read_may_delete(world: World, replica: int, a: dict):
    st = world.states[replica]
    target = a["target"]
    if target not in st.objects:
        raise PreconditionFailure("UnknownObject", target)
    last = last_refs_arg(st, target, a.get("last", "auto"))
    return may_delete(world, replica, target, last)


# ---------------------------------------------------------------------------
# Omniscient oracle (testing ground truth).

def _payload_items(msg):
    if isinstance(msg.payload, AtomicChain):
        yield from msg.payload.items
    else:
        yield msg.target, msg.payload


def oracle_stable(world: World, target: str, last: frozenset) -> bool:
    """Global-view truth of "the listing is stably contained in ``last``":
    the condition holds at every replica, no in-flight effector adds a pair
    outside ``last``, no surviving entry outside ``last`` targets the
    object anywhere, and every replica still able to derive a new reference
    to it has pledged not to."""
    for st in world.states:
        rec = st.objects.get(target)
        if rec is not None and not {r for _s, r in rec.inref.current()} <= last:
            return False
    for st in world.states:
        for obj in st.objects.values():
            for out in obj.attrs.values():
                for e in out.entries.values():
                    if e.target == target and e.ref not in last:
                        return False
    for _rid, msg in world.in_flight():
        for tgt, p in _payload_items(msg):
            if isinstance(p, InRefAdd) and tgt == target and p.ref not in last:
                return False
    for st in world.states:
        rec = st.objects.get(target)
        if rec is None or rec.deleted or rec.root:
            continue
        derivable = target in st.created_here or st.ref_counts.get(target, 0) > 0
        if derivable and target not in st.condemned:
            return False
    return True
