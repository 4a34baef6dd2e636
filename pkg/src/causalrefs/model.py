"""Replicated world model: vector clocks, two-phase operations, causal delivery.

A ``World`` holds a fixed set of replicas. Operations run in two phases:
a generator executes at one replica (checking preconditions, no shared-state
mutation) and emits an ordered chain of effector messages; effectors are
applied atomically at the origin and delivered to every other replica in
chain order, after everything the event causally depends on.

Worlds are single-threaded and deterministic: the same sequence of
``execute``/``apply_message`` calls always produces the same state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

# Composition modes for operations made of several sub-updates.
PURE_CAUSAL = "pure-causal"
ATOMIC = "atomic"
MODES = (PURE_CAUSAL, ATOMIC)

ReplicaId = int
EventId = tuple[int, int]  # (origin replica, per-replica sequence number, from 1)


class SimulatorError(Exception):
    """Internal simulator misuse or corruption (a bug, not an app-level failure)."""


class DuplicateDelivery(SimulatorError):
    pass


class Stuck(SimulatorError):
    """A buffered message can never become deliverable."""


class PreconditionFailure(Exception):
    """An operation's precondition failed; the whole operation fails.

    ``reason`` is a short code naming the failed predicate, e.g. ``KeyInUse``,
    ``MultiValued``, ``NotUnreachable``.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


# ---------------------------------------------------------------------------
# Vector clocks: plain dicts replica -> event count, absent entry reads as 0.

def vc_leq(a: dict, b: dict) -> bool:
    return all(b.get(r, 0) >= c for r, c in a.items())


def vc_geq(a: dict, b: dict) -> bool:
    return vc_leq(b, a)


def vc_merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for r, c in b.items():
        if out.get(r, 0) < c:
            out[r] = c
    return out


def vc_glb(clocks: list[dict]) -> dict:
    """Pointwise minimum; a replica absent from any clock reads as 0."""
    if not clocks:
        return {}
    keys = set()
    for c in clocks:
        keys.update(c)
    return {r: min(c.get(r, 0) for c in clocks) for r in keys}


# ---------------------------------------------------------------------------
# Operations, events, messages.

@dataclass
class OpCall:
    """An operation descriptor: kind plus JSON-native arguments.

    Argument values are restricted to JSON-representable types (str, int,
    bool, lists thereof) so operation descriptors round-trip through trace
    files unchanged.
    """

    kind: str
    args: dict = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class AtomicChain:
    """Whole effector chain fused into one message (atomic composition mode)."""

    items: tuple  # tuple of (target_key_or_None, payload)


@dataclass(frozen=True, slots=True)
class EffectorMessage:
    event_id: EventId
    chain_index: int
    target: Optional[str]
    payload: Any


@dataclass
class Event:
    id: EventId
    replica: ReplicaId
    op: OpCall
    deps: dict  # vector clock snapshot at generation (causally closed)
    chain: tuple  # ordered EffectorMessages (length 1 in atomic mode)


class ReplicaState:
    """One replica's local view: objects, clocks, delivery bookkeeping.

    ``condemned`` holds targets for which this replica has emitted a
    positive stability report and therefore promised never to mint new
    references (outside the queried ignore-set); see the stability module.
    """

    __slots__ = (
        "rid", "objects", "applied_full", "seen", "progress", "pending",
        "frontier", "queries", "condemned", "created_here", "ref_counts",
        "next_key", "next_ref", "next_dot",
    )

    def __init__(self, rid: ReplicaId):
        self.rid = rid
        self.objects: dict[str, Any] = {}
        # ref_counts[key] = surviving non-NULL outref entries targeting key,
        # across all objects at this replica (kept by apply_outref_set).
        self.ref_counts: dict[str, int] = {}
        # applied_full[r] = number of events from r whose whole chain applied here.
        self.applied_full: dict[int, int] = {}
        # seen[r] = highest sequence number from r with any effector applied here.
        self.seen: dict[int, int] = {}
        # progress[eid] = applied chain prefix length, for partially applied events.
        self.progress: dict[EventId, int] = {}
        # pending[(eid, chain_index)] = undelivered message addressed to us.
        self.pending: dict[tuple[EventId, int], EffectorMessage] = {}
        self.frontier: dict[int, dict] = {}
        self.queries: dict[Any, Any] = {}
        self.condemned: set[str] = set()
        self.created_here: set[str] = set()
        self.next_key = 0
        self.next_ref = 0
        self.next_dot = 0

    def clone(self) -> "ReplicaState":
        """Independent copy. Relies on clock dicts, effector messages, and
        events being immutable once created (only rebound, never mutated)."""
        st = ReplicaState(self.rid)
        st.objects = {k: rec.clone() for k, rec in self.objects.items()}
        st.ref_counts = dict(self.ref_counts)
        st.applied_full = dict(self.applied_full)
        st.seen = dict(self.seen)
        st.progress = dict(self.progress)
        st.pending = dict(self.pending)
        st.frontier = dict(self.frontier)
        st.queries = {k: q.clone() for k, q in self.queries.items()}
        st.condemned = set(self.condemned)
        st.created_here = set(self.created_here)
        st.next_key = self.next_key
        st.next_ref = self.next_ref
        st.next_dot = self.next_dot
        return st

    def fully_applied(self, eid: EventId) -> bool:
        r, seq = eid
        return self.applied_full.get(r, 0) >= seq

    def is_applied(self, eid: EventId, chain_index: int) -> bool:
        return self.fully_applied(eid) or self.progress.get(eid, 0) > chain_index


class World:
    """A fixed set of replicas plus the global event log."""

    def __init__(self, replicas: int, mode: str = PURE_CAUSAL):
        if replicas < 1:
            raise ValueError("need at least one replica")
        if mode not in MODES:
            raise ValueError(f"unknown composition mode {mode!r}")
        self.n = replicas
        self.mode = mode
        self.states = [ReplicaState(r) for r in range(replicas)]
        self.events: dict[EventId, Event] = {}
        # Optional hook called after every effector application; used by the
        # invariant checker. Signature: (world, state, message).
        self.on_apply: Optional[Callable] = None
        # When set to a list, every generated event is appended to it; the
        # harness uses this to label events spawned inside an operation.
        self.spawn_log: Optional[list] = None

    def clone(self) -> "World":
        """Independent copy of the whole world (hooks are not carried over)."""
        w = World.__new__(World)
        w.n = self.n
        w.mode = self.mode
        w.states = [st.clone() for st in self.states]
        w.events = dict(self.events)
        w.on_apply = None
        w.spawn_log = None
        return w

    # -- generation ---------------------------------------------------------

    def generate(self, replica: ReplicaId, op: OpCall) -> Event:
        """Run ``op``'s generator at ``replica``.

        On success the effector chain is applied at the origin immediately
        and atomically, and enqueued for every other replica. Raises
        PreconditionFailure if any precondition fails.
        """
        from .ops import GENERATORS

        st = self.states[replica]
        build = GENERATORS.get(op.kind)
        if build is None:
            raise SimulatorError(f"unknown operation kind {op.kind!r}")
        payloads = build(self, st, op.args)

        seq = st.applied_full.get(replica, 0) + 1
        eid = (replica, seq)
        deps = {r: c for r, c in st.seen.items() if c > 0}
        if self.mode == ATOMIC:
            chain = (EffectorMessage(eid, 0, None, AtomicChain(tuple(payloads))),)
        else:
            chain = tuple(
                EffectorMessage(eid, i, target, p)
                for i, (target, p) in enumerate(payloads)
            )
        ev = Event(eid, replica, op, deps, chain)
        self.events[eid] = ev
        for msg in chain:
            self._apply(st, msg)
        for other in self.states:
            if other.rid != replica:
                for msg in chain:
                    other.pending[(eid, msg.chain_index)] = msg
        if self.spawn_log is not None:
            self.spawn_log.append(ev)
        return ev

    def execute(self, replica: ReplicaId, op: OpCall):
        """Run an operation, returning (result, spawned events).

        Read-only operations (invoke, may_delete) return their value and may
        still spawn events (may_delete registers a stability query on first
        use). Generator operations return the event itself.
        """
        from .ops import READS

        read = READS.get(op.kind)
        if read is not None:
            return read(self, replica, op.args)
        ev = self.generate(replica, op)
        return "ok", [ev]

    # -- delivery -----------------------------------------------------------

    def deliverable(self, replica: ReplicaId, msg: EffectorMessage) -> bool:
        """True iff ``msg`` can be applied at ``replica`` right now."""
        st = self.states[replica]
        eid = msg.event_id
        if st.is_applied(eid, msg.chain_index):
            return False
        if msg.chain_index != st.progress.get(eid, 0):
            return False
        ev = self.events[eid]
        for r, c in ev.deps.items():
            if st.applied_full.get(r, 0) < c:
                return False
        return True

    def deliver(self, replica: ReplicaId, msg: EffectorMessage) -> str:
        """Apply ``msg`` if deliverable, else buffer it.

        After an application, buffered messages are re-examined. Returns
        "applied" or "buffered".
        """
        st = self.states[replica]
        if st.is_applied(msg.event_id, msg.chain_index):
            raise DuplicateDelivery(f"{msg.event_id}[{msg.chain_index}] at replica {replica}")
        key = (msg.event_id, msg.chain_index)
        if self.deliverable(replica, msg):
            st.pending.pop(key, None)
            self._apply(st, msg)
            self._drain(st)
            return "applied"
        st.pending[key] = msg
        return "buffered"

    def apply_message(self, replica: ReplicaId, eid: EventId, chain_index: int) -> None:
        """Apply exactly one pending message; it must be deliverable.

        Used by trace replay, where the schedule enumerates every application
        explicitly (no implicit buffer draining).
        """
        st = self.states[replica]
        key = (eid, chain_index)
        msg = st.pending.get(key)
        if msg is None:
            if st.is_applied(eid, chain_index):
                raise DuplicateDelivery(f"{eid}[{chain_index}] at replica {replica}")
            raise SimulatorError(f"no pending message {eid}[{chain_index}] at replica {replica}")
        if not self.deliverable(replica, msg):
            raise SimulatorError(f"schedule step not deliverable: {eid}[{chain_index}] at replica {replica}")
        st.pending.pop(key)
        self._apply(st, msg)

    def _apply(self, st: ReplicaState, msg: EffectorMessage) -> None:
        from .ops import APPLIERS

        payload = msg.payload
        if isinstance(payload, AtomicChain):
            for target, p in payload.items:
                APPLIERS[type(p)](self, st, target, p)
        else:
            APPLIERS[type(payload)](self, st, msg.target, payload)
        eid = msg.event_id
        k = st.progress.get(eid, 0)
        if k != msg.chain_index:
            raise SimulatorError(f"chain order violated at replica {st.rid}: {eid}[{msg.chain_index}] after prefix {k}")
        r, seq = eid
        if st.seen.get(r, 0) < seq:
            st.seen[r] = seq
        if k + 1 == len(self.events[eid].chain):
            st.progress.pop(eid, None)
            prev = st.applied_full.get(r, 0)
            if prev + 1 != seq:
                raise SimulatorError(f"out-of-order full application of {eid} at replica {st.rid}")
            st.applied_full[r] = seq
        else:
            st.progress[eid] = k + 1
        if self.on_apply is not None:
            self.on_apply(self, st, msg)

    def _drain(self, st: ReplicaState) -> None:
        progressed = True
        while progressed:
            progressed = False
            for key in sorted(st.pending):
                msg = st.pending[key]
                if self.deliverable(st.rid, msg):
                    st.pending.pop(key)
                    self._apply(st, msg)
                    progressed = True

    def quiesce(self) -> None:
        """Deliver every outstanding effector everywhere, in some causal order.

        Raises Stuck if a buffered message can never be delivered (which
        would indicate a causal-closure bug).
        """
        while any(st.pending for st in self.states):
            progressed = False
            for st in self.states:
                for key in sorted(st.pending):
                    msg = st.pending[key]
                    if self.deliverable(st.rid, msg):
                        st.pending.pop(key)
                        self._apply(st, msg)
                        progressed = True
            if not progressed:
                stuck = [(st.rid, key) for st in self.states for key in sorted(st.pending)]
                raise Stuck(f"undeliverable messages remain: {stuck[:5]}")

    # -- misc ---------------------------------------------------------------

    def in_flight(self):
        """Yield (replica, message) for every generated-but-unapplied effector."""
        for st in self.states:
            for key in sorted(st.pending):
                yield st.rid, st.pending[key]
