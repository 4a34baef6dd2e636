"""Exhaustive small-scope exploration: a brute-force oracle complementing
the randomized harness.

Given a short program (a fixed sequence of operations, each pinned to a
replica), the explorer enumerates every causally-valid interleaving of
generation and effector delivery, checking safety invariants in every
reachable state and convergence properties in every terminal state.
Reached states are deduplicated by a sound structural key: the program
prefix executed, the exact effector chains generated so far, and each
replica's delivery progress — everything else is a deterministic function
of those.

``explore_catalog`` additionally branches over a whole operation catalog at
every generation point, covering every program up to a length bound in one
shared search.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .canon import canon_objects
from .model import AtomicChain, OpCall, PreconditionFailure, PURE_CAUSAL, World
from .refs import InRefAdd, OutRefSet
from .stability import oracle_stable

DEFAULT_BOUND = 5


class BoundExceeded(Exception):
    pass


@dataclass
class ExploreReport:
    states: int = 0
    terminals: int = 0
    violations: list = field(default_factory=list)
    # program index -> set of observed result strings across interleavings
    results: dict = field(default_factory=dict)
    # canonical object-state keys of all reachable / all terminal states
    reachable_keys: set = field(default_factory=set)
    terminal_keys: set = field(default_factory=set)

    @property
    def ok(self) -> bool:
        return not self.violations


def _objects_key(world: World) -> str:
    return json.dumps([canon_objects(st) for st in world.states],
                      sort_keys=True, separators=(",", ":"))


def _state_key(world: World, k) -> tuple:
    events_sig = tuple(world.events[eid].chain for eid in sorted(world.events))
    delivery = tuple(
        (
            tuple(sorted(st.applied_full.items())),
            tuple(sorted(st.progress.items())),
        )
        for st in world.states
    )
    return (k, events_sig, delivery)


def _format_result(kind: str, value) -> str:
    if kind == "invoke":
        return f"val:{value}"
    if kind == "may_delete":
        return "true" if value else "false"
    return "ok"


def _check_state(world: World) -> list:
    """Per-state safety: I1 (no dangling entry, entry listed at target),
    I3 local half (deleted object's listing within its ignore-set), I4."""
    out = []
    for st in world.states:
        for key, rec in st.objects.items():
            if not rec.inref.removed <= rec.inref.added:
                out.append(f"I4 at replica {st.rid}: removed outside added for {key}")
            if rec.deleted and not {r for _s, r in rec.inref.current()} <= rec.last_refs_at_delete:
                out.append(f"I3 at replica {st.rid}: listing of deleted {key} outside ignore-set")
            for attr, outref in rec.attrs.items():
                for e in outref.entries.values():
                    if e.target is None:
                        continue
                    trec = st.objects.get(e.target)
                    if trec is None or trec.deleted:
                        out.append(f"I1 at replica {st.rid}: {key}.{attr} references deleted/missing {e.target}")
                    elif (key, e.ref) not in trec.inref.current():
                        out.append(f"I1 at replica {st.rid}: ({key},{e.ref}) not listed at {e.target}")
    return out


def _check_stability(world: World, stable_seen: frozenset):
    """Refinement (stably-detected implies oracle-stable) plus persistence
    (oracle-stable queries never revert). Returns (violations, new seen)."""
    out = []
    seen = set(stable_seen)
    keys = set()
    for st in world.states:
        for qkey, q in st.queries.items():
            keys.add(qkey)
            if q.stable and not oracle_stable(world, qkey[0], qkey[1]):
                out.append(f"refinement at replica {st.rid}: stably {qkey[0]} but oracle disagrees")
    for target, last in stable_seen:
        if not oracle_stable(world, target, last):
            out.append(f"persistence: oracle-stable {target} reverted")
    for target, last in keys:
        if oracle_stable(world, target, last):
            seen.add((target, last))
    return out, frozenset(seen)


def _check_refids(world: World) -> list:
    """I2: each RefId enters one inref-add and one outref introduction."""
    out = []
    added: dict = {}
    intro: dict = {}
    for eid in sorted(world.events):
        for msg in world.events[eid].chain:
            payload = msg.payload
            items = payload.items if isinstance(payload, AtomicChain) else ((msg.target, payload),)
            for _target, p in items:
                if type(p) is InRefAdd:
                    if p.ref in added and added[p.ref] != eid:
                        out.append(f"I2: ref {p.ref} added by {added[p.ref]} and {eid}")
                    added[p.ref] = eid
                elif type(p) is OutRefSet:
                    for e in p.entries:
                        if e.ref is None:
                            continue
                        if e.ref in intro and intro[e.ref] != eid:
                            out.append(f"I2: ref {e.ref} introduced by {intro[e.ref]} and {eid}")
                        intro[e.ref] = eid
    return out


def _check_terminal(world: World) -> list:
    out = []
    canons = [canon_objects(st) for st in world.states]
    for r in range(1, world.n):
        if canons[r] != canons[0]:
            out.append(f"I5: replica {r} diverges at terminal state")
    st0 = world.states[0]
    for key, rec in st0.objects.items():
        actual = set()
        for src_key, src in st0.objects.items():
            for outref in src.attrs.values():
                for e in outref.entries.values():
                    if e.target == key:
                        actual.add((src_key, e.ref))
        if rec.inref.current() != actual:
            out.append(f"I6: listing of {key} does not match surviving entries")
    return out


def _delivery_choices(world: World) -> list:
    out = []
    for st in world.states:
        for mkey in sorted(st.pending):
            if world.deliverable(st.rid, st.pending[mkey]):
                out.append((st.rid, mkey))
    return out


def _run_gen(world: World, replica: int, op: OpCall) -> str:
    try:
        value, _ = world.execute(replica, op)
        return _format_result(op.kind, value)
    except PreconditionFailure as e:
        return f"err:{e.reason}"


def exhaustive_explore(program, bound: int = DEFAULT_BOUND, replicas: int = 2,
                       mode: str = PURE_CAUSAL, setup=None, path_check=None) -> ExploreReport:
    """Explore every interleaving of ``program`` (a list of (replica, OpCall)).

    ``setup`` optionally prepares the world (its events are quiesced and not
    explored). ``path_check(results, index, result)`` is called at every
    generation with the tuple of results along the current path; a returned
    string is recorded as a violation. Note that results of read-only
    operations are not part of the deduplication key, so ``path_check``
    should only correlate event-generating outcomes.
    """
    program = list(program)
    if len(program) > bound:
        raise BoundExceeded(f"{len(program)} events exceeds bound {bound}")
    root = World(replicas, mode)
    if setup is not None:
        setup(root)
        root.quiesce()
    report = ExploreReport()
    seen: set = set()

    def rec(world: World, k: int, results: tuple, stable_seen: frozenset):
        key = _state_key(world, k)
        if key in seen:
            return
        seen.add(key)
        report.states += 1
        report.reachable_keys.add(_objects_key(world))
        viols = _check_state(world)
        stab, stable_seen = _check_stability(world, stable_seen)
        viols += stab
        report.violations.extend(viols)
        deliveries = _delivery_choices(world)
        if k == len(program) and not deliveries:
            report.terminals += 1
            report.terminal_keys.add(_objects_key(world))
            report.violations.extend(_check_terminal(world))
            return
        if k < len(program):
            w2 = world.clone()
            replica, op = program[k]
            result = _run_gen(w2, replica, op)
            report.results.setdefault(k, set()).add(result)
            report.violations.extend(_check_refids(w2))
            if path_check is not None:
                bad = path_check(results, k, result)
                if bad:
                    report.violations.append(bad)
            rec(w2, k + 1, results + (result,), stable_seen)
        for replica, mkey in deliveries:
            w2 = world.clone()
            w2.apply_message(replica, mkey[0], mkey[1])
            rec(w2, k, results, stable_seen)

    rec(root, 0, (), frozenset())
    return report


def explore_catalog(catalog, max_events: int, replicas: int = 2,
                    mode: str = PURE_CAUSAL, setup=None) -> ExploreReport:
    """Explore every program of up to ``max_events`` operations drawn from
    ``catalog`` (a list of OpCalls, each runnable at any replica), sharing
    work across common prefixes. Terminal checks run at every quiescent
    state, since each one ends some program in the family.
    """
    if max_events > DEFAULT_BOUND:
        raise BoundExceeded(f"{max_events} events exceeds bound {DEFAULT_BOUND}")
    root = World(replicas, mode)
    if setup is not None:
        setup(root)
        root.quiesce()
    report = ExploreReport()
    seen: set = set()

    def rec(world: World, k: int, stable_seen: frozenset):
        key = _state_key(world, k)
        if key in seen:
            return
        seen.add(key)
        report.states += 1
        report.reachable_keys.add(_objects_key(world))
        viols = _check_state(world)
        stab, stable_seen = _check_stability(world, stable_seen)
        viols += stab
        report.violations.extend(viols)
        deliveries = _delivery_choices(world)
        if not deliveries:
            report.terminals += 1
            report.terminal_keys.add(_objects_key(world))
            report.violations.extend(_check_terminal(world))
        if k < max_events:
            for replica in range(replicas):
                for op in catalog:
                    w2 = world.clone()
                    result = _run_gen(w2, replica, op)
                    report.results.setdefault(k, set()).add(result)
                    report.violations.extend(_check_refids(w2))
                    rec(w2, k + 1, stable_seen)
        for replica, mkey in deliveries:
            w2 = world.clone()
            w2.apply_message(replica, mkey[0], mkey[1])
            rec(w2, k, stable_seen)

    rec(root, 0, frozenset())
    return report


# ---------------------------------------------------------------------------
# Standard catalog used by the CLI and the small-scope acceptance checks.

def basic_catalog() -> list:
    return [
        OpCall("init", {"source": "A", "attr": "a", "target": "X"}),
        OpCall("assign", {"dst": "B", "dst_attr": "b", "src": "A", "src_attr": "a"}),
        OpCall("assign_null", {"source": "A", "attr": "a"}),
        OpCall("delete", {"target": "X", "last": []}),
        OpCall("announce", {}),
    ]


def basic_setup(world: World) -> None:
    world.generate(0, OpCall("create", {"key": "A", "root": True, "attrs": ["a"]}))
    world.generate(0, OpCall("create", {"key": "B", "root": True, "attrs": ["b"]}))
    world.generate(0, OpCall("create", {"key": "X", "root": False, "attrs": ["x"]}))
    world.generate(0, OpCall("init", {"source": "A", "attr": "a", "target": "X"}))
