"""Randomized execution generation, full-trace invariant checking, and
trace shrinking.

A trace is fully replayable: a header (seed, config), generation steps
(which operation ran at which replica, with its recorded outcome), and
delivery steps (which effector message was applied where). Random traces
are built the way that shakes out delivery bugs: each new event is
generated at a replica that has just been brought up to date with two
randomly chosen earlier events, each delivered only up to a random prefix
of its effector chain (plus whatever causal delivery forces in first).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import stability
from .canon import canon_objects
from .model import (
    MODES,
    PURE_CAUSAL,
    AtomicChain,
    Event,
    OpCall,
    PreconditionFailure,
    SimulatorError,
    World,
)
from .refs import InRefAdd, InRefRemove, MarkDeleted, OutRefSet, last_refs_arg


class ConfigInvalid(Exception):
    pass


class NotFailing(Exception):
    pass


class ReplayMismatch(Exception):
    """The trace does not replay to its recorded outcomes (corrupt trace)."""


DEFAULT_WEIGHTS = {
    "create": 3,
    "init": 4,
    "assign": 7,
    "assign_null": 2,
    "invoke": 1,
    "may_delete": 1,
    "delete": 1,
    "announce": 1,
}


@dataclass
class TraceConfig:
    replicas: int = 3
    events: int = 20
    mode: str = PURE_CAUSAL
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def validate(self) -> None:
        if self.replicas < 1:
            raise ConfigInvalid("need at least one replica")
        if self.events < 1:
            raise ConfigInvalid("need at least one event")
        if self.mode not in MODES:
            raise ConfigInvalid(f"unknown mode {self.mode!r}")
        if not self.weights or any(w < 0 for w in self.weights.values()):
            raise ConfigInvalid("invalid operation weights")


@dataclass
class GenStep:
    label: str
    replica: int
    op: OpCall
    result: str  # "ok", "val:<key>", "true"/"false", or "err:<Reason>"


@dataclass
class DeliverStep:
    replica: int
    label: str
    chain_index: int


@dataclass
class Trace:
    seed: int
    config: TraceConfig
    steps: list


@dataclass
class Violation:
    invariant: str
    step: int
    replica: int
    detail: str


@dataclass
class InvariantReport:
    violations: list
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def failed_invariants(self) -> set:
        return {v.invariant for v in self.violations}


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def execution_seed(campaign_seed: int, index: int) -> int:
    """Per-execution seed derived from the campaign's single 64-bit seed."""
    return splitmix64((campaign_seed & 0xFFFFFFFFFFFFFFFF) ^ splitmix64(index))


# ---------------------------------------------------------------------------
# Executing one recorded operation (shared by generation and replay).

def _format_result(kind: str, value) -> str:
    if kind == "invoke":
        return f"val:{value}"
    if kind == "may_delete":
        return "true" if value else "false"
    return "ok"


def _execute_labeled(world: World, replica: int, op: OpCall, label: str, labels: dict, eid_labels: dict):
    """Run one operation, labeling every event it spawns. Returns the
    result string and the spawned events."""
    world.spawn_log = []
    try:
        value, _ = world.execute(replica, op)
        result = _format_result(op.kind, value)
    except PreconditionFailure as e:
        result = f"err:{e.reason}"
    spawned = world.spawn_log
    world.spawn_log = None
    for j, ev in enumerate(spawned):
        lab = label if j == 0 else f"{label}.{j}"
        labels[lab] = ev.id
        eid_labels[ev.id] = lab
    return result, spawned


# ---------------------------------------------------------------------------
# Random execution generation.

def _deliver_prefix(world: World, replica: int, eid, upto: int, steps: list, eid_labels: dict) -> None:
    """Deliver event ``eid``'s chain to ``replica`` up to ``upto`` messages,
    first delivering (fully) everything the event causally depends on."""
    st = world.states[replica]
    if eid[0] == replica or st.fully_applied(eid):
        return
    ev = world.events[eid]
    if upto <= st.progress.get(eid, 0):
        return
    for dep_r, dep_c in sorted(ev.deps.items()):
        if dep_r == replica:
            continue
        seq = st.applied_full.get(dep_r, 0) + 1
        while seq <= dep_c:
            dep_eid = (dep_r, seq)
            _deliver_prefix(world, replica, dep_eid, len(world.events[dep_eid].chain), steps, eid_labels)
            seq = st.applied_full.get(dep_r, 0) + 1
    for idx in range(st.progress.get(eid, 0), upto):
        world.apply_message(replica, eid, idx)
        steps.append(DeliverStep(replica, eid_labels[eid], idx))


def _deliver_all(world: World, replica: int, steps: list, eid_labels: dict) -> None:
    st = world.states[replica]
    progressed = True
    while progressed:
        progressed = False
        for key in sorted(st.pending):
            msg = st.pending[key]
            if world.deliverable(replica, msg):
                world.apply_message(replica, key[0], key[1])
                steps.append(DeliverStep(replica, eid_labels[key[0]], key[1]))
                progressed = True


def _draw_args(rng: random.Random, world: World, replica: int, kind: str):
    st = world.states[replica]
    keys = list(st.objects)
    live = [k for k in keys if not st.objects[k].deleted]
    with_attrs = [k for k in live if st.objects[k].attrs]

    def pick_attr(key):
        return rng.choice(sorted(st.objects[key].attrs))

    if kind == "create":
        key = f"o{replica}n{st.next_key}"
        st.next_key += 1
        nattrs = rng.randint(1, 2)
        return {"key": key, "root": rng.random() < 0.3, "attrs": ["f", "g"][:nattrs]}
    if kind == "announce":
        return {}
    if kind == "init":
        if not with_attrs or not keys:
            return None
        source = rng.choice(with_attrs)
        # Mostly target something plausibly reachable here so inits succeed
        # often enough to build interesting graphs.
        mintable = [
            k for k in live
            if st.objects[k].root or k in st.created_here or st.ref_counts.get(k, 0) > 0
        ]
        pool = mintable if mintable and rng.random() < 0.8 else keys
        return {"source": source, "attr": pick_attr(source), "target": rng.choice(pool)}
    if kind == "assign":
        if len(with_attrs) < 1:
            return None
        # Prefer a source that is actually assignable (single-valued,
        # non-NULL) and often overwrite an attribute that already holds a
        # value; that is where concurrent assignments (multi-valued
        # registers) come from.
        assignable = [
            (k, a) for k in with_attrs
            for a, out in sorted(st.objects[k].attrs.items())
            if len(out.entries) == 1 and out.non_null()
        ]
        if assignable and rng.random() < 0.8:
            src, src_attr = rng.choice(assignable)
        else:
            src = rng.choice(with_attrs)
            src_attr = pick_attr(src)
        written = [
            (k, a) for k in with_attrs
            for a, out in sorted(st.objects[k].attrs.items()) if out.entries
        ]
        if written and rng.random() < 0.6:
            dst, dst_attr = rng.choice(written)
        else:
            dst = rng.choice(with_attrs)
            dst_attr = pick_attr(dst)
        return {"dst": dst, "dst_attr": dst_attr, "src": src, "src_attr": src_attr}
    if kind in ("assign_null", "invoke"):
        if not with_attrs:
            return None
        source = rng.choice(with_attrs)
        args = {"source": source, "attr": pick_attr(source)}
        return args
    if kind in ("may_delete", "delete"):
        pool = keys if kind == "may_delete" else [k for k in live if not st.objects[k].root]
        if not pool:
            return None
        # Prefer re-probing registered queries, then unreferenced objects,
        # so detection can complete and deletions actually happen mid-trace.
        probed = [t for t, _last in st.queries if t in pool]
        if probed and rng.random() < 0.7:
            return {"target": rng.choice(probed), "last": "auto"}
        unref = [k for k in pool if st.ref_counts.get(k, 0) == 0 and not st.objects[k].root]
        if unref and rng.random() < 0.7:
            return {"target": rng.choice(unref), "last": "auto"}
        return {"target": rng.choice(pool), "last": "auto"}
    raise SimulatorError(f"unknown op kind {kind!r}")


def random_execution(seed: int, config: TraceConfig) -> Trace:
    """Build one replayable random trace. Deterministic in (seed, config)."""
    config.validate()
    rng = random.Random(seed)
    world = World(config.replicas, config.mode)
    steps: list = []
    labels: dict = {}
    eid_labels: dict = {}
    successes: list[Event] = []
    kinds = sorted(config.weights)
    weights = [config.weights[k] for k in kinds]

    # Some traces end in a reclamation phase: gossip- and deletion-heavy
    # drawing with frequent sync points, so termination detection can
    # actually complete and deletions race against regular updates.
    reclaim_from = int(config.events * 0.45) if rng.random() < 0.3 else None
    reclaim_weights = {
        "create": 0.5, "init": 1, "assign": 1, "assign_null": 3,
        "invoke": 0.5, "may_delete": 3, "delete": 3, "announce": 30,
    }

    for i in range(config.events):
        reclaiming = reclaim_from is not None and i >= reclaim_from
        # Round-robin replicas while reclaiming: detection needs every
        # replica to gossip, which uniform choice rarely achieves in a
        # short tail.
        replica = i % config.replicas if reclaiming else rng.randrange(config.replicas)
        sync_p = 0.6 if reclaiming else 0.1
        if successes and rng.random() < sync_p:
            # Full sync point: deliver everything outstanding to this replica.
            _deliver_all(world, replica, steps, eid_labels)
        elif successes:
            parents = rng.sample(successes, min(2, len(successes)))
            for ev in parents:
                upto = rng.randint(0, len(ev.chain))
                _deliver_prefix(world, replica, ev.id, upto, steps, eid_labels)
        op = None
        if reclaiming:
            draw_kinds = sorted(reclaim_weights)
            draw_weights = [reclaim_weights[k] for k in draw_kinds]
            st = world.states[replica]
            ripe = [
                t for (t, _last), q in sorted(st.queries.items(), key=lambda kv: kv[0][0])
                if q.stable and t in st.objects
                and not st.objects[t].deleted and not st.objects[t].root
            ]
            if ripe:
                op = OpCall("delete", {"target": ripe[0], "last": "auto"})
            elif i == reclaim_from:
                args = _draw_args(rng, world, replica, "may_delete")
                if args is not None:
                    op = OpCall("may_delete", args)
        else:
            draw_kinds, draw_weights = kinds, weights
        for _ in range(8):
            kind = rng.choices(draw_kinds, draw_weights)[0]
            args = _draw_args(rng, world, replica, kind)
            if args is not None:
                op = OpCall(kind, args)
                break
        if op is None:
            op = OpCall("create", _draw_args(rng, world, replica, "create"))
        label = f"g{i}"
        result, spawned = _execute_labeled(world, replica, op, label, labels, eid_labels)
        steps.append(GenStep(label, replica, op, result))
        successes.extend(spawned)
    return Trace(seed, config, steps)


# ---------------------------------------------------------------------------
# Replay.

def replay(trace: Trace, strict: bool = True, on_apply=None, on_step=None):
    """Re-execute a trace. Returns (world, normalized steps).

    In strict mode any divergence from the recorded outcomes raises
    ReplayMismatch. In lenient mode (used by the shrinker) invalid steps are
    dropped and recorded results are overwritten with the actual ones; the
    normalized steps then replay strictly.
    """
    trace.config.validate()
    world = World(trace.config.replicas, trace.config.mode)
    world.on_apply = on_apply
    labels: dict = {}
    eid_labels: dict = {}
    norm: list = []
    for i, step in enumerate(trace.steps):
        if isinstance(step, GenStep):
            result, _spawned = _execute_labeled(world, step.replica, step.op, step.label, labels, eid_labels)
            if strict and result != step.result:
                raise ReplayMismatch(f"step {i} ({step.label}): recorded {step.result!r}, got {result!r}")
            kept = GenStep(step.label, step.replica, step.op, result)
            norm.append(kept)
            if on_step is not None:
                on_step(world, i, kept)
        else:
            eid = labels.get(step.label)
            ok = eid is not None
            if ok:
                try:
                    world.apply_message(step.replica, eid, step.chain_index)
                except SimulatorError as e:
                    if strict:
                        raise ReplayMismatch(f"step {i}: {e}") from e
                    ok = False
            elif strict:
                raise ReplayMismatch(f"step {i}: unknown event label {step.label!r}")
            if ok:
                norm.append(step)
                if on_step is not None:
                    on_step(world, i, step)
    return world, norm


# ---------------------------------------------------------------------------
# Invariant checking.

class Checker:
    """Incremental invariant checks, hooked into effector application.

    I1: a surviving non-NULL entry implies its target is not deleted and its
        (source, ref) pair is in the target's current listing.
    I2: each reference id is introduced by exactly one event.
    I3: no listing pair outside the recorded ignore-set is ever added to a
        deleted object (the global concurrency side is checked by
        ``scan_deletions``).
    I4: inref.removed stays within inref.added.
    """

    def __init__(self):
        self.violations: list = []
        self.step = -1
        self.minted: dict = {}
        self.intro: dict = {}
        self.deletions: list = []  # (event id, target, last)
        self.multivalued = False

    def on_apply(self, world: World, st, msg) -> None:
        payload = msg.payload
        if isinstance(payload, AtomicChain):
            for target, p in payload.items:
                self._check(world, st, msg.event_id, target, p)
        else:
            self._check(world, st, msg.event_id, msg.target, payload)

    def _bad(self, invariant: str, st, detail: str) -> None:
        self.violations.append(Violation(invariant, self.step, st.rid, detail))

    def _check(self, world: World, st, eid, target, p) -> None:
        if type(p) is InRefAdd:
            prev = self.minted.get(p.ref)
            if prev is not None and prev != eid:
                self._bad("I2", st, f"ref {p.ref} added by {prev} and {eid}")
            self.minted[p.ref] = eid
            rec = st.objects[target]
            if rec.deleted and p.ref not in rec.last_refs_at_delete:
                self._bad("I3", st, f"listing pair ({p.source},{p.ref}) added to deleted {target}")
        elif type(p) is OutRefSet:
            out = st.objects[target].attrs[p.attr]
            for e in p.entries:
                if e.target is None or e.write_dot not in out.entries:
                    continue
                prev = self.intro.get(e.ref)
                if prev is not None and prev != eid:
                    self._bad("I2", st, f"ref {e.ref} introduced by {prev} and {eid}")
                self.intro[e.ref] = eid
                trec = st.objects.get(e.target)
                if trec is None or trec.deleted:
                    self._bad("I1", st, f"{target}.{p.attr} references deleted/missing {e.target}")
                elif (target, e.ref) not in trec.inref.current():
                    self._bad("I1", st, f"({target},{e.ref}) missing from listing of {e.target}")
            if len(out.entries) > 1:
                self.multivalued = True
        elif type(p) is InRefRemove:
            rec = st.objects[target]
            pair = (p.source, p.ref)
            if pair not in rec.inref.added:
                self._bad("I4", st, f"removed unknown pair {pair} at {target}")
            src = st.objects.get(p.source)
            if src is not None:
                for attr, out in src.attrs.items():
                    for e in out.entries.values():
                        if e.ref == p.ref:
                            self._bad("I1", st, f"{p.source}.{attr} still holds {p.ref} after listing removal")
        elif type(p) is MarkDeleted:
            rec = st.objects[target]
            if rec.root:
                self._bad("I1", st, f"root object {target} deleted")
            if st.ref_counts.get(target, 0) > 0:
                self._bad("I1", st, f"{target} deleted while entries still target it here")
            self.deletions.append((eid, target, p.last))

    def scan_deletions(self, world: World) -> None:
        """Global half of I3: every listing addition outside the ignore-set
        must happen causally before the deletion."""
        adds: list = []
        for ev in world.events.values():
            for msg in ev.chain:
                items = msg.payload.items if isinstance(msg.payload, AtomicChain) else ((msg.target, msg.payload),)
                for target, p in items:
                    if type(p) is InRefAdd:
                        adds.append((ev, target, p))
        seen = set()
        for eid_d, target, last in self.deletions:
            if (eid_d, target) in seen:
                continue
            seen.add((eid_d, target))
            d = world.events[eid_d]
            for ev, tgt, p in adds:
                if tgt != target or p.ref in last or ev.id == eid_d:
                    continue
                r, seq = ev.id
                if d.deps.get(r, 0) < seq:
                    self.violations.append(Violation(
                        "I3", -1, d.replica,
                        f"add of ({p.source},{p.ref}) to {target} by {ev.id} not before delete {eid_d}",
                    ))


def _check_refinement(checker: Checker, world: World, step_index: int, step: GenStep) -> None:
    """Whenever the distributed detector says stable, the omniscient oracle
    must agree at the same state."""
    probe = None
    if step.op.kind == "may_delete" and step.result == "true":
        st = world.states[step.replica]
        probe = (step.op.args["target"], last_refs_arg(st, step.op.args["target"], step.op.args.get("last", "auto")))
    elif step.op.kind == "delete" and step.result == "ok":
        # The delete event is the last one this step spawned; read its
        # recorded ignore-set from the mark-deleted payload.
        ev = max((e for e in world.events.values() if e.op is step.op), key=lambda e: e.id, default=None)
        if ev is not None:
            for msg in ev.chain:
                items = msg.payload.items if isinstance(msg.payload, AtomicChain) else ((msg.target, msg.payload),)
                for target, p in items:
                    if type(p) is MarkDeleted:
                        probe = (target, p.last)
    if probe is not None and not stability.oracle_stable(world, probe[0], probe[1]):
        checker.violations.append(Violation(
            "refinement", step_index, step.replica,
            f"stably-true for {probe[0]} but oracle disagrees",
        ))


def check_invariants(trace: Trace, strict: bool = True) -> InvariantReport:
    """Replay a trace, checking I1-I4 at every post-application state,
    I5-I7 after forced quiescence, plus the stability refinement property."""
    checker = Checker()

    def on_step(world, i, step):
        checker.step = i
        if isinstance(step, GenStep):
            _check_refinement(checker, world, i, step)

    world, norm = replay(trace, strict=strict, on_apply=checker.on_apply, on_step=on_step)
    checker.step = len(trace.steps)  # quiescence and later
    world.quiesce()

    n = world.n
    canons = [canon_objects(st) for st in world.states]
    for r in range(1, n):
        if canons[r] != canons[0]:
            checker.violations.append(Violation("I5", -1, r, "replica state diverges from replica 0 after quiesce"))

    st0 = world.states[0]
    for key, rec in st0.objects.items():
        actual = set()
        for src_key, src in st0.objects.items():
            for out in src.attrs.values():
                for e in out.entries.values():
                    if e.target == key:
                        actual.add((src_key, e.ref))
        if rec.inref.current() != actual:
            checker.violations.append(Violation(
                "I6", -1, 0, f"listing of {key} is {sorted(rec.inref.current())}, entries say {sorted(actual)}"))

    checker.scan_deletions(world)

    # I7 liveness: every globally unreferenced non-root object becomes
    # deletable within two announce rounds per replica.
    candidates = [
        k for k, rec in st0.objects.items()
        if not rec.root and not rec.deleted and st0.ref_counts.get(k, 0) == 0
        and not rec.inref.current()
    ]
    if candidates:
        for t in candidates:
            world.execute(0, OpCall("may_delete", {"target": t, "last": []}))
        world.quiesce()
        for _ in range(2):
            for r in range(n):
                world.generate(r, OpCall("announce"))
            world.quiesce()
        for t in candidates:
            for r in range(n):
                ok = stability.stably_subset(world, r, t, frozenset())
                if not ok:
                    checker.violations.append(Violation("I7", -1, r, f"{t} not stably unreferenced after 2 rounds"))
                elif not stability.oracle_stable(world, t, frozenset()):
                    checker.violations.append(Violation("refinement", -1, r, f"stable {t} but oracle disagrees"))

    report = InvariantReport(checker.violations)
    report.stats["multivalued"] = checker.multivalued
    report.stats["events"] = sum(1 for s in norm if isinstance(s, GenStep))
    report.stats["failed_events"] = sum(
        1 for s in norm if isinstance(s, GenStep) and s.result.startswith("err:"))
    return report


def convergence_check(trace: Trace) -> bool:
    """Quiesce the replayed world and compare all replica object maps."""
    world, _ = replay(trace)
    world.quiesce()
    canons = [canon_objects(st) for st in world.states]
    return all(c == canons[0] for c in canons[1:])


# ---------------------------------------------------------------------------
# Shrinking.

def _normalize(trace: Trace) -> Trace:
    _, norm = replay(trace, strict=False)
    return Trace(trace.seed, trace.config, norm)


def shrink(failing: Trace) -> Trace:
    """Greedy minimization: drop whole events, then individual deliveries,
    as long as the same invariant still fails. The result replays to the
    same failure and is never larger than the input."""
    base = check_invariants(failing, strict=False)
    if base.ok:
        raise NotFailing("trace does not fail any invariant")
    target_inv = base.violations[0].invariant

    def fails(t: Trace):
        try:
            rep = check_invariants(t, strict=False)
        except (SimulatorError, ReplayMismatch):
            return False
        return target_inv in rep.failed_invariants()

    current = _normalize(failing)
    changed = True
    while changed:
        changed = False
        gen_labels = [s.label for s in current.steps if isinstance(s, GenStep)]
        for label in gen_labels:
            cand_steps = [
                s for s in current.steps
                if not (isinstance(s, GenStep) and s.label == label)
                and not (isinstance(s, DeliverStep) and (s.label == label or s.label.startswith(label + ".")))
            ]
            cand = _normalize(Trace(current.seed, current.config, cand_steps))
            if len(cand.steps) < len(current.steps) and fails(cand):
                current = cand
                changed = True
                break
    changed = True
    while changed:
        changed = False
        for i in range(len(current.steps) - 1, -1, -1):
            if not isinstance(current.steps[i], DeliverStep):
                continue
            cand = _normalize(Trace(current.seed, current.config, current.steps[:i] + current.steps[i + 1:]))
            if fails(cand):
                current = cand
                changed = True
                break
    return current


# ---------------------------------------------------------------------------
# Campaigns.

def run_campaign(seed: int, executions: int, config: TraceConfig, keep_failures: int = 10):
    """Run ``executions`` random traces and check every invariant.

    Returns a summary dict: per-invariant violation counts, the fraction of
    traces that exhibited a multi-valued register, and up to
    ``keep_failures`` shrunk failing traces.
    """
    if executions < 1:
        raise ConfigInvalid("need at least one execution")
    config.validate()
    counts: dict = {}
    failures: list = []
    multivalued = 0
    for i in range(executions):
        trace = random_execution(execution_seed(seed, i), config)
        report = check_invariants(trace)
        if report.stats.get("multivalued"):
            multivalued += 1
        if not report.ok:
            for inv in sorted(report.failed_invariants()):
                counts[inv] = counts.get(inv, 0) + 1
            if len(failures) < keep_failures:
                failures.append((i, shrink(trace), report))
    return {
        "executions": executions,
        "violations": counts,
        "total_violating": sum(counts.values()),
        "multivalued_fraction": multivalued / executions,
        "failures": failures,
    }
