"""Stage-indexed trace semantics of finite branching systems.

A system is a finite set of states with one branching step into the functor
applied to the states.  Its semantics is computed stage by stage: stage 0
collapses the step to the one-element set, stage 1 keeps only the first
observation, and each later stage extends runs by one step through the
distributive law, flattening the branching with the monad multiplication.

Families that agree under the restriction maps are exactly the truncations
of infinite behaviours; ``check_coherence`` tests that agreement, and
``lasso_membership`` decides membership of ultimately periodic words in the
limit semantics directly on the transition graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .distlaw import LawSpec, canonical_law
from .effects import (
    EffectKind,
    EffectValue,
    bind,
    encode_value,
    map_value,
    push,
)
from .finset import UNIT, UNIT_SET, Elem, FinSet, Pair, Tag, final_map
from .polyfun import (
    PolyFunctor,
    StageFamily,
    apply_fn,
    apply_map,
    apply_obj,
    final_sequence,
    match_label_id,
    match_label_id_term,
    word_to_elem,
)
from .report import Report, from_witnesses

__all__ = [
    "System",
    "TraceTable",
    "stage_semantics",
    "check_coherence",
    "Partition",
    "EquivResult",
    "equiv_partitions",
    "MetricResult",
    "pseudo_metric",
    "LassoResult",
    "lasso_membership",
    "verify_omega_consistency",
]


@dataclass(frozen=True)
class System:
    """A finite branching system: states and one step ``h : X -> T(F X)``."""

    kind: EffectKind
    functor: PolyFunctor
    states: FinSet
    moves: tuple[tuple[Elem, EffectValue], ...]
    _table: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        base = apply_obj(self.functor, self.states)
        table = {}
        for x, v in self.moves:
            if x not in self.states:
                raise ValueError(f"transition source {x.pretty()} is not a state")
            if v.kind is not self.kind:
                raise ValueError(f"step at {x.pretty()} has the wrong kind")
            if v.base != base:
                raise ValueError(f"step at {x.pretty()} is not over F(states)")
            table[x] = v
        missing = [x for x in self.states if x not in table]
        if missing:
            raise ValueError(f"no step defined at {missing[0].pretty()}")
        if len(table) != len(self.moves):
            raise ValueError("duplicate step definition")
        object.__setattr__(self, "_table", table)

    @classmethod
    def build(
        cls,
        kind: EffectKind,
        functor: PolyFunctor,
        states: FinSet,
        moves: Mapping[Elem, EffectValue],
    ) -> "System":
        missing = [x for x in states if x not in moves]
        if missing:
            raise ValueError(f"no step defined at {missing[0].pretty()}")
        ordered = tuple((x, moves[x]) for x in states)
        return cls(kind, functor, states, ordered)

    def step(self, x: Elem) -> EffectValue:
        try:
            return self._table[x]
        except KeyError:
            raise ValueError(f"unknown state {x.pretty()}") from None


@dataclass(frozen=True)
class TraceTable:
    """Per-state, per-stage semantics values over the observation chain."""

    system: System
    depth: int
    family: StageFamily
    rows: tuple[tuple[tuple[Elem, EffectValue], ...], ...]

    def value(self, stage: int, x: Elem) -> EffectValue:
        for y, v in self.rows[stage]:
            if y == x:
                return v
        raise ValueError(f"unknown state {x.pretty()}")

    def row(self, stage: int) -> dict[Elem, EffectValue]:
        return dict(self.rows[stage])


def stage_semantics(system: System, depth: int, law: LawSpec | None = None) -> TraceTable:
    """Compute the first ``depth`` stages of the trace semantics.

    Stage 0 collapses each step to the one-element set.  Stage 1 keeps the
    first observation.  Stage n+1 rewrites the step's continuation states by
    their stage-n values, evaluates the law at the stage-n carrier, and
    flattens.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    law = law or canonical_law(system.kind, system.functor)
    if law.kind is not system.kind or law.functor != system.functor:
        raise ValueError("law does not match the system")
    functor, states = system.functor, system.states
    family = final_sequence(functor, depth)
    rows: list[dict[Elem, EffectValue]] = []

    rows.append({x: push(lambda _: UNIT, system.step(x), UNIT_SET) for x in states})
    if depth >= 1:
        collapse = apply_map(functor, final_map(states))
        rows.append({x: map_value(collapse, system.step(x)) for x in states})
    for n in range(1, depth):
        prev = rows[n]
        prev_enc = {y: encode_value(prev[y]) for y in states}
        carrier_n, carrier_next = family.carriers[n], family.carriers[n + 1]

        def extend(e: Elem) -> EffectValue:
            rewritten = apply_fn(functor, lambda y: prev_enc[y], e)
            return law.apply(carrier_n, rewritten)

        rows.append(
            {x: bind(system.step(x), extend, carrier_next) for x in states}
        )

    packed = tuple(tuple((x, row[x]) for x in states) for row in rows)
    return TraceTable(system, depth, family, packed)


def check_coherence(table: TraceTable) -> Report:
    """Check that each stage restricts to the one below it.

    Failures list the first affected state and stage with both values; a
    passing run certifies the rows amalgamate towards the limit stage.
    """
    witnesses = []
    for n in range(table.depth):
        restriction = table.family.restrictions[n]
        for x in table.system.states:
            restricted = map_value(restriction, table.value(n + 1, x))
            expected = table.value(n, x)
            if restricted != expected:
                witnesses.append(
                    {
                        "stage": n,
                        "state": x.pretty(),
                        "restricted": restricted.pretty(),
                        "value": expected.pretty(),
                    }
                )
    witnesses.sort(key=lambda w: (w["stage"], w["state"]))
    stats = {"depth": table.depth, "states": len(table.system.states)}
    if witnesses:
        return Report("fail", tuple(witnesses), stats)
    return Report("pass", (), stats)


@dataclass(frozen=True)
class Partition:
    """States grouped by equality of their semantics at one stage."""

    stage: int
    blocks: tuple[FinSet, ...]

    def block_of(self, x: Elem) -> FinSet:
        for b in self.blocks:
            if x in b:
                return b
        raise ValueError(f"unknown state {x.pretty()}")


@dataclass(frozen=True)
class EquivResult:
    partitions: tuple[Partition, ...]
    refinement_violations: tuple[dict, ...]

    @property
    def ok(self) -> bool:
        return not self.refinement_violations


def equiv_partitions(table: TraceTable) -> EquivResult:
    """Group states stage by stage; deeper stages should only split blocks.

    Refinement violations can only appear when coherence fails; they are
    reported as data rather than raised.
    """
    partitions = []
    for n in range(table.depth + 1):
        groups: dict[tuple, list[Elem]] = {}
        for x in table.system.states:
            groups.setdefault(table.value(n, x).entries, []).append(x)
        blocks = tuple(
            sorted((FinSet(g) for g in groups.values()), key=lambda b: b.elems)
        )
        partitions.append(Partition(n, blocks))
    violations = []
    for n in range(table.depth):
        coarse, fine = partitions[n], partitions[n + 1]
        for block in fine.blocks:
            homes = {coarse.block_of(x) for x in block}
            if len(homes) > 1:
                violations.append(
                    {
                        "stage": n + 1,
                        "block": block.pretty(),
                        "reason": "not a refinement of the previous stage",
                    }
                )
    return EquivResult(tuple(partitions), tuple(violations))


@dataclass(frozen=True)
class MetricResult:
    """Behavioural distance from a truncated table.

    ``exact`` results report two to the power ``-(deepest agreeing stage)``;
    pairs never separated within the table only get the upper bound two to
    the power ``-depth``.  Pairs that already differ at stage 0 have no
    agreeing stage and distance 2.
    """

    exact: bool
    value: Fraction
    agree_depth: int | None


def pseudo_metric(table: TraceTable, x: Elem, y: Elem) -> MetricResult:
    if x not in table.system.states or y not in table.system.states:
        raise ValueError("unknown state")
    for n in range(table.depth + 1):
        if table.value(n, x) != table.value(n, y):
            if n == 0:
                return MetricResult(True, Fraction(2), None)
            return MetricResult(True, Fraction(1, 2 ** (n - 1)), n - 1)
    return MetricResult(False, Fraction(1, 2**table.depth), table.depth)


@dataclass(frozen=True)
class LassoResult:
    """Outcome of the ultimately periodic membership search.

    Members carry a run: a stem of product nodes followed by a cycle kept
    inside the loop phase.  Refutations carry the least length at which no
    run spelling the word survives.
    """

    member: bool
    stem: tuple[tuple[Elem, int], ...] | None
    cycle: tuple[tuple[Elem, int], ...] | None
    refuting_depth: int | None


def _labelled_successors(
    system: System, terminated_alphabet: bool
) -> Callable[[Elem, Elem], list[Elem]]:
    def succ(y: Elem, label: Elem) -> list[Elem]:
        out = []
        for e in system.step(y).support:
            if terminated_alphabet:
                if isinstance(e, Tag) and e.index == 0:
                    e = e.payload
                else:
                    continue  # termination is absorbing: no continuation
            if isinstance(e, Pair) and e.left == label:
                out.append(e.right)
        return out

    return succ


def lasso_membership(
    system: System, x: Elem, u: Sequence[Elem], v: Sequence[Elem]
) -> LassoResult:
    """Decide whether some infinite run from ``x`` spells ``u`` then ``v`` forever.

    Runs are searched in the product of the transition graph with the lasso
    positions; an infinite run exists exactly when a cycle is reachable.
    """
    if not system.kind.is_set_kind:
        raise ValueError("lasso membership supports the set kinds only")
    alphabet = match_label_id(system.functor)
    terminated = False
    if alphabet is None:
        alphabet = match_label_id_term(system.functor)
        terminated = True
    if alphabet is None:
        raise ValueError("lasso membership needs a labelled functor")
    if len(v) == 0:
        raise ValueError("the loop word must be non-empty")
    if x not in system.states:
        raise ValueError(f"unknown state {x.pretty()}")
    word = tuple(u) + tuple(v)
    for a in word:
        if a not in alphabet:
            raise ValueError(f"label {a.pretty()} is not in the alphabet")
    total = len(word)
    loop_entry = len(u)

    def next_pos(pos: int) -> int:
        return pos + 1 if pos + 1 < total else loop_entry

    succ = _labelled_successors(system, terminated)

    def edges(node: tuple[Elem, int]) -> list[tuple[Elem, int]]:
        y, pos = node
        return [(z, next_pos(pos)) for z in succ(y, word[pos])]

    start = (x, 0)
    colour: dict[tuple[Elem, int], str] = {}
    path: list[tuple[Elem, int]] = []

    def dfs(node: tuple[Elem, int]):
        colour[node] = "open"
        path.append(node)
        for nxt in edges(node):
            if colour.get(nxt) == "open":
                i = path.index(nxt)
                return tuple(path[:i]), tuple(path[i:])
            if nxt not in colour:
                found = dfs(nxt)
                if found:
                    return found
        colour[node] = "done"
        path.pop()
        return None

    found = dfs(start)
    if found:
        stem, cycle = found
        return LassoResult(True, stem, cycle, None)

    # the reachable product graph is acyclic: measure the longest surviving run
    depth_memo: dict[tuple[Elem, int], int] = {}

    def longest(node: tuple[Elem, int]) -> int:
        if node in depth_memo:
            return depth_memo[node]
        best = 0
        for nxt in edges(node):
            best = max(best, 1 + longest(nxt))
        depth_memo[node] = best
        return best

    return LassoResult(False, None, None, longest(start) + 1)


def verify_omega_consistency(
    system: System, x: Elem, u: Sequence[Elem], v: Sequence[Elem], depth: int
) -> Report:
    """Cross-check the lasso search against stage-wise prefix membership.

    A member's prefixes must appear in every computed stage; a refutation
    must either miss a prefix within the table or carry a refuting depth,
    and a refuting depth inside the table must point at a missing prefix.
    """
    result = lasso_membership(system, x, u, v)
    table = stage_semantics(system, depth)
    word = tuple(u) + tuple(v)
    loop_entry = len(u)

    def prefix(n: int) -> tuple[Elem, ...]:
        out = []
        pos = 0
        for _ in range(n):
            out.append(word[pos])
            pos = pos + 1 if pos + 1 < len(word) else loop_entry
        return tuple(out)

    present = []
    for n in range(depth + 1):
        e = word_to_elem(system.functor, prefix(n), n)
        present.append(e in table.value(n, x).support)

    witnesses = []
    if result.member:
        for n, ok in enumerate(present):
            if not ok:
                witnesses.append(
                    {
                        "issue": "member but prefix missing",
                        "stage": n,
                        "state": x.pretty(),
                    }
                )
    else:
        if result.refuting_depth is None and all(present):
            witnesses.append(
                {"issue": "refuted without evidence", "state": x.pretty()}
            )
        if result.refuting_depth is not None and result.refuting_depth <= depth:
            if present[result.refuting_depth]:
                witnesses.append(
                    {
                        "issue": "refuting depth points at a present prefix",
                        "stage": result.refuting_depth,
                        "state": x.pretty(),
                    }
                )
    stats = {
        "member": result.member,
        "refuting_depth": result.refuting_depth,
        "prefixes_present": sum(present),
        "depth": depth,
    }
    return from_witnesses(witnesses, stats)
