"""Polynomial endofunctors and their final sequences.

A functor is an AST over identity, constants, coproducts and binary
products, with a computable action on finite sets, maps, and raw element
functions.  ``final_sequence`` materialises the first stages of the
observation chain ``1, F(1), F(F(1)), ...`` together with the restriction
maps that forget the deepest observation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .finset import (
    UNIT,
    UNIT_SET,
    Elem,
    FinMap,
    FinSet,
    Pair,
    Tag,
    coproduct,
    coproduct_map,
    final_map,
    identity_map,
    product,
    product_map,
)
from .report import Report, from_witnesses

__all__ = [
    "PolyFunctor",
    "IdF",
    "Const",
    "Coprod",
    "Prod",
    "label_id",
    "label_id_term",
    "match_label_id",
    "match_label_id_term",
    "apply_obj",
    "apply_map",
    "apply_fn",
    "StageFamily",
    "final_sequence",
    "constant_family",
    "check_stage_family",
    "invariant_check",
    "word_to_elem",
    "elem_to_word",
]


class PolyFunctor:
    """Base class of the functor AST."""

    __slots__ = ()

    def pretty(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class IdF(PolyFunctor):
    def pretty(self) -> str:
        return "Id"


@dataclass(frozen=True)
class Const(PolyFunctor):
    carrier: FinSet

    def pretty(self) -> str:
        return self.carrier.pretty()


@dataclass(frozen=True)
class Coprod(PolyFunctor):
    args: tuple[PolyFunctor, ...]

    def __init__(self, args: Sequence[PolyFunctor]) -> None:
        object.__setattr__(self, "args", tuple(args))

    def pretty(self) -> str:
        return "(" + "+".join(g.pretty() for g in self.args) + ")"


@dataclass(frozen=True)
class Prod(PolyFunctor):
    left: PolyFunctor
    right: PolyFunctor

    def pretty(self) -> str:
        return f"({self.left.pretty()}*{self.right.pretty()})"


def label_id(alphabet: FinSet) -> Prod:
    """Labelled steps: ``A x Id``."""
    return Prod(Const(alphabet), IdF())


def label_id_term(alphabet: FinSet) -> Coprod:
    """Labelled steps with explicit termination: ``A x Id + 1``."""
    return Coprod((label_id(alphabet), Const(UNIT_SET)))


def match_label_id(functor: PolyFunctor) -> FinSet | None:
    if (
        isinstance(functor, Prod)
        and isinstance(functor.left, Const)
        and isinstance(functor.right, IdF)
    ):
        return functor.left.carrier
    return None


def match_label_id_term(functor: PolyFunctor) -> FinSet | None:
    if (
        isinstance(functor, Coprod)
        and len(functor.args) == 2
        and isinstance(functor.args[1], Const)
        and functor.args[1].carrier == UNIT_SET
    ):
        return match_label_id(functor.args[0])
    return None


def apply_obj(functor: PolyFunctor, xs: FinSet) -> FinSet:
    if isinstance(functor, IdF):
        return xs
    if isinstance(functor, Const):
        return functor.carrier
    if isinstance(functor, Coprod):
        return coproduct([apply_obj(g, xs) for g in functor.args])
    if isinstance(functor, Prod):
        return product(apply_obj(functor.left, xs), apply_obj(functor.right, xs))
    raise TypeError(f"not a polynomial functor: {functor!r}")


def apply_map(functor: PolyFunctor, f: FinMap) -> FinMap:
    if isinstance(functor, IdF):
        return f
    if isinstance(functor, Const):
        return identity_map(functor.carrier)
    if isinstance(functor, Coprod):
        return coproduct_map([apply_map(g, f) for g in functor.args])
    if isinstance(functor, Prod):
        return product_map(apply_map(functor.left, f), apply_map(functor.right, f))
    raise TypeError(f"not a polynomial functor: {functor!r}")


def apply_fn(functor: PolyFunctor, fn: Callable[[Elem], Elem], e: Elem) -> Elem:
    """Structural action on a raw element function: rewrite the identity leaves."""
    if isinstance(functor, IdF):
        return fn(e)
    if isinstance(functor, Const):
        return e
    if isinstance(functor, Coprod):
        if not isinstance(e, Tag) or e.index >= len(functor.args):
            raise ValueError(f"{e.pretty()} is not a coproduct element")
        return Tag(e.index, apply_fn(functor.args[e.index], fn, e.payload))
    if isinstance(functor, Prod):
        if not isinstance(e, Pair):
            raise ValueError(f"{e.pretty()} is not a product element")
        return Pair(
            apply_fn(functor.left, fn, e.left), apply_fn(functor.right, fn, e.right)
        )
    raise TypeError(f"not a polynomial functor: {functor!r}")


@dataclass(frozen=True)
class StageFamily:
    """A truncated stage-indexed chain of carriers with restriction maps.

    ``restrictions[n]`` maps ``carriers[n+1]`` to ``carriers[n]``.  Built by
    ``final_sequence`` (observation chains) or ``constant_family`` (a fixed
    carrier above stage zero).
    """

    functor: PolyFunctor
    carriers: tuple[FinSet, ...]
    restrictions: tuple[FinMap, ...]

    @property
    def depth(self) -> int:
        return len(self.carriers) - 1

    def restrict(self, n_from: int, n_to: int, e: Elem) -> Elem:
        """Carry an element of stage ``n_from`` down to stage ``n_to``."""
        if not 0 <= n_to <= n_from <= self.depth:
            raise ValueError("bad stage indices")
        for n in range(n_from - 1, n_to - 1, -1):
            e = self.restrictions[n](e)
        return e


def final_sequence(functor: PolyFunctor, depth: int) -> StageFamily:
    """The first ``depth`` steps of the observation chain of ``functor``.

    Stage zero is the one-element set; each next carrier is the functor
    applied to the previous one, and each next restriction is the functor
    applied to the previous restriction.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    carriers = [UNIT_SET]
    restrictions: list[FinMap] = []
    for n in range(depth):
        carriers.append(apply_obj(functor, carriers[n]))
        if n == 0:
            restrictions.append(final_map(carriers[1]))
        else:
            restrictions.append(apply_map(functor, restrictions[n - 1]))
    return StageFamily(functor, tuple(carriers), tuple(restrictions))


def constant_family(functor: PolyFunctor, xs: FinSet, depth: int) -> StageFamily:
    """The constant chain at ``xs``: identity restrictions above stage zero."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    carriers = [UNIT_SET] + [xs] * depth
    restrictions = []
    if depth >= 1:
        restrictions.append(final_map(xs))
        restrictions.extend(identity_map(xs) for _ in range(depth - 1))
    return StageFamily(functor, tuple(carriers), tuple(restrictions))


def check_stage_family(functor: PolyFunctor, family: StageFamily) -> Report:
    """Recompute each stage of an observation chain and compare.

    This is the truncated form of the unique-invariant property: the chain
    is a fixed point of the guarded application of the functor, stage by
    stage, on the nose.
    """
    witnesses = []
    carriers, restrictions = family.carriers, family.restrictions
    if len(restrictions) != len(carriers) - 1:
        witnesses.append({"stage": -1, "reason": "restriction count mismatch"})
    if not carriers or carriers[0] != UNIT_SET:
        witnesses.append({"stage": 0, "reason": "stage zero is not the one-element set"})
    for n in range(len(carriers) - 1):
        expected = apply_obj(functor, carriers[n])
        if carriers[n + 1] != expected:
            witnesses.append(
                {
                    "stage": n + 1,
                    "reason": "carrier mismatch",
                    "carrier": carriers[n + 1].pretty(),
                    "expected": expected.pretty(),
                }
            )
    for n, r in enumerate(restrictions):
        expected_r = (
            final_map(carriers[1])
            if n == 0
            else apply_map(functor, restrictions[n - 1])
        )
        if r != expected_r:
            witnesses.append({"stage": n, "reason": "restriction mismatch"})
        elif not (r.domain == carriers[n + 1] and r.codomain == carriers[n]):
            witnesses.append({"stage": n, "reason": "restriction endpoints mismatch"})
    return from_witnesses(witnesses, {"depth": family.depth})


def invariant_check(functor: PolyFunctor, depth: int) -> Report:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return check_stage_family(functor, final_sequence(functor, depth))


# ---------------------------------------------------------------------------
# Word rendering for labelled functors

def word_to_elem(
    functor: PolyFunctor,
    labels: Sequence[Elem],
    stage: int,
    terminated: bool = False,
) -> Elem:
    """The stage element spelled by a label sequence.

    For plain labelled functors the word length must equal the stage; with
    explicit termination, shorter words are allowed when terminated.
    """
    alphabet = match_label_id(functor)
    if alphabet is not None:
        if terminated:
            raise ValueError("this functor has no termination")
        if len(labels) != stage:
            raise ValueError(f"need exactly {stage} labels at stage {stage}")
        out: Elem = UNIT
        for a in reversed(labels):
            out = Pair(a, out)
        return out
    alphabet = match_label_id_term(functor)
    if alphabet is None:
        raise ValueError("word rendering needs a labelled functor")
    if terminated:
        if len(labels) > stage - 1:
            raise ValueError("terminated words need at least one spare stage")
        out = Tag(1, UNIT)
    else:
        if len(labels) != stage:
            raise ValueError(f"running words have exactly {stage} labels")
        out = UNIT
    for a in reversed(labels):
        out = Tag(0, Pair(a, out))
    return out


def elem_to_word(functor: PolyFunctor, e: Elem) -> tuple[tuple[Elem, ...], bool]:
    """Read a stage element back as ``(labels, terminated)``."""
    labels = []
    if match_label_id(functor) is not None:
        while isinstance(e, Pair):
            labels.append(e.left)
            e = e.right
        if e != UNIT:
            raise ValueError("not a word element")
        return tuple(labels), False
    if match_label_id_term(functor) is None:
        raise ValueError("word rendering needs a labelled functor")
    while True:
        if e == UNIT:
            return tuple(labels), False
        if e == Tag(1, UNIT):
            return tuple(labels), True
        if isinstance(e, Tag) and e.index == 0 and isinstance(e.payload, Pair):
            labels.append(e.payload.left)
            e = e.payload.right
            continue
        raise ValueError("not a word element")
