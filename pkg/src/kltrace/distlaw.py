"""Distributive laws of branching effects over polynomial functors.

``canonical_law`` builds the structural law (identity on the identity
functor, unit on constants, componentwise through tags, double strength on
products).  The checkers verify, by exhaustive or budgeted enumeration, the
law axioms, the extra square that lets a law drive the stage-indexed
recursion, and the coherence of morphisms between laws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from .effects import (
    EffectKind,
    EffectValue,
    SamplerConfig,
    decode_value,
    encode_value,
    map_value,
    mult,
    push,
    set_value,
    unit,
    value_family,
    dstr,
)
from .finset import (
    UNIT,
    UNIT_SET,
    Atom,
    Elem,
    FinMap,
    FinSet,
    Pair,
    Tag,
    all_maps,
    final_map,
    identity_map,
)
from .polyfun import (
    Coprod,
    Const,
    IdF,
    PolyFunctor,
    Prod,
    StageFamily,
    apply_fn,
    apply_map,
    apply_obj,
    label_id,
    label_id_term,
)
from .report import Report, from_witnesses

if TYPE_CHECKING:
    from .traces import System

__all__ = [
    "LawSpec",
    "canonical_law",
    "kleisli_apply",
    "kleisli_lift",
    "check_law_axioms",
    "check_omega_suitable",
    "GuardedLawStage",
    "SuitabilityError",
    "guarded_law_stage",
    "MonadMorphism",
    "identity_monad_morphism",
    "support_morphism",
    "inclusion_morphism",
    "EndoMorphism",
    "identity_endo_morphism",
    "relabel_morphism",
    "inject_termination_morphism",
    "check_morphism",
    "transform_system",
]


def kleisli_apply(
    functor: PolyFunctor,
    kind: EffectKind,
    arrow: Callable[[Elem], EffectValue],
    target: FinSet,
    e: Elem,
) -> EffectValue:
    """Evaluate the lifted functor on a branching arrow at one element.

    ``arrow`` sends leaves to values over ``target``; the result is a value
    over the functor applied to ``target``.
    """
    if isinstance(functor, IdF):
        v = arrow(e)
        if v.kind is not kind or v.base != target:
            raise ValueError("arrow result has the wrong kind or base")
        return v
    if isinstance(functor, Const):
        return unit(kind, functor.carrier, e)
    if isinstance(functor, Coprod):
        if not isinstance(e, Tag) or e.index >= len(functor.args):
            raise ValueError(f"{e.pretty()} is not a coproduct element")
        inner = kleisli_apply(functor.args[e.index], kind, arrow, target, e.payload)
        i = e.index
        return push(lambda y: Tag(i, y), inner, apply_obj(functor, target))
    if isinstance(functor, Prod):
        if not isinstance(e, Pair):
            raise ValueError(f"{e.pretty()} is not a product element")
        left = kleisli_apply(functor.left, kind, arrow, target, e.left)
        right = kleisli_apply(functor.right, kind, arrow, target, e.right)
        return dstr(left, right)
    raise TypeError(f"not a polynomial functor: {functor!r}")


@dataclass(frozen=True)
class LawSpec:
    """An executable law component ``F(T X) -> T(F X)``, one for every X."""

    kind: EffectKind
    functor: PolyFunctor
    evaluator: Callable[[FinSet, Elem], EffectValue] = field(compare=False, repr=False)
    label: str = "canonical"

    def apply(self, base: FinSet, e: Elem) -> EffectValue:
        return self.evaluator(base, e)


def canonical_law(kind: EffectKind, functor: PolyFunctor) -> LawSpec:
    """The structural law for a polynomial functor over one of the effects."""

    def evaluator(base: FinSet, e: Elem) -> EffectValue:
        return kleisli_apply(
            functor, kind, lambda t: decode_value(kind, base, t), base, e
        )

    return LawSpec(kind, functor, evaluator)


def kleisli_lift(
    law: LawSpec, arrow: Callable[[Elem], EffectValue], target: FinSet
) -> Callable[[Elem], EffectValue]:
    """The lifted functor's action on a branching arrow, via the law.

    Leaves are first rewritten by the arrow (encoded), then the law is
    evaluated; for canonical laws this equals ``kleisli_apply`` directly.
    """

    def lifted(e: Elem) -> EffectValue:
        rewritten = apply_fn(law.functor, lambda x: encode_value(arrow(x)), e)
        return law.apply(target, rewritten)

    return lifted


def _atoms(n: int) -> FinSet:
    return FinSet(Atom(f"x{i}") for i in range(n))


def _atoms2(n: int) -> FinSet:
    return FinSet(Atom(f"y{i}") for i in range(n))


def _pretty_input(
    functor: PolyFunctor, kind: EffectKind, base: FinSet, e: Elem
) -> str:
    """Render an element of ``F(T X)`` with its branching leaves decoded."""
    if isinstance(functor, IdF):
        return decode_value(kind, base, e).pretty()
    if isinstance(functor, Const):
        return e.pretty()
    if isinstance(functor, Coprod) and isinstance(e, Tag):
        return f"in{e.index}({_pretty_input(functor.args[e.index], kind, base, e.payload)})"
    if isinstance(functor, Prod) and isinstance(e, Pair):
        left = _pretty_input(functor.left, kind, base, e.left)
        right = _pretty_input(functor.right, kind, base, e.right)
        return f"({left},{right})"
    return e.pretty()


def _budgeted(items, budget: int):
    return list(items)[:budget]


def check_law_axioms(
    law: LawSpec, max_base: int, cfg: SamplerConfig | None = None
) -> Report:
    """Check naturality plus compatibility with unit and multiplication.

    Set kinds are exhaustive at these sizes; distribution kinds run over the
    denominator-bounded value slices.
    """
    if max_base < 1:
        raise ValueError("max_base must be at least 1")
    cfg = cfg or SamplerConfig()
    kind, functor = law.kind, law.functor
    witnesses: list[dict] = []
    checked = 0

    def note(diagram: str, base: FinSet, e: Elem, lhs: EffectValue, rhs: EffectValue, **extra) -> None:
        w = {
            "diagram": diagram,
            "kind": kind.json_name,
            "functor": functor.pretty(),
            "base": base.pretty(),
            "element": _pretty_input(functor, kind, base, e),
            "lhs": lhs.pretty(),
            "rhs": rhs.pretty(),
        }
        w.update(extra)
        witnesses.append(w)

    for n in range(max_base + 1):
        X = _atoms(n)
        fx = apply_obj(functor, X)
        level1, _ = value_family(kind, X, cfg, cfg.level_cap)
        tx = FinSet(encode_value(v) for v in level1)

        # unit compatibility: law . F(unit) = unit
        for e in _budgeted(apply_obj(functor, X), cfg.value_budget):
            lifted = apply_fn(functor, lambda x: encode_value(unit(kind, X, x)), e)
            lhs = law.apply(X, lifted)
            rhs = unit(kind, fx, e)
            checked += 1
            if lhs != rhs:
                witnesses.append(
                    {
                        "diagram": "unit",
                        "kind": kind.json_name,
                        "functor": functor.pretty(),
                        "base": X.pretty(),
                        "element": e.pretty(),
                        "lhs": lhs.pretty(),
                        "rhs": rhs.pretty(),
                    }
                )

        # multiplication compatibility: law . F(mult) = mult . T(law) . law
        level2, _ = value_family(kind, tx, cfg, cfg.level_cap)
        ttx = FinSet(encode_value(w) for w in level2)
        flat = {
            encode_value(w): encode_value(mult(w, X)) for w in level2
        }
        for e in _budgeted(apply_obj(functor, ttx), cfg.value_budget):
            lhs = law.apply(X, apply_fn(functor, lambda m: flat[m], e))
            inner = law.apply(tx, e)
            pushed = push(lambda fe: encode_value(law.apply(X, fe)), inner)
            rhs = mult(pushed, fx)
            checked += 1
            if lhs != rhs:
                note("mult", X, e, lhs, rhs)

        # naturality in the carrier
        for m in range(max_base + 1):
            Y = _atoms2(m)
            fy = apply_obj(functor, Y)
            for f in all_maps(X, Y):
                ff = apply_map(functor, f)
                for e in _budgeted(apply_obj(functor, tx), cfg.value_budget):
                    lhs = map_value(ff, law.apply(X, e))
                    moved = apply_fn(
                        functor,
                        lambda t: encode_value(map_value(f, decode_value(kind, X, t))),
                        e,
                    )
                    rhs = law.apply(Y, moved)
                    checked += 1
                    if lhs != rhs:
                        note(
                            "naturality", X, e, lhs, rhs,
                            map=repr(f), target=Y.pretty(),
                        )

    stats = {
        "kind": kind.json_name,
        "functor": functor.pretty(),
        "checked": checked,
    }
    return from_witnesses(witnesses, stats)


def check_omega_suitable(
    law: LawSpec, max_base: int, cfg: SamplerConfig | None = None
) -> Report:
    """Check the collapse square that lets the law extend stage by stage.

    Both legs send ``F(T X)`` into branching values over ``F(1)``: collapse
    then inject with the unit, versus evaluate the law then collapse.  Kinds
    that can drop the computation (an empty set, a mass deficit) fail it.
    """
    if max_base < 1:
        raise ValueError("max_base must be at least 1")
    cfg = cfg or SamplerConfig()
    kind, functor = law.kind, law.functor
    f_one = apply_obj(functor, UNIT_SET)
    witnesses: list[dict] = []
    checked = 0

    for n in range(max_base + 1):
        X = _atoms(n)
        level1, _ = value_family(kind, X, cfg, cfg.level_cap)
        tx = FinSet(encode_value(v) for v in level1)
        collapse = apply_map(functor, final_map(X))
        for e in _budgeted(apply_obj(functor, tx), cfg.value_budget):
            law_leg = map_value(collapse, law.apply(X, e))
            unit_leg = unit(kind, f_one, apply_fn(functor, lambda _: UNIT, e))
            checked += 1
            if law_leg != unit_leg:
                witnesses.append(
                    {
                        "base_size": n,
                        "kind": kind.json_name,
                        "functor": functor.pretty(),
                        "base": X.pretty(),
                        "element": _pretty_input(functor, kind, X, e),
                        "law_leg": law_leg.pretty(),
                        "unit_leg": unit_leg.pretty(),
                    }
                )

    witnesses.sort(key=lambda w: (w["base_size"], w["element"]))
    stats = {"kind": kind.json_name, "functor": functor.pretty(), "checked": checked}
    if witnesses:
        return Report("fail", tuple(witnesses), stats)
    return Report("pass", (), stats)


class SuitabilityError(Exception):
    """Raised when a guarded stage is requested without established suitability."""


@dataclass(frozen=True)
class GuardedLawStage:
    """One stage component of the guarded extension of a law.

    Stage 0 is the identity map on the one-element set; stage 1 injects with
    the unit over ``F(1)``; stage n+2 is the law instantiated at the carrier
    one step below (the guard shifts the argument down a stage).
    """

    stage: int
    carrier: FinSet
    component: object  # FinMap at stage 0, Elem -> EffectValue above
    forced: bool = False


def guarded_law_stage(
    law: LawSpec,
    family: StageFamily,
    n: int,
    suitability: Report | None = None,
    force: bool = False,
) -> GuardedLawStage:
    established = suitability is not None and suitability.ok
    if not established and not force:
        raise SuitabilityError(
            "suitability not established for this law; pass a passing report or force"
        )
    forced = not established
    if n < 0 or n > family.depth:
        raise ValueError("stage out of range for this family")
    if n == 0:
        return GuardedLawStage(0, UNIT_SET, identity_map(UNIT_SET), forced)
    if n == 1:
        f_one = apply_obj(law.functor, UNIT_SET)
        return GuardedLawStage(
            1, UNIT_SET, lambda e: unit(law.kind, f_one, e), forced
        )
    carrier = family.carriers[n - 1]
    return GuardedLawStage(n, carrier, lambda e: law.apply(carrier, e), forced)


# ---------------------------------------------------------------------------
# Morphisms between laws

@dataclass(frozen=True)
class MonadMorphism:
    """A kind-changing transformation commuting with unit and multiplication."""

    name: str
    source: EffectKind
    target: EffectKind

    def apply(self, v: EffectValue) -> EffectValue:
        if v.kind is not self.source:
            raise ValueError(f"{self.name} expects {self.source.json_name} values")
        if self.name == "identity":
            return v
        if self.name == "support":
            return set_value(self.target, v.base, v.support)
        if self.name == "inclusion":
            return set_value(self.target, v.base, v.entries)
        raise ValueError(f"unknown monad morphism {self.name!r}")


def identity_monad_morphism(kind: EffectKind) -> MonadMorphism:
    return MonadMorphism("identity", kind, kind)


def support_morphism() -> MonadMorphism:
    """Distributions to their supports (full mass, so never empty)."""
    return MonadMorphism("support", EffectKind.DIST, EffectKind.POW_PLUS)


def inclusion_morphism() -> MonadMorphism:
    """Non-empty subsets included among all subsets."""
    return MonadMorphism("inclusion", EffectKind.POW_PLUS, EffectKind.POW)


@dataclass(frozen=True)
class EndoMorphism:
    """A natural transformation between polynomial functors.

    The three shapes used here act elementwise, uniformly in the carrier.
    """

    name: str
    source: PolyFunctor
    target: PolyFunctor
    mapping: FinMap | None = None

    def component(self, e: Elem) -> Elem:
        if self.name == "identity":
            return e
        if self.name == "relabel":
            if not isinstance(e, Pair):
                raise ValueError("relabel acts on labelled steps")
            return Pair(self.mapping(e.left), e.right)
        if self.name == "inject-termination":
            return Tag(0, e)
        raise ValueError(f"unknown endofunctor morphism {self.name!r}")


def identity_endo_morphism(functor: PolyFunctor) -> EndoMorphism:
    return EndoMorphism("identity", functor, functor)


def relabel_morphism(mapping: FinMap) -> EndoMorphism:
    """Relabelling of labelled steps along a map of alphabets."""
    return EndoMorphism(
        "relabel", label_id(mapping.domain), label_id(mapping.codomain), mapping
    )


def inject_termination_morphism(alphabet: FinSet) -> EndoMorphism:
    """Labelled steps seen inside the termination-extended functor."""
    return EndoMorphism(
        "inject-termination", label_id(alphabet), label_id_term(alphabet)
    )


def check_morphism(
    theta: MonadMorphism,
    upsilon: EndoMorphism,
    law: LawSpec,
    law2: LawSpec,
    max_base: int,
    cfg: SamplerConfig | None = None,
) -> Report:
    """Check a pair of transformations as a morphism between two laws.

    Verifies that ``theta`` respects unit and multiplication, that
    ``upsilon`` is natural, and the square carrying one law into the other.
    """
    if law.kind is not theta.source or law2.kind is not theta.target:
        raise ValueError("monad morphism endpoints do not match the laws")
    if law.functor != upsilon.source or law2.functor != upsilon.target:
        raise ValueError("endofunctor morphism endpoints do not match the laws")
    if max_base < 1:
        raise ValueError("max_base must be at least 1")
    cfg = cfg or SamplerConfig()
    witnesses: list[dict] = []
    checked = 0

    def note(check: str, base: FinSet, subject: str, lhs: str, rhs: str) -> None:
        witnesses.append(
            {
                "check": check,
                "base": base.pretty(),
                "subject": subject,
                "lhs": lhs,
                "rhs": rhs,
            }
        )

    for n in range(max_base + 1):
        X = _atoms(n)
        src1, _ = value_family(theta.source, X, cfg, cfg.level_cap)
        tx_src = FinSet(encode_value(v) for v in src1)

        # theta . unit = unit
        for x in X:
            lhs = theta.apply(unit(theta.source, X, x))
            rhs = unit(theta.target, X, x)
            checked += 1
            if lhs != rhs:
                note("monad-unit", X, x.pretty(), lhs.pretty(), rhs.pretty())

        # theta . mult = mult . (theta at both layers)
        src2, _ = value_family(theta.source, tx_src, cfg, cfg.level_cap)
        re_encode = {
            t: encode_value(theta.apply(decode_value(theta.source, X, t)))
            for t in tx_src
        }
        for v in _budgeted(src2, cfg.value_budget):
            lhs = theta.apply(mult(v, X))
            rhs = mult(push(lambda t: re_encode[t], theta.apply(v)), X)
            checked += 1
            if lhs != rhs:
                note("monad-mult", X, v.pretty(), lhs.pretty(), rhs.pretty())

        # naturality of upsilon
        for m in range(max_base + 1):
            Y = _atoms2(m)
            for f in all_maps(X, Y):
                sf = apply_map(upsilon.source, f)
                tf = apply_map(upsilon.target, f)
                for e in apply_obj(upsilon.source, X):
                    lhs_e = tf(upsilon.component(e))
                    rhs_e = upsilon.component(sf(e))
                    checked += 1
                    if lhs_e != rhs_e:
                        note(
                            "endo-naturality", X, e.pretty(),
                            lhs_e.pretty(), rhs_e.pretty(),
                        )

        # the square carrying law into law2
        ft_tgt = apply_obj(upsilon.target, X)
        for e in _budgeted(apply_obj(law.functor, tx_src), cfg.value_budget):
            moved = apply_fn(
                law.functor,
                lambda t: encode_value(theta.apply(decode_value(theta.source, X, t))),
                e,
            )
            lhs = law2.apply(X, upsilon.component(moved))
            rhs = theta.apply(
                push(upsilon.component, law.apply(X, e), ft_tgt)
            )
            checked += 1
            if lhs != rhs:
                note(
                    "law-square", X,
                    _pretty_input(law.functor, law.kind, X, e),
                    lhs.pretty(), rhs.pretty(),
                )

    stats = {
        "theta": theta.name,
        "upsilon": upsilon.name,
        "checked": checked,
    }
    return from_witnesses(witnesses, stats)


def transform_system(
    theta: MonadMorphism, upsilon: EndoMorphism, system: "System"
) -> "System":
    """Carry a system along a law morphism: same states, transformed steps."""
    from .traces import System

    if system.kind is not theta.source:
        raise ValueError("system kind does not match the monad morphism")
    if system.functor != upsilon.source:
        raise ValueError("system functor does not match the endofunctor morphism")
    target_base = apply_obj(upsilon.target, system.states)
    moves = {
        x: theta.apply(push(upsilon.component, system.step(x), target_base))
        for x in system.states
    }
    return System.build(theta.target, upsilon.target, system.states, moves)
