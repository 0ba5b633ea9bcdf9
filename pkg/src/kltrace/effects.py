"""The four branching effects at finite carriers.

Powerset, non-empty powerset, probability distribution, and sub-probability
distribution, each with unit, multiplication, functorial action and double
strength.  All arithmetic is exact rational; every equality used by the
checkers is structural.

Values of nested types such as ``T(T X)`` are represented by encoding inner
values as elements (``encode_value``), so one set of operations serves every
nesting depth.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

from .finset import UNIT, UNIT_SET, Atom, Elem, FinMap, FinSet, Pair
from .report import Report, from_witnesses

__all__ = [
    "EffectKind",
    "EffectValue",
    "SamplerConfig",
    "set_value",
    "dist_value",
    "unit",
    "push",
    "map_value",
    "bind",
    "mult",
    "dstr",
    "encode_value",
    "decode_value",
    "bounded_unit_fractions",
    "iter_values",
    "value_carrier",
    "carrier_set",
    "value_family",
    "random_value",
    "check_monad_laws",
    "AffineResult",
    "is_affine",
    "affine_part",
]


class EffectKind(Enum):
    POW = "powerset"
    POW_PLUS = "nonempty-powerset"
    DIST = "distribution"
    SUB_DIST = "subdistribution"

    @property
    def json_name(self) -> str:
        return self.value

    @property
    def is_set_kind(self) -> bool:
        return self in (EffectKind.POW, EffectKind.POW_PLUS)

    @property
    def is_dist_kind(self) -> bool:
        return not self.is_set_kind

    @classmethod
    def from_json_name(cls, name: str) -> "EffectKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown monad {name!r}")


@dataclass(frozen=True)
class EffectValue:
    """One branching value over ``base``.

    For set kinds ``entries`` is a strictly increasing tuple of elements; for
    distribution kinds it is a strictly increasing tuple of
    ``(element, positive weight)`` pairs.
    """

    kind: EffectKind
    base: FinSet
    entries: tuple

    def __post_init__(self) -> None:
        if self.kind.is_set_kind:
            elems = self.entries
            if self.kind is EffectKind.POW_PLUS and not elems:
                raise ValueError("non-empty powerset values cannot be empty")
        else:
            elems = tuple(e for e, _ in self.entries)
            total = Fraction(0)
            for e, w in self.entries:
                if not isinstance(w, Fraction):
                    raise ValueError(f"weight of {e.pretty()} is not a rational")
                if w <= 0:
                    raise ValueError(f"weight of {e.pretty()} must be positive")
                total += w
            if self.kind is EffectKind.DIST and total != 1:
                raise ValueError(f"distribution mass {total} != 1")
            if self.kind is EffectKind.SUB_DIST and total > 1:
                raise ValueError(f"subdistribution mass {total} > 1")
        if any(not (a < b) for a, b in zip(elems, elems[1:])):
            raise ValueError("entries must be strictly increasing")
        for e in elems:
            if e not in self.base:
                raise ValueError(f"element {e.pretty()} is not in the base")

    @property
    def support(self) -> tuple[Elem, ...]:
        if self.kind.is_set_kind:
            return self.entries
        return tuple(e for e, _ in self.entries)

    def weight(self, e: Elem) -> Fraction:
        if self.kind.is_set_kind:
            raise ValueError("set values carry no weights")
        for x, w in self.entries:
            if x == e:
                return w
        return Fraction(0)

    def mass(self) -> Fraction:
        if self.kind.is_set_kind:
            raise ValueError("set values carry no mass")
        return sum((w for _, w in self.entries), Fraction(0))

    def pretty(self) -> str:
        if self.kind.is_set_kind:
            return "{" + ",".join(e.pretty() for e in self.entries) + "}"
        return "{" + ",".join(f"{e.pretty()}:{w}" for e, w in self.entries) + "}"

    def __repr__(self) -> str:
        return f"EffectValue[{self.kind.json_name}]{self.pretty()}"


def set_value(kind: EffectKind, base: FinSet, elems: Iterable[Elem]) -> EffectValue:
    if not kind.is_set_kind:
        raise ValueError(f"{kind.json_name} values are distributions, not sets")
    return EffectValue(kind, base, tuple(sorted(set(elems))))


def dist_value(
    kind: EffectKind, base: FinSet, weights: Mapping[Elem, Fraction] | Iterable[tuple[Elem, Fraction]]
) -> EffectValue:
    if kind.is_set_kind:
        raise ValueError(f"{kind.json_name} values are sets, not distributions")
    table: dict[Elem, Fraction] = {}
    items = weights.items() if isinstance(weights, Mapping) else weights
    for e, w in items:
        w = Fraction(w)
        if w != 0:
            table[e] = table.get(e, Fraction(0)) + w
    entries = tuple((e, table[e]) for e in sorted(table))
    return EffectValue(kind, base, entries)


def unit(kind: EffectKind, base: FinSet, x: Elem) -> EffectValue:
    """Singleton set or Dirac distribution at ``x``."""
    if x not in base:
        raise ValueError(f"element {x.pretty()} is not in the base")
    if kind.is_set_kind:
        return EffectValue(kind, base, (x,))
    return EffectValue(kind, base, ((x, Fraction(1)),))


def push(fn: Callable[[Elem], Elem], v: EffectValue, codomain: FinSet | None = None) -> EffectValue:
    """Pushforward along an element function: image set, or fibre-summed masses."""
    if v.kind.is_set_kind:
        image = tuple(sorted({fn(e) for e in v.entries}))
        base = codomain if codomain is not None else FinSet(image)
        return EffectValue(v.kind, base, image)
    table: dict[Elem, Fraction] = {}
    for e, w in v.entries:
        y = fn(e)
        table[y] = table.get(y, Fraction(0)) + w
    base = codomain if codomain is not None else FinSet(table)
    return EffectValue(v.kind, base, tuple((e, table[e]) for e in sorted(table)))


def map_value(f: FinMap, v: EffectValue) -> EffectValue:
    """Functorial action on a finite map."""
    if v.base != f.domain:
        raise ValueError("value base does not match the map's domain")
    return push(f, v, f.codomain)


def bind(v: EffectValue, arrow: Callable[[Elem], EffectValue], codomain: FinSet) -> EffectValue:
    """Kleisli extension: union of branches, or the exact mixture."""
    if v.kind.is_set_kind:
        out: set[Elem] = set()
        for e in v.entries:
            w = arrow(e)
            if w.kind is not v.kind:
                raise ValueError("kind mismatch in bind")
            if w.base != codomain:
                raise ValueError("inner base mismatch in bind")
            out.update(w.entries)
        return EffectValue(v.kind, codomain, tuple(sorted(out)))
    table: dict[Elem, Fraction] = {}
    for e, p in v.entries:
        w = arrow(e)
        if w.kind is not v.kind:
            raise ValueError("kind mismatch in bind")
        if w.base != codomain:
            raise ValueError("inner base mismatch in bind")
        for y, q in w.entries:
            table[y] = table.get(y, Fraction(0)) + p * q
    return EffectValue(v.kind, codomain, tuple((e, table[e]) for e in sorted(table)))


def mult(v: EffectValue, inner_base: FinSet) -> EffectValue:
    """Monad multiplication: the elements of ``v`` encode values over ``inner_base``."""
    return bind(v, lambda e: decode_value(v.kind, inner_base, e), inner_base)


def dstr(v: EffectValue, w: EffectValue) -> EffectValue:
    """Double strength: product set, or product distribution."""
    if v.kind is not w.kind:
        raise ValueError("kind mismatch in double strength")
    base = FinSet(Pair(x, y) for x in v.base for y in w.base)
    if v.kind.is_set_kind:
        return EffectValue(
            v.kind, base, tuple(sorted(Pair(x, y) for x in v.entries for y in w.entries))
        )
    entries = tuple(
        sorted(((Pair(x, y), p * q) for x, p in v.entries for y, q in w.entries))
    )
    return EffectValue(v.kind, base, entries)


# ---------------------------------------------------------------------------
# Encoding values as elements (for nested carriers such as T(T X))

def _spine(items: Iterable[Elem]) -> Elem:
    out: Elem = UNIT
    for e in reversed(list(items)):
        out = Pair(e, out)
    return out


def _unspine(e: Elem) -> list[Elem]:
    out = []
    while isinstance(e, Pair):
        out.append(e.left)
        e = e.right
    if e != UNIT:
        raise ValueError("malformed value encoding")
    return out


def encode_value(v: EffectValue) -> Elem:
    """Injective element encoding of a value, canonical per base and kind."""
    if v.kind.is_set_kind:
        return _spine(v.entries)
    return _spine(Pair(e, Atom(f"{w.numerator}/{w.denominator}")) for e, w in v.entries)


_decode_cache: dict[tuple, EffectValue] = {}


def decode_value(kind: EffectKind, base: FinSet, e: Elem) -> EffectValue:
    # values are immutable, so decoded results are shared via a memo
    key = (kind, base, e)
    cached = _decode_cache.get(key)
    if cached is not None:
        return cached
    items = _unspine(e)
    if kind.is_set_kind:
        value = EffectValue(kind, base, tuple(items))
    else:
        entries = []
        for item in items:
            if not isinstance(item, Pair) or not isinstance(item.right, Atom):
                raise ValueError("malformed distribution encoding")
            num, _, den = item.right.name.partition("/")
            entries.append((item.left, Fraction(int(num), int(den))))
        value = EffectValue(kind, base, tuple(entries))
    if len(_decode_cache) > 1 << 20:
        _decode_cache.clear()
    _decode_cache[key] = value
    return value


# ---------------------------------------------------------------------------
# Enumeration

def bounded_unit_fractions(bound: int) -> tuple[Fraction, ...]:
    """All rationals in (0, 1] whose reduced denominator is at most ``bound``."""
    if bound < 1:
        raise ValueError("the denominator bound must be at least 1")
    return tuple(
        sorted({Fraction(p, q) for q in range(1, bound + 1) for p in range(1, q + 1)})
    )


def _iter_set_values(kind: EffectKind, base: FinSet) -> Iterator[EffectValue]:
    low = 1 if kind is EffectKind.POW_PLUS else 0
    for size in range(low, len(base) + 1):
        for combo in itertools.combinations(base.elems, size):
            yield EffectValue(kind, base, combo)


def _iter_dist_values(
    kind: EffectKind, base: FinSet, bound: int
) -> Iterator[EffectValue]:
    # every positive entry is at least 1/bound, so supports never exceed bound
    fracs = bounded_unit_fractions(bound)
    exact = kind is EffectKind.DIST

    def weightings(combo: tuple[Elem, ...], i: int, remaining: Fraction, acc: list) -> Iterator[tuple]:
        if i == len(combo):
            if not exact or remaining == 0:
                yield tuple(acc)
            return
        for f in fracs:
            if f <= remaining:
                acc.append((combo[i], f))
                yield from weightings(combo, i + 1, remaining - f, acc)
                acc.pop()

    low = 1 if exact else 0
    for size in range(low, min(len(base), bound) + 1):
        for combo in itertools.combinations(base.elems, size):
            for entries in weightings(combo, 0, Fraction(1), []):
                yield EffectValue(kind, base, entries)


def iter_values(
    kind: EffectKind, base: FinSet, denominator_bound: int | None = None
) -> Iterator[EffectValue]:
    """All values over ``base``; distribution kinds need a denominator bound."""
    if kind.is_set_kind:
        yield from _iter_set_values(kind, base)
    else:
        if denominator_bound is None:
            raise ValueError("distribution enumeration needs a denominator bound")
        yield from _iter_dist_values(kind, base, denominator_bound)


def value_carrier(
    kind: EffectKind, base: FinSet, denominator_bound: int | None = None
) -> tuple[EffectValue, ...]:
    """The carrier ``T(base)``, ordered by encoding.

    For distribution kinds this is the finite slice with entry denominators
    at most ``denominator_bound``; the true carrier is infinite.
    """
    return tuple(sorted(iter_values(kind, base, denominator_bound), key=encode_value))


def carrier_set(
    kind: EffectKind, base: FinSet, denominator_bound: int | None = None
) -> FinSet:
    return FinSet(encode_value(v) for v in iter_values(kind, base, denominator_bound))


@dataclass(frozen=True)
class SamplerConfig:
    """Budgets for the enumeration-based checkers.

    Spaces within ``level_cap`` are enumerated exhaustively; larger ones fall
    back to a deterministic stratified family (all supports of size at most
    two, then seeded random values) truncated to the budget.
    """

    denominator_bound: int = 4
    seed: int = 0
    random_samples: int = 64
    level_cap: int = 1024
    value_budget: int = 80_000
    dist_value_budget: int = 40_000

    def budget_for(self, kind: "EffectKind") -> int:
        return self.value_budget if kind.is_set_kind else self.dist_value_budget


def _take(it: Iterator, cap: int) -> list | None:
    out = []
    for v in it:
        out.append(v)
        if len(out) > cap:
            return None
    return out


def random_value(
    kind: EffectKind, base: FinSet, rng: random.Random, denominator_bound: int
) -> EffectValue:
    n = len(base)
    if kind.is_set_kind:
        low = 1 if kind is EffectKind.POW_PLUS else 0
        if n == 0:
            return EffectValue(kind, base, ())
        size = rng.randint(low, min(4, n))
        return set_value(kind, base, rng.sample(base.elems, size))
    if n == 0:
        if kind is EffectKind.DIST:
            raise ValueError("no distributions over an empty base")
        return EffectValue(kind, base, ())
    den = rng.randint(1, denominator_bound)
    size = rng.randint(1, min(den, n, 4))
    elems = sorted(rng.sample(base.elems, size))
    if kind is EffectKind.DIST:
        total = den
    else:
        total = rng.randint(size, den)
    cuts = sorted(rng.sample(range(1, total), size - 1)) if size > 1 else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [total])]
    return dist_value(kind, base, {e: Fraction(p, den) for e, p in zip(elems, parts)})


def value_family(
    kind: EffectKind, base: FinSet, cfg: SamplerConfig, cap: int
) -> tuple[tuple[EffectValue, ...], bool]:
    """Values over ``base`` for checking: exhaustive within ``cap``, else stratified."""
    bound = cfg.denominator_bound if kind.is_dist_kind else None
    full = _take(iter_values(kind, base, bound), cap)
    if full is not None:
        return tuple(sorted(full, key=encode_value)), True

    # a string seed hashes deterministically across processes
    rng = random.Random(f"{cfg.seed}|{kind.value}|{len(base)}|{cap}")
    fracs = bounded_unit_fractions(cfg.denominator_bound)
    seen: set[tuple] = set()
    out: list[EffectValue] = []

    def add(v: EffectValue) -> None:
        if v.entries not in seen:
            seen.add(v.entries)
            out.append(v)

    def room() -> bool:
        return len(out) < cap

    if kind in (EffectKind.POW, EffectKind.SUB_DIST):
        add(EffectValue(kind, base, ()))
    for e in base:
        if not room():
            break
        if kind.is_set_kind:
            add(set_value(kind, base, [e]))
        elif kind is EffectKind.DIST:
            add(unit(kind, base, e))
        else:
            for f in fracs:
                add(dist_value(kind, base, {e: f}))
    pair_budget = max(cap - len(out) - cfg.random_samples, 0)
    pairs = list(itertools.combinations(range(len(base)), 2))
    rng.shuffle(pairs)
    for i, j in pairs:
        if pair_budget <= 0:
            break
        x, y = base.elems[i], base.elems[j]
        if kind.is_set_kind:
            add(set_value(kind, base, [x, y]))
            pair_budget -= 1
        elif kind is EffectKind.DIST:
            for p in fracs:
                q = Fraction(1) - p
                if 0 < q and q in fracs:
                    add(dist_value(kind, base, {x: p, y: q}))
                    pair_budget -= 1
        else:
            for p in fracs:
                for q in fracs:
                    if p + q <= 1:
                        add(dist_value(kind, base, {x: p, y: q}))
                        pair_budget -= 1
    for _ in range(cfg.random_samples):
        if not room():
            break
        add(random_value(kind, base, rng, cfg.denominator_bound))
    return tuple(sorted(out[:cap], key=encode_value)), False


# ---------------------------------------------------------------------------
# Checks

def _atoms(n: int) -> FinSet:
    return FinSet(Atom(f"x{i}") for i in range(n))


def check_monad_laws(
    kind: EffectKind,
    max_base: int,
    cfg: SamplerConfig | None = None,
    mult_impl: Callable[[EffectValue, FinSet], EffectValue] | None = None,
) -> Report:
    """Verify the unit laws and associativity of multiplication.

    Set kinds are checked exhaustively where the value spaces fit the
    budgets; distribution kinds over the denominator-bounded slices.
    ``mult_impl`` exists so tests can inject a corrupted multiplication.
    """
    if max_base < 1:
        raise ValueError("max_base must be at least 1")
    cfg = cfg or SamplerConfig()
    mu = mult_impl or mult
    witnesses: list[dict] = []
    checked = 0
    exhaustive = True

    def found(law: str, base: FinSet, value: EffectValue, lhs: EffectValue, rhs: EffectValue) -> None:
        witnesses.append(
            {
                "law": law,
                "kind": kind.json_name,
                "base": base.pretty(),
                "value": value.pretty(),
                "lhs": lhs.pretty(),
                "rhs": rhs.pretty(),
            }
        )

    for n in range(max_base + 1):
        X = _atoms(n)
        level1, ex1 = value_family(kind, X, cfg, cfg.level_cap)
        tx = FinSet(encode_value(v) for v in level1)
        exhaustive = exhaustive and ex1
        for v in level1:
            enc = encode_value(v)
            # mu . T(eta) = id
            lhs = mu(push(lambda x: encode_value(unit(kind, X, x)), v), X)
            checked += 1
            if lhs != v:
                found("unit-left", X, v, lhs, v)
            # mu . eta = id
            outer = unit(kind, FinSet([enc]), enc)
            rhs = mu(outer, X)
            checked += 1
            if rhs != v:
                found("unit-right", X, v, rhs, v)
        level2, ex2 = value_family(kind, tx, cfg, cfg.level_cap)
        ttx = FinSet(encode_value(w) for w in level2)
        flat = {encode_value(w): encode_value(mu(w, X)) for w in level2}
        level3, ex3 = value_family(kind, ttx, cfg, cfg.budget_for(kind))
        exhaustive = exhaustive and ex2 and ex3
        for w in level3:
            # mu . T(mu) = mu . mu
            lhs = mu(push(lambda m: flat[m], w), X)
            rhs = mu(mu(w, tx), X)
            checked += 1
            if lhs != rhs:
                found("assoc", X, w, lhs, rhs)

    stats = {"kind": kind.json_name, "checked": checked, "exhaustive": exhaustive}
    return from_witnesses(witnesses, stats)


@dataclass(frozen=True)
class AffineResult:
    """Whether the unit at the final object is a bijection, with the carrier.

    For subdistributions the carrier shown is the denominator-bounded slice;
    any value in it beyond the unit already refutes affineness.
    """

    kind: EffectKind
    affine: bool
    unit_carrier: tuple[EffectValue, ...]


def is_affine(kind: EffectKind, denominator_bound: int = 4) -> AffineResult:
    carrier = value_carrier(kind, UNIT_SET, denominator_bound)
    only_unit = carrier == (unit(kind, UNIT_SET, UNIT),)
    return AffineResult(kind, only_unit, carrier)


def affine_part(v: EffectValue) -> bool:
    """True when ``v`` collapses to the unit over the final object."""
    return push(lambda _: UNIT, v, UNIT_SET) == unit(v.kind, UNIT_SET, UNIT)
