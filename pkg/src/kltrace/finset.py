"""Canonical finite sets, elements, and maps.

Every value manipulated by this package is built from four element
constructors (unit, atom, pair, tagged injection).  Elements are immutable,
hashable, and totally ordered, so finite sets have a unique sorted
representation and every diagram check reduces to structural equality.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "Elem",
    "Unit",
    "Atom",
    "Pair",
    "Tag",
    "UNIT",
    "FinSet",
    "UNIT_SET",
    "EMPTY_SET",
    "FinMap",
    "identity_map",
    "compose",
    "product",
    "product_map",
    "coproduct",
    "coproduct_map",
    "final_map",
    "all_maps",
]


class Elem:
    """A canonical value.

    Ordering is by constructor rank (Unit < Atom < Pair < Tag), then
    componentwise; this order is what makes set representations unique.
    """

    __slots__ = ("_key", "_hash")

    _key: tuple
    _hash: int

    def __init__(self) -> None:
        raise TypeError("use Unit(), Atom(), Pair() or Tag()")

    def _seal(self, key: tuple) -> None:
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("elements are immutable")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Elem) and self._key == other._key

    def __ne__(self, other: object) -> bool:
        return not isinstance(other, Elem) or self._key != other._key

    def __lt__(self, other: "Elem") -> bool:
        return self._key < other._key

    def __le__(self, other: "Elem") -> bool:
        return self._key <= other._key

    def __gt__(self, other: "Elem") -> bool:
        return self._key > other._key

    def __ge__(self, other: "Elem") -> bool:
        return self._key >= other._key

    def __hash__(self) -> int:
        return self._hash

    def pretty(self) -> str:
        raise NotImplementedError

    def __repr__(self) -> str:
        return self.pretty()


class Unit(Elem):
    """The single inhabitant of the final object."""

    __slots__ = ()

    def __init__(self) -> None:
        self._seal((0,))

    def pretty(self) -> str:
        return "()"


class Atom(Elem):
    """A named, user-visible element."""

    __slots__ = ("name",)
    __match_args__ = ("name",)

    name: str

    def __init__(self, name: str) -> None:
        if not isinstance(name, str) or not name:
            raise ValueError("atom names are non-empty strings")
        object.__setattr__(self, "name", name)
        self._seal((1, name))

    def pretty(self) -> str:
        return self.name


class Pair(Elem):
    """An element of a binary product."""

    __slots__ = ("left", "right")
    __match_args__ = ("left", "right")

    left: Elem
    right: Elem

    def __init__(self, left: Elem, right: Elem) -> None:
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._seal((2, left._key, right._key))

    def pretty(self) -> str:
        return f"({self.left.pretty()},{self.right.pretty()})"


class Tag(Elem):
    """An element of a coproduct: the payload injected at ``index``."""

    __slots__ = ("index", "payload")
    __match_args__ = ("index", "payload")

    index: int
    payload: Elem

    def __init__(self, index: int, payload: Elem) -> None:
        if not isinstance(index, int) or index < 0:
            raise ValueError("tag index is a natural number")
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "payload", payload)
        self._seal((3, index, payload._key))

    def pretty(self) -> str:
        return f"in{self.index}({self.payload.pretty()})"


UNIT = Unit()


class FinSet:
    """A finite set of elements, stored strictly increasing.

    The constructor sorts and deduplicates, so equal sets always have equal
    representations; ``is_canonical`` re-checks the invariant for tests.
    """

    __slots__ = ("elems", "_index", "_hash")

    elems: tuple[Elem, ...]
    _index: frozenset[Elem]
    _hash: int

    def __init__(self, elems: Iterable[Elem] = ()) -> None:
        canonical = tuple(sorted(set(elems)))
        for e in canonical:
            if not isinstance(e, Elem):
                raise TypeError(f"not an element: {e!r}")
        object.__setattr__(self, "elems", canonical)
        object.__setattr__(self, "_index", frozenset(canonical))
        object.__setattr__(self, "_hash", hash(canonical))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("finite sets are immutable")

    def __contains__(self, e: object) -> bool:
        return e in self._index

    def __iter__(self) -> Iterator[Elem]:
        return iter(self.elems)

    def __len__(self) -> int:
        return len(self.elems)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FinSet) and self.elems == other.elems

    def __hash__(self) -> int:
        return self._hash

    def is_canonical(self) -> bool:
        return all(a < b for a, b in zip(self.elems, self.elems[1:]))

    def pretty(self) -> str:
        return "{" + ",".join(e.pretty() for e in self.elems) + "}"

    def __repr__(self) -> str:
        return f"FinSet({self.pretty()})"


UNIT_SET = FinSet([UNIT])
EMPTY_SET = FinSet()


class FinMap:
    """A total function between finite sets, given by its graph."""

    __slots__ = ("domain", "codomain", "graph")

    domain: FinSet
    codomain: FinSet
    graph: Mapping[Elem, Elem]

    def __init__(self, domain: FinSet, codomain: FinSet, graph: Mapping[Elem, Elem]) -> None:
        table = dict(graph)
        missing = [x for x in domain if x not in table]
        if missing:
            raise ValueError(f"map undefined on {missing[0].pretty()}")
        extra = [x for x in table if x not in domain]
        if extra:
            raise ValueError(f"map defined outside its domain: {extra[0].pretty()}")
        for x, y in table.items():
            if y not in codomain:
                raise ValueError(
                    f"image {y.pretty()} of {x.pretty()} is not in the codomain"
                )
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "codomain", codomain)
        object.__setattr__(self, "graph", table)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("maps are immutable")

    def __call__(self, x: Elem) -> Elem:
        try:
            return self.graph[x]
        except KeyError:
            raise ValueError(f"{x.pretty()} is not in the domain") from None

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FinMap)
            and self.domain == other.domain
            and self.codomain == other.codomain
            and self.graph == other.graph
        )

    def __repr__(self) -> str:
        body = ", ".join(
            f"{x.pretty()}->{self.graph[x].pretty()}" for x in self.domain
        )
        return f"FinMap[{body}]"


def identity_map(xs: FinSet) -> FinMap:
    return FinMap(xs, xs, {x: x for x in xs})


def compose(g: FinMap, f: FinMap) -> FinMap:
    """The composite ``g after f``."""
    if f.codomain != g.domain:
        raise ValueError("codomain/domain mismatch in composition")
    return FinMap(f.domain, g.codomain, {x: g(f(x)) for x in f.domain})


def product(xs: FinSet, ys: FinSet) -> FinSet:
    """Cartesian product, as pair elements."""
    return FinSet(Pair(x, y) for x in xs for y in ys)


def product_map(f: FinMap, g: FinMap) -> FinMap:
    dom = product(f.domain, g.domain)
    cod = product(f.codomain, g.codomain)
    return FinMap(dom, cod, {p: Pair(f(p.left), g(p.right)) for p in dom})


def coproduct(parts: Sequence[FinSet]) -> FinSet:
    """Disjoint union, with the part index recorded by a tag."""
    return FinSet(Tag(i, x) for i, part in enumerate(parts) for x in part)


def coproduct_map(parts: Sequence[FinMap]) -> FinMap:
    dom = coproduct([f.domain for f in parts])
    cod = coproduct([f.codomain for f in parts])
    return FinMap(
        dom, cod, {t: Tag(t.index, parts[t.index](t.payload)) for t in dom}
    )


def final_map(xs: FinSet) -> FinMap:
    """The unique map into the one-element set."""
    return FinMap(xs, UNIT_SET, {x: UNIT for x in xs})


def all_maps(xs: FinSet, ys: FinSet) -> Iterator[FinMap]:
    """Every total map ``xs -> ys``, in a deterministic order."""
    if len(xs) == 0:
        yield FinMap(xs, ys, {})
        return
    if len(ys) == 0:
        return

    def rec(prefix: dict, rest: tuple[Elem, ...]) -> Iterator[FinMap]:
        if not rest:
            yield FinMap(xs, ys, dict(prefix))
            return
        head, tail = rest[0], rest[1:]
        for y in ys:
            prefix[head] = y
            yield from rec(prefix, tail)
        del prefix[head]

    yield from rec({}, xs.elems)
