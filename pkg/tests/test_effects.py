from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kltrace.effects import (
    EffectKind,
    EffectValue,
    SamplerConfig,
    affine_part,
    bind,
    check_monad_laws,
    decode_value,
    dist_value,
    dstr,
    encode_value,
    is_affine,
    iter_values,
    map_value,
    mult,
    push,
    set_value,
    unit,
    value_carrier,
)
from kltrace.finset import UNIT, UNIT_SET, Atom, FinMap, FinSet, Pair, all_maps, compose, identity_map

from .oracles import mixture

a, b, c = Atom("a"), Atom("b"), Atom("c")
AB = FinSet([a, b])
SMALL_CFG = SamplerConfig(denominator_bound=3, value_budget=4000, dist_value_budget=2000)

POW = EffectKind.POW
POW_PLUS = EffectKind.POW_PLUS
DIST = EffectKind.DIST
SUB_DIST = EffectKind.SUB_DIST


def test_unit_examples():
    assert unit(POW, AB, a) == set_value(POW, AB, [a])
    assert unit(DIST, AB, b) == dist_value(DIST, AB, {b: Fraction(1)})
    assert unit(POW_PLUS, UNIT_SET, UNIT).entries == (UNIT,)
    with pytest.raises(ValueError):
        unit(POW, AB, c)


def test_kind_invariants():
    with pytest.raises(ValueError):
        set_value(POW_PLUS, AB, [])
    with pytest.raises(ValueError):
        dist_value(DIST, AB, {a: Fraction(1, 2)})
    with pytest.raises(ValueError):
        dist_value(SUB_DIST, AB, {a: Fraction(2, 3), b: Fraction(1, 2)})
    with pytest.raises(ValueError):
        dist_value(DIST, AB, {a: Fraction(3, 2), b: Fraction(-1, 2)})
    with pytest.raises(ValueError):
        set_value(POW, AB, [c])


def test_mult_union():
    sa = set_value(POW, AB, [a])
    sab = set_value(POW, AB, [a, b])
    tx = FinSet([encode_value(sa), encode_value(sab)])
    outer = set_value(POW, tx, [encode_value(sa), encode_value(sab)])
    assert mult(outer, AB) == sab
    empty_inner = set_value(POW, AB, [])
    tx2 = FinSet([encode_value(empty_inner)])
    assert mult(set_value(POW, tx2, tx2.elems), AB) == empty_inner


def test_mult_mixture_matches_independent_evaluator():
    da = unit(DIST, AB, a)
    fifty = dist_value(DIST, AB, {a: Fraction(1, 2), b: Fraction(1, 2)})
    tx = FinSet([encode_value(da), encode_value(fifty)])
    outer = dist_value(
        DIST, tx, {encode_value(da): Fraction(1, 2), encode_value(fifty): Fraction(1, 2)}
    )
    expected = mixture(
        [
            ({a: Fraction(1)}, Fraction(1, 2)),
            ({a: Fraction(1, 2), b: Fraction(1, 2)}, Fraction(1, 2)),
        ]
    )
    assert expected == {a: Fraction(3, 4), b: Fraction(1, 4)}
    assert mult(outer, AB) == dist_value(DIST, AB, expected)


def test_mult_rejects_foreign_encodings():
    inner = set_value(POW, AB, [a])
    outer = set_value(POW, FinSet([encode_value(inner)]), [encode_value(inner)])
    with pytest.raises(ValueError):
        mult(outer, FinSet([c]))  # inner support escapes the claimed base


def test_map_examples():
    C = FinSet([c])
    collapse = FinMap(AB, C, {a: c, b: c})
    assert map_value(collapse, set_value(POW, AB, [a, b])) == set_value(POW, C, [c])
    pushed = map_value(collapse, dist_value(DIST, AB, {a: Fraction(1, 2), b: Fraction(1, 2)}))
    assert pushed == dist_value(DIST, C, {c: Fraction(1)})
    assert pushed.mass() == 1
    v = set_value(POW_PLUS, AB, [a])
    assert map_value(identity_map(AB), v) == v
    with pytest.raises(ValueError):
        map_value(collapse, set_value(POW, FinSet([a]), [a]))


def test_dstr_examples():
    assert dstr(set_value(POW, FinSet([a]), [a]), set_value(POW, FinSet([b, c]), [b, c])) == set_value(
        POW, FinSet([Pair(a, b), Pair(a, c)]), [Pair(a, b), Pair(a, c)]
    )
    left = dist_value(DIST, AB, {a: Fraction(1, 2), b: Fraction(1, 2)})
    right = unit(DIST, FinSet([c]), c)
    assert dstr(left, right).entries == (
        (Pair(a, c), Fraction(1, 2)),
        (Pair(b, c), Fraction(1, 2)),
    )
    assert dstr(set_value(POW, AB, []), set_value(POW, AB, [b])).entries == ()
    with pytest.raises(ValueError):
        dstr(set_value(POW, AB, [a]), unit(DIST, AB, a))


@pytest.mark.parametrize("kind", [POW, POW_PLUS])
def test_functoriality_exhaustive_set_kinds(kind):
    X, Y, Z = FinSet([a, b, c]), AB, FinSet([c])
    for f in all_maps(X, Y):
        for g in all_maps(Y, Z):
            for v in iter_values(kind, X):
                assert map_value(g, map_value(f, v)) == map_value(compose(g, f), v)
    for v in iter_values(kind, X):
        assert map_value(identity_map(X), v) == v


@pytest.mark.parametrize("kind", [DIST, SUB_DIST])
def test_functoriality_dist_kinds(kind):
    X, Y, Z = AB, AB, FinSet([c])
    for f in all_maps(X, Y):
        for g in all_maps(Y, Z):
            for v in iter_values(kind, X, 3):
                assert map_value(g, map_value(f, v)) == map_value(compose(g, f), v)


@pytest.mark.parametrize("kind", list(EffectKind))
def test_dstr_naturality(kind):
    bound = 2 if kind.is_dist_kind else None
    X, Y = AB, FinSet([b, c])
    X2, Y2 = FinSet([c]), AB
    for f in all_maps(X, X2):
        for g in all_maps(Y, Y2):
            for v in iter_values(kind, X, bound):
                for w in iter_values(kind, Y, bound):
                    prod_map = FinMap(
                        FinSet(Pair(x, y) for x in X for y in Y),
                        FinSet(Pair(x, y) for x in X2 for y in Y2),
                        {
                            Pair(x, y): Pair(f(x), g(y))
                            for x in X
                            for y in Y
                        },
                    )
                    assert map_value(prod_map, dstr(v, w)) == dstr(
                        map_value(f, v), map_value(g, w)
                    )


def test_mass_bookkeeping():
    v = dist_value(SUB_DIST, AB, {a: Fraction(1, 3)})
    w = unit(SUB_DIST, AB, b)
    tx = FinSet([encode_value(v), encode_value(w)])
    outer = dist_value(
        SUB_DIST, tx, {encode_value(v): Fraction(1, 2), encode_value(w): Fraction(1, 4)}
    )
    flattened = mult(outer, AB)
    assert flattened.mass() == Fraction(1, 2) * Fraction(1, 3) + Fraction(1, 4)
    assert flattened.mass() <= outer.mass()


@pytest.mark.parametrize("kind", list(EffectKind))
def test_monad_laws_quick(kind):
    report = check_monad_laws(kind, 2, SMALL_CFG)
    assert report.ok, report.witnesses[:1]


def test_monad_law_checker_catches_corruption():
    def broken_mult(v, inner_base):
        flattened = mult(v, inner_base)
        if flattened.kind.is_set_kind and len(flattened.entries) > 1:
            return EffectValue(flattened.kind, flattened.base, flattened.entries[1:])
        return flattened

    report = check_monad_laws(POW, 2, SMALL_CFG, mult_impl=broken_mult)
    assert report.status == "fail"
    w = report.witnesses[0]
    assert {"law", "kind", "base", "value", "lhs", "rhs"} <= set(w)


def test_affineness_table():
    assert is_affine(POW).affine is False
    assert len(is_affine(POW).unit_carrier) == 2
    assert is_affine(POW_PLUS).affine is True
    assert len(is_affine(POW_PLUS).unit_carrier) == 1
    assert is_affine(DIST).affine is True
    assert is_affine(SUB_DIST).affine is False


def test_affine_part_examples():
    assert affine_part(set_value(POW, AB, [a])) is True
    assert affine_part(set_value(POW, AB, [])) is False
    assert affine_part(dist_value(SUB_DIST, FinSet([a]), {a: Fraction(1, 2)})) is False
    for v in iter_values(DIST, AB, 3):
        assert affine_part(v) is True


@pytest.mark.parametrize("kind", list(EffectKind))
def test_affine_part_closed_under_unit_and_mult(kind):
    bound = 2 if kind.is_dist_kind else None
    for base in (FinSet([a]), AB):
        for x in base:
            assert affine_part(unit(kind, base, x))
        affine_values = [v for v in iter_values(kind, base, bound) if affine_part(v)]
        tx = FinSet(encode_value(v) for v in affine_values)
        for outer in iter_values(kind, tx, bound):
            if affine_part(outer):
                assert affine_part(mult(outer, base))


def test_empty_base_carriers():
    empty = FinSet()
    assert [v.entries for v in value_carrier(POW, empty)] == [()]
    assert value_carrier(POW_PLUS, empty) == ()
    assert value_carrier(DIST, empty, 4) == ()
    assert [v.entries for v in value_carrier(SUB_DIST, empty, 4)] == [()]


@pytest.mark.parametrize("kind", list(EffectKind))
def test_encode_decode_roundtrip(kind):
    base = FinSet([a, b, c])
    bound = 3 if kind.is_dist_kind else None
    for v in iter_values(kind, base, bound):
        assert decode_value(kind, base, encode_value(v)) == v


@given(st.integers(1, 5))
def test_bounded_fractions_are_reduced(bound):
    from kltrace.effects import bounded_unit_fractions

    fracs = bounded_unit_fractions(bound)
    assert all(0 < f <= 1 and f.denominator <= bound for f in fracs)
    assert sorted(set(fracs)) == list(fracs)


def test_bind_respects_kind_and_base():
    v = set_value(POW, AB, [a, b])
    with pytest.raises(ValueError):
        bind(v, lambda e: unit(DIST, AB, e), AB)
    with pytest.raises(ValueError):
        bind(v, lambda e: unit(POW, FinSet([a]), a), AB)
    doubled = bind(v, lambda e: set_value(POW, AB, [a, e]), AB)
    assert doubled == set_value(POW, AB, [a, b])


def test_push_computes_image_base_when_unspecified():
    v = set_value(POW, AB, [a, b])
    out = push(lambda _: c, v)
    assert out.base == FinSet([c]) and out.entries == (c,)
