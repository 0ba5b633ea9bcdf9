import random
from fractions import Fraction

import pytest

from kltrace.distlaw import canonical_law
from kltrace.effects import (
    EffectKind,
    dist_value,
    encode_value,
    map_value,
    mult,
    push,
    set_value,
    unit,
)
from kltrace.finset import UNIT, Atom, FinSet, Pair, Tag
from kltrace.polyfun import (
    apply_fn,
    apply_obj,
    final_sequence,
    label_id,
    label_id_term,
    word_to_elem,
)
from kltrace.traces import (
    System,
    check_coherence,
    equiv_partitions,
    lasso_membership,
    pseudo_metric,
    stage_semantics,
    verify_omega_consistency,
)

from .corpus import deadlock_system, leaky_system, random_powplus_system
from .oracles import path_distribution, path_language

a, b = Atom("a"), Atom("b")
x, y = Atom("x"), Atom("y")
AB = FinSet([a, b])
XY = FinSet([x, y])
F_AB = label_id(AB)

POW = EffectKind.POW
POW_PLUS = EffectKind.POW_PLUS
DIST = EffectKind.DIST


def two_state_system():
    base = apply_obj(F_AB, XY)
    return System.build(
        POW_PLUS,
        F_AB,
        XY,
        {
            x: set_value(POW_PLUS, base, [Pair(a, y), Pair(b, x)]),
            y: set_value(POW_PLUS, base, [Pair(a, y)]),
        },
    )


def a_loop_system():
    states = FinSet([x])
    A = FinSet([a])
    functor = label_id(A)
    base = apply_obj(functor, states)
    return System.build(
        POW_PLUS, functor, states, {x: set_value(POW_PLUS, base, [Pair(a, x)])}
    )


def dist_system():
    base = apply_obj(F_AB, XY)
    return System.build(
        DIST,
        F_AB,
        XY,
        {
            x: dist_value(
                DIST, base, {Pair(a, x): Fraction(1, 2), Pair(b, y): Fraction(1, 2)}
            ),
            y: dist_value(DIST, base, {Pair(a, y): Fraction(1)}),
        },
    )


def test_single_loop_stages():
    table = stage_semantics(a_loop_system(), 4)
    functor = table.system.functor
    for n in range(5):
        expected = word_to_elem(functor, (a,) * n, n)
        assert table.value(n, x).entries == (expected,)


def test_two_state_stage_two():
    table = stage_semantics(two_state_system(), 3)
    words = {tuple(l.name for l in _labels(e)) for e in table.value(2, x).entries}
    assert words == {("a", "a"), ("b", "a"), ("b", "b")}


def _labels(e):
    out = []
    while isinstance(e, Pair):
        out.append(e.left)
        e = e.right
    return out


def test_dist_stage_two_probabilities():
    table = stage_semantics(dist_system(), 2)
    expected = {
        word_to_elem(F_AB, (a, a), 2): Fraction(1, 4),
        word_to_elem(F_AB, (a, b), 2): Fraction(1, 4),
        word_to_elem(F_AB, (b, a), 2): Fraction(1, 2),
    }
    assert dict(table.value(2, x).entries) == expected


def test_stage_zero_collapses_the_step():
    table = stage_semantics(deadlock_system(), 1)
    d = Atom("d")
    assert table.value(0, Atom("x")).entries == (UNIT,)
    assert table.value(0, d).entries == ()


def test_recursion_invariant_against_literal_composite():
    # stage n+1 must equal flatten(law(F(stage n))) applied after the step
    for system in (two_state_system(), dist_system()):
        depth = 4
        table = stage_semantics(system, depth)
        law = canonical_law(system.kind, system.functor)
        fam = table.family
        for n in range(1, depth):
            prev_enc = {s: encode_value(table.value(n, s)) for s in system.states}
            for s in system.states:
                rewritten = push(
                    lambda e: encode_value(
                        law.apply(
                            fam.carriers[n],
                            apply_fn(system.functor, lambda t: prev_enc[t], e),
                        )
                    ),
                    system.step(s),
                )
                composite = mult(rewritten, fam.carriers[n + 1])
                assert composite == table.value(n + 1, s)


def test_stage_one_is_collapsed_step():
    from kltrace.finset import final_map
    from kltrace.polyfun import apply_map

    for system in (two_state_system(), dist_system(), deadlock_system()):
        table = stage_semantics(system, 2)
        collapse = apply_map(system.functor, final_map(system.states))
        for s in system.states:
            assert table.value(1, s) == map_value(collapse, system.step(s))


@pytest.mark.parametrize("depth", [3, 6])
def test_coherence_passes_for_total_systems(depth):
    assert check_coherence(stage_semantics(two_state_system(), depth)).ok
    assert check_coherence(stage_semantics(dist_system(), depth)).ok


def test_coherence_fails_on_deadlock():
    table = stage_semantics(deadlock_system(), 3)
    report = check_coherence(table)
    assert report.status == "fail"
    first = report.witnesses[0]
    assert first["stage"] == 1 and first["state"] == "x"
    assert first["restricted"] == "{}"
    assert first["value"] == "{(a,())}"


def test_coherence_fails_on_mass_leak():
    table = stage_semantics(leaky_system(), 3)
    report = check_coherence(table)
    assert report.status == "fail"
    first = report.witnesses[0]
    assert first["stage"] == 1 and first["state"] == "x"


def test_equiv_partitions_refine():
    table = stage_semantics(two_state_system(), 3)
    result = equiv_partitions(table)
    assert result.ok
    assert [b.pretty() for b in result.partitions[0].blocks] == ["{x,y}"]
    assert [b.pretty() for b in result.partitions[1].blocks] == ["{x}", "{y}"]


def test_refinement_violation_only_under_incoherence():
    # the deadlocked system's states merge again once everything dies out
    table = stage_semantics(deadlock_system(), 3)
    assert not check_coherence(table).ok
    result = equiv_partitions(table)
    assert not result.ok
    assert result.refinement_violations[0]["stage"] == 2


def test_duplicated_state_shares_blocks():
    z = Atom("z")
    states = FinSet([x, y, z])
    base = apply_obj(F_AB, states)
    system = System.build(
        POW_PLUS,
        F_AB,
        states,
        {
            x: set_value(POW_PLUS, base, [Pair(a, y)]),
            z: set_value(POW_PLUS, base, [Pair(a, y)]),
            y: set_value(POW_PLUS, base, [Pair(b, y)]),
        },
    )
    result = equiv_partitions(stage_semantics(system, 4))
    for partition in result.partitions:
        assert partition.block_of(x) == partition.block_of(z)


def test_metric_examples():
    table = stage_semantics(two_state_system(), 4)
    self_distance = pseudo_metric(table, x, x)
    assert not self_distance.exact and self_distance.value == Fraction(1, 16)
    d = pseudo_metric(table, x, y)
    assert d.exact and d.value == Fraction(1) and d.agree_depth == 0


def test_metric_first_divergence_found_by_enumeration():
    # loop against loop-with-exit: first differing stage derived via the oracle
    p, q0, q1, q2 = Atom("p"), Atom("q0"), Atom("q1"), Atom("q2")
    states = FinSet([p, q0, q1, q2])
    base = apply_obj(F_AB, states)
    system = System.build(
        POW_PLUS,
        F_AB,
        states,
        {
            p: set_value(POW_PLUS, base, [Pair(a, p)]),
            q0: set_value(POW_PLUS, base, [Pair(a, q1)]),
            q1: set_value(POW_PLUS, base, [Pair(a, q2)]),
            q2: set_value(POW_PLUS, base, [Pair(b, q2)]),
        },
    )
    first_diff = next(
        n
        for n in range(5)
        if path_language(system, p, n) != path_language(system, q0, n)
    )
    assert first_diff == 3
    table = stage_semantics(system, 4)
    d = pseudo_metric(table, p, q0)
    assert d.exact and d.value == Fraction(1, 4) and d.agree_depth == 2


def test_metric_ultrametric_inequality():
    systems = [random_powplus_system(random.Random(f"metric-{i}")) for i in range(8)]
    for system in systems:
        table = stage_semantics(system, 4)
        states = list(system.states)
        results = {
            (s, t): pseudo_metric(table, s, t) for s in states for t in states
        }
        for s in states:
            for t in states:
                assert results[(s, t)].value == results[(t, s)].value
                for u in states:
                    if all(
                        results[k].exact
                        for k in ((s, t), (t, u), (s, u))
                    ):
                        assert results[(s, u)].value <= max(
                            results[(s, t)].value, results[(t, u)].value
                        )


def test_metric_unknown_state():
    table = stage_semantics(two_state_system(), 2)
    with pytest.raises(ValueError):
        pseudo_metric(table, x, Atom("nope"))


def test_lasso_examples():
    loop = a_loop_system()
    hit = lasso_membership(loop, x, (), (a,))
    assert hit.member and hit.cycle == ((x, 0),)
    miss = lasso_membership(loop, x, (), (Atom("a"),) * 2)
    assert miss.member
    two = two_state_system()
    assert lasso_membership(two, x, (b,), (a,)).member
    assert not lasso_membership(two, y, (), (b,)).member
    assert lasso_membership(two, y, (), (b,)).refuting_depth == 1


def test_lasso_rejects_bad_inputs():
    two = two_state_system()
    with pytest.raises(ValueError):
        lasso_membership(two, x, (b,), ())
    with pytest.raises(ValueError):
        lasso_membership(two, x, (Atom("zz"),), (a,))
    with pytest.raises(ValueError):
        lasso_membership(dist_system(), x, (), (a,))


def test_lasso_termination_is_absorbing():
    functor = label_id_term(AB)
    states = FinSet([x])
    base = apply_obj(functor, states)
    system = System.build(
        POW_PLUS,
        functor,
        states,
        {x: set_value(POW_PLUS, base, [Tag(0, Pair(a, x)), Tag(1, UNIT)])},
    )
    assert lasso_membership(system, x, (), (a,)).member
    refuted = lasso_membership(system, x, (), (b,))
    assert not refuted.member and refuted.refuting_depth == 1


def test_lasso_agrees_with_frontier_survival():
    # pigeonhole: an infinite run exists iff some run survives as many
    # steps as there are product nodes; decided here by plain forward BFS
    from .corpus import powplus_corpus, random_lassos

    for i, system in enumerate(powplus_corpus(100)[:30]):
        rng = random.Random(f"survival-{i}")
        for u, v in random_lassos(rng, 10):
            start = rng.choice(system.states.elems)
            word = tuple(u) + tuple(v)
            loop = len(u)

            def successors(state, pos):
                label = word[pos]
                nxt = pos + 1 if pos + 1 < len(word) else loop
                return {
                    (e.right, nxt)
                    for e in system.step(state).support
                    if e.left == label
                }

            steps = len(system.states) * len(word)
            frontier = {(start, 0)}
            for _ in range(steps):
                frontier = {s for node in frontier for s in successors(*node)}
                if not frontier:
                    break
            survived = bool(frontier)
            assert lasso_membership(system, start, u, v).member == survived


def test_omega_consistency_examples():
    loop = a_loop_system()
    assert verify_omega_consistency(loop, x, (), (a,), 6).ok
    assert verify_omega_consistency(loop, x, (), (Atom("a"), Atom("a")), 6).ok
    two = two_state_system()
    assert verify_omega_consistency(two, x, (b,), (a,), 8).ok
    assert verify_omega_consistency(two, y, (), (b,), 6).ok


def test_identity_reading_of_the_observation_chain():
    # states are the depth-N observations themselves, stepped by rotation;
    # each stage must report exactly the restriction of the state, with
    # certainty, for every stage up to N
    for N in (1, 2, 3, 4):
        fam = final_sequence(F_AB, N)
        states = fam.carriers[N]
        base = apply_obj(F_AB, states)

        def rotate(w):
            labels = _labels(w)
            head, rest = labels[0], labels[1:]
            out = UNIT
            for lab in reversed(rest + [head]):
                out = Pair(lab, out)
            return out

        moves = {
            w: unit(POW_PLUS, base, Pair(w.left, rotate(w))) for w in states
        }
        system = System.build(POW_PLUS, F_AB, states, moves)
        table = stage_semantics(system, N)
        for n in range(N + 1):
            for w in states:
                expected = unit(POW_PLUS, fam.carriers[n], fam.restrict(N, n, w))
                assert table.value(n, w) == expected


def test_oracle_equivalence_on_examples():
    system = two_state_system()
    table = stage_semantics(system, 5)
    for n in range(6):
        for s in system.states:
            assert set(table.value(n, s).entries) == path_language(system, s, n)
    sysd = dist_system()
    tabled = stage_semantics(sysd, 5)
    for n in range(6):
        for s in sysd.states:
            assert dict(tabled.value(n, s).entries) == path_distribution(sysd, s, n)


def test_oracle_equivalence_with_termination():
    functor = label_id_term(AB)
    states = FinSet([x, y])
    base = apply_obj(functor, states)
    system = System.build(
        POW_PLUS,
        functor,
        states,
        {
            x: set_value(POW_PLUS, base, [Tag(0, Pair(a, y)), Tag(1, UNIT)]),
            y: set_value(POW_PLUS, base, [Tag(0, Pair(b, x))]),
        },
    )
    table = stage_semantics(system, 5)
    for n in range(6):
        for s in states:
            assert set(table.value(n, s).entries) == path_language(system, s, n)
    assert check_coherence(table).ok


def test_exhaustive_tiny_systems_match_oracle():
    # every two-state system over two labels, at small weight grain
    from kltrace.effects import iter_values

    base = apply_obj(F_AB, XY)
    for kind, bound in ((POW, None), (POW_PLUS, None), (DIST, 2)):
        values = list(iter_values(kind, base, bound))
        for vx in values:
            for vy in values:
                system = System.build(kind, F_AB, XY, {x: vx, y: vy})
                table = stage_semantics(system, 3)
                memo = {}
                for n in range(1, 4):
                    for s in XY:
                        if kind.is_set_kind:
                            assert set(table.value(n, s).entries) == path_language(
                                system, s, n, memo
                            )
                        else:
                            assert dict(table.value(n, s).entries) == path_distribution(
                                system, s, n, memo
                            )


def test_exhaustive_subdist_coherence_matches_reachable_leaks():
    # coherence fails exactly when a positive path of length 1..depth-1
    # reaches a state whose step keeps less than full mass
    from kltrace.effects import EffectKind, iter_values

    base = apply_obj(F_AB, XY)
    depth = 3
    values = list(iter_values(EffectKind.SUB_DIST, base, 2))
    for vx in values:
        for vy in values:
            system = System.build(EffectKind.SUB_DIST, F_AB, XY, {x: vx, y: vy})
            verdict = check_coherence(stage_semantics(system, depth)).ok

            def leaks(start):
                frontier = {start}
                for _ in range(1, depth):
                    frontier = {
                        e.right for q in frontier for e in system.step(q).support
                    }
                    if any(system.step(q).mass() != 1 for q in frontier):
                        return True
                return False

            assert verdict == (not any(leaks(s) for s in XY))


def test_system_validation():
    base = apply_obj(F_AB, XY)
    with pytest.raises(ValueError):
        System.build(
            POW_PLUS,
            F_AB,
            XY,
            {x: set_value(POW_PLUS, base, [Pair(a, y)])},
        )
    wrong_base = set_value(POW_PLUS, apply_obj(F_AB, FinSet([x])), [Pair(a, x)])
    with pytest.raises(ValueError):
        System.build(POW_PLUS, F_AB, XY, {x: wrong_base, y: wrong_base})
