"""Shape transformations: frozen output examples and model transport."""

import random

import pytest

from helpers import (
    brute_force_model,
    enumerate_lassos,
    eval_conjunctive,
    random_fragment_sentence,
    random_qf,
    random_sentence,
)
from hyperltl.errors import NotAModel, ShapeError, SizeBlowup
from hyperltl.formula import (
    Always,
    And,
    Atom,
    Eventually,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    Sentence,
    Until,
    Xor,
    conj,
    core_normalize,
    disj,
    in_fragment,
    marker,
    prefix_kinds,
    props,
    subformulas,
    substitute,
    temporal_depth,
)
from hyperltl.semantics import LassoTrace, eval_sentence, project_model
from hyperltl.transform import (
    _critical_index,
    eliminate_x,
    expand_quantifiers,
    merge_model,
    merge_universals,
    normalize_forall2_exists,
    reduce_depth2,
    to_forall_exists,
    witness_model_depth2,
    witness_model_forall_exists,
    x_padding_trace,
)


def lt(stem, loop):
    return LassoTrace.make([frozenset(v) for v in stem], [frozenset(v) for v in loop])


class TestExpandQuantifiers:
    def test_forall_becomes_conjunction(self):
        s = Sentence((("forall", "p"),), Always(Atom("a", "p")))
        out = expand_quantifiers(s, 2)
        assert out == Sentence(
            (("exists", "p1"), ("exists", "p2")),
            And(Always(Atom("a", "p1")), Always(Atom("a", "p2"))),
        )

    def test_single_exists_is_a_rename(self):
        s = Sentence((("exists", "p"),), Next(Atom("a", "p")))
        assert expand_quantifiers(s, 1) == Sentence(
            (("exists", "p1"),), Next(Atom("a", "p1"))
        )

    def test_forall_exists_unfolds_to_conj_of_disj(self):
        psi = Implies(Atom("a", "p"), Atom("a", "t"))
        s = Sentence((("forall", "p"), ("exists", "t")), psi)
        inner = Or(substitute(psi, "t", "p1"), substitute(psi, "t", "p2"))
        expect = And(substitute(inner, "p", "p1"), substitute(inner, "p", "p2"))
        out = expand_quantifiers(s, 2)
        assert out.matrix == expect
        assert out.prefix == (("exists", "p1"), ("exists", "p2"))

    def test_node_cap(self):
        prefix = tuple(("forall", f"p{i}") for i in range(4))
        s = Sentence(prefix, Atom("a", "p0"))
        with pytest.raises(SizeBlowup):
            expand_quantifiers(s, 10, node_cap=100)

    def test_rejects_k_zero(self):
        s = Sentence((("exists", "p"),), Atom("a", "p"))
        with pytest.raises(ValueError):
            expand_quantifiers(s, 0)

    def test_bounded_model_equivalence(self):
        rng = random.Random(20824)
        for _ in range(150):
            s = random_sentence(rng, max_quants=2, depth=2, props="a")
            k = 1 + rng.randrange(2)
            e = expand_quantifiers(s, k)
            assert prefix_kinds(e) == "E" * k
            a = brute_force_model(s, "a", k, 2)
            b = brute_force_model(e, "a", k, 2)
            assert (a is None) == (b is None)


class TestReduceDepth2:
    def test_next_marker_definition(self):
        s = Sentence((("exists", "p"),), Next(Atom("a", "p")))
        psi = core_normalize(s.matrix)
        out = reduce_depth2(s)
        expect = Always(
            Iff(Atom(marker(psi), "w"), Next(Atom(marker(Atom("a", "p")), "w")))
        )
        assert expect in subformulas(out.matrix)
        assert out.prefix == (("exists", "p"), ("exists", "w"))
        assert out.matrix.left == Atom(marker(psi), "w")

    def test_until_marker_definition(self):
        s = Sentence((("exists", "p"),), Until(Atom("a", "p"), Atom("b", "p")))
        out = reduce_depth2(s)
        expect = Always(
            Iff(
                Atom(marker(s.matrix), "w"),
                Until(Atom(marker(Atom("a", "p")), "w"), Atom(marker(Atom("b", "p")), "w")),
            )
        )
        assert expect in subformulas(out.matrix)

    def test_measures_and_namespace(self):
        rng = random.Random(3311)
        for _ in range(50):
            s = random_sentence(rng, max_quants=2, depth=3)
            out = reduce_depth2(s)
            assert temporal_depth(out) <= 2
            assert out.prefix[:-1] == s.prefix
            assert out.prefix[-1][0] == "exists"
            assert all(p.startswith("@") for p in props(out.matrix) - props(s.matrix))

    def test_shallow_input_still_transformed(self):
        s = Sentence((("forall", "p"),), Eventually(Atom("a", "p")))
        out = reduce_depth2(s)
        assert out != s and len(out.prefix) == 2

    def test_transport_double_eventually(self):
        s = Sentence((("exists", "p"),), Eventually(Eventually(Atom("a", "p"))))
        T = frozenset((lt([], [{"a"}]),))
        W = witness_model_depth2(T, s)
        assert eval_sentence(reduce_depth2(s), W)


class TestWitnessModelDepth2:
    def test_rejects_non_model(self):
        s = Sentence((("exists", "p"),), Eventually(Atom("a", "p")))
        with pytest.raises(NotAModel):
            witness_model_depth2(frozenset((lt([], [set()]),)), s)

    def test_eventually_marker_holds_everywhere(self):
        s = Sentence((("exists", "p"),), Eventually(Atom("a", "p")))
        T = frozenset((lt([], [{"a"}]),))
        (w,) = witness_model_depth2(T, s)
        m = marker(core_normalize(s.matrix))
        assert all(m in v for v in w.stem) and all(m in v for v in w.loop)
        assert project_model({w}, {"a"}) == T

    def test_transport_random(self):
        rng = random.Random(90412)
        lassos = enumerate_lassos("ab", 2)
        hits = 0
        for _ in range(400):
            if hits >= 50:
                break
            s = random_sentence(rng, max_quants=2, depth=2)
            T = frozenset(rng.sample(lassos, 1 + rng.randrange(2)))
            if not eval_sentence(s, T):
                continue
            hits += 1
            W = witness_model_depth2(T, s)
            assert len(W) <= len(T) ** len(s.prefix)
            assert eval_sentence(s, project_model(W, props(s.matrix)) or {lt([], [set()])})
        assert hits >= 50

    def test_converse_on_hand_model(self):
        s = Sentence((("exists", "p"),), Atom("a", "p"))
        r = reduce_depth2(s)
        m = marker(Atom("a", "p"))
        T = frozenset((lt([], [{"a", m}]),))
        assert eval_sentence(r, T)
        assert eval_sentence(s, project_model(T, {"a"}))


class TestToForallExists:
    def test_no_critical_unchanged(self):
        for prefix in (
            (("forall", "p"), ("exists", "t")),
            (("forall", "p"), ("forall", "t")),
            (("exists", "p"), ("exists", "t")),
        ):
            s = Sentence(prefix, Atom("a", "p"))
            assert to_forall_exists(s) is s

    def test_single_round_shape(self):
        psi = Always(Implies(Atom("a", "p"), Atom("a", "t")))
        s = Sentence((("exists", "p"), ("forall", "t")), psi)
        out = to_forall_exists(s)
        expect = Sentence(
            (("forall", "p"), ("forall", "t"), ("exists", "pp")),
            And(
                Eventually(Atom("@sk1_1", "pp")),
                Implies(Eventually(Atom("@sk1_1", "p")), psi),
            ),
        )
        assert out == expect

    def test_round_per_critical_existential(self):
        prefix = (("exists", "p0"), ("forall", "p1"), ("exists", "p2"), ("forall", "p3"))
        s = Sentence(prefix, Atom("a", "p0"))
        assert _critical_index(prefix) == 0
        out = to_forall_exists(s)
        ps = props(out.matrix)
        assert any(p.startswith("@sk1_") for p in ps)
        assert any(p.startswith("@sk2_") for p in ps)
        assert not any(p.startswith("@sk3_") for p in ps)

    def test_measure_contracts(self):
        rng = random.Random(7120)
        import re

        for _ in range(60):
            s = random_sentence(rng, max_quants=3, depth=2)
            out = to_forall_exists(s)
            assert re.fullmatch("A*E*", prefix_kinds(out))
            if _critical_index(s.prefix) is None:
                assert temporal_depth(out) == temporal_depth(s)
            else:
                assert temporal_depth(out) == max(temporal_depth(s), 1)

    def test_skolem_transport_random(self):
        rng = random.Random(815106)
        lassos = enumerate_lassos("a", 2)
        hits = critical_hits = 0
        for _ in range(400):
            if hits >= 40 and critical_hits >= 12:
                break
            s = random_sentence(rng, max_quants=3, depth=2, props="a")
            T = frozenset(rng.sample(lassos, 1 + rng.randrange(2)))
            if not eval_sentence(s, T):
                continue
            hits += 1
            critical = _critical_index(s.prefix) is not None
            critical_hits += critical
            W = witness_model_forall_exists(T, s)
            assert eval_sentence(to_forall_exists(s), W)
            if critical:
                assert project_model(W, props(s.matrix) | {"a"}) == T
            else:
                assert W == T
        assert hits >= 40 and critical_hits >= 12


class TestMergeUniversals:
    def test_two_or_fewer_universals_identity(self):
        for prefix in (
            (("forall", "p"), ("forall", "t")),
            (("forall", "p"), ("exists", "t")),
            (("exists", "p"),),
        ):
            s = Sentence(prefix, Atom("a", "p"))
            assert merge_universals(s) is s

    def test_shape_error(self):
        s = Sentence(
            (("forall", "p"), ("exists", "t"), ("forall", "q")), Atom("a", "p")
        )
        with pytest.raises(ShapeError):
            merge_universals(s)

    def test_three_universals_two_plus_nine(self):
        prefix = tuple(("forall", f"p{i}") for i in range(3))
        s = Sentence(prefix, And(Atom("a", "p0"), Atom("a", "p2")))
        out = merge_universals(s)
        assert prefix_kinds(out) == "AA" + "E" * 9
        assert out.matrix.right == And(Atom("@x1_a", "u"), Atom("@x3_a", "u"))

    def test_trailing_existentials_read_first_coordinate(self):
        prefix = tuple(("forall", f"p{i}") for i in range(3)) + (("exists", "q"),)
        s = Sentence(prefix, Implies(Atom("b", "p1"), Atom("b", "q")))
        out = merge_universals(s)
        assert out.matrix.right == Implies(Atom("@x2_b", "u"), Atom("@x1_b", "q"))
        assert out.prefix[2] == ("exists", "q")

    def test_merged_model_propositions(self):
        t = lt([{"a"}], [set()])
        (m,) = merge_model({t}, 2)
        assert m == lt([{"@x1_a", "@x2_a"}], [set()])

    def test_transport_iff(self):
        rng = random.Random(6120)
        lassos = enumerate_lassos("a", 2)
        for i in range(26):
            trail = rng.randrange(2)
            prefix = tuple(("forall", f"p{i}") for i in range(3)) + tuple(
                ("exists", f"q{i}") for i in range(trail)
            )
            matrix = random_qf(rng, 2, tuple(v for _, v in prefix), props="a")
            s = Sentence(prefix, matrix)
            size = 3 if i < 2 else 1 + rng.randrange(2)
            T = frozenset(rng.sample(lassos, size))
            lhs = eval_sentence(s, T)
            rhs = eval_conjunctive(merge_universals(s), merge_model(T, 3))
            assert lhs == rhs

    def test_conjunctive_evaluator_agrees(self):
        rng = random.Random(44)
        lassos = enumerate_lassos("ab", 2)
        for _ in range(80):
            s = random_sentence(rng, max_quants=3, depth=2)
            T = frozenset(rng.sample(lassos, 1 + rng.randrange(2)))
            assert eval_conjunctive(s, T) == eval_sentence(s, T)


class TestEliminateX:
    def test_shape_and_fragment_errors(self):
        with pytest.raises(ShapeError):
            eliminate_x(Sentence((("exists", "p"),), Eventually(Atom("a", "p"))))
        with pytest.raises(ShapeError):
            eliminate_x(
                Sentence(
                    (("forall", "p"), ("forall", "t")), Eventually(Atom("a", "p"))
                )
            )
        with pytest.raises(ShapeError):
            eliminate_x(
                Sentence(
                    (("forall", "p"),), Until(Atom("a", "p"), Atom("b", "p"))
                )
            )

    def test_double_next_example(self):
        s = Sentence(
            (("exists", "t1"), ("forall", "p")), Next(Next(Atom("a", "p")))
        )
        out = eliminate_x(s)
        marks = ["@m0", "@m1", "@m2"]
        guard = Eventually(
            disj(
                [Xor(Atom("a", "p"), Atom("a", "t0"))]
                + [Xor(Atom(m, "p"), Atom(m, "t0")) for m in marks]
            )
        )
        expect = Sentence(
            (("exists", "t0"), ("exists", "t1"), ("forall", "p")),
            conj(
                [Eventually(Atom(m, "t0")) for m in marks]
                + [Always(Not(disj([Atom(m, "t1") for m in marks])))]
                + [
                    Implies(
                        guard,
                        Always(Implies(Atom("@m2", "t0"), Atom("a", "p"))),
                    )
                ]
            ),
        )
        assert out == expect

    def test_no_next_single_marker(self):
        psi = And(Eventually(Atom("a", "t1")), Always(Atom("b", "p")))
        s = Sentence((("exists", "t1"), ("forall", "p")), psi)
        out = eliminate_x(s)
        guard = Eventually(
            disj(
                [Xor(Atom("a", "p"), Atom("a", "t0")),
                 Xor(Atom("b", "p"), Atom("b", "t0")),
                 Xor(Atom("@m0", "p"), Atom("@m0", "t0"))]
            )
        )
        expect = Sentence(
            (("exists", "t0"), ("exists", "t1"), ("forall", "p")),
            conj(
                [
                    Eventually(Atom("@m0", "t0")),
                    Always(Not(Atom("@m0", "t1"))),
                    Implies(guard, psi),
                ]
            ),
        )
        assert out == expect

    def test_output_fragment_and_prefix(self):
        import re

        rng = random.Random(2218)
        for _ in range(60):
            s = random_fragment_sentence(rng)
            out = eliminate_x(s)
            assert in_fragment(out, "FG1")
            assert re.fullmatch("E*AE*", prefix_kinds(out))
            tail = out.prefix[1:]
            if not any(kind == "exists" for kind, _ in s.prefix):
                assert tail and tail[0][0] == "exists"
                tail = tail[1:]
            assert tail == s.prefix

    def test_padding_trace(self):
        s = Sentence(
            (("exists", "t1"), ("forall", "p")), Next(Next(Atom("a", "p")))
        )
        assert x_padding_trace(s) == lt([{"@m0"}, {"@m1"}, {"@m2"}], [set()])

    def test_transport_iff_random(self):
        rng = random.Random(4110)
        lassos = enumerate_lassos("ab", 2)
        for _ in range(60):
            s = random_fragment_sentence(rng, max_lead=1, max_trail=1)
            T = frozenset(rng.sample(lassos, 1 + rng.randrange(2)))
            lhs = eval_sentence(s, T)
            rhs = eval_sentence(
                eliminate_x(s), T | {x_padding_trace(s)}
            )
            assert lhs == rhs

    def test_existentials_cannot_pose_as_marker_trace(self):
        s = Sentence(
            (("exists", "t1"), ("forall", "p")),
            And(Not(Atom("a", "t1")), Atom("a", "p")),
        )
        out = eliminate_x(s)
        bad = frozenset((lt([], [{"@m0"}]), lt([], [{"a"}])))
        assert not eval_sentence(out, bad)
        assert brute_force_model(out, ("a", "@m0"), 2, 2) is None

    def test_marker_trace_alone_is_no_model(self):
        # Purely universal input: the output must not be satisfiable by the
        # marker trace exempting itself from the guard.
        s = Sentence(
            (("forall", "p"),), And(Atom("a", "p"), Not(Atom("a", "p")))
        )
        out = eliminate_x(s)
        assert not eval_sentence(out, frozenset((x_padding_trace(s),)))
        assert brute_force_model(out, ("a", "@m0"), 2, 2) is None

    def test_pure_forall_transport(self):
        s = Sentence((("forall", "p"),), Atom("a", "p"))
        out = eliminate_x(s)
        pad = x_padding_trace(s)
        good = frozenset((lt([], [{"a"}]),))
        mixed = frozenset((lt([], [{"a"}]), lt([], [set(), {"a"}])))
        assert eval_sentence(out, good | {pad})
        assert not eval_sentence(out, mixed | {pad})
        assert eval_sentence(s, good) and not eval_sentence(s, mixed)


class TestNormalizeForall2Exists:
    def test_alternating_input(self):
        import re

        s = Sentence(
            (("exists", "p"), ("forall", "t")),
            Eventually(Always(Atom("a", "p"))),
        )
        out = normalize_forall2_exists(s)
        assert re.fullmatch("A{0,2}E*", prefix_kinds(out))
        assert temporal_depth(out) <= 2

    def test_existential_input_stays_existential(self):
        s = Sentence(
            (("exists", "p"), ("exists", "t")),
            Until(Atom("a", "p"), Atom("b", "t")),
        )
        out = normalize_forall2_exists(s)
        assert set(prefix_kinds(out)) <= {"E"}
        assert temporal_depth(out) <= 2

    def test_depth_zero_input(self):
        prefix = tuple(("forall", f"p{i}") for i in range(3))
        s = Sentence(prefix, And(Atom("a", "p0"), Atom("a", "p1")))
        out = normalize_forall2_exists(s)
        assert temporal_depth(out) <= 2

    def test_skip_if_shallow(self):
        s = Sentence(
            (("forall", "p"), ("exists", "t")),
            Always(Implies(Atom("a", "p"), Atom("a", "t"))),
        )
        assert normalize_forall2_exists(s, skip_shallow=True) is s
        assert normalize_forall2_exists(s) != s

    def test_random_measure_contract(self):
        import re

        rng = random.Random(515)
        for _ in range(25):
            s = random_sentence(rng, max_quants=3, depth=2)
            out = normalize_forall2_exists(s)
            assert re.fullmatch("A{0,2}E*", prefix_kinds(out))
            assert temporal_depth(out) <= 2
