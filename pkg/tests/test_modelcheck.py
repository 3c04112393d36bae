"""Structure checking against the exact finite-trace-set oracle."""

import random

import pytest

from hyperltl.errors import ComplementBlowup
from hyperltl.formula import (
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Iff,
    Implies,
    Not,
    Or,
    Sentence,
)
from hyperltl.modelcheck import modelcheck
from hyperltl.semantics import KripkeStructure, eval_sentence, kripke_lassos

from helpers import random_qf, random_sentence


def strict_extension():
    """Every trace has a companion whose a-positions strictly grow."""
    return Sentence(
        (("forall", "pi"), ("exists", "pi2")),
        And(
            Always(Implies(Atom("a", "pi"), Atom("a", "pi2"))),
            Eventually(And(Not(Atom("a", "pi")), Atom("a", "pi2"))),
        ),
    )


def noninterference():
    return Sentence(
        (("forall", "p"), ("forall", "q")),
        Implies(
            Always(Iff(Atom("pin", "p"), Atom("pin", "q"))),
            Always(Iff(Atom("out", "p"), Atom("out", "q"))),
        ),
    )


def chain_structure(labels):
    """Single path through the label list, then a self-loop on the last."""
    n = len(labels)
    states = [f"c{i}" for i in range(n)]
    succ = {f"c{i}": (f"c{i + 1}",) for i in range(n - 1)}
    succ[f"c{n - 1}"] = (f"c{n - 1}",)
    return KripkeStructure(states, {states[0]}, dict(zip(states, labels)), succ)


def fork_structure(root, left, right):
    """One root branching to two self-loop sinks."""
    return KripkeStructure(
        ["f0", "fa", "fb"],
        {"f0"},
        {"f0": root, "fa": left, "fb": right},
        {"f0": ("fa", "fb"), "fa": ("fa",), "fb": ("fb",)},
    )


SELF_LOOP_A = KripkeStructure(["s0"], ["s0"], {"s0": {"a"}}, {"s0": ("s0",)})

BRANCHING = KripkeStructure(
    ["s0", "s1"],
    {"s0"},
    {"s0": {"a"}, "s1": set()},
    {"s0": ("s0", "s1"), "s1": ("s1",)},
)


class TestExamples:
    def test_always_a_on_a_loop(self):
        s = Sentence((("forall", "pi"),), Always(Atom("a", "pi")))
        assert modelcheck(SELF_LOOP_A, s) is True

    def test_strict_extension_fails_on_a_loop(self):
        assert modelcheck(SELF_LOOP_A, strict_extension()) is False

    def test_strict_extension_fails_on_every_two_state_structure(self):
        # no finite structure realizes unbounded growth demands
        s = strict_extension()
        count = 0
        for lab0 in [set(), {"a"}]:
            for lab1 in [set(), {"a"}]:
                for succ0 in [("s0",), ("s1",), ("s0", "s1")]:
                    for succ1 in [("s0",), ("s1",), ("s0", "s1")]:
                        for init in [{"s0"}, {"s1"}, {"s0", "s1"}]:
                            k = KripkeStructure(
                                ["s0", "s1"],
                                init,
                                {"s0": lab0, "s1": lab1},
                                {"s0": succ0, "s1": succ1},
                            )
                            assert modelcheck(k, s) is False
                            count += 1
        assert count == 108

    def test_noninterference_leak_and_secure(self):
        # hidden initial choice drives the output: observable difference
        leak = KripkeStructure(
            ["s0", "s1"],
            {"s0", "s1"},
            {"s0": {"out"}, "s1": set()},
            {"s0": ("s0",), "s1": ("s1",)},
        )
        # output only mirrors the visible input
        secure = KripkeStructure(
            ["s0", "s1"],
            {"s0", "s1"},
            {"s0": {"pin", "out"}, "s1": set()},
            {"s0": ("s0",), "s1": ("s1",)},
        )
        assert modelcheck(leak, noninterference()) is False
        assert modelcheck(secure, noninterference()) is True

    def test_exists_vs_forall_over_two_initials(self):
        k = KripkeStructure(
            ["x", "y"],
            ["x", "y"],
            {"x": set(), "y": {"b"}},
            {"x": ("x",), "y": ("y",)},
        )
        holds = Sentence((("exists", "t"),), Eventually(Atom("b", "t")))
        fails = Sentence((("forall", "t"),), Eventually(Atom("b", "t")))
        assert modelcheck(k, holds) is True
        assert modelcheck(k, fails) is False


class TestFiniteTraceOracle:
    # chains and forks realize exactly their (stem<=3, loop<=3) lassos, so
    # direct evaluation over that finite set is a full reference semantics

    STRUCTURES = [
        chain_structure([{"a"}]),
        chain_structure([set(), {"a"}]),
        chain_structure([{"a"}, {"b"}, set()]),
        chain_structure([{"a", "b"}, {"a"}, {"b"}]),
        chain_structure([set(), {"b"}, {"a", "b"}]),
        fork_structure(set(), {"a"}, {"b"}),
        fork_structure({"a"}, {"a", "b"}, set()),
        fork_structure({"b"}, set(), {"a"}),
    ]

    def test_agrees_with_direct_evaluation(self):
        rng = random.Random(1204)
        checked = 0
        for k in self.STRUCTURES:
            traces = kripke_lassos(k, 3, 3)
            for _ in range(30):
                s = random_sentence(rng, max_quants=2, depth=1, props="ab")
                assert modelcheck(k, s) == eval_sentence(s, traces), str(s)
                checked += 1
        assert checked == 240

    def test_trace_sets_are_the_advertised_ones(self):
        assert len(kripke_lassos(chain_structure([set(), {"a"}]), 3, 3)) == 1
        assert len(kripke_lassos(fork_structure(set(), {"a"}, {"b"}), 3, 3)) == 2


class TestDuality:
    def test_forall_is_negated_exists(self):
        rng = random.Random(88)
        for _ in range(50):
            psi = random_qf(rng, 2, ("t",), "ab")
            a = Sentence((("forall", "t"),), psi)
            e = Sentence((("exists", "t"),), Not(psi))
            assert modelcheck(BRANCHING, a) == (not modelcheck(BRANCHING, e))

    def test_two_variable_duality(self):
        rng = random.Random(89)
        for _ in range(25):
            psi = random_qf(rng, 1, ("t", "u"), "ab")
            a = Sentence((("forall", "t"), ("exists", "u")), psi)
            e = Sentence((("exists", "t"), ("forall", "u")), Not(psi))
            assert modelcheck(BRANCHING, a) == (not modelcheck(BRANCHING, e))


class TestSamplingSoundness:
    def test_universal_verdicts_hold_on_trace_samples(self):
        rng = random.Random(90)
        traces = sorted(kripke_lassos(BRANCHING, 2, 2), key=lambda t: (t.stem, t.loop))
        for _ in range(60):
            n = rng.choice([1, 2])
            psi = random_qf(rng, 1, tuple(f"t{i}" for i in range(n)), "ab")
            s = Sentence(tuple(("forall", f"t{i}") for i in range(n)), psi)
            if modelcheck(BRANCHING, s):
                for t in traces:
                    assert eval_sentence(s, frozenset([t]))


class TestShapes:
    def test_closed_sentence(self):
        assert modelcheck(SELF_LOOP_A, Sentence((), TRUE)) is True
        assert modelcheck(SELF_LOOP_A, Sentence((), Not(TRUE))) is False

    def test_matrix_props_absent_from_structure_stay_false(self):
        s = Sentence((("forall", "t"),), Always(Not(Atom("zeta", "t"))))
        assert modelcheck(SELF_LOOP_A, s) is True
        e = Sentence((("exists", "t"),), Eventually(Atom("zeta", "t")))
        assert modelcheck(SELF_LOOP_A, e) is False

    def test_structure_labels_outside_matrix_are_ignored(self):
        k = KripkeStructure(
            ["u"], ["u"], {"u": {"a", "internal"}}, {"u": ("u",)}
        )
        s = Sentence((("forall", "t"),), Always(Atom("a", "t")))
        assert modelcheck(k, s) is True

    def test_three_blocks(self):
        s = Sentence(
            (("exists", "x"), ("forall", "y"), ("exists", "z")),
            Or(
                Always(Iff(Atom("a", "y"), Atom("a", "z"))),
                Eventually(Atom("a", "x")),
            ),
        )
        assert modelcheck(BRANCHING, s) is True


class TestBlowup:
    def test_cap_raises_with_offending_position(self):
        with pytest.raises(ComplementBlowup) as exc:
            modelcheck(BRANCHING, strict_extension(), cap=1)
        assert exc.value.context["position"] == 1

    def test_alternation_free_never_complements(self):
        s = Sentence(
            (("exists", "x"), ("exists", "y")),
            Eventually(And(Atom("a", "x"), Not(Atom("a", "y")))),
        )
        assert modelcheck(BRANCHING, s, cap=0) is True
        u = Sentence(
            (("forall", "x"), ("forall", "y")),
            Always(Implies(Atom("a", "y"), Atom("a", "x"))),
        )
        assert modelcheck(SELF_LOOP_A, u, cap=0) is True
