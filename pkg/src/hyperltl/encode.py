"""Hardness constructions: correspondence problems, counter machines, and
star-free expressions rendered as sentences, plus their reference models.

The correspondence encoder lays every trace out as two length-l blocks (the
padded or windowed word pair), a binary rank block starting at offset 2l, and
a dollar tail. Rank arithmetic is positionwise over that aligned offset:
equality is an agreement invariant, increment is a flip-zone-then-carry
pattern phrased with until.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula as F
from .errors import EmptyWordPair, NotASolution, NotTotallyOrdered, UnknownOpcode
from .semantics import KripkeStructure, LassoTrace, align, value_at


@dataclass(frozen=True)
class PcpInstance:
    """Word pairs (u_m, u'_m) over a lowercase alphabet."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("instance needs at least one pair")
        for u, v in self.pairs:
            if not u or not v:
                raise EmptyWordPair("words in a pair must be nonempty")
            if not (u.isalpha() and u.islower() and v.isalpha() and v.islower()):
                raise ValueError(f"words must be lowercase letters: {u!r}/{v!r}")

    @property
    def alphabet(self) -> tuple[str, ...]:
        letters = set()
        for u, v in self.pairs:
            letters.update(u)
            letters.update(v)
        return tuple(sorted(letters))

    @property
    def max_len(self) -> int:
        return max(max(len(u), len(v)) for u, v in self.pairs)


@dataclass(frozen=True)
class MinskyMachine:
    """Two-counter machine: states, initial state, rules (from, counter, op, to)."""

    states: tuple[str, ...]
    initial: str
    rules: tuple[tuple[str, int, str, str], ...]

    def __post_init__(self):
        declared = set(self.states)
        if self.initial not in declared:
            raise ValueError(f"initial state {self.initial!r} undeclared")
        for frm, ctr, op, to in self.rules:
            if op not in ("inc", "dec", "zero"):
                raise UnknownOpcode(f"unknown operation {op!r}")
            if ctr not in (1, 2):
                raise ValueError(f"counter must be 1 or 2, got {ctr!r}")
            if frm not in declared or to not in declared:
                raise ValueError(f"rule endpoint undeclared in {frm!r}->{to!r}")
        for s in self.states:
            if s in ("1", "2"):
                raise ValueError("state names '1'/'2' collide with counter propositions")


@dataclass(frozen=True)
class SFEmpty:
    pass


@dataclass(frozen=True)
class SFEps:
    pass


@dataclass(frozen=True)
class SFLetter:
    letter: str

    def __post_init__(self):
        if self.letter not in ("a", "b"):
            raise ValueError("alphabet is fixed to {a, b}")


@dataclass(frozen=True)
class SFSum:
    left: object
    right: object


@dataclass(frozen=True)
class SFConcat:
    left: object
    right: object


@dataclass(frozen=True)
class SFNeg:
    body: object


StarFreeExpr = (SFEmpty, SFEps, SFLetter, SFSum, SFConcat, SFNeg)


# ---------------------------------------------------------------------------
# correspondence instances


def _prop(ch: str) -> str:
    return "hash" if ch == "#" else ch


def _bar(ch: str) -> str:
    return ch + "bar"


def _pad_props(p: PcpInstance, w: str) -> tuple[str, ...]:
    return tuple(_prop(c) for c in w) + ("hash",) * (p.max_len - len(w))


def _win_props(p: PcpInstance, w: str, j: int) -> tuple[str, ...]:
    out = list(_pad_props(p, w))
    out[j] = _bar(w[j])
    return tuple(out)


def _bits(r: int) -> str:
    # least significant bit first, no trailing zeros; r = 0 stays "0"
    return bin(r)[2:][::-1]


def pcp_alphabet(p: PcpInstance) -> tuple[str, ...]:
    letters = list(p.alphabet)
    return tuple(
        letters
        + [_bar(c) for c in letters]
        + ["hash", "dollar", "0", "1"]
        + ["00", "01", "10", "11"]
    )


def _block(props, var: str, offset: int) -> F.Formula:
    return F.conj(
        [F.next_power(F.Atom(q, var), offset + i) for i, q in enumerate(props)]
    )


def _bit_tail(p: PcpInstance, v: str) -> F.Formula:
    # a nonempty bit word with no trailing zeros (or the single word "0"),
    # then dollars forever
    end = F.Next(F.Always(F.Atom("dollar", v)))
    bit = F.Or(F.Atom("0", v), F.Atom("1", v))
    single = F.And(F.Atom("0", v), end)
    carry = F.Until(bit, F.And(F.Atom("1", v), end))
    return F.next_power(F.Or(single, carry), 2 * p.max_len)


def _pair_tail(p: PcpInstance, v: str) -> F.Formula:
    # a nonempty word of bit pairs whose last pair is not (0,0) (or is the
    # single pair (0,0)), then dollars forever
    end = F.Next(F.Always(F.Atom("dollar", v)))
    pair = F.disj([F.Atom(q, v) for q in ("00", "01", "10", "11")])
    live = F.disj([F.Atom(q, v) for q in ("01", "10", "11")])
    single = F.And(F.Atom("00", v), end)
    carry = F.Until(pair, F.And(live, end))
    return F.next_power(F.Or(single, carry), 2 * p.max_len)


def _type_one(p: PcpInstance, v: str) -> F.Formula:
    ell = p.max_len
    words = F.disj(
        [
            F.And(_block(_pad_props(p, u), v, 0), _block(_pad_props(p, up), v, ell))
            for u, up in p.pairs
        ]
    )
    return F.And(words, _bit_tail(p, v))


def _windows_first(p: PcpInstance):
    return [(u, j) for u, _ in p.pairs for j in range(len(u))]


def _windows_second(p: PcpInstance):
    return [(up, j) for _, up in p.pairs for j in range(len(up))]


def _type_two(p: PcpInstance, v: str) -> F.Formula:
    ell = p.max_len
    win1 = F.disj([_block(_win_props(p, u, j), v, 0) for u, j in _windows_first(p)])
    win2 = F.disj([_block(_win_props(p, u, j), v, ell) for u, j in _windows_second(p)])
    return F.conj([win1, win2, _pair_tail(p, v)])


def _first_one(v: str) -> F.Formula:
    return F.Or(F.Atom("10", v), F.Atom("11", v))


def _second_one(v: str) -> F.Formula:
    return F.Or(F.Atom("01", v), F.Atom("11", v))


def _rank_eq(one, a: str, b: str) -> F.Formula:
    return F.Always(F.Iff(one(a), one(b)))


def _rank_inc(p: PcpInstance, one, lo: str, hi: str) -> F.Formula:
    # rank(hi) = rank(lo) + 1: flip the leading ones of lo to zeros, set the
    # first zero (or the position past lo's word) to one, agree afterwards
    flip = F.And(one(lo), F.Not(one(hi)))
    fire = F.conj(
        [F.Not(one(lo)), one(hi), F.Next(F.Always(F.Iff(one(lo), one(hi))))]
    )
    return F.next_power(F.Until(flip, fire), 2 * p.max_len)


def _bit_one(v: str) -> F.Formula:
    return F.Atom("1", v)


def _req1(p: PcpInstance, v: str) -> F.Formula:
    ap = pcp_alphabet(p)
    cases = []
    for q in ap:
        others = [F.Not(F.Atom(o, v)) for o in ap if o != q]
        cases.append(F.conj([F.Atom(q, v)] + others))
    return F.Always(F.disj(cases))


def _req2(p: PcpInstance, v: str) -> F.Formula:
    return F.Or(_type_one(p, v), _type_two(p, v))


def _req3(p: PcpInstance, a: str, b: str) -> F.Formula:
    same_rank = F.Always(
        F.And(
            F.Iff(F.Atom("0", a), F.Atom("0", b)),
            F.Iff(F.Atom("1", a), F.Atom("1", b)),
        )
    )
    same_trace = F.Always(
        F.conj([F.Iff(F.Atom(q, a), F.Atom(q, b)) for q in pcp_alphabet(p)])
    )
    return F.Implies(
        F.conj([_type_one(p, a), _type_one(p, b), same_rank]), same_trace
    )


def _req4(p: PcpInstance, a: str, b: str) -> F.Formula:
    positive = F.And(_type_one(p, a), F.Eventually(F.Atom("1", a)))
    below = F.And(_type_one(p, b), _rank_inc(p, _bit_one, b, a))
    return F.Implies(positive, below)


def _req5(p: PcpInstance, v: str) -> F.Formula:
    ell = p.max_len
    start = F.disj(
        [
            F.And(
                _block(_win_props(p, u, 0), v, 0),
                _block(_win_props(p, up, 0), v, ell),
            )
            for u, up in p.pairs
        ]
    )
    zero = F.next_power(
        F.And(F.Atom("00", v), F.Next(F.Always(F.Atom("dollar", v)))), 2 * ell
    )
    return F.And(start, zero)


def _final(p: PcpInstance, v: str) -> F.Formula:
    ell = p.max_len
    last1 = F.disj(
        [_block(_win_props(p, u, len(u) - 1), v, 0) for u, _ in p.pairs]
    )
    last2 = F.disj(
        [_block(_win_props(p, up, len(up) - 1), v, ell) for _, up in p.pairs]
    )
    diagonal = F.Always(F.And(F.Not(F.Atom("01", v)), F.Not(F.Atom("10", v))))
    return F.conj([last1, last2, diagonal])


def _successor(p: PcpInstance, a: str, b: str) -> F.Formula:
    ell = p.max_len
    adv1 = F.disj(
        [
            F.And(
                _block(_win_props(p, u, j), a, 0), _block(_win_props(p, u, j + 1), b, 0)
            )
            for u, _ in p.pairs
            for j in range(len(u) - 1)
        ]
    )
    adv2 = F.disj(
        [
            F.And(
                _block(_win_props(p, up, j), a, ell),
                _block(_win_props(p, up, j + 1), b, ell),
            )
            for _, up in p.pairs
            for j in range(len(up) - 1)
        ]
    )
    last1 = F.disj([_block(_win_props(p, u, len(u) - 1), a, 0) for u, _ in p.pairs])
    last2 = F.disj(
        [_block(_win_props(p, up, len(up) - 1), a, ell) for _, up in p.pairs]
    )
    fresh1 = F.disj([_block(_win_props(p, u, 0), b, 0) for u, _ in p.pairs])
    fresh2 = F.disj([_block(_win_props(p, up, 0), b, ell) for _, up in p.pairs])
    eq1 = _rank_eq(_first_one, a, b)
    eq2 = _rank_eq(_second_one, a, b)
    inc1 = _rank_inc(p, _first_one, a, b)
    inc2 = _rank_inc(p, _second_one, a, b)
    split = F.next_power(
        F.Eventually(F.Or(F.Atom("01", a), F.Atom("10", a))), 2 * ell
    )
    both_step = F.conj([adv1, adv2, eq1, eq2])
    wrap_first = F.conj([last1, fresh1, adv2, inc1, eq2])
    wrap_second = F.conj([adv1, last2, fresh2, eq1, inc2])
    wrap_both = F.conj([last1, last2, fresh1, fresh2, split, inc1, inc2])
    return F.disj([both_step, wrap_first, wrap_second, wrap_both])


def _req6(p: PcpInstance, a: str, b: str) -> F.Formula:
    cont = F.Or(_final(p, a), F.And(_type_two(p, b), _successor(p, a, b)))
    return F.Implies(_type_two(p, a), cont)


def _req7(p: PcpInstance, a: str, b1: str, b2: str) -> F.Formula:
    ell = p.max_len

    def side(words, offset, witness, component):
        by_word = sorted(set(words))
        cases = []
        for w in by_word:
            wins = F.disj(
                [_block(_win_props(p, w, j), a, offset) for j in range(len(w))]
            )
            cases.append(F.And(wins, _block(_pad_props(p, w), witness, offset)))
        link = F.Always(F.Iff(F.Atom("1", witness), component(a)))
        return F.And(F.disj(cases), link)

    u_side = side([u for u, _ in p.pairs], 0, b1, _first_one)
    up_side = side([up for _, up in p.pairs], ell, b2, _second_one)
    have = F.conj([_type_one(p, b1), u_side, _type_one(p, b2), up_side])
    return F.Implies(_type_two(p, a), have)


def _req8(p: PcpInstance, v: str) -> F.Formula:
    ell = p.max_len
    cases = []
    for c in p.alphabet:
        in1 = F.disj([F.next_power(F.Atom(_bar(c), v), i) for i in range(ell)])
        in2 = F.disj([F.next_power(F.Atom(_bar(c), v), ell + i) for i in range(ell)])
        cases.append(F.And(in1, in2))
    return F.Implies(_type_two(p, v), F.disj(cases))


def pcp_requirements(p: PcpInstance) -> tuple[F.Sentence, ...]:
    """The eight requirement sentences, individually quantified."""
    A, E = "forall", "exists"
    return (
        F.Sentence(((A, "p1"),), _req1(p, "p1")),
        F.Sentence(((A, "p2"),), _req2(p, "p2")),
        F.Sentence(((A, "p3"), (A, "q3")), _req3(p, "p3", "q3")),
        F.Sentence(((A, "p4"), (E, "e4")), _req4(p, "p4", "e4")),
        F.Sentence(((E, "e5"),), _req5(p, "e5")),
        F.Sentence(((A, "p6"), (E, "e6")), _req6(p, "p6", "e6")),
        F.Sentence(((A, "p7"), (E, "e7"), (E, "f7")), _req7(p, "p7", "e7", "f7")),
        F.Sentence(((A, "p8"),), _req8(p, "p8")),
    )


def encode_pcp(p: PcpInstance) -> tuple[F.Sentence, int]:
    """Sentence whose bounded-lasso models are exactly the solution tableaux,
    together with the trace-length bound k = 2^n + 2l + 1."""
    reqs = pcp_requirements(p)
    prefix = []
    for s in reqs:
        prefix.extend(kv for kv in s.prefix if kv[0] == "forall")
    for s in reqs:
        prefix.extend(kv for kv in s.prefix if kv[0] == "exists")
    matrix = F.conj([s.matrix for s in reqs])
    k = 2 ** len(p.pairs) + 2 * p.max_len + 1
    return F.Sentence(tuple(prefix), matrix), k


def _type_one_trace(p: PcpInstance, m: int, r: int) -> LassoTrace:
    u, up = p.pairs[m - 1]
    stem = [{q} for q in _pad_props(p, u) + _pad_props(p, up)]
    stem += [{c} for c in _bits(r)]
    return LassoTrace.make(stem, [{"dollar"}])


def _type_two_trace(
    p: PcpInstance, m: int, j: int, mp: int, jp: int, r: int, rp: int
) -> LassoTrace:
    u = p.pairs[m - 1][0]
    up = p.pairs[mp - 1][1]
    stem = [{q} for q in _win_props(p, u, j) + _win_props(p, up, jp)]
    b, bp = _bits(r), _bits(rp)
    width = max(len(b), len(bp))
    b, bp = b.ljust(width, "0"), bp.ljust(width, "0")
    stem += [{x + y} for x, y in zip(b, bp)]
    return LassoTrace.make(stem, [{"dollar"}])


def _locate(lengths, i: int) -> tuple[int, int]:
    # the unique (r, j) with sum(lengths[:r]) + j = i and j < lengths[r]
    r = 0
    while i >= lengths[r]:
        i -= lengths[r]
        r += 1
    return r, i


def pcp_solution_model(p: PcpInstance, s) -> frozenset:
    """The reference tableau for a solution: one ranked pair trace per solution
    position, one windowed trace per letter of the matched word."""
    idx = [int(c) for c in s] if isinstance(s, str) else [int(c) for c in s]
    if not idx:
        raise NotASolution("empty index word")
    n = len(p.pairs)
    if any(not 1 <= m <= n for m in idx):
        raise NotASolution(f"index out of range 1..{n}")
    h = "".join(p.pairs[m - 1][0] for m in idx)
    hp = "".join(p.pairs[m - 1][1] for m in idx)
    if h != hp:
        raise NotASolution(f"images differ: {h!r} vs {hp!r}")
    traces = {_type_one_trace(p, m, r) for r, m in enumerate(idx)}
    first_lengths = [len(p.pairs[m - 1][0]) for m in idx]
    second_lengths = [len(p.pairs[m - 1][1]) for m in idx]
    for i in range(len(h)):
        r, j = _locate(first_lengths, i)
        rp, jp = _locate(second_lengths, i)
        traces.add(_type_two_trace(p, idx[r], j, idx[rp], jp, r, rp))
    return frozenset(traces)


# ---------------------------------------------------------------------------
# counter machines


def _other(i: int) -> str:
    return "2" if i == 1 else "1"


def _leq(i: int, a: str, b: str) -> F.Formula:
    return F.Always(F.Implies(F.Atom(str(i), a), F.Atom(str(i), b)))


def _less(i: int, a: str, b: str) -> F.Formula:
    strict = F.Eventually(F.And(F.Not(F.Atom(str(i), a)), F.Atom(str(i), b)))
    return F.And(_leq(i, a, b), strict)


def _total_order(i: int, a: str, b: str) -> F.Formula:
    return F.Or(_leq(i, a, b), _leq(i, b, a))


def _rule_body(i: int, op: str, a: str, b: str, z: str) -> F.Formula:
    if op == "zero":
        return F.Always(F.And(F.Not(F.Atom(str(i), a)), F.Not(F.Atom(str(i), b))))
    if op == "inc":
        gap = F.Or(_leq(i, z, a), _leq(i, b, z))
        return F.Forall(z, F.And(_less(i, a, b), gap))
    gap = F.Or(_leq(i, a, z), _leq(i, z, b))
    return F.Forall(z, F.And(_less(i, b, a), gap))


def encode_minsky(m: MinskyMachine) -> F.Sentence:
    """Nonhalting as satisfiability: traces encode configurations, counter
    values live in the counter proposition's positions, successors exist."""
    psi1 = F.Forall("t1", F.Forall("t2", _total_order(1, "t1", "t2")))
    psi2 = F.Forall("t3", F.Forall("t4", _total_order(2, "t3", "t4")))
    states = sorted(m.states)
    one_state = F.conj(
        [
            F.Implies(F.Atom(q, "t5"), F.Not(F.Atom(qq, "t5")))
            for q in states
            for qq in states
            if q != qq
        ]
    )
    phi1 = F.Forall("t5", one_state)
    phi2 = F.Exists(
        "w",
        F.And(
            F.Atom(m.initial, "w"),
            F.Always(F.And(F.Not(F.Atom("1", "w")), F.Not(F.Atom("2", "w")))),
        ),
    )
    steps = []
    for ridx, (frm, ctr, op, to) in enumerate(m.rules):
        agree = F.Always(
            F.Iff(F.Atom(_other(ctr), "pi"), F.Atom(_other(ctr), "rho"))
        )
        steps.append(
            F.conj(
                [
                    F.Atom(frm, "pi"),
                    F.Atom(to, "rho"),
                    _rule_body(ctr, op, "pi", "rho", f"z{ridx + 1}"),
                    agree,
                ]
            )
        )
    phi3 = F.Forall("pi", F.Exists("rho", F.disj(steps)))
    return F.prenex(F.conj([psi1, psi2, phi1, phi2, phi3]))


def _counter_positions(t: LassoTrace, i: int) -> frozenset[int]:
    prop = str(i)
    if any(prop in v for v in t.loop):
        raise ValueError(f"counter {i} recurs forever in {t!r}")
    return frozenset(j for j, v in enumerate(t.stem) if prop in v)


def _subset_on(i: int, a: LassoTrace, b: LassoTrace) -> bool:
    prop = str(i)
    S, P = align([a, b])
    return all(
        prop not in value_at(a, j) or prop in value_at(b, j) for j in range(S + P)
    )


def minsky_rank(T, t: LassoTrace, i: int) -> int:
    """Number of distinct counter position sets strictly below t's."""
    traces = list(T)
    if t not in traces:
        raise ValueError("rank is only defined for traces of the model")
    if i not in (1, 2):
        raise ValueError(f"counter must be 1 or 2, got {i!r}")
    for c in (1, 2):
        for x in traces:
            for y in traces:
                if not _subset_on(c, x, y) and not _subset_on(c, y, x):
                    raise NotTotallyOrdered(
                        f"counter {c} positions of {x!r} and {y!r} are incomparable"
                    )
    mine = _counter_positions(t, i)
    below = {
        _counter_positions(x, i)
        for x in traces
        if _counter_positions(x, i) < mine
    }
    return len(below)


# ---------------------------------------------------------------------------
# star-free expressions


def fig1_structure() -> KripkeStructure:
    """Five fully initial states: an l-prefix region, an a/b letter clique,
    an absorbing r, and a hash detour that only reaches r."""
    labels = {q: {q} for q in ("l", "a", "b", "r", "hash")}
    succ = {
        "l": ("l", "a", "b", "r", "hash"),
        "a": ("a", "b", "r"),
        "b": ("a", "b", "r"),
        "r": ("r",),
        "hash": ("r",),
    }
    return KripkeStructure(("l", "a", "b", "r", "hash"), labels.keys(), labels, succ)


def starfree_body(e, var: str, _used=None) -> F.Formula:
    """The word test for expression e on the trace bound to var; existential
    witnesses are drawn from the same trace set."""
    used = _used if _used is not None else {var}

    def same_blocks(w1: str, w2: str) -> F.Formula:
        return F.Always(
            F.And(
                F.Iff(F.Atom("l", w1), F.Atom("l", w2)),
                F.Iff(F.Atom("r", w1), F.Atom("r", w2)),
            )
        )

    if isinstance(e, SFEmpty):
        return F.And(F.Atom("a", var), F.Not(F.Atom("a", var)))
    if isinstance(e, SFEps):
        return F.Always(F.Or(F.Atom("l", var), F.Atom("r", var)))
    if isinstance(e, SFLetter):
        t = F.fresh_var("t", used)
        used.add(t)
        return F.Exists(
            t,
            F.conj(
                [
                    F.Eventually(F.Atom("hash", t)),
                    F.Eventually(F.Atom(e.letter, var)),
                    same_blocks(t, var),
                ]
            ),
        )
    if isinstance(e, SFSum):
        return F.Or(starfree_body(e.left, var, used), starfree_body(e.right, var, used))
    if isinstance(e, SFConcat):
        p1 = F.fresh_var("c1", used)
        used.add(p1)
        p2 = F.fresh_var("c2", used)
        used.add(p2)
        parts = F.conj(
            [
                F.Eventually(F.Atom("r", p1)),
                F.Eventually(F.Atom("r", p2)),
                F.Always(F.And(F.Not(F.Atom("hash", p1)), F.Not(F.Atom("hash", p2)))),
                starfree_body(e.left, p1, used),
                starfree_body(e.right, p2, used),
            ]
        )
        glue = F.And(
            F.Always(F.Iff(F.Atom("l", p2), F.Not(F.Atom("r", p1)))),
            F.Always(
                F.And(
                    F.Iff(F.Atom("a", var), F.Or(F.Atom("a", p1), F.Atom("a", p2))),
                    F.Iff(F.Atom("b", var), F.Or(F.Atom("b", p1), F.Atom("b", p2))),
                )
            ),
        )
        return F.Exists(p1, F.Exists(p2, F.And(parts, glue)))
    if isinstance(e, SFNeg):
        return F.Not(starfree_body(e.body, var, used))
    raise TypeError(f"not a star-free expression: {e!r}")


def encode_starfree(e) -> F.Sentence:
    """Universality of e over the fixed five-state structure's traces."""
    guard = F.disj(
        [
            F.Always(F.Not(F.Atom("r", "pi"))),
            F.Eventually(F.Atom("hash", "pi")),
            starfree_body(e, "pi"),
        ]
    )
    return F.prenex(F.Forall("pi", guard))
