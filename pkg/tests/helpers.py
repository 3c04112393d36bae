"""Shared test utilities: seeded random generators and brute-force oracles.

Everything here is deliberately independent of the package internals it is
used to check: oracles unfold definitions directly.
"""

from __future__ import annotations

import itertools

from hyperltl.formula import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Exists,
    Forall,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    Sentence,
    Until,
    Xor,
    children,
    conj,
    free_vars,
)
from hyperltl.semantics import LassoTrace, eval_qf, eval_sentence


def random_formula(rng, depth, vars, quantified, next_binder=(0,)):
    """Seeded random formula; quantifiers only at boolean positions."""
    if depth == 0:
        if rng.random() < 0.25:
            return TRUE if rng.random() < 0.5 else FALSE
        return Atom(rng.choice("ab"), rng.choice(vars))
    ops = ["not", "and", "or", "implies", "iff", "xor", "next", "ev", "alw", "until", "leaf"]
    if quantified:
        ops += ["exists", "forall"]
    op = rng.choice(ops)
    sub = lambda: random_formula(rng, depth - 1, vars, quantified, next_binder)
    sub_qf = lambda: random_formula(rng, depth - 1, vars, False)
    if op == "leaf":
        return random_formula(rng, 0, vars, False)
    if op == "not":
        return Not(sub())
    if op == "and":
        return And(sub(), sub())
    if op == "or":
        return Or(sub(), sub())
    if op == "implies":
        return Implies(sub(), sub())
    if op == "iff":
        return Iff(sub(), sub())
    if op == "xor":
        return Xor(sub(), sub())
    if op == "next":
        return Next(sub_qf())
    if op == "ev":
        return Eventually(sub_qf())
    if op == "alw":
        return Always(sub_qf())
    if op == "until":
        return Until(sub_qf(), sub_qf())
    next_binder = (next_binder[0] + 1,)
    v = f"v{next_binder[0]}_{rng.randrange(1000)}"
    body = random_formula(rng, depth - 1, vars + (v,), quantified, next_binder)
    return Exists(v, body) if op == "exists" else Forall(v, body)


def random_qf(rng, depth, vars, props="ab", allow_x=True):
    """Quantifier-free random formula over the given trace variables."""
    if depth == 0:
        if rng.random() < 0.15:
            return TRUE if rng.random() < 0.5 else FALSE
        return Atom(rng.choice(props), rng.choice(vars))
    ops = ["not", "and", "or", "implies", "iff", "xor", "ev", "alw", "until", "leaf"]
    if allow_x:
        ops.append("next")
    op = rng.choice(ops)
    sub = lambda: random_qf(rng, depth - 1, vars, props, allow_x)
    if op == "leaf":
        return random_qf(rng, 0, vars, props, allow_x)
    if op == "not":
        return Not(sub())
    if op == "and":
        return And(sub(), sub())
    if op == "or":
        return Or(sub(), sub())
    if op == "implies":
        return Implies(sub(), sub())
    if op == "iff":
        return Iff(sub(), sub())
    if op == "xor":
        return Xor(sub(), sub())
    if op == "next":
        return Next(sub())
    if op == "ev":
        return Eventually(sub())
    if op == "alw":
        return Always(sub())
    return Until(sub(), sub())


def random_sentence(rng, max_quants=3, depth=3, props="ab"):
    n = rng.randrange(0, max_quants + 1)
    prefix = tuple(
        ("forall" if rng.random() < 0.5 else "exists", f"p{i}") for i in range(n)
    )
    vars = tuple(v for _, v in prefix)
    matrix = random_qf(rng, depth, vars or ("p0",), props)
    if not vars:
        matrix = close_matrix(matrix)
    return Sentence(prefix, matrix)


def close_matrix(f):
    """Replace atoms by constants so a matrix fits an empty prefix."""
    if isinstance(f, Atom):
        return TRUE
    kids = children(f)
    if not kids:
        return f
    if isinstance(f, (Exists, Forall)):
        return close_matrix(f.body)
    return type(f)(*(close_matrix(c) for c in kids))


def rebuild_nested(s: Sentence):
    f = s.matrix
    for kind, var in reversed(s.prefix):
        f = Forall(var, f) if kind == "forall" else Exists(var, f)
    return f


def all_valuations(props):
    props = sorted(props)
    for bits in itertools.product((False, True), repeat=len(props)):
        yield frozenset(p for p, b in zip(props, bits) if b)


def enumerate_lassos(props, max_total):
    """All canonical lassos with |stem| + |loop| <= max_total over `props`."""
    vals = list(all_valuations(props))
    out = set()
    for total in range(1, max_total + 1):
        for stem_len in range(0, total):
            loop_len = total - stem_len
            for stem in itertools.product(vals, repeat=stem_len):
                for loop in itertools.product(vals, repeat=loop_len):
                    out.add(LassoTrace.make(stem, loop))
    return sorted(out, key=lambda t: t.sort_key())


def brute_force_model(s: Sentence, props, max_traces, max_total):
    """Smallest model made of short lassos, or None; definition-unfolding search."""
    lassos = enumerate_lassos(props, max_total)
    for n in range(1, max_traces + 1):
        for combo in itertools.combinations(lassos, n):
            T = frozenset(combo)
            if eval_sentence(s, T):
                return T
    return None


def lasso_suffix_valuations(trace: LassoTrace, n: int):
    return [
        trace.stem[j] if j < len(trace.stem) else trace.loop[(j - len(trace.stem)) % len(trace.loop)]
        for j in range(n)
    ]


def naive_eval(f, traces, env, horizon_mult=3):
    """Reference semantics by direct unfolding on a long finite window.

    Only sound when the window covers stem + enough loop repetitions; used on
    tiny traces where S + 2P multiplied out stays small.
    """
    import math

    pool = list(traces) + list(env.values())
    S = max((len(t.stem) for t in pool), default=0)
    P = 1
    for t in pool:
        P = P * len(t.loop) // math.gcd(P, len(t.loop))
    N = S + horizon_mult * P

    from hyperltl.semantics import value_at

    def sat(g, j):
        if isinstance(g, Atom):
            return g.prop in value_at(env[g.var], j)
        if g is TRUE or g == TRUE:
            return True
        if g == FALSE:
            return False
        if isinstance(g, Not):
            return not sat(g.body, j)
        if isinstance(g, And):
            return sat(g.left, j) and sat(g.right, j)
        if isinstance(g, Or):
            return sat(g.left, j) or sat(g.right, j)
        if isinstance(g, Implies):
            return (not sat(g.left, j)) or sat(g.right, j)
        if isinstance(g, Iff):
            return sat(g.left, j) == sat(g.right, j)
        if isinstance(g, Xor):
            return sat(g.left, j) != sat(g.right, j)
        if isinstance(g, Next):
            return sat(g.body, j + 1)
        if isinstance(g, Eventually):
            return any(sat(g.body, i) for i in range(j, j + N))
        if isinstance(g, Always):
            return all(sat(g.body, i) for i in range(j, j + N))
        if isinstance(g, Until):
            for i in range(j, j + N):
                if sat(g.right, i):
                    return True
                if not sat(g.left, i):
                    return False
            return False
        if isinstance(g, Exists):
            return any(sat_with(g.body, g.var, t, j) for t in traces)
        if isinstance(g, Forall):
            return all(sat_with(g.body, g.var, t, j) for t in traces)
        raise TypeError(g)

    def sat_with(body, var, t, j):
        old = env.get(var)
        env[var] = t
        try:
            return sat(body, j)
        finally:
            if old is None:
                del env[var]
            else:
                env[var] = old

    return sat(f, 0)


def random_nba(rng, max_states, universe):
    """Random small Buchi automaton over the full alphabet of `universe`."""
    from hyperltl.automata import Nba, full_alphabet

    alphabet = full_alphabet(universe)
    n = rng.randrange(1, max_states + 1)
    delta = []
    for _ in range(n):
        row = {}
        for letter in alphabet:
            if rng.random() < 0.55:
                dsts = {rng.randrange(n) for _ in range(rng.randrange(1, 3))}
                row[letter] = frozenset(dsts)
        delta.append(row)
    initial = {0}
    accepting = {q for q in range(n) if rng.random() < 0.4}
    if not accepting:
        accepting = {rng.randrange(n)}
    return Nba(alphabet, n, initial, accepting, delta)


def random_lasso_letters(rng, alphabet, stem_max, loop_max):
    stem = [rng.choice(alphabet) for _ in range(rng.randrange(stem_max + 1))]
    loop = [rng.choice(alphabet) for _ in range(rng.randrange(1, loop_max + 1))]
    return stem, loop


def eval_conjunctive(s: Sentence, traces):
    """Same value as eval_sentence, but conjuncts are checked as soon as
    their variables are bound, pruning the quantifier search.  Affordable on
    sentences whose matrix is a large conjunction pinning most variables."""
    T = sorted(frozenset(traces), key=lambda t: t.sort_key())
    pos = {var: i for i, (_, var) in enumerate(s.prefix)}
    by_level = [[] for _ in s.prefix]
    stack, closed = [s.matrix], []
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack += [g.left, g.right]
            continue
        fv = free_vars(g)
        if fv:
            by_level[max(pos[v] for v in fv)].append((g, fv))
        else:
            closed.append(g)
    if not all(eval_qf(g, {}) for g in closed):
        return False

    def go(i, asg):
        if i == len(s.prefix):
            return True
        kind, var = s.prefix[i]
        for t in T:
            asg[var] = t
            sub = all(
                eval_qf(g, {v: asg[v] for v in fv}) for g, fv in by_level[i]
            ) and go(i + 1, asg)
            del asg[var]
            if kind == "forall" and not sub:
                return False
            if kind == "exists" and sub:
                return True
        return kind == "forall"

    return go(0, {})


def random_fragment_sentence(
    rng, props="ab", allow_x=True, allow_bare=True, max_lead=2, max_trail=2, depth=2
):
    """Random E*AE* sentence whose matrix combines F, G and X^k over
    propositional bodies (the unnested fragment).  allow_bare=False keeps
    every leaf under an F or G so no marker anchoring is ever needed."""
    lead = rng.randrange(max_lead + 1)
    trail = rng.randrange(max_trail + 1)
    prefix = (
        tuple(("exists", f"e{i}") for i in range(lead))
        + (("forall", "u0"),)
        + tuple(("exists", f"f{i}") for i in range(trail))
    )
    vars = tuple(v for _, v in prefix)

    def prop_combo(d):
        if d == 0 or rng.random() < 0.4:
            return Atom(rng.choice(props), rng.choice(vars))
        op = rng.choice(["and", "or", "not"])
        if op == "not":
            return Not(prop_combo(d - 1))
        return (And if op == "and" else Or)(prop_combo(d - 1), prop_combo(d - 1))

    def leaf():
        r = rng.random()
        if r < 0.35 or (not allow_bare and r < 0.5):
            return Eventually(prop_combo(1))
        if r < 0.7 or not allow_bare:
            return Always(prop_combo(1))
        if allow_x and r < 0.9:
            f = prop_combo(1)
            for _ in range(rng.randrange(1, 3)):
                f = Next(f)
            return f
        return prop_combo(1)

    def combo(d):
        if d == 0 or rng.random() < 0.45:
            return leaf()
        op = rng.choice(["and", "or", "not"])
        if op == "not":
            return Not(combo(d - 1))
        return (And if op == "and" else Or)(combo(d - 1), combo(d - 1))

    return Sentence(prefix, combo(depth))


def sf_member(w: str, e) -> bool:
    """Star-free membership by definition unfolding; Concat tries all splits."""
    from hyperltl.encode import SFConcat, SFEmpty, SFEps, SFLetter, SFNeg, SFSum

    if isinstance(e, SFEmpty):
        return False
    if isinstance(e, SFEps):
        return w == ""
    if isinstance(e, SFLetter):
        return w == e.letter
    if isinstance(e, SFSum):
        return sf_member(w, e.left) or sf_member(w, e.right)
    if isinstance(e, SFConcat):
        return any(
            sf_member(w[:i], e.left) and sf_member(w[i:], e.right)
            for i in range(len(w) + 1)
        )
    if isinstance(e, SFNeg):
        return not sf_member(w, e.body)
    raise TypeError(e)


def random_starfree(rng, size):
    """Seeded random star-free expression with `size` operator nodes."""
    from hyperltl.encode import SFConcat, SFEmpty, SFEps, SFLetter, SFNeg, SFSum

    if size <= 1:
        r = rng.random()
        if r < 0.35:
            return SFLetter("a")
        if r < 0.7:
            return SFLetter("b")
        if r < 0.85:
            return SFEps()
        return SFEmpty()
    op = rng.choice(["sum", "concat", "neg"])
    if op == "neg":
        return SFNeg(random_starfree(rng, size - 1))
    k = rng.randrange(1, size - 1) if size > 2 else 1
    cls = SFSum if op == "sum" else SFConcat
    return cls(random_starfree(rng, k), random_starfree(rng, size - 1 - k))


def word_trace(w: str, lead: int) -> LassoTrace:
    """The trace l^lead w r^omega encoding word w, or l^lead # r^omega."""
    stem = [{"l"}] * lead + [{"hash" if c == "#" else c} for c in w]
    return LassoTrace.make(stem, [{"r"}])


def starfree_sample(maxlen: int):
    """Word traces l^i v r^w for all |i| + |v| <= maxlen, plus every hash
    trace l^i # r^w with i <= maxlen.  Closed under the witnesses the word
    tests quantify over: hash traces for letter tests, split traces for
    concatenations."""
    out = set()
    for i in range(maxlen + 1):
        out.add(word_trace("#", i))
        for n in range(maxlen - i + 1):
            for v in itertools.product("ab", repeat=n):
                out.add(word_trace("".join(v), i))
    return frozenset(out)


def minsky_config_trace(q: str, n1: int, n2: int) -> LassoTrace:
    """Proof trace for configuration (q, n1, n2): state at position 0 only,
    counter i held for its value's first positions."""
    horizon = max(n1, n2, 1)
    stem = []
    for k in range(horizon):
        v = set()
        if k == 0:
            v.add(q)
        if k < n1:
            v.add("1")
        if k < n2:
            v.add("2")
        stem.append(v)
    return LassoTrace.make(stem, [set()])


def rank_oracle(T, t, i: int):
    """Rank by sorting the counter position sets into a chain and indexing.

    Returns the rank, or raises ValueError/NotTotallyOrdered mirroring the
    definitional side conditions, computed by an independent route: sort by
    set size, verify stepwise inclusion, dedupe, index."""
    from hyperltl.errors import NotTotallyOrdered
    from hyperltl.semantics import align, value_at

    traces = list(T)
    if t not in traces:
        raise ValueError("trace not in model")

    def positions(x, c):
        if any(str(c) in v for v in x.loop):
            raise ValueError("infinite counter set")
        return frozenset(j for j, v in enumerate(x.stem) if str(c) in v)

    # total-order check on a shared window; sound for infinite sets too since
    # the window covers stem + full loop period of every trace
    S, P = align(traces)
    window = S + P
    for c in (1, 2):
        sets = {
            frozenset(j for j in range(window) if str(c) in value_at(x, j))
            for x in traces
        }
        by_size = sorted(sets, key=lambda s: (len(s), sorted(s)))
        for a, b in zip(by_size, by_size[1:]):
            if not a <= b:
                raise NotTotallyOrdered(f"counter {c}")
    mine = positions(t, i)
    chain = sorted(
        {positions(x, i) for x in traces}, key=lambda s: (len(s), sorted(s))
    )
    return chain.index(mine)
