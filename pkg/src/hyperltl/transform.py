"""Equisatisfiability-preserving rewrites of prenex sentences.

Four shape-simplifying transformations (depth reduction, alternation
removal, universal merging, X elimination) plus bounded quantifier
expansion.  Each transformation comes with the constructive witness-model
builder that turns a finite model of the input into one of the output;
those builders exist for the transport tests and are not needed on any
decision path.
"""

import itertools
import re

from .errors import NotAModel, ShapeError, SizeBlowup
from .formula import (
    Always,
    And,
    Atom,
    Eventually,
    Exists,
    Forall,
    Iff,
    Implies,
    Lit,
    Next,
    Not,
    Or,
    Sentence,
    Until,
    Xor,
    _structure_key,
    conj,
    conj_balanced,
    core_normalize,
    disj,
    fresh_var,
    in_fragment,
    is_propositional,
    marker,
    next_power,
    prefix_kinds,
    props,
    size,
    subformulas,
    substitute,
    temporal_depth,
)
from .semantics import (
    LassoTrace,
    align,
    eval_formula,
    eval_sentence,
    subformula_arrays,
    trace_sort_key,
    value_at,
)

DEFAULT_NODE_CAP = 100_000


def expand_quantifiers(s: Sentence, k: int, node_cap: int = DEFAULT_NODE_CAP) -> Sentence:
    """Replace every quantifier by an explicit k-fold conjunction or disjunction.

    The output is an existential sentence over a shared pool of k trace
    variables, satisfiable by a model of at most k traces exactly when the
    input is satisfiable by one.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    estimate = size(s.matrix)
    for _ in s.prefix:
        estimate = estimate * k + 1
        if estimate > node_cap:
            raise SizeBlowup(f"expansion estimate exceeds node cap {node_cap}")
    used = set(s.vars())
    names = []
    for j in range(1, k + 1):
        nm = fresh_var(f"p{j}", used)
        used.add(nm)
        names.append(nm)

    def go(i: int):
        if i == len(s.prefix):
            return s.matrix
        kind, var = s.prefix[i]
        inner = go(i + 1)
        parts = [substitute(inner, var, nm) for nm in names]
        return conj(parts) if kind == "forall" else disj(parts)

    return Sentence(tuple(("exists", nm) for nm in names), go(0))


def reduce_depth2(s: Sentence) -> Sentence:
    """Flatten the matrix to temporal depth two using one extra witness trace.

    The fresh trailing existential carries one marker proposition per
    distinct subformula of the core-normalized matrix.  The new matrix pins
    the whole-matrix marker at the first position and constrains every
    marker pointwise according to its top connective, so temporal operators
    never nest deeper than a G around an X or U.
    """
    psi = core_normalize(s.matrix)
    tau = fresh_var("w", set(s.vars()))
    defs = []
    for g in sorted(subformulas(psi), key=_structure_key):
        m = Atom(marker(g), tau)
        if isinstance(g, (Atom, Lit)):
            rhs = g
        elif isinstance(g, Not):
            rhs = Not(Atom(marker(g.body), tau))
        elif isinstance(g, Or):
            rhs = Or(Atom(marker(g.left), tau), Atom(marker(g.right), tau))
        elif isinstance(g, Next):
            rhs = Next(Atom(marker(g.body), tau))
        elif isinstance(g, Until):
            rhs = Until(Atom(marker(g.left), tau), Atom(marker(g.right), tau))
        else:
            raise AssertionError(f"non-core node {type(g).__name__} after normalization")
        defs.append(Always(Iff(m, rhs)))
    matrix = And(Atom(marker(psi), tau), conj(defs))
    return Sentence(s.prefix + (("exists", tau),), matrix)


def witness_model_depth2(T, s: Sentence):
    """Model transport for reduce_depth2: annotated copies of first coordinates.

    For every tuple of model traces, the copy of the first one is decorated
    with the truth value of every subformula marker at every position of
    the folded joint word.
    """
    T = frozenset(T)
    if not eval_sentence(s, T):
        raise NotAModel("the given traces do not satisfy the sentence")
    psi = core_normalize(s.matrix)
    names = s.vars()
    out = set()
    for tup in itertools.product(sorted(T, key=trace_sort_key), repeat=len(names)):
        arrays, S, P = subformula_arrays(psi, dict(zip(names, tup)))
        word = []
        for j in range(S + P):
            val = set(value_at(tup[0], j)) if tup else set()
            for g, arr in arrays.items():
                if arr[j]:
                    val.add(marker(g))
            word.append(val)
        out.add(LassoTrace.make(word[:S], word[S:]))
    out = frozenset(out)
    assert eval_sentence(reduce_depth2(s), out), "depth-2 witness model rejected"
    return out


def _critical_index(prefix):
    """Index of the first existential followed by some universal, or None."""
    last_forall = -1
    for i in range(len(prefix) - 1, -1, -1):
        if prefix[i][0] == "forall":
            last_forall = i
            break
    for i, (kind, _) in enumerate(prefix):
        if kind == "exists" and i < last_forall:
            return i
    return None


class _FeRound:
    def __init__(self, lead, evar, rest, marks):
        self.lead = lead
        self.evar = evar
        self.rest = rest
        self.marks = marks


def _fe_round(s: Sentence, round_no: int):
    """One elimination round: the first critical existential becomes universal.

    Fresh universal copies of the leading block state, via shared markers,
    that a Skolem choice for the eliminated variable exists; the original
    matrix is guarded by the markers of the actual binding.
    """
    i = _critical_index(s.prefix)
    lead = [var for _, var in s.prefix[:i]]
    evar = s.prefix[i][1]
    rest = s.prefix[i + 1:]
    n = len(lead)
    ps = props(s.matrix)
    base = f"@sk{round_no}"
    while any(f"{base}_{j}" in ps for j in range(1, n + 2)):
        base += "k"
    marks = [f"{base}_{j}" for j in range(1, n + 2)]
    used = set(s.vars())
    fresh_lead = []
    for v in lead:
        nv = fresh_var(v + "p", used)
        used.add(nv)
        fresh_lead.append(nv)
    fresh_e = fresh_var(evar + "p", used)
    claim = Eventually(conj([Atom(m, v) for m, v in zip(marks, fresh_lead + [fresh_e])]))
    guard = Eventually(conj([Atom(m, v) for m, v in zip(marks, lead + [evar])]))
    prefix = (
        tuple(("forall", v) for v in fresh_lead)
        + tuple(("forall", v) for v in lead)
        + (("forall", evar),)
        + rest
        + (("exists", fresh_e),)
    )
    return Sentence(prefix, And(claim, Implies(guard, s.matrix))), _FeRound(lead, evar, rest, marks)


def to_forall_exists(s: Sentence) -> Sentence:
    """Eliminate critical existentials round by round until the prefix is ∀*∃*."""
    round_no = 1
    while _critical_index(s.prefix) is not None:
        s, _ = _fe_round(s, round_no)
        round_no += 1
    return s


def _fe_round_witness(T, s: Sentence, info: _FeRound):
    """Model transport for one elimination round.

    Brute-forces a Skolem table for the eliminated existential, then marks
    each table row at its own loop-aligned position beyond every stem.
    """
    traces = sorted(T, key=trace_sort_key)
    rest_f = s.matrix
    for kind, var in reversed(info.rest):
        rest_f = Forall(var, rest_f) if kind == "forall" else Exists(var, rest_f)
    rows = []
    for tup in itertools.product(traces, repeat=len(info.lead)):
        asg = dict(zip(info.lead, tup))
        for t in traces:
            asg[info.evar] = t
            if eval_formula(rest_f, T, asg):
                rows.append(tup + (t,))
                break
        else:
            raise NotAModel("no Skolem witness for a universal tuple")
    S, P = align(traces)
    marks = {t: {} for t in traces}
    for idx, row in enumerate(rows):
        pos = S + idx * P
        for i, t in enumerate(row):
            marks[t].setdefault(pos, set()).add(info.marks[i])
    span = S + len(rows) * P
    out = set()
    for t in traces:
        word = [set(value_at(t, j)) | marks[t].get(j, set()) for j in range(span)]
        loop = [value_at(t, span + i) for i in range(P)]
        out.add(LassoTrace.make(word, loop))
    return frozenset(out)


def witness_model_forall_exists(T, s: Sentence):
    """Model transport for to_forall_exists: replay every round on the model."""
    T = frozenset(T)
    if not eval_sentence(s, T):
        raise NotAModel("the given traces do not satisfy the sentence")
    round_no = 1
    while _critical_index(s.prefix) is not None:
        s2, info = _fe_round(s, round_no)
        T = _fe_round_witness(T, s, info)
        s = s2
        round_no += 1
    assert eval_sentence(s, T), "alternation witness model rejected"
    return T


def _relabel(f, var: str, coord: int, newvar: str):
    """Move atoms of one trace variable onto coordinate `coord` of `newvar`."""
    if isinstance(f, Atom):
        if f.var == var:
            return Atom(f"@x{coord}_{f.prop}", newvar)
        return f
    if isinstance(f, Lit):
        return f
    if isinstance(f, (Not, Next, Eventually, Always)):
        return type(f)(_relabel(f.body, var, coord, newvar))
    return type(f)(_relabel(f.left, var, coord, newvar), _relabel(f.right, var, coord, newvar))


def merge_universals(s: Sentence) -> Sentence:
    """Collapse n > 2 leading universals into two over product propositions.

    Coordinate i of a product trace carries the propositions of the i-th
    original universal.  The shuffle existentials recombine one coordinate
    of the second universal with the remaining coordinates of the first,
    which is exactly what the relabeled matrix needs.
    """
    kinds = prefix_kinds(s)
    if not re.fullmatch("A*E*", kinds):
        raise ShapeError("prefix must be universals followed by existentials")
    n = kinds.count("A")
    if n <= 2:
        return s
    ap = sorted(props(s.matrix))
    uvars = [var for _, var in s.prefix[:n]]
    evars = [var for _, var in s.prefix[n:]]
    used = set(s.vars())
    u = fresh_var("u", used)
    used.add(u)
    v = fresh_var("v", used)
    used.add(v)
    shuffles = {}
    for i1 in range(1, n + 1):
        for i2 in range(1, n + 1):
            nm = fresh_var(f"s{i1}_{i2}", used)
            used.add(nm)
            shuffles[(i1, i2)] = nm

    def prod(a, i, var):
        return Atom(f"@x{i}_{a}", var)

    psi1 = []
    for (i1, i2), tv in shuffles.items():
        for a in ap:
            parts = [Iff(prod(a, i1, tv), prod(a, i2, v))]
            parts += [Iff(prod(a, j, tv), prod(a, j, u)) for j in range(1, n + 1) if j != i1]
            psi1.append(Always(conj(parts)))
    psi2 = s.matrix
    for j, var in enumerate(uvars, start=1):
        psi2 = _relabel(psi2, var, j, u)
    for var in evars:
        psi2 = _relabel(psi2, var, 1, var)
    prefix = (
        (("forall", u), ("forall", v))
        + tuple(("exists", w) for w in evars)
        + tuple(("exists", shuffles[key]) for key in sorted(shuffles))
    )
    return Sentence(prefix, And(conj_balanced(psi1), psi2))


def _mrg(tup):
    """Product trace of a tuple: coordinate-tagged union of the valuations."""
    S, P = align(tup)
    word = []
    for j in range(S + P):
        val = set()
        for i, t in enumerate(tup, start=1):
            val |= {f"@x{i}_{a}" for a in value_at(t, j)}
        word.append(val)
    return LassoTrace.make(word[:S], word[S:])


def merge_model(T, n: int):
    """Model transport for merge_universals: products of all n-tuples."""
    traces = sorted(frozenset(T), key=trace_sort_key)
    return frozenset(_mrg(tup) for tup in itertools.product(traces, repeat=n))


def normalize_forall2_exists(s: Sentence, skip_shallow: bool = False) -> Sentence:
    """Depth reduction, then alternation removal, then universal merging.

    The composition lands in ∀²∃* (or fewer universals) with temporal depth
    at most two.  With skip_shallow, inputs already at depth ≤ 2 bypass the
    depth-reduction stage.
    """
    if not (skip_shallow and temporal_depth(s) <= 2):
        s = reduce_depth2(s)
    return merge_universals(to_forall_exists(s))


def _xchain(f):
    k = 0
    while isinstance(f, Next):
        k += 1
        f = f.body
    if not is_propositional(f):
        raise ShapeError("X applied to a non-propositional formula")
    return k, f


def _posnorm(f, neg: bool):
    """Positive and/or combination over F, G and X^k leaves."""
    if is_propositional(f):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _posnorm(f.body, not neg)
    if isinstance(f, And):
        l, r = _posnorm(f.left, neg), _posnorm(f.right, neg)
        return Or(l, r) if neg else And(l, r)
    if isinstance(f, Or):
        l, r = _posnorm(f.left, neg), _posnorm(f.right, neg)
        return And(l, r) if neg else Or(l, r)
    if isinstance(f, Implies):
        return _posnorm(Or(Not(f.left), f.right), neg)
    if isinstance(f, Iff):
        return _posnorm(Or(And(f.left, f.right), And(Not(f.left), Not(f.right))), neg)
    if isinstance(f, Xor):
        return _posnorm(Iff(f.left, f.right), not neg)
    if isinstance(f, Eventually):
        return Always(Not(f.body)) if neg else f
    if isinstance(f, Always):
        return Eventually(Not(f.body)) if neg else f
    if isinstance(f, Next):
        k, b = _xchain(f)
        return next_power(Not(b) if neg else b, k)
    raise ShapeError(f"matrix outside the F/G/X fragment: {type(f).__name__}")


def _xdepth(f) -> int:
    if isinstance(f, (And, Or)):
        return max(_xdepth(f.left), _xdepth(f.right))
    if isinstance(f, Next):
        return _xchain(f)[0]
    return 0


def _xreplace(f, markers, tau0):
    if isinstance(f, (And, Or)):
        return type(f)(_xreplace(f.left, markers, tau0), _xreplace(f.right, markers, tau0))
    if isinstance(f, (Eventually, Always)):
        return f
    k, b = _xchain(f) if isinstance(f, Next) else (0, f)
    return Always(Implies(Atom(markers[k], tau0), b))


def _x_markers(s: Sentence):
    psi = _posnorm(s.matrix, False)
    d = _xdepth(psi)
    ps = props(s.matrix)
    base = "@m"
    while any(f"{base}{k}" in ps for k in range(d + 1)):
        base += "m"
    return psi, [f"{base}{k}" for k in range(d + 1)]


def eliminate_x(s: Sentence) -> Sentence:
    """Rewrite X stacks into marker positions on one fresh leading trace.

    The fresh trace promises each marker somewhere; X^k subformulas become
    G(marker_k implies body).  Models extend by a single trace that carries
    marker k at position k.  Existing existentials are kept marker-free so
    they cannot impersonate the marker trace, and the guard exempts the
    marker trace itself from the universal.  A prefix with no existential
    gets one extra marker-free trace variable: without it the marker trace
    alone would satisfy the output vacuously.
    """
    if not re.fullmatch("E*AE*", prefix_kinds(s)):
        raise ShapeError("prefix must contain exactly one universal")
    if not in_fragment(s, "FGX1"):
        raise ShapeError("matrix outside the F/G/X fragment")
    psi, markers = _x_markers(s)
    tau0 = fresh_var("t0", set(s.vars()))
    uvar = next(var for kind, var in s.prefix if kind == "forall")
    claims = [Eventually(Atom(m, tau0)) for m in markers]
    hygiene = [
        Always(Not(disj([Atom(m, var) for m in markers])))
        for kind, var in s.prefix
        if kind == "exists"
    ]
    guard = Eventually(disj([Xor(Atom(a, uvar), Atom(a, tau0)) for a in sorted(props(s.matrix)) + markers]))
    prefix = (("exists", tau0),) + s.prefix
    if not any(kind == "exists" for kind, _ in s.prefix):
        anchor = fresh_var("w", set(s.vars()) | {tau0})
        hygiene.append(Always(Not(disj([Atom(m, anchor) for m in markers]))))
        prefix = (("exists", tau0), ("exists", anchor)) + s.prefix
    matrix = conj(claims + hygiene + [Implies(guard, _xreplace(psi, markers, tau0))])
    return Sentence(prefix, matrix)


def x_padding_trace(s: Sentence) -> LassoTrace:
    """The one extra trace that extends a model of the input for eliminate_x."""
    _, markers = _x_markers(s)
    return LassoTrace.make([frozenset((m,)) for m in markers], [frozenset()])
