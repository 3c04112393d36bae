"""Model checking of quantified sentences against finite structures.

The matrix is translated once into a Buchi automaton over the product
alphabet of all quantified variables.  Quantifier blocks are then folded in
from the innermost outwards: an existential block becomes a synchronous
product with one structure copy per variable followed by projection of that
variable's propositions, and a universal block is treated as the negation
of an existential block over the negated remainder.  A polarity flag keeps
both cases on one code path, so a complementation is paid only at a genuine
quantifier alternation and alternation-free prefixes never complement:
the leading negation of a universal prefix folds into the final emptiness
answer instead.
"""

from __future__ import annotations

from . import formula as F
from .automata import (
    DEFAULT_COMPLEMENT_CAP,
    Nba,
    bisim_quotient,
    complement_nba,
    full_alphabet,
    ltl_to_nba,
    nba_nonempty,
    trim,
)
from .errors import ComplementBlowup
from .semantics import KripkeStructure

__all__ = ["modelcheck"]


def _tag(f):
    """Rewrite a_pi into the product proposition a@pi over one implicit trace."""
    if isinstance(f, F.Atom):
        return F.Atom(f"{f.prop}@{f.var}", "w")
    if isinstance(f, F.Lit):
        return f
    return type(f)(*(_tag(c) for c in F.children(f)))


def _blocks(s: F.Sentence):
    """Maximal same-kind quantifier runs, outermost first."""
    out = []
    for kind, var in s.prefix:
        if out and out[-1][0] == kind:
            out[-1][1].append(var)
        else:
            out.append((kind, [var]))
    return out


def _step_product(a: Nba, k: KripkeStructure, var: str, ap) -> Nba:
    """Synchronize variable `var` with a copy of `k`, then project it away.

    The dropped letter component is forced to equal the label of the current
    structure state (runs read the label of the state they are in), so the
    result accepts a word over the remaining variables exactly when some
    trace of `k` extends it to a word accepted by `a`.
    """
    tagged = frozenset(f"{p}@{var}" for p in ap)
    rest = set().union(*a.alphabet) - tagged if a.alphabet else set()

    index = {}
    work = []
    delta = []

    def idx(st):
        if st not in index:
            index[st] = len(work)
            work.append(st)
            delta.append({})
        return index[st]

    for q in sorted(a.initial):
        for u in sorted(k.initial):
            idx((q, u))
    init = set(range(len(work)))

    qi = 0
    while qi < len(work):
        q, u = work[qi]
        row = delta[qi]
        want = frozenset(f"{p}@{var}" for p in k.labels[u] if p in ap)
        for letter, dsts in a.delta[q].items():
            if letter & tagged != want:
                continue
            shrunk = letter - tagged
            for q2 in sorted(dsts):
                for v in sorted(set(k.succ[u])):
                    row.setdefault(shrunk, set()).add(idx((q2, v)))
        qi += 1

    accepting = {i for i, (q, _) in enumerate(work) if q in a.accepting}
    return Nba(full_alphabet(rest), len(work), init, accepting, delta)


def modelcheck(k: KripkeStructure, s: F.Sentence, cap: int = DEFAULT_COMPLEMENT_CAP) -> bool:
    """Decide whether the trace set of `k` satisfies the sentence.

    Structure labels outside the matrix propositions cannot influence the
    matrix and are projected away up front; matrix propositions the
    structure never labels simply stay false.  Raises ComplementBlowup,
    naming the offending quantifier position, when an alternation forces a
    complementation whose trimmed input exceeds `cap` states.
    """
    ap = sorted(F.props(s.matrix))
    blocks = _blocks(s)
    neg = bool(blocks) and blocks[-1][0] == "forall"
    matrix = F.Not(s.matrix) if neg else s.matrix
    universe = {f"{p}@{v}" for p in ap for _, v in s.prefix}
    a = trim(ltl_to_nba(_tag(matrix), universe))
    position = {var: i + 1 for i, (_, var) in enumerate(s.prefix)}

    for kind, vars_ in reversed(blocks):
        if (kind == "forall") != neg:
            pos = position[vars_[0]]
            try:
                a = complement_nba(bisim_quotient(trim(a)), cap)
            except ComplementBlowup as err:
                raise ComplementBlowup(
                    f"complementation forced at quantifier position {pos} "
                    f"({kind} {vars_[0]}): {err}",
                    context={**(err.context or {}), "position": pos},
                ) from err
            neg = not neg
        for var in reversed(vars_):
            a = trim(_step_product(a, k, var, ap))

    return (nba_nonempty(a) is not None) != neg
