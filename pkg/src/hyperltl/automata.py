"""LTL backend: zipping all-existential sentences into single-trace LTL,
tableau translation to Buchi automata, emptiness, products, and bounded
complementation through deterministic parity automata.

Alphabets are explicit tuples of valuations (frozensets of proposition
names). Every construction here is checked downstream by differential
tests, and the two entry points that produce witnesses (`nba_nonempty`,
`ltl_sat`) re-verify their own output before returning it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import formula as F
from .errors import ComplementBlowup, NotAModel, ShapeError
from .semantics import LassoTrace, eval_qf

DEFAULT_COMPLEMENT_CAP = 12

# ceiling on intermediate deterministic-parity states; past this the
# determinization is declared hopeless rather than left to thrash
_TREE_CAP = 200_000


def _letter_key(v):
    return (len(v), tuple(sorted(v)))


def full_alphabet(universe) -> tuple:
    """All valuations over the given proposition universe, canonical order."""
    props = sorted(set(universe))
    out = []
    for r in range(len(props) + 1):
        for combo in itertools.combinations(props, r):
            out.append(frozenset(combo))
    return tuple(out)


class Nba:
    """Nondeterministic Buchi automaton with integer states 0..n-1."""

    __slots__ = ("alphabet", "n", "initial", "accepting", "delta")

    def __init__(self, alphabet, n, initial, accepting, delta):
        self.alphabet = tuple(alphabet)
        self.n = n
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        declared = set(self.alphabet)
        cooked = []
        for q in range(n):
            row = {}
            for letter, dsts in delta[q].items():
                if letter not in declared:
                    raise ValueError(f"transition letter {set(letter)!r} not in alphabet")
                row[letter] = frozenset(dsts)
            cooked.append(row)
        self.delta = tuple(cooked)
        if not self.initial <= set(range(n)) or not self.accepting <= set(range(n)):
            raise ValueError("state index out of range")

    def successors(self, q, letter):
        return self.delta[q].get(letter, frozenset())

    def __repr__(self):
        return f"Nba(n={self.n}, |alphabet|={len(self.alphabet)}, acc={sorted(self.accepting)})"


def dump_nba(a: Nba) -> str:
    """Labeled edge list, for debugging only."""
    lines = [
        f"nba states {a.n} initial {' '.join(map(str, sorted(a.initial)))}"
        f" accepting {' '.join(map(str, sorted(a.accepting)))}"
    ]
    for q in range(a.n):
        for letter in sorted(a.delta[q], key=_letter_key):
            for d in sorted(a.delta[q][letter]):
                lines.append("%d {%s} -> %d" % (q, ",".join(sorted(letter)), d))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# negation normal form (internal nodes; Release is needed as the dual of U)


@dataclass(frozen=True)
class _NBool:
    value: bool


@dataclass(frozen=True)
class _NProp:
    prop: str
    neg: bool


@dataclass(frozen=True)
class _NAnd:
    left: object
    right: object


@dataclass(frozen=True)
class _NOr:
    left: object
    right: object


@dataclass(frozen=True)
class _NX:
    body: object


@dataclass(frozen=True)
class _NU:
    left: object
    right: object


@dataclass(frozen=True)
class _NR:
    left: object
    right: object


_NTRUE = _NBool(True)
_NFALSE = _NBool(False)


def _nnf(f, neg):
    if isinstance(f, F.Lit):
        return _NBool(f.value != neg)
    if isinstance(f, F.Atom):
        return _NProp(f.prop, neg)
    if isinstance(f, F.Not):
        return _nnf(f.body, not neg)
    if isinstance(f, F.And):
        cls = _NOr if neg else _NAnd
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, F.Or):
        cls = _NAnd if neg else _NOr
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, F.Implies):
        cls = _NAnd if neg else _NOr
        return cls(_nnf(f.left, not neg), _nnf(f.right, neg))
    if isinstance(f, F.Iff):
        # under negation this is exclusive-or
        return _NOr(
            _NAnd(_nnf(f.left, neg), _nnf(f.right, False)),
            _NAnd(_nnf(f.left, not neg), _nnf(f.right, True)),
        )
    if isinstance(f, F.Xor):
        return _NOr(
            _NAnd(_nnf(f.left, neg), _nnf(f.right, True)),
            _NAnd(_nnf(f.left, not neg), _nnf(f.right, False)),
        )
    if isinstance(f, F.Next):
        return _NX(_nnf(f.body, neg))
    if isinstance(f, F.Eventually):
        if neg:
            return _NR(_NFALSE, _nnf(f.body, True))
        return _NU(_NTRUE, _nnf(f.body, False))
    if isinstance(f, F.Always):
        if neg:
            return _NU(_NTRUE, _nnf(f.body, True))
        return _NR(_NFALSE, _nnf(f.body, False))
    if isinstance(f, F.Until):
        cls = _NR if neg else _NU
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    raise ShapeError(f"quantifier-free formula expected, got {type(f).__name__}")


def _index_nnf(root):
    """Deterministic integer id per distinct node, for canonical sorting."""
    ids = {}

    def go(g):
        if g in ids:
            return
        for fld in ("left", "right", "body"):
            if hasattr(g, fld):
                go(getattr(g, fld))
        ids.setdefault(g, len(ids))

    go(root)
    return ids


def _covers(obls, ids):
    """Tableau expansion of an obligation set into disjunctive branches.

    Each branch is (pos literals, neg literals, next obligations, postponed
    until-formulas); postponement marks feed the acceptance condition.
    """
    out = {}

    def go(todo, pos, neg, nxt, pend):
        while todo:
            g = todo.pop()
            if isinstance(g, _NBool):
                if not g.value:
                    return
            elif isinstance(g, _NProp):
                if g.neg:
                    if g.prop in pos:
                        return
                    neg = neg | {g.prop}
                else:
                    if g.prop in neg:
                        return
                    pos = pos | {g.prop}
            elif isinstance(g, _NAnd):
                todo = todo + [g.left, g.right]
            elif isinstance(g, _NOr):
                go(todo + [g.left], pos, neg, nxt, pend)
                go(todo + [g.right], pos, neg, nxt, pend)
                return
            elif isinstance(g, _NX):
                nxt = nxt | {g.body}
            elif isinstance(g, _NU):
                go(todo + [g.right], pos, neg, nxt, pend)
                go(todo + [g.left], pos, neg, nxt | {g}, pend | {g})
                return
            elif isinstance(g, _NR):
                go(todo + [g.left, g.right], pos, neg, nxt, pend)
                go(todo + [g.right], pos, neg, nxt | {g}, pend)
                return
            else:
                raise TypeError(g)
        key = (
            tuple(sorted(pos)),
            tuple(sorted(neg)),
            tuple(sorted(ids[g] for g in nxt)),
            tuple(sorted(ids[g] for g in pend)),
        )
        out.setdefault(key, (pos, neg, frozenset(nxt), frozenset(pend)))

    start = sorted(obls, key=lambda g: ids[g])
    go(start, frozenset(), frozenset(), frozenset(), frozenset())
    return [out[k] for k in sorted(out)]


def _single_var(f):
    vs = F.free_vars(f)
    if len(vs) > 1:
        raise ShapeError(f"single-trace formula expected, found variables {sorted(vs)}")
    if F.has_quantifier(f):
        raise ShapeError("quantifier-free formula expected")
    return next(iter(vs)) if vs else None


def ltl_to_nba(f, universe=None) -> Nba:
    """Obligation-set tableau translation; result is trimmed.

    The formula must be quantifier-free over one implicit trace; atoms are
    read as plain propositions.
    """
    _single_var(f)
    root = _nnf(f, False)
    ids = _index_nnf(root)
    uni = set(F.props(f))
    if universe is not None:
        uni |= set(universe)
    alphabet = full_alphabet(uni)

    # until-subformulas in deterministic order drive the fairness counter
    us = [g for g in ids if isinstance(g, _NU)]
    k = len(us)

    def obl_key(s):
        return tuple(sorted(ids[g] for g in s))

    cover_memo = {}

    def covers_of(s):
        key = obl_key(s)
        if key not in cover_memo:
            cover_memo[key] = _covers(s, ids)
        return cover_memo[key]

    index = {(obl_key(frozenset({root})), 0): 0}
    work = [(frozenset({root}), 0)]
    delta = [{}]
    accepting = set()
    if 0 == k:
        accepting.add(0)

    qi = 0
    while qi < len(work):
        obls, i = work[qi]
        row = delta[qi]
        for pos, neg, nxt, pend in covers_of(obls):
            j = 0 if i == k else i
            while j < k and us[j] not in pend:
                j += 1
            dkey = (obl_key(nxt), j)
            if dkey not in index:
                index[dkey] = len(work)
                work.append((nxt, j))
                delta.append({})
                if j == k:
                    accepting.add(index[dkey])
            dst = index[dkey]
            for letter in alphabet:
                if pos <= letter and not (neg & letter):
                    row.setdefault(letter, set()).add(dst)
        qi += 1

    a = Nba(alphabet, len(work), {0}, accepting, delta)
    return trim(a)


# ---------------------------------------------------------------------------
# graph operations


def trim(a: Nba) -> Nba:
    """Restrict to states that lie on some accepting run (reachable from an
    initial state and able to reach a cycle through an accepting state)."""
    reach = set()
    stack = list(a.initial)
    while stack:
        q = stack.pop()
        if q in reach:
            continue
        reach.add(q)
        for dsts in a.delta[q].values():
            stack.extend(d for d in dsts if d not in reach)

    fwd = {q: set() for q in reach}
    rev = {q: set() for q in reach}
    for q in reach:
        for dsts in a.delta[q].values():
            for d in dsts:
                if d in reach:
                    fwd[q].add(d)
                    rev[d].add(q)

    # accepting states on a reachable cycle: q is such iff q can reach itself
    core = set()
    for q in a.accepting & reach:
        seen = set()
        stack = list(fwd[q])
        hit = False
        while stack:
            d = stack.pop()
            if d == q:
                hit = True
                break
            if d in seen:
                continue
            seen.add(d)
            stack.extend(fwd[d])
        if hit:
            core.add(q)

    live = set()
    stack = list(core)
    while stack:
        q = stack.pop()
        if q in live:
            continue
        live.add(q)
        stack.extend(p for p in rev[q] if p not in live)

    keep = sorted(reach & live)
    remap = {q: i for i, q in enumerate(keep)}
    delta = []
    for q in keep:
        row = {}
        for letter, dsts in a.delta[q].items():
            kept = frozenset(remap[d] for d in dsts if d in remap)
            if kept:
                row[letter] = kept
        delta.append(row)
    return Nba(
        a.alphabet,
        len(keep),
        {remap[q] for q in a.initial if q in remap},
        {remap[q] for q in a.accepting if q in remap},
        delta,
    )


def bisim_quotient(a: Nba) -> Nba:
    """Quotient by strong forward bisimulation; language-preserving."""
    if a.n == 0:
        return a
    block = [1 if q in a.accepting else 0 for q in range(a.n)]
    while True:
        sigs = {}
        nxt = []
        for q in range(a.n):
            sig = (
                block[q],
                tuple(
                    tuple(sorted({block[d] for d in a.delta[q].get(letter, ())}))
                    for letter in a.alphabet
                ),
            )
            nxt.append(sigs.setdefault(sig, len(sigs)))
        if nxt == block:
            break
        block = nxt

    m = max(block) + 1
    rep = {}
    for q in range(a.n):
        rep.setdefault(block[q], q)
    delta = []
    for b in range(m):
        q = rep[b]
        row = {}
        for letter, dsts in a.delta[q].items():
            row[letter] = frozenset(block[d] for d in dsts)
        delta.append(row)
    return Nba(
        a.alphabet,
        m,
        {block[q] for q in a.initial},
        {block[q] for q in a.accepting},
        delta,
    )


def product_nba(a: Nba, b: Nba) -> Nba:
    """Intersection with the usual two-phase accepting flag."""
    if set(a.alphabet) != set(b.alphabet):
        raise ValueError("product requires identical alphabets")
    index = {}
    work = []
    delta = []

    def idx(st):
        if st not in index:
            index[st] = len(work)
            work.append(st)
            delta.append({})
        return index[st]

    for p in sorted(a.initial):
        for q in sorted(b.initial):
            idx((p, q, 0))
    init = set(range(len(work)))

    qi = 0
    while qi < len(work):
        p, q, flag = work[qi]
        row = delta[qi]
        for letter in a.alphabet:
            pd = a.delta[p].get(letter)
            qd = b.delta[q].get(letter)
            if not pd or not qd:
                continue
            for p2 in sorted(pd):
                for q2 in sorted(qd):
                    if flag == 0:
                        nf = 1 if p in a.accepting else 0
                    else:
                        nf = 0 if q in b.accepting else 1
                    row.setdefault(letter, set()).add(idx((p2, q2, nf)))
        qi += 1

    accepting = {i for i, (p, q, flag) in enumerate(work) if flag == 0 and p in a.accepting}
    return Nba(a.alphabet, len(work), init, accepting, delta)


def accepts_lasso(a: Nba, stem, loop) -> bool:
    """Membership of the ultimately periodic word stem . loop^omega."""
    stem = [frozenset(v) for v in stem]
    loop = [frozenset(v) for v in loop]
    if not loop:
        raise ValueError("loop must be nonempty")
    declared = set(a.alphabet)
    for v in stem + loop:
        if v not in declared:
            raise ValueError(f"letter {set(v)!r} not in the automaton alphabet")
    s, p = len(stem), len(loop)
    word = stem + loop

    def letter_at(pos):
        return word[pos]

    def nxt(pos):
        return pos + 1 if pos + 1 < s + p else s

    start = {(q, 0) for q in a.initial}
    reach = set()
    stack = list(start)
    while stack:
        q, pos = stack.pop()
        if (q, pos) in reach:
            continue
        reach.add((q, pos))
        for d in a.delta[q].get(letter_at(pos), ()):
            stack.append((d, nxt(pos)))

    for q, pos in reach:
        if q not in a.accepting or pos < s:
            continue
        seen = set()
        stack = [(d, nxt(pos)) for d in a.delta[q].get(letter_at(pos), ())]
        while stack:
            node = stack.pop()
            if node == (q, pos):
                return True
            if node in seen:
                continue
            seen.add(node)
            d, dpos = node
            stack.extend((e, nxt(dpos)) for e in a.delta[d].get(letter_at(dpos), ()))
    return False


def nba_nonempty(a: Nba):
    """Shortest accepting lasso (stem letters, loop letters), or None.

    The returned lasso is re-run on the automaton before being returned.
    """
    # BFS forest for shortest stems
    parent = {}
    order = []
    for q in sorted(a.initial):
        if q not in parent:
            parent[q] = None
            order.append(q)
    head = 0
    while head < len(order):
        q = order[head]
        head += 1
        for letter in sorted(a.delta[q], key=_letter_key):
            for d in sorted(a.delta[q][letter]):
                if d not in parent:
                    parent[d] = (q, letter)
                    order.append(d)

    def stem_to(q):
        letters = []
        while parent[q] is not None:
            q, letter = parent[q]
            letters.append(letter)
        return letters[::-1]

    best = None
    for q in sorted(set(parent) & a.accepting):
        # shortest cycle through q
        cpar = {}
        corder = []
        for letter in sorted(a.delta[q], key=_letter_key):
            for d in sorted(a.delta[q][letter]):
                if d not in cpar:
                    cpar[d] = (q, letter)
                    corder.append(d)
        cycle = None
        if q in cpar:
            cycle = [cpar[q][1]]
        else:
            head = 0
            while head < len(corder) and cycle is None:
                u = corder[head]
                head += 1
                for letter in sorted(a.delta[u], key=_letter_key):
                    for d in sorted(a.delta[u][letter]):
                        if d == q:
                            letters = [letter]
                            v = u
                            while cpar[v][0] != q:
                                v, lt = cpar[v]
                                letters.append(lt)
                            letters.append(cpar[v][1])
                            cycle = letters[::-1]
                            break
                        if d not in cpar:
                            cpar[d] = (u, letter)
                            corder.append(d)
                    if cycle is not None:
                        break
        if cycle is None:
            continue
        stem = stem_to(q)
        if best is None or len(stem) + len(cycle) < len(best[0]) + len(best[1]):
            best = (stem, cycle)
    if best is None:
        return None
    stem, loop = best
    if not accepts_lasso(a, stem, loop):
        raise NotAModel("internal: emptiness produced a lasso the automaton rejects")
    return stem, loop


# ---------------------------------------------------------------------------
# zipping all-existential sentences to single-trace LTL


def zip_exists(s: F.Sentence):
    """Relabel a_pi to product proposition a@pi over one implicit trace."""
    if any(kind != "exists" for kind, _ in s.prefix):
        raise ShapeError("prefix must be all-existential")

    def rw(g):
        if isinstance(g, F.Atom):
            return F.Atom(f"{g.prop}@{g.var}", "w")
        if isinstance(g, F.Lit):
            return g
        return type(g)(*(rw(c) for c in F.children(g)))

    return rw(s.matrix)


def unzip(t: LassoTrace, variables) -> dict:
    """Split a product-proposition lasso back into one trace per variable."""
    out = {}
    for v in variables:
        def pick(val):
            keep = set()
            for p in val:
                base, _, var = p.rpartition("@")
                if var == v and base:
                    keep.add(base)
            return keep

        out[v] = LassoTrace.make([pick(x) for x in t.stem], [pick(x) for x in t.loop])
    return out


def ltl_sat(f, universe=None):
    """Satisfiability of single-trace LTL; returns a verified model or None."""
    var = _single_var(f)
    g = F.simplify(f)
    if isinstance(g, F.Lit):
        if not g.value:
            return None
        t = LassoTrace.make([], [set()])
    else:
        uni = set(F.props(f))
        if universe is not None:
            uni |= set(universe)
        a = ltl_to_nba(g, uni)
        found = nba_nonempty(a)
        if found is None:
            return None
        t = LassoTrace.make(*found)
    if not eval_qf(f, {var if var is not None else "w": t}):
        raise NotAModel("internal: satisfiability witness fails the source formula")
    return t


# ---------------------------------------------------------------------------
# complementation via deterministic parity automata (history trees)


class _Dpa:
    """Deterministic parity automaton, min-even acceptance on transition
    priorities; always complete."""

    __slots__ = ("alphabet", "n", "initial", "delta")

    def __init__(self, alphabet, n, initial, delta):
        self.alphabet = tuple(alphabet)
        self.n = n
        self.initial = initial
        self.delta = tuple(delta)


def _dpa_step(tree, letter, a: Nba, neutral):
    """One history-tree transition; returns (next tree, priority)."""
    if not tree:
        return (), neutral
    nodes = [[p, set(lbl)] for p, lbl in tree]
    base = len(nodes)
    for i in range(base):
        spawn = nodes[i][1] & a.accepting
        if spawn:
            nodes.append([i, set(spawn)])

    for nd in nodes:
        succ = set()
        for q in nd[1]:
            succ |= a.delta[q].get(letter, frozenset())
        nd[1] = succ

    kids = [[] for _ in nodes]
    for i, (p, _) in enumerate(nodes):
        if p >= 0:
            kids[p].append(i)

    # older siblings (smaller names) claim shared states, thefts propagate down
    def reduce(v, stolen):
        nodes[v][1] -= stolen
        claimed = set()
        for c in kids[v]:
            reduce(c, stolen | claimed)
            claimed |= nodes[c][1]

    reduce(0, set())

    removed = [False] * len(nodes)
    e = None
    for i, nd in enumerate(nodes):
        if not nd[1]:
            removed[i] = True
            if e is None:
                e = i + 1
    if removed[0]:
        return (), 1

    f = None
    for i in range(len(nodes)):
        if removed[i]:
            continue
        union = set()
        live_kids = [c for c in kids[i] if not removed[c]]
        for c in live_kids:
            union |= nodes[c][1]
        if live_kids and union == nodes[i][1]:
            if f is None:
                f = i + 1
            stack = list(live_kids)
            while stack:
                c = stack.pop()
                removed[c] = True
                stack.extend(kids[c])

    cands = []
    if e is not None:
        cands.append(2 * e - 1)
    if f is not None:
        cands.append(2 * f)
    prio = min(cands) if cands else neutral

    keep = [i for i in range(len(nodes)) if not removed[i]]
    remap = {old: new for new, old in enumerate(keep)}
    encoded = tuple(
        (remap[nodes[i][0]] if nodes[i][0] >= 0 else -1, frozenset(nodes[i][1])) for i in keep
    )
    return encoded, prio


def _nba_to_dpa(a: Nba) -> _Dpa:
    neutral = 4 * a.n + 3
    init = ((-1, frozenset(a.initial)),) if a.initial else ()
    index = {init: 0}
    trees = [init]
    delta = [{}]
    qi = 0
    while qi < len(trees):
        tree = trees[qi]
        row = delta[qi]
        for letter in a.alphabet:
            nxt, prio = _dpa_step(tree, letter, a, neutral)
            if nxt not in index:
                if len(trees) >= _TREE_CAP:
                    raise ComplementBlowup(
                        "determinization exceeded the internal state ceiling",
                        context={"trees": len(trees)},
                    )
                index[nxt] = len(trees)
                trees.append(nxt)
                delta.append({})
            row[letter] = (index[nxt], prio)
        qi += 1
    return _Dpa(a.alphabet, len(trees), 0, delta)


def _dpa_accepts_lasso(d: _Dpa, stem, loop) -> bool:
    stem = [frozenset(v) for v in stem]
    loop = [frozenset(v) for v in loop]
    q = d.initial
    for letter in stem:
        q, _ = d.delta[q][letter]
    seen = {}
    log = []
    pos = 0
    while (q, pos) not in seen:
        seen[(q, pos)] = len(log)
        q2, prio = d.delta[q][loop[pos]]
        log.append(prio)
        q = q2
        pos = (pos + 1) % len(loop)
    start = seen[(q, pos)]
    return min(log[start:]) % 2 == 0


def _dpa_to_nba(d: _Dpa) -> Nba:
    evens = sorted({prio for row in d.delta for (_, prio) in row.values() if prio % 2 == 0})
    index = {}
    work = []
    delta = []

    def idx(st):
        if st not in index:
            index[st] = len(work)
            work.append(st)
            delta.append({})
        return index[st]

    idx(("c", d.initial))
    qi = 0
    while qi < len(work):
        st = work[qi]
        row = delta[qi]
        if st[0] == "c":
            _, q = st
            for letter in d.alphabet:
                q2, prio = d.delta[q][letter]
                row.setdefault(letter, set()).add(idx(("c", q2)))
                for p in evens:
                    if prio >= p:
                        row.setdefault(letter, set()).add(idx(("g", q2, p, prio == p)))
        else:
            _, q, p, _ = st
            for letter in d.alphabet:
                q2, prio = d.delta[q][letter]
                if prio >= p:
                    row.setdefault(letter, set()).add(idx(("g", q2, p, prio == p)))
        qi += 1

    accepting = {i for i, st in enumerate(work) if st[0] == "g" and st[3]}
    return Nba(d.alphabet, len(work), {0}, accepting, delta)


def complement_nba(a: Nba, cap: int = DEFAULT_COMPLEMENT_CAP) -> Nba:
    """Language complement over the declared alphabet; input is trimmed
    first and must stay under the state cap."""
    a = trim(a)
    if a.n > cap:
        raise ComplementBlowup(
            f"automaton has {a.n} states after trimming, over the cap of {cap}",
            context={"states": a.n, "cap": cap},
        )
    d = _nba_to_dpa(a)
    flipped = _Dpa(
        d.alphabet,
        d.n,
        d.initial,
        [{letter: (q, prio + 1) for letter, (q, prio) in row.items()} for row in d.delta],
    )
    return bisim_quotient(trim(_dpa_to_nba(flipped)))
