"""Finite trace models and evaluation.

Traces are lassos: a finite stem followed by a nonempty loop repeated forever,
each position a set of propositions. Every evaluation folds the joint infinite
behaviour of the traces at hand into the finite window [0, S+P) where S is the
longest stem and P the least common period: position j >= S behaves exactly
like S + ((j - S) mod P), so boolean arrays over the window decide the full
semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import formula as F
from .errors import (
    DanglingEdge,
    EmptyLoop,
    NoInitialState,
    NotAModel,
    PeriodBlowup,
)

DEFAULT_PERIOD_CAP = 10**6


@dataclass(frozen=True)
class LassoTrace:
    """Canonical ultimately periodic trace.

    Canonical means the loop is primitive (no shorter word repeats into it)
    and the stem is minimal (its tail is never absorbed into a rotation of
    the loop). Two lassos denote the same trace iff their canonical forms
    are equal, so traces can live in sets.
    """

    stem: tuple[frozenset, ...]
    loop: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.loop:
            raise EmptyLoop("lasso loop must be nonempty")

    @staticmethod
    def make(stem, loop) -> "LassoTrace":
        stem = [frozenset(v) for v in stem]
        loop = [frozenset(v) for v in loop]
        if not loop:
            raise EmptyLoop("lasso loop must be nonempty")
        # primitive period
        n = len(loop)
        for d in range(1, n + 1):
            if n % d == 0 and loop == loop[:d] * (n // d):
                loop = loop[:d]
                break
        # absorb stem tail into the loop by rotating it right
        while stem and stem[-1] == loop[-1]:
            stem.pop()
            loop = [loop[-1]] + loop[:-1]
        return LassoTrace(tuple(stem), tuple(loop))

    def sort_key(self):
        body = tuple(tuple(sorted(v)) for v in self.stem + self.loop)
        return (len(self.stem) + len(self.loop), len(self.stem), body)

    def props(self) -> frozenset[str]:
        out: set[str] = set()
        for v in self.stem + self.loop:
            out |= v
        return frozenset(out)


def value_at(t: LassoTrace, j: int) -> frozenset:
    """The valuation at position j."""
    if j < 0:
        raise ValueError("negative position")
    s = len(t.stem)
    if j < s:
        return t.stem[j]
    return t.loop[(j - s) % len(t.loop)]


def suffix(t: LassoTrace, j: int) -> LassoTrace:
    """The trace starting at position j (for shift coherence checks)."""
    s = len(t.stem)
    if j <= s:
        return LassoTrace.make(t.stem[j:], t.loop)
    r = (j - s) % len(t.loop)
    return LassoTrace.make((), t.loop[r:] + t.loop[:r])


def align(traces, cap: int = DEFAULT_PERIOD_CAP) -> tuple[int, int]:
    """Joint folding window: (S, P) = (max stem length, lcm of loop lengths)."""
    S, P = 0, 1
    for t in traces:
        S = max(S, len(t.stem))
        P = P * len(t.loop) // math.gcd(P, len(t.loop))
        if P > cap:
            raise PeriodBlowup(f"joint period exceeds cap {cap}")
    return S, P


def trace_sort_key(t: LassoTrace):
    return t.sort_key()


def _check_qf(psi: F.Formula):
    if F.has_quantifier(psi):
        raise ValueError("eval_qf needs a quantifier-free formula")


def subformula_arrays(psi: F.Formula, assignment: dict, cap: int = DEFAULT_PERIOD_CAP):
    """Per-subformula truth arrays over the folded window.

    Returns (arrays, S, P) where arrays maps each distinct subformula of psi
    to its boolean array of length S+P; entry j is the truth value at
    position j of the joint word, and positions >= S+P fold back to
    S + ((j-S) mod P).
    """
    _check_qf(psi)
    loose = F.free_vars(psi) - set(assignment)
    if loose:
        raise ValueError(f"unassigned trace variables {sorted(loose)}")
    S, P = align(assignment.values(), cap) if assignment else (0, 1)
    N = S + P
    vals = {v: [value_at(t, j) for j in range(N)] for v, t in assignment.items()}
    arrays: dict[F.Formula, list[bool]] = {}

    def go(g: F.Formula) -> list[bool]:
        got = arrays.get(g)
        if got is not None:
            return got
        if isinstance(g, F.Atom):
            row = vals[g.var]
            arr = [g.prop in row[j] for j in range(N)]
        elif isinstance(g, F.Lit):
            arr = [g.value] * N
        elif isinstance(g, F.Not):
            arr = [not x for x in go(g.body)]
        elif isinstance(g, F.And):
            l, r = go(g.left), go(g.right)
            arr = [a and b for a, b in zip(l, r)]
        elif isinstance(g, F.Or):
            l, r = go(g.left), go(g.right)
            arr = [a or b for a, b in zip(l, r)]
        elif isinstance(g, F.Implies):
            l, r = go(g.left), go(g.right)
            arr = [(not a) or b for a, b in zip(l, r)]
        elif isinstance(g, F.Iff):
            l, r = go(g.left), go(g.right)
            arr = [a == b for a, b in zip(l, r)]
        elif isinstance(g, F.Xor):
            l, r = go(g.left), go(g.right)
            arr = [a != b for a, b in zip(l, r)]
        elif isinstance(g, F.Next):
            b = go(g.body)
            arr = [b[j + 1] if j + 1 < N else b[S] for j in range(N)]
        elif isinstance(g, F.Eventually):
            arr = _until_array([True] * N, go(g.body), S, N)
        elif isinstance(g, F.Always):
            neg = [not x for x in go(g.body)]
            arr = [not x for x in _until_array([True] * N, neg, S, N)]
        elif isinstance(g, F.Until):
            arr = _until_array(go(g.left), go(g.right), S, N)
        else:
            raise TypeError(f"unexpected node {g!r}")
        arrays[g] = arr
        return arr

    go(psi)
    return arrays, S, P


def _until_array(l: list[bool], r: list[bool], S: int, N: int) -> list[bool]:
    out = [False] * N
    # close the loop cycle: two backward sweeps reach the fixpoint
    for _ in range(2):
        for j in range(N - 1, S - 1, -1):
            nxt = out[S] if j == N - 1 else out[j + 1]
            out[j] = r[j] or (l[j] and nxt)
    for j in range(S - 1, -1, -1):
        out[j] = r[j] or (l[j] and out[j + 1])
    return out


def eval_qf(psi: F.Formula, assignment: dict, cap: int = DEFAULT_PERIOD_CAP) -> bool:
    """Evaluate a quantifier-free formula at position 0 under the assignment."""
    arrays, _, _ = subformula_arrays(psi, assignment, cap)
    return arrays[psi][0]


def _free_cache_get(cache, g):
    got = cache.get(id(g))
    if got is None:
        got = F.free_vars(g)
        cache[id(g)] = got
    return got


def eval_formula(
    f: F.Formula,
    traces,
    assignment: dict | None = None,
    cap: int = DEFAULT_PERIOD_CAP,
) -> bool:
    """Evaluate a formula whose quantifiers sit at boolean positions.

    Quantifiers range over `traces` (nonempty). Results are memoized per
    (subformula, restriction of the assignment to its free variables), which
    makes repeated existential witness searches affordable.
    """
    T = frozenset(traces)
    if not T:
        raise NotAModel("the empty trace set models nothing")
    order = sorted(T, key=trace_sort_key)
    env0 = dict(assignment or {})
    memo: dict = {}
    fcache: dict = {}
    qcache: dict = {}

    def has_q(g):
        got = qcache.get(id(g))
        if got is None:
            got = F.has_quantifier(g)
            qcache[id(g)] = got
        return got

    def go(g: F.Formula, env: dict) -> bool:
        key = (
            id(g),
            tuple(sorted((v, env[v]) for v in _free_cache_get(fcache, g))),
        )
        got = memo.get(key)
        if got is not None:
            return got
        if not has_q(g):
            out = eval_qf(g, {v: env[v] for v in _free_cache_get(fcache, g)}, cap)
        elif isinstance(g, F.Exists):
            out = False
            for t in order:
                env2 = dict(env)
                env2[g.var] = t
                if go(g.body, env2):
                    out = True
                    break
        elif isinstance(g, F.Forall):
            out = True
            for t in order:
                env2 = dict(env)
                env2[g.var] = t
                if not go(g.body, env2):
                    out = False
                    break
        elif isinstance(g, F.Not):
            out = not go(g.body, env)
        elif isinstance(g, F.And):
            out = go(g.left, env) and go(g.right, env)
        elif isinstance(g, F.Or):
            out = go(g.left, env) or go(g.right, env)
        elif isinstance(g, F.Implies):
            out = (not go(g.left, env)) or go(g.right, env)
        elif isinstance(g, F.Iff):
            out = go(g.left, env) == go(g.right, env)
        elif isinstance(g, F.Xor):
            out = go(g.left, env) != go(g.right, env)
        else:
            from .errors import QuantifierUnderTemporal

            raise QuantifierUnderTemporal(
                "quantifier inside a temporal operator has no trace-set semantics here"
            )
        memo[key] = out
        return out

    return go(f, env0)


def _prefix_components(s: F.Sentence):
    """Group matrix conjuncts into connected components linked by shared variables.

    Quantifiers distribute over variable-disjoint conjuncts, so each component
    can be evaluated under its own prefix subsequence; variables free in no
    conjunct are dropped (sound over nonempty models).
    """
    conjuncts: list[F.Formula] = []
    F._flatten(F.And, s.matrix, conjuncts)
    cvars = [F.free_vars(c) for c in conjuncts]
    parent = list(range(len(conjuncts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_var: dict[str, int] = {}
    for i, vs in enumerate(cvars):
        for v in vs:
            if v in by_var:
                ri, rj = find(i), find(by_var[v])
                if ri != rj:
                    parent[ri] = rj
            else:
                by_var[v] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(conjuncts)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        idxs = groups[root]
        vs = set()
        for i in idxs:
            vs |= cvars[i]
        matrix = F.conj([conjuncts[i] for i in idxs])
        subprefix = tuple((k, v) for k, v in s.prefix if v in vs)
        out.append((subprefix, matrix))
    return out


def eval_sentence(s: F.Sentence, traces, cap: int = DEFAULT_PERIOD_CAP) -> bool:
    """Evaluate a prenex sentence over a nonempty finite trace set."""
    T = frozenset(traces)
    if not T:
        raise NotAModel("the empty trace set models nothing")
    order = sorted(T, key=trace_sort_key)

    def rec(prefix, matrix, i, env):
        if i == len(prefix):
            return eval_qf(matrix, env, cap)
        kind, v = prefix[i]
        if kind == "exists":
            for t in order:
                env[v] = t
                if rec(prefix, matrix, i + 1, env):
                    del env[v]
                    return True
            env.pop(v, None)
            return False
        for t in order:
            env[v] = t
            if not rec(prefix, matrix, i + 1, env):
                del env[v]
                return False
        env.pop(v, None)
        return True

    for subprefix, matrix in _prefix_components(s):
        if not rec(subprefix, matrix, 0, {}):
            return False
    return True


def project_model(traces, keep) -> frozenset:
    """Project every trace to the propositions in the set `keep`."""
    keep = frozenset(keep)
    out = set()
    for t in traces:
        stem = [v & keep for v in t.stem]
        loop = [v & keep for v in t.loop]
        out.add(LassoTrace.make(stem, loop))
    return frozenset(out)


class KripkeStructure:
    """Finite transition structure with labelled states; successors are total."""

    def __init__(self, states, initial, labels, succ):
        self.states = tuple(states)
        self.initial = frozenset(initial)
        self.labels = {s: frozenset(v) for s, v in labels.items()}
        self.succ = {s: tuple(d) for s, d in succ.items()}
        declared = set(self.states)
        if len(declared) != len(self.states):
            raise ValueError("duplicate state names")
        if not self.initial:
            raise NoInitialState("structure has no initial state")
        if not self.initial <= declared:
            raise DanglingEdge("initial set names an undeclared state")
        if set(self.labels) != declared or set(self.succ) != declared:
            raise ValueError("labels/successors must cover exactly the states")
        for s in self.states:
            if not self.succ[s]:
                raise DanglingEdge(f"state {s!r} has no successor")
            for d in self.succ[s]:
                if d not in declared:
                    raise DanglingEdge(f"edge {s!r} -> {d!r} leaves the state set")

    def key(self):
        return (
            self.states,
            tuple(sorted(self.initial)),
            tuple((s, tuple(sorted(self.labels[s]))) for s in self.states),
            tuple((s, self.succ[s]) for s in self.states),
        )

    def __eq__(self, other):
        return isinstance(other, KripkeStructure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"KripkeStructure(states={self.states!r}, initial={sorted(self.initial)!r})"

    def props(self) -> frozenset[str]:
        out: set[str] = set()
        for v in self.labels.values():
            out |= v
        return frozenset(out)


def kripke_lassos(k: KripkeStructure, stem_bound: int, loop_bound: int) -> frozenset:
    """All traces realizable as a lasso run with stem length <= stem_bound
    (possibly zero) and loop length in [1, loop_bound], canonicalized."""
    if loop_bound < 1:
        raise ValueError("loop bound must be at least 1")
    if stem_bound < 0:
        raise ValueError("stem bound must be nonnegative")
    out = set()

    def loops_from(start, path):
        if len(path) <= loop_bound and start in k.succ[path[-1]]:
            yield tuple(path)
        if len(path) < loop_bound:
            for d in k.succ[path[-1]]:
                yield from loops_from(start, path + [d])

    def stems():
        yield ()
        frontier = [[q] for q in sorted(k.initial)]
        while frontier:
            path = frontier.pop()
            if len(path) <= stem_bound:
                yield tuple(path)
                if len(path) < stem_bound:
                    frontier.extend(path + [d] for d in k.succ[path[-1]])

    for stem in stems():
        starts = k.succ[stem[-1]] if stem else sorted(k.initial)
        for start in starts:
            for loop in loops_from(start, [start]):
                out.add(
                    LassoTrace.make(
                        [k.labels[q] for q in stem],
                        [k.labels[q] for q in loop],
                    )
                )
    return frozenset(out)


# contract name for formula-level evaluation (the builtin is not used here)
eval = eval_formula
