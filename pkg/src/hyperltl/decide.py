"""Satisfiability deciders: bounded searches and the one-universal fragment.

Three bounded deciders share the Verdict vocabulary: `sat_bounded_traces`
reduces trace-bounded satisfiability to one plain LTL check by expanding the
prefix over a shared trace pool, `sat_bounded_periodic` enumerates models
built from short lassos directly, and `sat_bounded_kripke` enumerates small
structures and hands each to the model checker.  `decide_complete` upgrades
the trace-bounded search to a full decision for prefixes with no universal
before an existential, where a small-model property applies.

`sat_fragment` decides the unnested F/G fragment with at most one universal
quantifier, no matter how the verdict at large bounds looks: a model is
abstracted to the set of valuation tuples its traces exhibit, a candidate is
a family of such sets with a shared prefix projection, and a greatest
fixpoint prunes the family until every support obligation is met.  Instead
of extracting a model (which may require infinitely many traces), a SAT
verdict carries a certificate from which `fragment_witness_chain` unrolls
round after round of checked witness traces.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import math
import re
import time
from dataclasses import dataclass, field

from . import formula as F
from .automata import DEFAULT_COMPLEMENT_CAP, full_alphabet, ltl_sat, unzip, zip_exists
from .errors import ComplementBlowup, NotAModel, ShapeError
from .modelcheck import modelcheck
from .semantics import LassoTrace, KripkeStructure, eval_qf, eval_sentence, trace_sort_key, value_at
from .transform import DEFAULT_NODE_CAP, eliminate_x, expand_quantifiers

__all__ = [
    "SAT",
    "UNSAT",
    "UNSAT_WITHIN_BOUND",
    "UNKNOWN",
    "Verdict",
    "ValuationTuple",
    "SCandidate",
    "FragmentCertificate",
    "ChainStep",
    "WitnessChain",
    "sat_bounded_traces",
    "decide_complete",
    "sat_bounded_periodic",
    "sat_bounded_kripke",
    "sat_fragment",
    "fragment_witness_chain",
]

SAT = "SAT"
UNSAT = "UNSAT"
UNSAT_WITHIN_BOUND = "UNSAT_WITHIN_BOUND"
UNKNOWN = "UNKNOWN"

DEFAULT_TUPLE_CAP = 16
DEFAULT_EVAL_BUDGET = 100_000
DEFAULT_CANDIDATE_BUDGET = 20_000


@dataclass(frozen=True)
class Verdict:
    """Outcome of a decider run.

    SAT verdicts carry a certificate: a frozenset of traces, a structure, or
    a FragmentCertificate.  UNSAT is definitive; UNSAT_WITHIN_BOUND only
    rules out models inside the searched bound; UNKNOWN means a budget or a
    complementation cap was hit.  Statistics record at least the elapsed
    seconds and, for enumerating deciders, the candidates explored.
    """

    outcome: str
    certificate: object = None
    statistics: dict = field(default_factory=dict)


def _vkey(v: frozenset) -> tuple:
    return (len(v), tuple(sorted(v)))


@dataclass(frozen=True)
class ValuationTuple:
    """One column of valuations per prefix variable: n leading existentials,
    the universal, then the trailing existentials."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(frozenset(v) for v in self.values))

    def __getitem__(self, i):
        return self.values[i]

    def sort_key(self):
        return tuple(_vkey(v) for v in self.values)


def _vset_key(vset):
    return (len(vset), sorted(t.sort_key() for t in vset))


def _prefix_proj(vset, n) -> frozenset:
    return frozenset(t.values[:n] for t in vset)


def _column_proj(vset, n, i) -> frozenset:
    """Projection to the prefix columns plus column i, keyed like the
    universal projection so support obligations can be compared directly."""
    return frozenset((t.values[:n], t.values[i]) for t in vset)


@dataclass(frozen=True)
class SCandidate:
    """A family of valuation-tuple sets with one shared prefix projection.

    Construction re-checks the structural requirements: every member is a
    nonempty set of tuples of arity n + nprime + 1 projecting onto p0, and
    every column of every member is supported by some member's universal
    column.  Satisfaction of the matrix is the certificate's concern.
    """

    p0: frozenset
    vsets: frozenset
    n: int
    nprime: int

    def __post_init__(self):
        width = self.n + self.nprime + 1
        if not self.vsets:
            raise ValueError("candidate without members")
        for vset in self.vsets:
            if not vset:
                raise ValueError("empty valuation-tuple set")
            for t in vset:
                if len(t.values) != width:
                    raise ValueError("tuple arity does not match the prefix")
            if _prefix_proj(vset, self.n) != self.p0:
                raise ValueError("member disagrees with the shared prefix projection")
        support = {_column_proj(v, self.n, self.n) for v in self.vsets}
        for vset in self.vsets:
            for i in range(width):
                if _column_proj(vset, self.n, i) not in support:
                    raise ValueError(f"column {i} of a member has no supporting member")


@dataclass(frozen=True)
class FragmentCertificate:
    """SAT certificate of the fragment decider.

    `sentence` is the normalized sentence the candidate describes (any X
    stacks and bare atoms anchored away, a vacuous universal appended to a
    purely existential prefix); `source` is the sentence as given.  `base`
    realizes the shared prefix projection round-robin.
    """

    source: F.Sentence
    sentence: F.Sentence
    candidate: SCandidate
    base: tuple

    def verify(self) -> bool:
        """Re-check the matrix requirement and the base realization."""
        tree = _normal_matrix(self.sentence.matrix)
        for vset in self.candidate.vsets:
            if not _vset_satisfies(tree, vset, [v for _, v in self.sentence.prefix]):
                return False
        order = sorted(self.candidate.p0, key=lambda pt: tuple(_vkey(v) for v in pt))
        for j, pt in enumerate(order):
            for i in range(self.candidate.n):
                if value_at(self.base[i], j) != pt[i]:
                    return False
        return True


@dataclass(frozen=True)
class ChainStep:
    source: LassoTrace
    witnesses: tuple


@dataclass(frozen=True)
class WitnessChain:
    base: tuple
    rounds: tuple

    def traces(self) -> frozenset:
        out = set(self.base)
        for level in self.rounds:
            for step in level:
                out.add(step.source)
                out.update(step.witnesses)
        return frozenset(out)


# ---------------------------------------------------------------------------
# bounded deciders


def sat_bounded_traces(s: F.Sentence, k: int, node_cap: int = DEFAULT_NODE_CAP) -> Verdict:
    """Satisfiability by a model of at most k traces, via one LTL check.

    Quantifiers are expanded over a pool of k trace variables, the result is
    zipped onto a single trace, and a plain LTL search produces a lasso that
    unzips into the model.  UNSAT_WITHIN_BOUND is definitive for the bound:
    no model with at most k traces exists.  Raises SizeBlowup when the
    expansion would exceed `node_cap` nodes.
    """
    if k < 1:
        raise ValueError("trace bound must be at least 1")
    start = time.perf_counter()
    expanded = expand_quantifiers(s, k, node_cap)
    witness = ltl_sat(zip_exists(expanded))
    elapsed = time.perf_counter() - start
    stats = {"bound": k, "explored": 1, "seconds": elapsed}
    if witness is None:
        return Verdict(UNSAT_WITHIN_BOUND, statistics=stats)
    parts = unzip(witness, [var for _, var in expanded.prefix])
    model = frozenset(parts.values())
    if not eval_sentence(s, model):
        raise NotAModel("internal: bounded-trace witness fails the sentence")
    stats["model_size"] = len(model)
    return Verdict(SAT, certificate=model, statistics=stats)


def decide_complete(s: F.Sentence, node_cap: int = DEFAULT_NODE_CAP) -> Verdict:
    """Definitive satisfiability for prefixes of shape E*, A*, or E*A*.

    Such sentences have a model if and only if they have one with at most
    max(1, number of existentials) traces, so the bounded search decides
    them outright and UNSAT_WITHIN_BOUND upgrades to UNSAT.
    """
    kinds = F.prefix_kinds(s)
    if not re.fullmatch("E*A*", kinds):
        raise ShapeError(
            f"prefix {kinds or 'empty'} has a universal before an existential"
        )
    verdict = sat_bounded_traces(s, max(1, kinds.count("E")), node_cap)
    if verdict.outcome == UNSAT_WITHIN_BOUND:
        return Verdict(UNSAT, statistics=verdict.statistics)
    return verdict


def _short_lassos(props, k: int):
    """Canonical lassos with |stem| + |loop| <= k over the given propositions."""
    vals = full_alphabet(props)
    out = set()
    for total in range(1, k + 1):
        for word in itertools.product(vals, repeat=total):
            for cut in range(total):
                out.add(LassoTrace.make(word[:cut], word[cut:]))
    return sorted(out, key=trace_sort_key)


def _model_probe(args):
    model, s = args
    return eval_sentence(s, model)


def _structure_probe(args):
    structure, s, cap = args
    try:
        return modelcheck(structure, s, cap=cap)
    except ComplementBlowup:
        return None


def _dispatch(candidates, probe, payload, jobs):
    """Yield (candidate, result) in enumeration order, farming `probe` out to
    worker processes when jobs > 1.  Order-preserving, so callers that stop at
    the first hit get the same answer at any job count."""
    if jobs == 1:
        for c in candidates:
            yield c, probe((c, *payload))
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        while True:
            chunk = list(itertools.islice(candidates, 32 * jobs))
            if not chunk:
                return
            results = pool.map(probe, [(c, *payload) for c in chunk])
            yield from zip(chunk, results)


def sat_bounded_periodic(
    s: F.Sentence,
    k: int,
    max_model: int | None = None,
    budget: int = DEFAULT_EVAL_BUDGET,
    jobs: int = 1,
) -> Verdict:
    """Satisfiability by a nonempty set of (stem + loop <= k)-lassos.

    Candidate models are enumerated by increasing cardinality, up to
    `max_model` traces when given, and evaluated directly.  The verdict
    UNSAT_WITHIN_BOUND is relative to both the lasso bound and the
    cardinality cap (recorded in the statistics); exceeding `budget`
    evaluations yields UNKNOWN instead.  `jobs` worker processes split the
    evaluations without changing the verdict or the certificate.
    """
    if k < 1:
        raise ValueError("lasso bound must be at least 1")
    start = time.perf_counter()
    props = sorted(F.props(s.matrix))
    raw = sum(total * len(full_alphabet(props)) ** total for total in range(1, k + 1))
    if raw > budget:
        return Verdict(
            UNKNOWN,
            statistics={"explored": 0, "estimate": raw, "budget": budget, "seconds": 0.0},
        )
    lassos = _short_lassos(props, k)
    top = len(lassos) if max_model is None else min(max_model, len(lassos))
    explored = 0
    stats = lambda: {
        "bound": k,
        "cardinality_cap": top,
        "explored": explored,
        "seconds": time.perf_counter() - start,
    }
    candidates = (
        frozenset(combo)
        for size in range(1, top + 1)
        for combo in itertools.combinations(lassos, size)
    )
    for model, ok in _dispatch(candidates, _model_probe, (s,), jobs):
        explored += 1
        if explored > budget:
            return Verdict(UNKNOWN, statistics={**stats(), "budget": budget})
        if ok:
            return Verdict(SAT, certificate=model, statistics=stats())
    return Verdict(UNSAT_WITHIN_BOUND, statistics=stats())


def _canonical_structure_key(n, labels, succ, init):
    best = None
    for perm in itertools.permutations(range(n)):
        inv = [0] * n
        for i, target in enumerate(perm):
            inv[target] = i
        key = (
            tuple(labels[inv[j]] for j in range(n)),
            tuple(tuple(sorted(perm[d] for d in succ[inv[j]])) for j in range(n)),
            tuple(sorted(perm[i] for i in init)),
        )
        if best is None or key < best:
            best = key
    return best


def sat_bounded_kripke(
    s: F.Sentence,
    k: int,
    budget: int = DEFAULT_CANDIDATE_BUDGET,
    cap: int = DEFAULT_COMPLEMENT_CAP,
    jobs: int = 1,
) -> Verdict:
    """Satisfiability by the trace set of a structure with at most k states.

    Candidates are enumerated over the matrix propositions by state count
    and deduplicated up to relabeling (exact for the small state counts the
    budget admits); each survivor is decided by the model checker.  A
    complementation blowup taints the run: with no SAT found the verdict
    degrades to UNKNOWN rather than claiming the bound was exhausted.
    `jobs` worker processes split the model-checking calls without changing
    the verdict or the certificate.
    """
    if k < 1:
        raise ValueError("state bound must be at least 1")
    start = time.perf_counter()
    props = sorted(F.props(s.matrix))
    vals = full_alphabet(props)
    explored = 0
    blowups = 0
    stats = lambda: {
        "bound": k,
        "explored": explored,
        "blowups": blowups,
        "seconds": time.perf_counter() - start,
    }

    def candidates():
        seen = set()
        for n in range(1, k + 1):
            names = [f"s{i}" for i in range(n)]
            nonempty = [
                c for r in range(1, n + 1) for c in itertools.combinations(range(n), r)
            ]
            for labels in itertools.product(range(len(vals)), repeat=n):
                for succ in itertools.product(nonempty, repeat=n):
                    for init in nonempty:
                        key = _canonical_structure_key(n, labels, succ, init)
                        if key in seen:
                            continue
                        seen.add(key)
                        yield KripkeStructure(
                            names,
                            [names[i] for i in init],
                            {names[i]: vals[labels[i]] for i in range(n)},
                            {names[i]: tuple(names[d] for d in succ[i]) for i in range(n)},
                        )

    for structure, holds in _dispatch(candidates(), _structure_probe, (s, cap), jobs):
        explored += 1
        if explored > budget:
            return Verdict(UNKNOWN, statistics={**stats(), "budget": budget})
        if holds is None:
            blowups += 1
        elif holds:
            return Verdict(SAT, certificate=structure, statistics=stats())
    if blowups:
        return Verdict(UNKNOWN, statistics=stats())
    return Verdict(UNSAT_WITHIN_BOUND, statistics=stats())


# ---------------------------------------------------------------------------
# the one-universal F/G fragment


def _needs_anchoring(f) -> bool:
    """True when the matrix has X stacks or atoms outside any F/G."""
    if F.is_propositional(f):
        return bool(F.props(f))
    if isinstance(f, (F.Eventually, F.Always)):
        return False
    if isinstance(f, F.Next):
        return True
    return any(_needs_anchoring(c) for c in F.children(f))


def _normal_matrix(f):
    """Positive and/or tree over F and G leaves with propositional bodies."""

    def go(g, neg):
        if isinstance(g, F.Lit):
            return ("lit", g.value != neg)
        if isinstance(g, F.Not):
            return go(g.body, not neg)
        if isinstance(g, (F.And, F.Or)):
            flip = isinstance(g, F.Or) == neg
            l, r = go(g.left, neg), go(g.right, neg)
            return ("and" if flip else "or", l, r)
        if isinstance(g, F.Implies):
            return go(F.Or(F.Not(g.left), g.right), neg)
        if isinstance(g, F.Iff):
            return go(
                F.Or(F.And(g.left, g.right), F.And(F.Not(g.left), F.Not(g.right))), neg
            )
        if isinstance(g, F.Xor):
            return go(F.Iff(g.left, g.right), not neg)
        if isinstance(g, F.Eventually):
            body = F.Not(g.body) if neg else g.body
            return ("G" if neg else "F", body)
        if isinstance(g, F.Always):
            body = F.Not(g.body) if neg else g.body
            return ("F" if neg else "G", body)
        raise ShapeError(f"matrix outside the anchored F/G form: {type(g).__name__}")

    return go(f, False)


def _beta_holds(beta, columns, tup) -> bool:
    """Propositional check of beta at one valuation tuple."""
    if isinstance(beta, F.Atom):
        return beta.prop in tup[columns[beta.var]]
    if isinstance(beta, F.Lit):
        return beta.value
    if isinstance(beta, F.Not):
        return not _beta_holds(beta.body, columns, tup)
    if isinstance(beta, F.And):
        return _beta_holds(beta.left, columns, tup) and _beta_holds(beta.right, columns, tup)
    if isinstance(beta, F.Or):
        return _beta_holds(beta.left, columns, tup) or _beta_holds(beta.right, columns, tup)
    if isinstance(beta, F.Implies):
        return not _beta_holds(beta.left, columns, tup) or _beta_holds(beta.right, columns, tup)
    if isinstance(beta, F.Iff):
        return _beta_holds(beta.left, columns, tup) == _beta_holds(beta.right, columns, tup)
    if isinstance(beta, F.Xor):
        return _beta_holds(beta.left, columns, tup) != _beta_holds(beta.right, columns, tup)
    raise ShapeError(f"non-propositional body under F/G: {type(beta).__name__}")


def _vset_satisfies(tree, vset, variables) -> bool:
    """Requirement on the matrix: an F leaf needs some tuple, a G leaf all."""
    columns = {v: i for i, v in enumerate(variables)}

    def ev(node):
        kind = node[0]
        if kind == "lit":
            return node[1]
        if kind == "and":
            return ev(node[1]) and ev(node[2])
        if kind == "or":
            return ev(node[1]) or ev(node[2])
        beta = node[1]
        if kind == "F":
            return any(_beta_holds(beta, columns, t.values) for t in vset)
        return all(_beta_holds(beta, columns, t.values) for t in vset)

    return ev(tree)


def _iter_bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def sat_fragment(s: F.Sentence, max_tuples: int = DEFAULT_TUPLE_CAP) -> Verdict:
    """Definitive satisfiability for unnested F/G sentences with at most one
    universal quantifier.

    A purely existential prefix gets a vacuous universal appended; X stacks
    and atoms outside any F/G are anchored to marker positions on one fresh
    leading trace first.  For each candidate shared prefix projection, the
    family of all matrix-satisfying tuple sets is pruned to the greatest
    fixpoint of the support requirement; the sentence is satisfiable exactly
    when some fixpoint is nonempty (valid families are union-closed per
    projection, so the fixpoint subsumes every nondeterministic guess).
    UNKNOWN when the valuation-tuple space exceeds `max_tuples`.
    """
    kinds = F.prefix_kinds(s)
    if not re.fullmatch("E*A?E*", kinds):
        raise ShapeError(f"prefix {kinds or 'empty'} has more than one universal")
    if not F.in_fragment(s, "FGX1"):
        raise ShapeError("matrix outside the unnested F/G/X fragment")
    start = time.perf_counter()

    work = s
    if "A" not in kinds:
        dummy = F.fresh_var("u", set(s.vars()))
        work = F.Sentence(s.prefix + (("forall", dummy),), s.matrix)
    if _needs_anchoring(work.matrix):
        work = eliminate_x(work)

    wkinds = F.prefix_kinds(work)
    n = wkinds.index("A")
    nprime = len(wkinds) - n - 1
    width = n + nprime + 1
    variables = [v for _, v in work.prefix]
    tree = _normal_matrix(work.matrix)

    ap = sorted(F.props(work.matrix))
    vals = [frozenset(c) for c in full_alphabet(ap)]
    total = len(vals) ** width
    if total > max_tuples:
        return Verdict(
            UNKNOWN,
            statistics={
                "tuples": total,
                "tuple_cap": max_tuples,
                "explored": 0,
                "seconds": time.perf_counter() - start,
            },
        )

    tuples = [ValuationTuple(v) for v in itertools.product(vals, repeat=width)]
    columns = {v: i for i, v in enumerate(variables)}

    def leafmask(node):
        kind = node[0]
        if kind == "lit":
            return ("lit", node[1])
        if kind in ("and", "or"):
            return (kind, leafmask(node[1]), leafmask(node[2]))
        sat = 0
        for i, t in enumerate(tuples):
            if _beta_holds(node[1], columns, t.values):
                sat |= 1 << i
        return (node[0], sat)

    masked = leafmask(tree)
    full = (1 << len(tuples)) - 1

    def holds(node, vmask):
        kind = node[0]
        if kind == "lit":
            return node[1]
        if kind == "and":
            return holds(node[1], vmask) and holds(node[2], vmask)
        if kind == "or":
            return holds(node[1], vmask) or holds(node[2], vmask)
        if kind == "F":
            return vmask & node[1] != 0
        return vmask & (full ^ node[1]) == 0

    pre_of = [t.values[:n] for t in tuples]
    explored = 0
    buckets = {}
    for vmask in range(1, full + 1):
        explored += 1
        if not holds(masked, vmask):
            continue
        p0 = frozenset(pre_of[i] for i in _iter_bits(vmask))
        buckets.setdefault(p0, []).append(vmask)

    def proj(vmask, col):
        return frozenset((pre_of[i], tuples[i].values[col]) for i in _iter_bits(vmask))

    stats = lambda: {
        "tuples": total,
        "explored": explored,
        "buckets": len(buckets),
        "seconds": time.perf_counter() - start,
    }

    for p0 in sorted(buckets, key=lambda ps: sorted(tuple(_vkey(v) for v in pt) for pt in ps)):
        members = buckets[p0]
        projections = {m: [proj(m, c) for c in range(width)] for m in members}
        live = set(members)
        while True:
            support = {projections[m][n] for m in live}
            pruned = {
                m for m in live if all(pr in support for pr in projections[m])
            }
            if pruned == live:
                break
            live = pruned
        if not live:
            continue
        vsets = frozenset(
            frozenset(tuples[i] for i in _iter_bits(m)) for m in live
        )
        candidate = SCandidate(p0=p0, vsets=vsets, n=n, nprime=nprime)
        order = sorted(p0, key=lambda pt: tuple(_vkey(v) for v in pt))
        base = tuple(
            LassoTrace.make([], [pt[i] for pt in order]) for i in range(n)
        )
        certificate = FragmentCertificate(
            source=s, sentence=work, candidate=candidate, base=base
        )
        if not certificate.verify():
            raise NotAModel("internal: fragment certificate fails re-verification")
        return Verdict(SAT, certificate=certificate, statistics=stats())

    return Verdict(UNSAT, statistics=stats())


def _realize_universal(vset, p0_order, n):
    """A pure-loop trace whose joint behaviour with the base traces shows
    exactly the (prefix, universal) pairs of the given set, each infinitely
    often: the c-th occurrence of a prefix tuple takes the c-th compatible
    universal valuation, round-robin."""
    width0 = len(p0_order)
    options = {}
    for pt in p0_order:
        opts = sorted(
            {t.values[n] for t in vset if t.values[:n] == pt}, key=_vkey
        )
        options[pt] = opts
    reps = math.lcm(*(len(o) for o in options.values()))
    seen = {pt: 0 for pt in p0_order}
    loop = []
    for j in range(width0 * reps):
        pt = p0_order[j % width0]
        opts = options[pt]
        loop.append(opts[seen[pt] % len(opts)])
        seen[pt] += 1
    return LassoTrace.make([], loop)


def fragment_witness_chain(certificate: FragmentCertificate, depth: int) -> WitnessChain:
    """Unroll `depth` rounds of witness construction from a SAT certificate.

    Every frontier trace carries the member set that describes its joint
    behaviour with the base traces; scheduling its tuples round-robin over a
    common loop yields the trailing existential witnesses, with the loop
    stretched so that every tuple lands in it.  Each emitted step is checked
    against the matrix before it is returned.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    cand = certificate.candidate
    n, nprime = cand.n, cand.nprime
    sentence = certificate.sentence
    variables = [v for _, v in sentence.prefix]
    order = sorted(cand.p0, key=lambda pt: tuple(_vkey(v) for v in pt))
    width0 = max(1, len(order))

    def univ_proj(vset):
        return _column_proj(vset, n, n)

    def pick(target):
        matches = [v for v in cand.vsets if univ_proj(v) == target]
        if not matches:
            raise NotAModel("internal: support obligation unmet in certificate")
        return max(matches, key=_vset_key)

    frontier = []
    if n == 0:
        best = max(cand.vsets, key=_vset_key)
        frontier.append((_realize_universal(best, order, n), best))
    else:
        for i in range(n):
            target = frozenset((pt, pt[i]) for pt in cand.p0)
            frontier.append((certificate.base[i], pick(target)))

    rounds = []
    for _ in range(depth):
        steps = []
        nxt = []
        for trace, vset in frontier:
            if trace.stem:
                raise NotAModel("internal: chain frontier must be pure loops")
            loop_len = math.lcm(width0, len(trace.loop))
            joint = [
                (order[j % width0], value_at(trace, j)) for j in range(loop_len)
            ]
            occurring = set(joint)
            if occurring != univ_proj(vset):
                raise NotAModel("internal: frontier trace drifted from its member set")
            ext = {
                u: sorted(
                    (t for t in vset if (t.values[:n], t.values[n]) == u),
                    key=lambda t: t.sort_key(),
                )
                for u in occurring
            }
            reps = math.lcm(*(len(e) for e in ext.values()))
            seen = {u: 0 for u in occurring}
            scheduled = set()
            columns = [[] for _ in range(nprime)]
            for j in range(loop_len * reps):
                u = joint[j % loop_len]
                chosen = ext[u][seen[u] % len(ext[u])]
                seen[u] += 1
                scheduled.add(chosen)
                for w in range(nprime):
                    columns[w].append(chosen.values[n + 1 + w])
            if scheduled != set(vset):
                raise NotAModel("internal: schedule missed a tuple of the member set")
            witnesses = tuple(LassoTrace.make([], col) for col in columns)
            assignment = {variables[i]: certificate.base[i] for i in range(n)}
            assignment[variables[n]] = trace
            for w in range(nprime):
                assignment[variables[n + 1 + w]] = witnesses[w]
            if not eval_qf(sentence.matrix, assignment):
                raise NotAModel("internal: chain step fails the matrix")
            steps.append(ChainStep(source=trace, witnesses=witnesses))
            for w in range(nprime):
                nxt.append((witnesses[w], pick(_column_proj(vset, n, n + 1 + w))))
        rounds.append(tuple(steps))
        frontier = nxt
    return WitnessChain(base=certificate.base, rounds=tuple(rounds))
