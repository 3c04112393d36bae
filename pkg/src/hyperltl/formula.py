"""Syntax trees, measures, fragments, and prenexing for trace-quantified LTL.

A `Formula` is an immutable tree. Atoms are propositions indexed by a trace
variable, written a[p] in the surface syntax. Quantifiers may appear anywhere
in a `Formula`; a `Sentence` is the prenex form: a quantifier prefix over a
quantifier-free matrix.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass

from .errors import CaptureError, QuantifierUnderTemporal


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Atom(Formula):
    prop: str
    var: str

    def __post_init__(self):
        object.__setattr__(self, "prop", sys.intern(self.prop))
        object.__setattr__(self, "var", sys.intern(self.var))


@dataclass(frozen=True)
class Lit(Formula):
    value: bool


TRUE = Lit(True)
FALSE = Lit(False)


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Xor(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    body: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    body: Formula


@dataclass(frozen=True)
class Always(Formula):
    body: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "var", sys.intern(self.var))


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "var", sys.intern(self.var))


_BINARY = (And, Or, Implies, Iff, Xor, Until)
_UNARY = (Not, Next, Eventually, Always)
_QUANT = (Exists, Forall)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, _BINARY):
        return (f.left, f.right)
    if isinstance(f, _UNARY):
        return (f.body,)
    if isinstance(f, _QUANT):
        return (f.body,)
    return ()


def conj(items) -> Formula:
    """Right-associated conjunction; empty input is true."""
    items = list(items)
    if not items:
        return TRUE
    out = items[-1]
    for g in reversed(items[:-1]):
        out = And(g, out)
    return out


def disj(items) -> Formula:
    """Right-associated disjunction; empty input is false."""
    items = list(items)
    if not items:
        return FALSE
    out = items[-1]
    for g in reversed(items[:-1]):
        out = Or(g, out)
    return out


def conj_balanced(items) -> Formula:
    """Conjunction as a balanced tree; chained nesting of very wide
    conjunctions would exceed the recursion depth of structural traversals."""
    items = list(items)
    if not items:
        return TRUE
    while len(items) > 1:
        items = [
            And(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def next_power(f: Formula, k: int) -> Formula:
    for _ in range(k):
        f = Next(f)
    return f


@dataclass(frozen=True)
class Sentence:
    """Prenex sentence: quantifier prefix (kind, variable) over a closed matrix."""

    prefix: tuple[tuple[str, str], ...]
    matrix: Formula

    def __post_init__(self):
        seen = set()
        for kind, var in self.prefix:
            if kind not in ("forall", "exists"):
                raise ValueError(f"bad quantifier kind {kind!r}")
            if var in seen:
                raise ValueError(f"duplicate prefix variable {var!r}")
            seen.add(var)
        if has_quantifier(self.matrix):
            raise ValueError("sentence matrix must be quantifier-free")
        loose = free_vars(self.matrix) - seen
        if loose:
            raise ValueError(f"matrix has unbound variables {sorted(loose)}")

    def vars(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.prefix)


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset((f.var,))
    if isinstance(f, _QUANT):
        return free_vars(f.body) - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out = out | free_vars(c)
    return out


def props(f) -> frozenset[str]:
    """All proposition names in a formula or sentence."""
    if isinstance(f, Sentence):
        return props(f.matrix)
    if isinstance(f, Atom):
        return frozenset((f.prop,))
    out: frozenset[str] = frozenset()
    for c in children(f):
        out = out | props(c)
    return out


def has_quantifier(f: Formula) -> bool:
    if isinstance(f, _QUANT):
        return True
    return any(has_quantifier(c) for c in children(f))


def subformulas(f: Formula) -> set[Formula]:
    """The set of structurally distinct subformulas, f included."""
    out: set[Formula] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in out:
            continue
        out.add(g)
        stack.extend(children(g))
    return out


def size(f: Formula) -> int:
    """Formula size counted over distinct subformulas."""
    return len(subformulas(f))


def temporal_depth(f) -> int:
    """Nesting depth of temporal operators; quantifiers are transparent."""
    if isinstance(f, Sentence):
        return temporal_depth(f.matrix)
    if isinstance(f, (Atom, Lit)):
        return 0
    if isinstance(f, (Next, Eventually, Always)):
        return 1 + temporal_depth(f.body)
    if isinstance(f, Until):
        return 1 + max(temporal_depth(f.left), temporal_depth(f.right))
    return max(temporal_depth(c) for c in children(f))


def alternation_depth(s: Sentence) -> int:
    """Number of quantifier switches along the prefix."""
    kinds = [kind for kind, _ in s.prefix]
    return sum(1 for a, b in zip(kinds, kinds[1:]) if a != b)


def prefix_kinds(s: Sentence) -> str:
    """Prefix as a string over {'A', 'E'}, outermost first."""
    return "".join("A" if kind == "forall" else "E" for kind, _ in s.prefix)


def classify_prefix(s: Sentence) -> str:
    """Run-length rendering of the prefix, e.g. '∀2∃1'; empty prefix gives ''."""
    out = []
    for kind, _ in s.prefix:
        sym = "∀" if kind == "forall" else "∃"
        if out and out[-1][0] == sym:
            out[-1][1] += 1
        else:
            out.append([sym, 1])
    return "".join(f"{sym}{n}" for sym, n in out)


def is_propositional(f: Formula) -> bool:
    if isinstance(f, (Atom, Lit)):
        return True
    if isinstance(f, (Next, Eventually, Always, Until)) or isinstance(f, _QUANT):
        return False
    return all(is_propositional(c) for c in children(f))


def _fragment_ok(f: Formula, allow_x: bool) -> bool:
    if is_propositional(f):
        return True
    if isinstance(f, (Not, And, Or, Implies, Iff, Xor)):
        return all(_fragment_ok(c, allow_x) for c in children(f))
    if isinstance(f, (Eventually, Always)):
        return is_propositional(f.body)
    if isinstance(f, Next):
        if not allow_x:
            return False
        body = f.body
        while isinstance(body, Next):
            body = body.body
        return is_propositional(body)
    return False


def in_fragment(s, fragment: str) -> bool:
    """Membership in the unnested fragments: 'FG1' (F/G only) or 'FGX1' (adds X^n)."""
    if fragment not in ("FG1", "FGX1"):
        raise ValueError(f"unknown fragment {fragment!r}")
    matrix = s.matrix if isinstance(s, Sentence) else s
    if has_quantifier(matrix):
        return False
    return _fragment_ok(matrix, allow_x=(fragment == "FGX1"))


def fresh_var(base: str, used) -> str:
    if base not in used:
        return base
    i = 1
    while f"{base}{i}" in used:
        i += 1
    return f"{base}{i}"


def substitute(f: Formula, old: str, new: str) -> Formula:
    """Rename free occurrences of trace variable `old` to `new`."""
    if old == new:
        return f
    if isinstance(f, Atom):
        return Atom(f.prop, new) if f.var == old else f
    if isinstance(f, _QUANT):
        if f.var == old:
            return f
        if f.var == new and old in free_vars(f.body):
            raise CaptureError(f"substituting {old!r}->{new!r} under binder {new!r}")
        return type(f)(f.var, substitute(f.body, old, new))
    kids = children(f)
    if not kids:
        return f
    new_kids = tuple(substitute(c, old, new) for c in kids)
    if new_kids == kids:
        return f
    return type(f)(*new_kids)


def _expand_quantified_equivalences(f: Formula) -> Formula:
    if not has_quantifier(f):
        return f
    if isinstance(f, Iff):
        l = _expand_quantified_equivalences(f.left)
        r = _expand_quantified_equivalences(f.right)
        return And(Implies(l, r), Implies(r, l))
    if isinstance(f, Xor):
        l = _expand_quantified_equivalences(f.left)
        r = _expand_quantified_equivalences(f.right)
        return Not(And(Implies(l, r), Implies(r, l)))
    kids = children(f)
    if not kids:
        return f
    new_kids = tuple(_expand_quantified_equivalences(c) for c in kids)
    if isinstance(f, _QUANT):
        return type(f)(f.var, new_kids[0])
    return type(f)(*new_kids)


def _rename_apart(f: Formula, env: dict, used: set) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.prop, env.get(f.var, f.var))
    if isinstance(f, _QUANT):
        name = f.var
        if name in used:
            name = fresh_var(f.var, used)
        used.add(name)
        inner = dict(env)
        inner[f.var] = name
        return type(f)(name, _rename_apart(f.body, inner, used))
    kids = children(f)
    if not kids:
        return f
    return type(f)(*(_rename_apart(c, env, used) for c in kids))


def _hoist(f: Formula, flip: bool):
    """Pull quantifiers out left-to-right; `flip` tracks negative polarity."""
    if isinstance(f, _QUANT):
        kind = "forall" if isinstance(f, Forall) else "exists"
        if flip:
            kind = "forall" if kind == "exists" else "exists"
        prefix, matrix = _hoist(f.body, flip)
        return [(kind, f.var)] + prefix, matrix
    if isinstance(f, Not):
        prefix, matrix = _hoist(f.body, not flip)
        return prefix, Not(matrix)
    if isinstance(f, (And, Or)):
        pl, ml = _hoist(f.left, flip)
        pr, mr = _hoist(f.right, flip)
        return pl + pr, type(f)(ml, mr)
    if isinstance(f, Implies):
        pl, ml = _hoist(f.left, not flip)
        pr, mr = _hoist(f.right, flip)
        return pl + pr, Implies(ml, mr)
    if isinstance(f, (Iff, Xor)):
        # quantified equivalences were expanded away beforehand
        return [], f
    if isinstance(f, (Next, Eventually, Always, Until)):
        if has_quantifier(f):
            raise QuantifierUnderTemporal(
                "cannot prenex a quantifier inside a temporal operator"
            )
        return [], f
    return [], f


def prenex(f: Formula) -> Sentence:
    """Hoist quantifiers into a prefix, renaming bound variables on collision."""
    g = _expand_quantified_equivalences(f)
    g = _rename_apart(g, {}, set(free_vars(g)))
    prefix, matrix = _hoist(g, flip=False)
    return Sentence(tuple(prefix), matrix)


def _flatten(cls, f: Formula, out: list):
    if isinstance(f, cls):
        _flatten(cls, f.left, out)
        _flatten(cls, f.right, out)
    else:
        out.append(f)


def simplify(f: Formula) -> Formula:
    """Constant folding, idempotence, and complement detection; shape-preserving
    otherwise (no operator translations beyond dropping trivial parts)."""
    if isinstance(f, (Atom, Lit)):
        return f
    if isinstance(f, _QUANT):
        body = simplify(f.body)
        if isinstance(body, Lit):
            return body  # models are nonempty, so the binder is vacuous
        return type(f)(f.var, body)
    if isinstance(f, Not):
        body = simplify(f.body)
        if isinstance(body, Lit):
            return Lit(not body.value)
        if isinstance(body, Not):
            return body.body
        return Not(body)
    if isinstance(f, (And, Or)):
        is_and = isinstance(f, And)
        unit, absorb = (TRUE, FALSE) if is_and else (FALSE, TRUE)
        parts: list[Formula] = []
        _flatten(type(f), f, parts)
        kept: list[Formula] = []
        seen = set()
        for p in parts:
            sub: list[Formula] = []
            _flatten(type(f), simplify(p), sub)
            for q in sub:
                if q == absorb:
                    return absorb
                if q == unit or q in seen:
                    continue
                seen.add(q)
                kept.append(q)
        for p in kept:
            comp = p.body if isinstance(p, Not) else Not(p)
            if comp in seen:
                return absorb
        if not kept:
            return unit
        return conj(kept) if is_and else disj(kept)
    if isinstance(f, Implies):
        l, r = simplify(f.left), simplify(f.right)
        if l == FALSE or r == TRUE or l == r:
            return TRUE
        if l == TRUE:
            return r
        if r == FALSE:
            return simplify(Not(l))
        return Implies(l, r)
    if isinstance(f, Iff):
        l, r = simplify(f.left), simplify(f.right)
        if l == r:
            return TRUE
        if l == TRUE:
            return r
        if r == TRUE:
            return l
        if l == FALSE:
            return simplify(Not(r))
        if r == FALSE:
            return simplify(Not(l))
        return Iff(l, r)
    if isinstance(f, Xor):
        l, r = simplify(f.left), simplify(f.right)
        if l == r:
            return FALSE
        if l == FALSE:
            return r
        if r == FALSE:
            return l
        if l == TRUE:
            return simplify(Not(r))
        if r == TRUE:
            return simplify(Not(l))
        return Xor(l, r)
    if isinstance(f, Next):
        body = simplify(f.body)
        if isinstance(body, Lit):
            return body
        return Next(body)
    if isinstance(f, Eventually):
        body = simplify(f.body)
        if isinstance(body, Lit):
            return body
        if isinstance(body, Eventually):
            return body
        return Eventually(body)
    if isinstance(f, Always):
        body = simplify(f.body)
        if isinstance(body, Lit):
            return body
        if isinstance(body, Always):
            return body
        return Always(body)
    if isinstance(f, Until):
        l, r = simplify(f.left), simplify(f.right)
        if isinstance(r, Lit):
            return r
        if l == FALSE:
            return r
        return Until(l, r)
    raise TypeError(f"unexpected node {f!r}")


def core_normalize(f: Formula) -> Formula:
    """Rewrite into the core connectives: atoms, constants, not, or, X, U."""
    if isinstance(f, (Atom, Lit)):
        return f
    if isinstance(f, _QUANT):
        return type(f)(f.var, core_normalize(f.body))
    if isinstance(f, Not):
        return Not(core_normalize(f.body))
    if isinstance(f, Or):
        return Or(core_normalize(f.left), core_normalize(f.right))
    if isinstance(f, And):
        return Not(Or(Not(core_normalize(f.left)), Not(core_normalize(f.right))))
    if isinstance(f, Implies):
        return Or(Not(core_normalize(f.left)), core_normalize(f.right))
    if isinstance(f, Iff):
        l, r = core_normalize(f.left), core_normalize(f.right)
        return Or(Not(Or(Not(l), Not(r))), Not(Or(l, r)))
    if isinstance(f, Xor):
        l, r = core_normalize(f.left), core_normalize(f.right)
        return Not(Or(Not(Or(Not(l), Not(r))), Not(Or(l, r))))
    if isinstance(f, Next):
        return Next(core_normalize(f.body))
    if isinstance(f, Eventually):
        return Until(TRUE, core_normalize(f.body))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(core_normalize(f.body))))
    if isinstance(f, Until):
        return Until(core_normalize(f.left), core_normalize(f.right))
    raise TypeError(f"unexpected node {f!r}")


def _structure_key(f: Formula) -> str:
    if isinstance(f, Atom):
        return f"(a {f.prop} {f.var})"
    if isinstance(f, Lit):
        return "(t)" if f.value else "(f)"
    if isinstance(f, _QUANT):
        tag = "E" if isinstance(f, Exists) else "A"
        return f"({tag} {f.var} {_structure_key(f.body)})"
    tag = type(f).__name__
    inner = " ".join(_structure_key(c) for c in children(f))
    return f"({tag} {inner})"


def marker(f: Formula) -> str:
    """Deterministic marker proposition for a subformula, in the @ namespace."""
    digest = hashlib.sha256(_structure_key(f).encode()).hexdigest()[:8]
    return f"@m_{digest}"
