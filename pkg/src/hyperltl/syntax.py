"""Concrete syntax: the formula language and the four textual file formats.

Formula grammar, loosest to tightest:

    quantifiers (forall v. / exists v.)  <  <->  <  ->  <  xor  <  |  <  &
      <  U (right assoc)  <  prefix ops (! X F G)  <  atoms

Atoms are written prop[var]. Propositions and trace variables are words over
[a-z0-9_@]; names starting with @ are reserved for generated markers, so user
input may mention them (round-trips must reparse) but fresh user names should
not begin with @. Comments run from # to end of line in every format.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula as F
from .errors import (
    DanglingEdge,
    EmptyLoop,
    EmptyWordPair,
    NoInitialState,
    ParseError,
    UnknownOpcode,
)
from .semantics import KripkeStructure, LassoTrace


@dataclass(frozen=True)
class SourceSpan:
    """Byte offsets [start, end) into the parsed text."""

    start: int
    end: int

    def __str__(self):
        return f"[{self.start}..{self.end})"


_PUNCT = ("<->", "->", "(", ")", "[", "]", ".", ",", "{", "}", "|", "&", "!", ";", ":", "/", "+")
_KEYWORDS = ("forall", "exists", "xor", "true", "false")
_NAME_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789_@")


@dataclass(frozen=True)
class Token:
    kind: str  # punctuation literal, 'name', 'op', or 'eof'
    text: str
    span: SourceSpan


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        matched = False
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token(p, p, SourceSpan(i, i + len(p))))
                i += len(p)
                matched = True
                break
        if matched:
            continue
        if c in "XFGU":
            toks.append(Token("op", c, SourceSpan(i, i + 1)))
            i += 1
            continue
        if c in _NAME_CHARS:
            j = i
            while j < n and text[j] in _NAME_CHARS:
                j += 1
            word = text[i:j]
            kind = word if word in _KEYWORDS else "name"
            toks.append(Token(kind, word, SourceSpan(i, j)))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", SourceSpan(i, i + 1))
    toks.append(Token("eof", "", SourceSpan(n, n)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def take(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"got {t.text or 'end of input'!r}", t.span, (kind,))
        return self.take()

    def formula(self) -> F.Formula:
        if self.peek().kind in ("forall", "exists"):
            q = self.take()
            var = self.expect("name").text
            self.expect(".")
            body = self.formula()
            return F.Forall(var, body) if q.kind == "forall" else F.Exists(var, body)
        return self.iff_expr()

    def iff_expr(self) -> F.Formula:
        left = self.imp_expr()
        while self.peek().kind == "<->":
            self.take()
            left = F.Iff(left, self.imp_expr())
        return left

    def imp_expr(self) -> F.Formula:
        left = self.xor_expr()
        if self.peek().kind == "->":
            self.take()
            return F.Implies(left, self.imp_expr())
        return left

    def xor_expr(self) -> F.Formula:
        left = self.or_expr()
        while self.peek().kind == "xor":
            self.take()
            left = F.Xor(left, self.or_expr())
        return left

    def or_expr(self) -> F.Formula:
        left = self.and_expr()
        while self.peek().kind == "|":
            self.take()
            left = F.Or(left, self.and_expr())
        return left

    def and_expr(self) -> F.Formula:
        left = self.until_expr()
        while self.peek().kind == "&":
            self.take()
            left = F.And(left, self.until_expr())
        return left

    def until_expr(self) -> F.Formula:
        left = self.unary()
        if self.peek().kind == "op" and self.peek().text == "U":
            self.take()
            return F.Until(left, self.until_expr())
        return left

    def unary(self) -> F.Formula:
        t = self.peek()
        if t.kind == "!":
            self.take()
            return F.Not(self.unary())
        if t.kind == "op" and t.text in ("X", "F", "G"):
            self.take()
            body = self.unary()
            return {"X": F.Next, "F": F.Eventually, "G": F.Always}[t.text](body)
        return self.primary()

    def primary(self) -> F.Formula:
        t = self.peek()
        if t.kind == "(":
            self.take()
            inner = self.formula()
            self.expect(")")
            return inner
        if t.kind == "true":
            self.take()
            return F.TRUE
        if t.kind == "false":
            self.take()
            return F.FALSE
        if t.kind == "name":
            self.take()
            self.expect("[")
            var = self.expect("name").text
            self.expect("]")
            return F.Atom(t.text, var)
        raise ParseError(
            f"got {t.text or 'end of input'!r}",
            t.span,
            ("(", "true", "false", "proposition", "!", "X", "F", "G"),
        )


def parse_formula(text: str) -> F.Formula:
    """Parse a formula; open formulas are accepted (closedness is a separate check)."""
    p = _Parser(text)
    f = p.formula()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.span, ("end of input",))
    return f


def parse_sentence(text: str) -> F.Sentence:
    """Parse and prenex into a sentence; rejects open formulas."""
    return F.prenex(parse_formula(text))


# printing: one precedence level per grammar rule, loosest first
_LEVELS = {
    F.Iff: 1,
    F.Implies: 2,
    F.Xor: 3,
    F.Or: 4,
    F.And: 5,
    F.Until: 6,
}
_PREFIX_LEVEL = 7


def _level(f: F.Formula) -> int:
    if isinstance(f, (F.Exists, F.Forall)):
        return 0
    for cls, lev in _LEVELS.items():
        if isinstance(f, cls):
            return lev
    if isinstance(f, (F.Not, F.Next, F.Eventually, F.Always)):
        return _PREFIX_LEVEL
    return 8  # atoms, constants


def _wrap(f: F.Formula, parent_level: int, right_assoc_ok: bool = False) -> str:
    lev = _level(f)
    text = print_formula(f)
    if lev < parent_level or (lev == parent_level and not right_assoc_ok):
        return f"({text})"
    return text


def print_formula(f) -> str:
    """Render with minimal parentheses; parse_formula(print_formula(f)) == f."""
    if isinstance(f, F.Sentence):
        parts = [
            ("forall " if kind == "forall" else "exists ") + var + ". "
            for kind, var in f.prefix
        ]
        return "".join(parts) + print_formula(f.matrix)
    if isinstance(f, (F.Exists, F.Forall)):
        q = "exists" if isinstance(f, F.Exists) else "forall"
        return f"{q} {f.var}. {print_formula(f.body)}"
    if isinstance(f, F.Atom):
        return f"{f.prop}[{f.var}]"
    if isinstance(f, F.Lit):
        return "true" if f.value else "false"
    if isinstance(f, F.Not):
        return "!" + _wrap(f.body, _PREFIX_LEVEL, right_assoc_ok=True)
    if isinstance(f, F.Next):
        return "X " + _wrap(f.body, _PREFIX_LEVEL, right_assoc_ok=True)
    if isinstance(f, F.Eventually):
        return "F " + _wrap(f.body, _PREFIX_LEVEL, right_assoc_ok=True)
    if isinstance(f, F.Always):
        return "G " + _wrap(f.body, _PREFIX_LEVEL, right_assoc_ok=True)
    if isinstance(f, F.Until):
        lev = _LEVELS[F.Until]
        return f"{_wrap(f.left, lev + 1)} U {_wrap(f.right, lev, right_assoc_ok=True)}"
    if isinstance(f, (F.And, F.Or, F.Xor, F.Iff)):
        lev = _LEVELS[type(f)]
        sym = {F.And: "&", F.Or: "|", F.Xor: "xor", F.Iff: "<->"}[type(f)]
        # left associative: left child may sit at the same level
        left = _wrap(f.left, lev, right_assoc_ok=True)
        right = _wrap(f.right, lev + 1)
        return f"{left} {sym} {right}"
    if isinstance(f, F.Implies):
        lev = _LEVELS[F.Implies]
        left = _wrap(f.left, lev + 1)
        right = _wrap(f.right, lev, right_assoc_ok=True)
        return f"{left} -> {right}"
    raise TypeError(f"unexpected node {f!r}")


# --- trace model files (.trc) -------------------------------------------------


def _line_tokens(text: str):
    """Logical statements: tokens grouped between top-level keywords, spans kept."""
    return tokenize(text)


def parse_trace_model(text: str) -> frozenset[LassoTrace]:
    """Parse `trace NAME : V ; V | V ; V ;` lines into a canonical trace set.

    Valuations are `{}` or `{a, b}`; `|` separates stem from loop; the stem may
    be empty, the loop may not. Duplicate propositions inside one valuation are
    rejected; duplicate traces (after canonicalization) merge silently.
    """
    toks = tokenize(text)
    pos = 0

    def peek():
        return toks[pos]

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def expect(kind):
        t = peek()
        if t.kind != kind:
            raise ParseError(f"got {t.text or 'end of input'!r}", t.span, (kind,))
        return take()

    traces = set()
    names = set()
    while peek().kind != "eof":
        kw = expect("name")
        if kw.text != "trace":
            raise ParseError(f"got {kw.text!r}", kw.span, ("trace",))
        name = expect("name").text
        if name in names:
            raise ParseError(f"duplicate trace name {name!r}", kw.span)
        names.add(name)
        expect(":")
        stem: list[frozenset] = []
        loop: list[frozenset] = []
        while peek().kind == "{":
            pos, v = _parse_valuation(toks, pos)
            stem.append(v)
            if peek().kind == ";":
                take()
        expect("|")
        if peek().kind != "{":
            raise EmptyLoop(f"trace {name!r} has an empty loop")
        while peek().kind == "{":
            pos, v = _parse_valuation(toks, pos)
            loop.append(v)
            t = expect(";")
            if peek().kind == "{":
                continue
            break
        traces.add(LassoTrace.make(stem, loop))
    return frozenset(traces)


def _parse_valuation(toks, pos):
    t = toks[pos]
    if t.kind != "{":
        raise ParseError(f"got {t.text or 'end of input'!r}", t.span, ("{",))
    pos += 1
    props = set()
    if toks[pos].kind == "}":
        return pos + 1, frozenset()
    while True:
        name = toks[pos]
        if name.kind != "name":
            raise ParseError(f"got {name.text!r}", name.span, ("proposition",))
        if name.text in props:
            raise ParseError(f"duplicate proposition {name.text!r}", name.span)
        props.add(name.text)
        pos += 1
        t = toks[pos]
        if t.kind == ",":
            pos += 1
            continue
        if t.kind == "}":
            return pos + 1, frozenset(props)
        raise ParseError(f"got {t.text!r}", t.span, (",", "}"))


def print_trace_model(traces, names=None) -> str:
    """Render a trace set in .trc syntax, deterministically ordered."""
    out = []
    ordered = sorted(traces, key=lambda t: t.sort_key())
    for i, t in enumerate(ordered):
        name = names[i] if names else f"t{i}"
        stem = " ; ".join(_render_valuation(v) for v in t.stem)
        loop = " ; ".join(_render_valuation(v) for v in t.loop)
        mid = "| " if not stem else f"{stem} | "
        out.append(f"trace {name} : {mid}{loop} ;")
    return "\n".join(out) + "\n"


def _render_valuation(v) -> str:
    if not v:
        return "{}"
    return "{" + ", ".join(sorted(v)) + "}"


# --- Kripke structure files (.kst) --------------------------------------------


def parse_kripke(text: str) -> KripkeStructure:
    """Parse `state NAME : {props} [initial]` and `edge A -> B` lines."""
    toks = tokenize(text)
    pos = 0

    def peek():
        return toks[pos]

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def expect(kind):
        t = peek()
        if t.kind != kind:
            raise ParseError(f"got {t.text or 'end of input'!r}", t.span, (kind,))
        return take()

    states: list[str] = []
    labels: dict[str, frozenset] = {}
    initial: set[str] = set()
    edges: list[tuple[str, str, SourceSpan]] = []
    while peek().kind != "eof":
        kw = expect("name")
        if kw.text == "state":
            name = expect("name").text
            if name in labels:
                raise ParseError(f"duplicate state {name!r}", kw.span)
            expect(":")
            pos, val = _parse_valuation(toks, pos)
            states.append(name)
            labels[name] = val
            if peek().kind == "name" and peek().text == "initial":
                take()
                initial.add(name)
        elif kw.text == "edge":
            src = expect("name").text
            expect("->")
            dst = expect("name").text
            edges.append((src, dst, kw.span))
        else:
            raise ParseError(f"got {kw.text!r}", kw.span, ("state", "edge"))
    succ: dict[str, list[str]] = {s: [] for s in states}
    for src, dst, span in edges:
        if src not in labels or dst not in labels:
            missing = src if src not in labels else dst
            raise DanglingEdge(f"edge endpoint {missing!r} is not a declared state")
        if dst not in succ[src]:
            succ[src].append(dst)
    return KripkeStructure(
        states=tuple(states),
        initial=frozenset(initial),
        labels=labels,
        succ={s: tuple(d) for s, d in succ.items()},
    )


def print_kripke(k: KripkeStructure) -> str:
    out = []
    for s in k.states:
        suffix = " initial" if s in k.initial else ""
        out.append(f"state {s} : {_render_valuation(k.labels[s])}{suffix}")
    for s in k.states:
        for d in k.succ[s]:
            out.append(f"edge {s} -> {d}")
    return "\n".join(out) + "\n"


# --- correspondence instances (.pcp) -------------------------------------------


def parse_pcp(text: str):
    """Parse `pair WORD / WORD` lines; words are lowercase letters."""
    from .encode import PcpInstance

    toks = tokenize(text)
    pos = 0
    pairs = []
    while toks[pos].kind != "eof":
        kw = toks[pos]
        if kw.kind != "name" or kw.text != "pair":
            raise ParseError(f"got {kw.text!r}", kw.span, ("pair",))
        pos += 1
        top = toks[pos]
        if top.kind != "name":
            if top.kind == "/":
                raise EmptyWordPair("empty word on the left side of a pair")
            raise ParseError(f"got {top.text!r}", top.span, ("word",))
        pos += 1
        sep = toks[pos]
        if sep.kind != "/":
            raise ParseError(f"got {sep.text!r}", sep.span, ("/",))
        pos += 1
        bot = toks[pos]
        if bot.kind != "name":
            raise EmptyWordPair("empty word on the right side of a pair")
        pos += 1
        for word, tok in ((top.text, top), (bot.text, bot)):
            if not word.isalpha():
                raise ParseError(f"word {word!r} must be letters only", tok.span)
        pairs.append((top.text, bot.text))
    if not pairs:
        raise ParseError("no pairs declared", SourceSpan(0, 0))
    return PcpInstance(tuple(pairs))


def print_pcp(instance) -> str:
    return "".join(f"pair {u} / {v}\n" for u, v in instance.pairs)


# --- counter machines (.cm) -----------------------------------------------------


def parse_minsky(text: str):
    """Parse `init STATE` and `trans FROM {1|2} {inc|dec|zero} TO` lines."""
    from .encode import MinskyMachine

    toks = tokenize(text)
    pos = 0
    init = None
    rules = []
    states = set()
    while toks[pos].kind != "eof":
        kw = toks[pos]
        if kw.kind != "name":
            raise ParseError(f"got {kw.text!r}", kw.span, ("init", "trans"))
        if kw.text == "init":
            if init is not None:
                raise ParseError("second init line", kw.span)
            pos += 1
            t = toks[pos]
            if t.kind != "name":
                raise ParseError(f"got {t.text!r}", t.span, ("state name",))
            init = t.text
            states.add(init)
            pos += 1
        elif kw.text == "trans":
            pos += 1
            frm = toks[pos]
            if frm.kind != "name":
                raise ParseError(f"got {frm.text!r}", frm.span, ("state name",))
            pos += 1
            ctr = toks[pos]
            if ctr.kind != "name" or ctr.text not in ("1", "2"):
                raise ParseError(f"got {ctr.text!r}", ctr.span, ("1", "2"))
            pos += 1
            op = toks[pos]
            if op.kind != "name":
                raise ParseError(f"got {op.text!r}", op.span, ("inc", "dec", "zero"))
            if op.text not in ("inc", "dec", "zero"):
                raise UnknownOpcode(f"unknown operation {op.text!r}")
            pos += 1
            to = toks[pos]
            if to.kind != "name":
                raise ParseError(f"got {to.text!r}", to.span, ("state name",))
            pos += 1
            rules.append((frm.text, int(ctr.text), op.text, to.text))
            states.update((frm.text, to.text))
        else:
            raise ParseError(f"got {kw.text!r}", kw.span, ("init", "trans"))
    if init is None:
        raise ParseError("missing init line", SourceSpan(0, 0))
    for s in states:
        if s in ("1", "2"):
            raise ParseError(f"state name {s!r} collides with a counter proposition")
    return MinskyMachine(states=tuple(sorted(states)), initial=init, rules=tuple(rules))


def print_minsky(machine) -> str:
    out = [f"init {machine.initial}"]
    for frm, ctr, op, to in machine.rules:
        out.append(f"trans {frm} {ctr} {op} {to}")
    return "\n".join(out) + "\n"


# --- star-free expressions -------------------------------------------------------


def parse_starfree(text: str):
    """Grammar: e := e + e | e e | !e | (e) | a | b | eps | empty."""
    from .encode import SFConcat, SFEmpty, SFEps, SFLetter, SFNeg, SFSum

    toks = tokenize(text)
    pos = 0

    def peek():
        return toks[pos]

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def sum_expr():
        left = concat_expr()
        while peek().kind == "+":
            take()
            left = SFSum(left, concat_expr())
        return left

    def concat_expr():
        left = unary_expr()
        while peek().kind in ("(", "!") or (
            peek().kind == "name" and peek().text in ("a", "b", "eps", "empty")
        ):
            left = SFConcat(left, unary_expr())
        return left

    def unary_expr():
        t = peek()
        if t.kind == "!":
            take()
            return SFNeg(unary_expr())
        if t.kind == "(":
            take()
            inner = sum_expr()
            tt = peek()
            if tt.kind != ")":
                raise ParseError(f"got {tt.text or 'end of input'!r}", tt.span, (")",))
            take()
            return inner
        if t.kind == "name":
            if t.text == "a":
                take()
                return SFLetter("a")
            if t.text == "b":
                take()
                return SFLetter("b")
            if t.text == "eps":
                take()
                return SFEps()
            if t.text == "empty":
                take()
                return SFEmpty()
        raise ParseError(
            f"got {t.text or 'end of input'!r}", t.span, ("a", "b", "eps", "empty", "(", "!")
        )

    e = sum_expr()
    t = peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.span, ("end of input",))
    return e


def print_starfree(e) -> str:
    from .encode import SFConcat, SFEmpty, SFEps, SFLetter, SFNeg, SFSum

    if isinstance(e, SFLetter):
        return e.letter
    if isinstance(e, SFEps):
        return "eps"
    if isinstance(e, SFEmpty):
        return "empty"
    if isinstance(e, SFNeg):
        return "!(" + print_starfree(e.body) + ")"
    if isinstance(e, SFSum):
        return "(" + print_starfree(e.left) + " + " + print_starfree(e.right) + ")"
    if isinstance(e, SFConcat):
        return "(" + print_starfree(e.left) + " " + print_starfree(e.right) + ")"
    raise TypeError(f"unexpected expression {e!r}")
