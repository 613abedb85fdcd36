"""Reader and writer for the line-oriented process specification language.

Statements (one per logical line; brackets may span lines; ``#`` comments)::

    qubits qa, qb
    state bell1(qa, qb)              # also bell2..bell4, ket(01; qa, qb)
    kraus Ma = MeasZ on qa           # builtin: I X Z H CNOT MeasZ
    kraus U = [[0,1],[1,0]] on qb    # explicit Kraus list: [[..]], [[..]]
    domain Di = {d1, d2}
    set H = {send(x), Ma[qa], shadow[Ma]}
    gamma(send(x), recv(x)) = comm(x)
    P = sum{d in Di}(recv(d) . P1) + delta

Term operators by decreasing precedence: ``.``; the merges ``||``, ``|_``,
``|``, ``><`` (left-associative, mixing them needs brackets); ``+``.
Identifiers starting with an upper-case letter name definitions unless
declared as quantum operations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .model import (
    Model, ModelError, StateDecl, check_linear, find_recursion,
)
from .quantum import BUILTIN_GATES, QuantumOperationDef, QuantumStateError
from .terms import (
    ACTION, QUANTUM, TAU_TERM, ActionLabel, Choice, CommMerge, Const, DELTA_TERM,
    Abstract, Encap, EntMerge, LeftMerge, Merge, RecVar, Seq, Term, render,
    render_label, render_names, shadow,
)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"line {line}, column {col}: {msg}" if line else msg)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<op>\|\||\|_|><|[|+.∥≬·]|⌊⌊)
  | (?P<punct>[()\[\]{},;=])
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9][A-Za-z0-9_.]*)
""", re.VERBOSE)

_MERGES = {"||": Merge, "∥": Merge, "|_": LeftMerge, "⌊⌊": LeftMerge, "|": CommMerge,
           "><": EntMerge, "≬": EntMerge}
_KEYWORDS = {"delta", "tau", "shadow", "encap", "abstract", "sum", "in"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        s = m.group()
        if m.lastgroup != "ws":
            out.append(Tok(m.lastgroup, s, line, col))
        for ch in s:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
    out.append(Tok("eof", "", line, col))
    return out


def logical_lines(text: str):
    """Yield (line, col, statement) with comments removed; newlines inside
    brackets continue the statement."""
    buf, depth, start, line = [], 0, None, 1
    for raw in text.split("\n"):
        body = raw.split("#", 1)[0]
        if start is None and body.strip():
            start = (line, len(body) - len(body.lstrip()) + 1)
        buf.append(body)
        depth += sum(body.count(c) for c in "([{") - sum(body.count(c) for c in ")]}")
        if depth <= 0 and start is not None:
            stmt = "\n".join(buf).strip()
            if stmt:
                yield start[0], start[1], stmt
            buf, start, depth = [], None, 0
        elif start is None:
            buf = []
        line += 1
    if start is not None:
        raise ParseError("unbalanced brackets at end of input", *start)


class _Parser:
    def __init__(self, model: Model, toks: list[Tok], pending=frozenset()):
        self.m = model
        self.toks = toks
        self.pending = pending   # definition names not parsed yet
        self.i = 0
        self.bound: dict[str, str] = {}   # sum-bound data variables

    # token helpers
    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Tok:
        t = self.next()
        if t.text != text:
            what = "end of statement" if t.kind == "eof" else repr(t.text)
            raise self.error(f"expected {text!r}, found {what}", t)
        return t

    def ident(self) -> Tok:
        t = self.next()
        if t.kind != "id":
            raise self.error(f"expected identifier, found {t.text or 'end of statement'!r}", t)
        return t

    def at_end(self):
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")

    # terms
    def choice(self) -> Term:
        t = self.merge()
        while self.peek().text == "+":
            self.next()
            t = Choice(t, self.merge())
        return t

    def merge(self) -> Term:
        t = self.seq()
        op = None
        while self.peek().text in _MERGES:
            tok = self.next()
            cls = _MERGES[tok.text]
            if op is not None and cls is not op:
                raise self.error("mixed merge operators require parentheses", tok)
            op = cls
            t = cls(t, self.seq())
        return t

    def seq(self) -> Term:
        t = self.atom()
        while self.peek().text in (".", "·"):
            self.next()
            t = Seq(t, self.atom())
        return t

    def atom(self) -> Term:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            t = self.choice()
            self.expect(")")
            return t
        if tok.kind != "id":
            what = "end of statement" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected a term, found {what}", tok)
        name = tok.text
        if name == "delta":
            self.next()
            return DELTA_TERM
        if name == "tau":
            self.next()
            return TAU_TERM
        if name in ("encap", "abstract"):
            self.next()
            names = self.name_set()
            self.expect("(")
            body = self.choice()
            self.expect(")")
            return (Encap if name == "encap" else Abstract)(names, body)
        if name == "sum":
            return self.summation()
        if name[0].isupper() and name not in self.m.ops:
            return self.recvar()
        return Const(self.label())

    def recvar(self) -> Term:
        tok = self.next()
        if tok.text not in self.m.definitions and tok.text not in self.pending:
            raise self.error(f"unbound identifier {tok.text}", tok)
        return RecVar(tok.text)

    def summation(self) -> Term:
        self.expect("sum")
        self.expect("{")
        var = self.ident()
        self.expect("in")
        dom = self.ident()
        self.expect("}")
        if dom.text not in self.m.domains:
            raise self.error(f"unbound domain {dom.text}", dom)
        self.expect("(")
        start = self.i
        terms = []
        for value in self.m.domains[dom.text]:
            self.i = start
            saved = self.bound.get(var.text)
            self.bound[var.text] = value
            terms.append(self.choice())
            if saved is None:
                del self.bound[var.text]
            else:
                self.bound[var.text] = saved
        self.expect(")")
        acc = terms[0]
        for t in terms[1:]:
            acc = Choice(acc, t)
        return acc

    def args(self) -> tuple[str, ...]:
        out = []
        if self.peek().text != "(":
            return ()
        self.next()
        if self.peek().text != ")":
            while True:
                t = self.next()
                if t.kind not in ("id", "num"):
                    raise self.error(f"bad data argument {t.text!r}", t)
                out.append(self.bound.get(t.text, t.text))
                if self.peek().text != ",":
                    break
                self.next()
        self.expect(")")
        return tuple(out)

    def label(self) -> ActionLabel:
        tok = self.ident()
        name = tok.text
        if name == "shadow":
            self.expect("[")
            op = self.ident()
            self.expect("]")
            if op.text not in self.m.ops:
                raise self.error(f"shadow of unknown quantum operation {op.text}", op)
            return shadow(op.text)
        if name == "tau":
            return TAU_TERM.label
        if name in _KEYWORDS:
            raise self.error(f"{name} cannot be used as an action", tok)
        if self.peek().text == "[":
            self.next()
            if name not in self.m.ops:
                raise self.error(f"unbound quantum operation {name}", tok)
            qs = []
            while self.peek().text != "]":
                q = self.ident()
                if q.text not in self.m.qubits:
                    raise self.error(f"unbound qubit {q.text}", q)
                qs.append(q.text)
                if self.peek().text == ",":
                    self.next()
            self.expect("]")
            op = self.m.ops[name]
            if len(qs) != op.arity:
                raise self.error(f"{name} acts on {op.arity} qubit(s), given {len(qs)}", tok)
            return ActionLabel(QUANTUM, name, self.args(), tuple(qs))
        if name in self.m.ops:
            op = self.m.ops[name]
            if not op.qubits:
                raise self.error(f"{name} has no default qubits; write {name}[q...]", tok)
            return ActionLabel(QUANTUM, name, self.args(), op.qubits)
        return ActionLabel(ACTION, name, self.args())

    def name_set(self) -> frozenset:
        self.expect("{")
        if self.peek().kind == "id" and self.peek(1).text == "}" and self.peek().text in self.m.sets:
            s = self.m.sets[self.next().text]
            self.expect("}")
            return s
        names = set()
        while self.peek().text != "}":
            names.add(self.label().key)
            if self.peek().text == ",":
                self.next()
            elif self.peek().text != "}":
                raise self.error("expected ',' or '}'")
        self.expect("}")
        return frozenset(names)


def parse_complex(s: str) -> complex:
    s = s.strip().replace(" ", "")
    if s in ("i", "+i"):
        return 1j
    if s == "-i":
        return -1j
    if s.endswith("i"):
        body = s[:-1]
        for k in range(len(body) - 1, 0, -1):
            if body[k] in "+-" and body[k - 1] not in "eE":
                re_, im = body[:k], body[k:]
                return complex(float(re_), float(im + "1" if im in "+-" else im))
        return complex(0, float(body + "1" if body in "+-" else body))
    return complex(float(s))


def parse_matrix_list(text: str) -> list[np.ndarray]:
    """``[[a,b],[c,d]], [[..]]`` with entries written ``x``, ``x+yi``, ``yi``."""
    mats, depth, row, rows, cur = [], 0, [], [], ""
    for ch in text + ",":
        if ch == "[":
            depth += 1
            if depth > 2:
                raise ValueError("matrices nest two brackets deep")
        elif ch == "]":
            if depth == 2:
                row.append(parse_complex(cur))
                rows.append(row)
                row, cur = [], ""
            elif depth == 1:
                mats.append(np.array(rows, dtype=complex))
                rows = []
            depth -= 1
        elif ch == ",":
            if depth == 2:
                row.append(parse_complex(cur))
                cur = ""
        elif not ch.isspace():
            if depth != 2:
                raise ValueError(f"unexpected {ch!r} outside a matrix row")
            cur += ch
    if depth:
        raise ValueError("unbalanced brackets in matrix list")
    return mats


_STATEMENT = re.compile(r"^(qubits|state|kraus|domain|set|gamma)\b")
_DEFN = re.compile(r"^([A-Z][A-Za-z0-9_']*)\s*=")


def parse_spec(text: str) -> Model:
    """Parse a specification into a fully resolved :class:`Model`."""
    model = Model()
    stmts = list(logical_lines(text))
    defs: list[tuple[int, int, str, str, int]] = []
    gammas = []
    # declarations first so definitions may refer to anything declared
    order = {"qubits": 0, "kraus": 1, "state": 2, "domain": 2, "set": 3, "gamma": 3}
    decls = []
    for line, col, s in stmts:
        m = _STATEMENT.match(s)
        if m:
            decls.append((order[m.group(1)], line, col, m.group(1), s))
            continue
        d = _DEFN.match(s)
        if not d:
            raise ParseError(f"cannot parse statement {s.splitlines()[0]!r}", line, col)
        defs.append((line, col, d.group(1), s[d.end():], col + d.end()))
    decls.sort(key=lambda d: d[0])
    for _, line, col, kw, s in decls:
        if kw == "gamma":
            gammas.append((line, col, s))
            continue
        _DECL[kw](model, s[len(kw):], line, col + len(kw))
    for line, col, s in gammas:
        _gamma(model, s[len("gamma"):], line, col + 5)

    names = frozenset(d[2] for d in defs)
    for line, col, name, body, body_col in defs:
        if name in model.definitions:
            raise ParseError(f"duplicate definition of {name}", line, col)
        if name in model.ops:
            raise ParseError(f"{name} is already a quantum operation", line, col)
        p = _Parser(model, tokenize(body, line, body_col), names)
        t = p.choice()
        p.at_end()
        model.definitions[name] = t
    try:
        model.recursion = find_recursion(model.definitions)
    except ModelError as e:
        line = next((d[0] for d in defs if str(e).startswith(f"recursion body of {d[2]} ")), 0)
        raise ParseError(str(e), line, 1) from None
    return model


def _tokens(s: str, line: int, col: int, model: Model) -> _Parser:
    return _Parser(model, tokenize(s, line, col))


def _qubits(model: Model, s: str, line: int, col: int) -> None:
    p = _tokens(s, line, col, model)
    qs = []
    while p.peek().kind != "eof":
        q = p.ident()
        if q.text in qs or q.text in model.qubits:
            raise p.error(f"duplicate qubit {q.text}", q)
        qs.append(q.text)
        if p.peek().text == ",":
            p.next()
    model.qubits += tuple(qs)


def _state(model: Model, s: str, line: int, col: int) -> None:
    p = _tokens(s, line, col, model)
    kind = p.ident()
    p.expect("(")
    bits = ""
    if kind.text == "ket":
        b = p.next()
        if b.kind != "num" or set(b.text) - {"0", "1"}:
            raise p.error("ket needs a bit string", b)
        bits = b.text
        p.expect(";")
    elif kind.text not in ("bell1", "bell2", "bell3", "bell4"):
        raise p.error(f"unknown state {kind.text}", kind)
    qs = []
    while p.peek().text != ")":
        q = p.ident()
        if q.text not in model.qubits:
            raise p.error(f"unbound qubit {q.text}", q)
        if any(q.text in d.qubits for d in model.states) or q.text in qs:
            raise p.error(f"qubit {q.text} already initialised", q)
        qs.append(q.text)
        if p.peek().text == ",":
            p.next()
    p.expect(")")
    p.at_end()
    need = len(bits) if kind.text == "ket" else 2
    if len(qs) != need:
        raise p.error(f"{kind.text} needs {need} qubit(s)", kind)
    model.states.append(StateDecl(kind.text, tuple(qs), bits))


def _kraus(model: Model, s: str, line: int, col: int) -> None:
    m = re.match(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)(?:\s+on\s+([A-Za-z0-9_,\s]+))?\s*$", s, re.S)
    if not m:
        raise ParseError("malformed kraus declaration", line, col)
    name, body, on = m.groups()
    if name in model.ops:
        raise ParseError(f"duplicate quantum operation {name}", line, col)
    qubits = tuple(q.strip() for q in on.split(",")) if on else ()
    for q in qubits:
        if q not in model.qubits:
            raise ParseError(f"unbound qubit {q}", line, col)
    body = body.strip()
    try:
        if body in BUILTIN_GATES:
            kraus, _ = BUILTIN_GATES[body]
            source = body
        else:
            kraus, source = parse_matrix_list(body), ""
        model.ops[name] = QuantumOperationDef(name, tuple(kraus), qubits, source=source)
    except (ValueError, QuantumStateError) as e:
        raise ParseError(f"kraus {name}: {e}", line, col) from None


def _domain(model: Model, s: str, line: int, col: int) -> None:
    p = _tokens(s, line, col, model)
    name = p.ident()
    if name.text in model.domains:
        raise p.error(f"duplicate domain {name.text}", name)
    p.expect("=")
    p.expect("{")
    vals = []
    while p.peek().text != "}":
        v = p.next()
        if v.kind not in ("id", "num"):
            raise p.error(f"bad domain value {v.text!r}", v)
        vals.append(v.text)
        if p.peek().text == ",":
            p.next()
    p.expect("}")
    p.at_end()
    if not vals:
        raise p.error(f"domain {name.text} is empty", name)
    model.domains[name.text] = tuple(vals)


def _set(model: Model, s: str, line: int, col: int) -> None:
    p = _tokens(s, line, col, model)
    name = p.ident()
    if name.text in model.sets:
        raise p.error(f"duplicate set {name.text}", name)
    p.expect("=")
    model.sets[name.text] = p.name_set()
    p.at_end()


def _gamma(model: Model, s: str, line: int, col: int) -> None:
    p = _tokens(s, line, col, model)
    p.expect("(")
    a = p.label()
    p.expect(",")
    b = p.label()
    p.expect(")")
    p.expect("=")
    c = p.label()
    p.at_end()
    try:
        model.gamma.define(a, b, c)
    except ModelError as e:
        raise ParseError(str(e), line, col) from None


_DECL = {"qubits": _qubits, "state": _state, "kraus": _kraus, "domain": _domain, "set": _set}


# ---------------------------------------------------------------------------
# writer


def _fmt_complex(z: complex) -> str:
    re_, im = repr(float(z.real)), repr(float(z.imag))
    if z.imag == 0:
        return re_
    sign = "" if im.startswith("-") else "+"
    return f"{re_}{sign}{im}i"


def format_matrix_list(kraus) -> str:
    return ", ".join(
        "[" + ", ".join("[" + ", ".join(_fmt_complex(x) for x in row) + "]" for row in k) + "]"
        for k in kraus)


def format_spec(model: Model) -> str:
    """Render ``model`` in the specification language (sums come out expanded)."""
    out = []
    if model.qubits:
        out.append("qubits " + ", ".join(model.qubits))
    for d in model.states:
        out.append(d.render())
    for name, op in model.ops.items():
        builtin = op.source in BUILTIN_GATES and BUILTIN_GATES[op.source][1] == op.arity
        body = op.source if builtin else format_matrix_list(op.kraus)
        on = f" on {', '.join(op.qubits)}" if op.qubits else ""
        out.append(f"kraus {name} = {body}{on}")
    for name, vals in model.domains.items():
        out.append(f"domain {name} = {{{', '.join(vals)}}}")
    for name, names in model.sets.items():
        out.append(f"set {name} = {render_names(names)}")
    for a, b, c in model.gamma.declarations:
        out.append(f"gamma({render_label(a)}, {render_label(b)}) = {render_label(c)}")
    for name, body in model.definitions.items():
        out.append(f"{name} = {render(body)}")
    return "\n".join(out) + "\n"


def parse_term(text: str, model: Model | None = None) -> Term:
    """Parse a single term against ``model``'s declarations."""
    model = model or Model()
    p = _Parser(model, tokenize(text))
    t = p.choice()
    p.at_end()
    return t


def is_guarded_linear(name: str, body: Term) -> bool:
    try:
        check_linear(name, body)
    except ModelError:
        return False
    return True

