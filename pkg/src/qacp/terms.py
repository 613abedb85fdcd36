"""Process terms of qACP with the shadow constant and entanglement merge.

Terms are immutable, hashable trees. Rendering via ``str`` produces the
ASCII surface syntax accepted by :mod:`qacp.parser`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

ACTION = "action"      # classical atomic action
QUANTUM = "quantum"    # quantum operation applied to named qubits
SHADOW = "shadow"      # shadow constant of a quantum operation
COMM = "comm"          # result of gamma(nu, mu)
TAU = "tau"
DELTA = "delta"

KINDS = (ACTION, QUANTUM, SHADOW, COMM, TAU, DELTA)


class TermError(ValueError):
    pass


@dataclass(frozen=True)
class ActionLabel:
    kind: str
    name: str
    args: tuple[str, ...] = ()
    qubits: tuple[str, ...] = ()
    shadow_of: str | None = None
    # set on labels emitted by a matched (operation, shadow) step; ignored by equality
    sync: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TermError(f"unknown label kind {self.kind!r}")
        if self.kind == SHADOW:
            if self.shadow_of is None or self.qubits:
                raise TermError("a shadow names its operation and touches no qubits")
        elif self.shadow_of is not None:
            raise TermError("only shadows carry shadow_of")
        if (self.kind == TAU) != (self.name == "tau"):
            raise TermError("the name 'tau' is reserved for the silent step")
        if (self.kind == DELTA) != (self.name == "delta"):
            raise TermError("the name 'delta' is reserved for deadlock")
        if self.sync and self.kind != QUANTUM:
            raise TermError("only quantum-operation labels can be synchronised")
        if self.qubits and self.kind != QUANTUM:
            raise TermError("only quantum operations carry qubit arguments")

    @property
    def is_classical(self) -> bool:
        return self.kind in (ACTION, COMM)

    @property
    def key(self) -> str:
        """Observable identity of the label (used by bisimulation, H and I)."""
        if self.kind == SHADOW:
            return f"shadow[{self.shadow_of}]"
        s = self.name
        if self.kind == QUANTUM:
            s += "[" + ",".join(self.qubits) + "]"
        if self.args:
            s += "(" + ",".join(self.args) + ")"
        return s

    def with_sync(self, flag: bool = True) -> "ActionLabel":
        return ActionLabel(self.kind, self.name, self.args, self.qubits, self.shadow_of, flag)

    def __str__(self):
        return self.key


def action(name: str, *args: str) -> ActionLabel:
    return ActionLabel(ACTION, name, tuple(args))


def qop(name: str, qubits, *args: str) -> ActionLabel:
    return ActionLabel(QUANTUM, name, tuple(args), tuple(qubits))


def shadow(op_name: str) -> ActionLabel:
    return ActionLabel(SHADOW, "shadow", shadow_of=op_name)


TAU_LABEL = ActionLabel(TAU, "tau")


def label_matches(label: ActionLabel, names) -> bool:
    """True when ``label`` is named in ``names`` by full key or bare name."""
    return label.key in names or label.name in names and label.kind != SHADOW


# ---------------------------------------------------------------------------
# term nodes


class Term:
    __slots__ = ()

    def children(self) -> tuple["Term", ...]:
        return ()

    def __str__(self):
        return render(self)

    def __add__(self, other):
        return Choice(self, other)

    def __mul__(self, other):
        return Seq(self, other)


@dataclass(frozen=True, repr=False)
class Const(Term):
    label: ActionLabel

    def __repr__(self):
        return f"Const({self.label.key})"


@dataclass(frozen=True, repr=False)
class Deadlock(Term):
    def __repr__(self):
        return "Deadlock()"


@dataclass(frozen=True, repr=False)
class Binary(Term):
    left: Term
    right: Term

    def __post_init__(self):
        # terms are deep and used as dict keys everywhere; hash once
        object.__setattr__(self, "_hash", hash((type(self).__name__, self.left, self.right)))

    def __hash__(self):
        return self._hash

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Choice(Binary):
    pass


class Seq(Binary):
    pass


class Merge(Binary):
    pass


class LeftMerge(Binary):
    pass


class CommMerge(Binary):
    pass


class EntMerge(Binary):
    pass


@dataclass(frozen=True, repr=False)
class Encap(Term):
    names: frozenset
    body: Term

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("Encap", self.names, self.body)))

    def __hash__(self):
        return self._hash

    def children(self):
        return (self.body,)

    def __repr__(self):
        return f"Encap({sorted(self.names)}, {self.body!r})"


@dataclass(frozen=True, repr=False)
class Abstract(Term):
    names: frozenset
    body: Term

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("Abstract", self.names, self.body)))

    def __hash__(self):
        return self._hash

    def children(self):
        return (self.body,)

    def __repr__(self):
        return f"Abstract({sorted(self.names)}, {self.body!r})"


@dataclass(frozen=True, repr=False)
class RecVar(Term):
    """Reference to an equation of a recursion specification."""

    name: str

    def __repr__(self):
        return f"RecVar({self.name})"


@dataclass(frozen=True, repr=False)
class Var(Term):
    """Open-term variable. ``sort`` restricts what it may match in rewrite
    rules: ``term`` (anything), ``atom`` (any action constant),
    ``comm`` (classical action) or ``qop`` (quantum operation)."""

    name: str
    sort: str = "term"

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True, repr=False)
class ShadowOf(Term):
    """Pattern for the shadow of whatever operation ``var`` is bound to."""

    var: str

    def __repr__(self):
        return f"ShadowOf({self.var})"


@dataclass(frozen=True, repr=False)
class Gamma(Term):
    """Pattern for the communication result gamma(left, right)."""

    left: str
    right: str

    def __repr__(self):
        return f"Gamma({self.left}, {self.right})"


DELTA_TERM = Deadlock()
TAU_TERM = Const(TAU_LABEL)

BINARY_OPS = (Choice, Seq, Merge, LeftMerge, CommMerge, EntMerge)
MERGE_OPS = (Merge, LeftMerge, CommMerge, EntMerge)


def const(label: ActionLabel) -> Const:
    return Const(label)


def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        s = stack.pop()
        yield s
        stack.extend(reversed(s.children()))


def rebuild(t: Term, children) -> Term:
    if isinstance(t, Binary):
        return type(t)(*children)
    if isinstance(t, Encap):
        return Encap(t.names, children[0])
    if isinstance(t, Abstract):
        return Abstract(t.names, children[0])
    return t


def size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


def depth(t: Term) -> int:
    ch = t.children()
    return 1 + max((depth(c) for c in ch), default=0)


def free_vars(t: Term) -> set[str]:
    out = set()
    for s in subterms(t):
        if isinstance(s, Var):
            out.add(s.name)
        elif isinstance(s, ShadowOf):
            out.add(s.var)
        elif isinstance(s, Gamma):
            out.update((s.left, s.right))
    return out


def is_closed(t: Term) -> bool:
    return not free_vars(t)


def is_basic(t: Term) -> bool:
    """Whether ``t`` is built from action constants, delta, + and . only,
    with no shadow constants."""
    if not is_closed(t):
        raise TermError(f"is_basic needs a closed term, got free variables {sorted(free_vars(t))}")
    for s in subterms(t):
        if isinstance(s, Const):
            if s.label.kind == SHADOW:
                return False
        elif not isinstance(s, (Deadlock, Choice, Seq)):
            return False
    return True


def contains_shadow(t: Term) -> bool:
    return any(isinstance(s, (Const)) and s.label.kind == SHADOW or isinstance(s, ShadowOf)
               for s in subterms(t))


def apply_substitution(sigma: Mapping[str, Term], t: Term) -> Term:
    """Replace every variable named in ``sigma`` simultaneously."""
    if not sigma:
        return t
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    ch = t.children()
    if not ch:
        return t
    new = tuple(apply_substitution(sigma, c) for c in ch)
    if all(a is b for a, b in zip(new, ch)):
        return t
    return rebuild(t, new)


def compose(sigma2: Mapping[str, Term], sigma1: Mapping[str, Term]) -> dict[str, Term]:
    """The substitution ``sigma2 o sigma1`` (apply sigma1 first)."""
    out = {x: apply_substitution(sigma2, s) for x, s in sigma1.items()}
    for x, s in sigma2.items():
        out.setdefault(x, s)
    return out


def sum_of(terms) -> Term:
    """Right-nested choice over a non-empty sequence; empty gives delta."""
    terms = list(terms)
    if not terms:
        return DELTA_TERM
    acc = terms[-1]
    for s in reversed(terms[:-1]):
        acc = Choice(s, acc)
    return acc


def summands(t: Term) -> list[Term]:
    """Flatten a +-spine."""
    if not isinstance(t, Choice):
        return [t]
    hit = t.__dict__.get("_summands")
    if hit is not None:
        return list(hit)
    out, stack = [], [t]
    while stack:
        s = stack.pop()
        if isinstance(s, Choice):
            stack.append(s.right)
            stack.append(s.left)
        else:
            out.append(s)
    object.__setattr__(t, "_summands", tuple(out))
    return out


# ---------------------------------------------------------------------------
# rendering

_SYMBOL = {Choice: "+", Seq: ".", Merge: "||", LeftMerge: "|_", CommMerge: "|", EntMerge: "><"}
_LEVEL = {Choice: 1, Merge: 2, LeftMerge: 2, CommMerge: 2, EntMerge: 2, Seq: 3}


def render_label(label: ActionLabel, defaults: Mapping[str, tuple] | None = None) -> str:
    """Surface syntax of a label; with ``defaults`` (op name -> default
    qubits) an operation on its default qubits prints as the bare name."""
    if label.kind == SHADOW:
        return f"shadow[{label.shadow_of}]"
    if defaults and label.kind == QUANTUM and defaults.get(label.name) == label.qubits:
        return label.name + (f"({','.join(label.args)})" if label.args else "")
    return label.key


def render_names(names) -> str:
    return "{" + ", ".join(sorted(names)) + "}"


def render(t: Term, defaults: Mapping[str, tuple] | None = None) -> str:
    if isinstance(t, Const):
        return render_label(t.label, defaults)
    if isinstance(t, Deadlock):
        return "delta"
    if isinstance(t, RecVar):
        return t.name
    if isinstance(t, Var):
        return t.name
    if isinstance(t, ShadowOf):
        return f"shadow[{t.var}]"
    if isinstance(t, Gamma):
        return f"gamma({t.left},{t.right})"
    if isinstance(t, Encap):
        return f"encap{render_names(t.names)}({render(t.body, defaults)})"
    if isinstance(t, Abstract):
        return f"abstract{render_names(t.names)}({render(t.body, defaults)})"
    op = type(t)
    lvl = _LEVEL[op]

    def side(c: Term, right: bool) -> str:
        s = render(c, defaults)
        if isinstance(c, Binary):
            cl = _LEVEL[type(c)]
            # all operators parse left-associatively and mixed merges need
            # brackets, so only a same-operator left child goes bare
            if cl < lvl or (cl == lvl and (type(c) is not op or right)):
                s = f"({s})"
        return s

    return f"{side(t.left, False)} {_SYMBOL[op]} {side(t.right, True)}"


# ---------------------------------------------------------------------------
# structural order (used for AC canonical forms)

_RANK = {Deadlock: 0, Const: 1, RecVar: 2, Var: 3, ShadowOf: 4, Gamma: 5, Seq: 6, Choice: 7,
         Merge: 8, LeftMerge: 9, CommMerge: 10, EntMerge: 11, Encap: 12, Abstract: 13}


def sort_key(t: Term) -> tuple:
    if isinstance(t, Const):
        lab = t.label
        return (1, lab.kind, lab.name, lab.args, lab.qubits, lab.shadow_of or "")
    if isinstance(t, Deadlock):
        return (0,)
    if isinstance(t, (RecVar, Var, ShadowOf)):
        return (_RANK[type(t)], getattr(t, "name", None) or t.var)
    if isinstance(t, Gamma):
        return (5, t.left, t.right)
    k = t.__dict__.get("_sort_key")
    if k is not None:
        return k
    if isinstance(t, (Encap, Abstract)):
        k = (_RANK[type(t)], tuple(sorted(t.names)), sort_key(t.body))
    else:
        k = (_RANK[type(t)], sort_key(t.left), sort_key(t.right))
    object.__setattr__(t, "_sort_key", k)
    return k
