"""Directed axioms, AC canonical forms and normalization of closed terms.

Rules are written as patterns over :class:`~qacp.terms.Var` (with a sort),
:class:`~qacp.terms.ShadowOf` and :class:`~qacp.terms.Gamma`. A rule whose
left-hand side is a sum is matched modulo associativity and commutativity:
its two summand patterns may pick any two distinct summands of a +-spine and
the remaining summands are carried along.
"""

from __future__ import annotations

import bisect

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

from .model import CommunicationFunction
from .terms import (
    QUANTUM, SHADOW, Abstract, Binary, Choice, CommMerge, Const, Deadlock, DELTA_TERM,
    Encap, EntMerge, Gamma, LeftMerge, Merge, RecVar, Seq, ShadowOf, Term, TermError, Var,
    free_vars, rebuild, render, shadow, sort_key, sum_of, summands,
)


class RewriteError(RuntimeError):
    pass


Subst = dict


@dataclass(frozen=True)
class RewriteRule:
    id: str
    lhs: Term
    rhs: Term
    condition: Callable[[Subst, CommunicationFunction], bool] | None = None
    origin: str = "axiom"     # axiom | base | deadlock | mismatch

    def __post_init__(self):
        if isinstance(self.lhs, Var):
            raise TermError(f"{self.id}: left-hand side is a single variable")
        extra = free_vars(self.rhs) - free_vars(self.lhs)
        if extra:
            raise TermError(f"{self.id}: right-hand side variables {sorted(extra)} not in left-hand side")

    @property
    def ac(self) -> bool:
        return isinstance(self.lhs, Choice)

    def __str__(self):
        return f"{self.id}: {render(self.lhs)} -> {render(self.rhs)}"


# ---------------------------------------------------------------------------
# matching


_SORTS = {
    "term": lambda t: True,
    "atom": lambda t: isinstance(t, Const),
    "comm": lambda t: isinstance(t, Const) and t.label.is_classical,
    "qop": lambda t: isinstance(t, Const) and t.label.kind == QUANTUM,
}


def _match(p: Term, t: Term, s: Subst, deferred: list) -> bool:
    if isinstance(p, Var):
        if not _SORTS[p.sort](t):
            return False
        bound = s.get(p.name)
        if bound is not None:
            return bound == t
        s[p.name] = t
        return True
    if isinstance(p, ShadowOf):
        if not (isinstance(t, Const) and t.label.kind == SHADOW):
            return False
        deferred.append((p.var, t))
        return True
    if type(p) is not type(t):
        return False
    if isinstance(p, Binary):
        return _match(p.left, t.left, s, deferred) and _match(p.right, t.right, s, deferred)
    if isinstance(p, (Encap, Abstract)):
        return p.names == t.names and _match(p.body, t.body, s, deferred)
    return p == t


def _shadows_ok(s: Subst, deferred) -> bool:
    for var, t in deferred:
        op = s.get(var)
        if not (isinstance(op, Const) and op.label.kind == QUANTUM and t.label.shadow_of == op.label.name):
            return False
    return True


def match(p: Term, t: Term) -> Subst | None:
    """Syntactic match of pattern ``p`` against ``t``."""
    s: Subst = {}
    deferred: list = []
    if _match(p, t, s, deferred) and _shadows_ok(s, deferred):
        return s
    return None


def instantiate(p: Term, s: Mapping[str, Term], gamma: CommunicationFunction | None = None) -> Term:
    if isinstance(p, Var):
        return s[p.name]
    if isinstance(p, ShadowOf):
        return Const(shadow(s[p.var].label.name))
    if isinstance(p, Gamma):
        c = gamma(s[p.left].label, s[p.right].label) if gamma is not None else None
        if c is None:
            raise RewriteError("gamma undefined on instantiated pair")
        return Const(c)
    ch = p.children()
    if not ch:
        return p
    return rebuild(p, tuple(instantiate(c, s, gamma) for c in ch))


# ---------------------------------------------------------------------------
# rule table

x, y, z = Var("x"), Var("y"), Var("z")
u = Var("u", "qop")            # a quantum operation
a, b = Var("a", "atom"), Var("b", "atom")
nu, mu = Var("nu", "comm"), Var("mu", "comm")
S_u = ShadowOf("u")
G = Gamma("nu", "mu")
D = DELTA_TERM


def _gamma_defined(s, gamma):
    return gamma(s["nu"].label, s["mu"].label) is not None


def _no_comm(s, gamma):
    return gamma(s["a"].label, s["b"].label) is None


def _no_ent(s, gamma):
    la, lb = s["a"].label, s["b"].label
    if la.kind == QUANTUM and lb.kind == SHADOW:
        return lb.shadow_of != la.name
    if la.kind == SHADOW and lb.kind == QUANTUM:
        return la.shadow_of != lb.name
    return True


def _is_shadow(name):
    return lambda s, gamma: s[name].label.kind == SHADOW


_R = RewriteRule
RULES: tuple[RewriteRule, ...] = (
    # base: BPA with deadlock
    _R("A3", Choice(x, x), x, origin="base"),
    _R("A6", Choice(x, D), x, origin="base"),
    _R("A4", Seq(Choice(x, y), z), Choice(Seq(x, z), Seq(y, z)), origin="base"),
    _R("A5", Seq(Seq(x, y), z), Seq(x, Seq(y, z)), origin="base"),
    _R("A7", Seq(D, x), D, origin="base"),
    # shadow constant
    _R("SC1", Choice(x, Var("s", "atom")), x, _is_shadow("s")),
    _R("SC2", Seq(Var("s", "atom"), x), x, _is_shadow("s")),
    _R("SC3", Seq(x, Var("s", "atom")), x, _is_shadow("s")),
    # merge
    _R("QM1", Merge(x, y), Choice(Choice(LeftMerge(x, y), LeftMerge(y, x)),
                                  Choice(CommMerge(x, y), EntMerge(x, y)))),
    _R("QLM2", LeftMerge(a, y), Seq(a, y)),
    _R("QLM3", LeftMerge(Seq(a, x), y), Seq(a, Merge(x, y))),
    _R("QLM4", LeftMerge(Choice(x, y), z), Choice(LeftMerge(x, z), LeftMerge(y, z))),
    _R("QCM5", CommMerge(nu, mu), G, _gamma_defined),
    _R("QCM6", CommMerge(nu, Seq(mu, y)), Seq(G, y), _gamma_defined),
    _R("QCM7", CommMerge(Seq(nu, x), mu), Seq(G, x), _gamma_defined),
    _R("QCM8", CommMerge(Seq(nu, x), Seq(mu, y)), Seq(G, Merge(x, y)), _gamma_defined),
    _R("QCM9", CommMerge(Choice(x, y), z), Choice(CommMerge(x, z), CommMerge(y, z))),
    _R("QCM10", CommMerge(x, Choice(y, z)), Choice(CommMerge(x, y), CommMerge(x, z))),
    _R("QEM11", EntMerge(u, S_u), u),
    _R("QEM12", EntMerge(S_u, u), u),
    _R("QEM13", EntMerge(u, Seq(S_u, y)), Seq(u, y)),
    _R("QEM14", EntMerge(S_u, Seq(u, y)), Seq(u, y)),
    _R("QEM15", EntMerge(Seq(u, x), S_u), Seq(u, x)),
    _R("QEM16", EntMerge(Seq(S_u, x), u), Seq(u, x)),
    _R("QEM17", EntMerge(Seq(u, x), Seq(S_u, y)), Seq(u, Merge(x, y))),
    _R("QEM18", EntMerge(Seq(S_u, x), Seq(u, y)), Seq(u, Merge(x, y))),
    _R("QEM19", EntMerge(Choice(x, y), z), Choice(EntMerge(x, z), EntMerge(y, z))),
    _R("QEM20", EntMerge(x, Choice(y, z)), Choice(EntMerge(x, y), EntMerge(x, z))),
    _R("QEM21", EntMerge(D, x), D),
    _R("QEM22", EntMerge(x, D), D),
    # deadlock under the remaining merges
    _R("LMD", LeftMerge(D, x), D, origin="deadlock"),
    _R("CMD1", CommMerge(D, x), D, origin="deadlock"),
    _R("CMD2", CommMerge(x, D), D, origin="deadlock"),
    # pairs that cannot communicate or entangle deadlock
    _R("CMX1", CommMerge(a, b), D, _no_comm, origin="mismatch"),
    _R("CMX2", CommMerge(a, Seq(b, y)), D, _no_comm, origin="mismatch"),
    _R("CMX3", CommMerge(Seq(a, x), b), D, _no_comm, origin="mismatch"),
    _R("CMX4", CommMerge(Seq(a, x), Seq(b, y)), D, _no_comm, origin="mismatch"),
    _R("EMX1", EntMerge(a, b), D, _no_ent, origin="mismatch"),
    _R("EMX2", EntMerge(a, Seq(b, y)), D, _no_ent, origin="mismatch"),
    _R("EMX3", EntMerge(Seq(a, x), b), D, _no_ent, origin="mismatch"),
    _R("EMX4", EntMerge(Seq(a, x), Seq(b, y)), D, _no_ent, origin="mismatch"),
)

RULES_BY_ID = {r.id: r for r in RULES}
AXIOM_IDS = tuple(r.id for r in RULES if r.origin == "axiom")


# ---------------------------------------------------------------------------
# AC canonical form


def ac_canonical(t: Term, _cache: dict | None = None) -> Term:
    """Flatten +-spines, sort summands by :func:`sort_key`, nest to the right."""
    ch = t.children()
    if not ch:
        return t
    # the canonical form is memoised on the node itself (terms are immutable)
    hit = t.__dict__.get("_canonical")
    if hit is not None:
        return hit
    if isinstance(t, Choice):
        parts = [ac_canonical(s) for s in summands(t)]
        parts.sort(key=sort_key)
        out = sum_of(parts)
    else:
        new = tuple(ac_canonical(c) for c in ch)
        out = t if all(p is q for p, q in zip(new, ch)) else rebuild(t, new)
    object.__setattr__(t, "_canonical", out)
    if out is not t:
        object.__setattr__(out, "_canonical", out)
    return out


def ac_equal(s: Term, t: Term) -> bool:
    return ac_canonical(s) == ac_canonical(t)


# ---------------------------------------------------------------------------
# rewriting


def _left_kind(p: Term):
    # which term type a pattern position demands; None when anything may match
    if isinstance(p, Var):
        return None if p.sort == "term" else Const
    if isinstance(p, ShadowOf):
        return Const
    return type(p)


def _mark(t: Term, parts: list[Term] | None = None) -> Term:
    # record that t was built canonical (and its summands, when known)
    if t.children():
        object.__setattr__(t, "_canonical", t)
        if parts is not None and len(parts) > 1:
            object.__setattr__(t, "_summands", tuple(parts))
    return t


class Rewriter:
    """Leftmost-outermost rewriting modulo AC of + with a fixed rule table.

    Whether a subterm contains a redex depends on the subterm alone, so
    subterms found to be normal are remembered and skipped later.
    """

    _CACHE_LIMIT = 500_000

    def __init__(self, gamma: CommunicationFunction | None = None,
                 rules: tuple[RewriteRule, ...] = RULES, max_steps: int = 100_000):
        self.gamma = gamma if gamma is not None else CommunicationFunction()
        self.rules = rules
        self.max_steps = max_steps
        self._ac = [r for r in rules if r.ac]
        # rules indexed (lazily) on the root operator and the operator of
        # the left argument
        self._plain = [r for r in rules if not r.ac]
        self._index: dict[tuple, list[RewriteRule]] = {}
        self._normal: set = set()

    def canonical(self, t: Term) -> Term:
        return ac_canonical(t)

    def _try(self, rule: RewriteRule, t: Term) -> Term | None:
        s = match(rule.lhs, t)
        if s is None or (rule.condition and not rule.condition(s, self.gamma)):
            return None
        return instantiate(rule.rhs, s, self.gamma)

    def _try_ac(self, rule: RewriteRule, parts: list[Term]) -> Term | None:
        p1, p2 = rule.lhs.left, rule.lhs.right
        if len(parts) < 2:
            return None
        if isinstance(p1, Var) and p1.sort == "term":
            if p1 == p2:
                # x + x: any duplicated summand
                seen = {}
                for j, sj in enumerate(parts):
                    i = seen.setdefault(sj, j)
                    if i != j:
                        return None, parts[:j] + parts[j + 1:]
                return None
            if p1.name not in free_vars(p2):
                # x + p: x is any other summand, so only p needs a match
                for j, sj in enumerate(parts):
                    s = match(p2, sj)
                    if s is None:
                        continue
                    i = 1 if j == 0 else 0
                    s[p1.name] = parts[i]
                    if rule.condition and not rule.condition(s, self.gamma):
                        continue
                    rest = [q for k, q in enumerate(parts) if k not in (i, j)]
                    return instantiate(rule.rhs, s, self.gamma), rest
                return None
        for i, si in enumerate(parts):
            for j, sj in enumerate(parts):
                if i == j:
                    continue
                s, deferred = {}, []
                if not (_match(p1, si, s, deferred) and _match(p2, sj, s, deferred)
                        and _shadows_ok(s, deferred)):
                    continue
                if rule.condition and not rule.condition(s, self.gamma):
                    continue
                rest = [p for k, p in enumerate(parts) if k not in (i, j)]
                return instantiate(rule.rhs, s, self.gamma), rest
        return None

    def _insert(self, rest: list[Term], new: Term | None) -> Term:
        # rest is a sorted list of canonical summands; add the canonical
        # summands of new and rebuild the spine
        if new is not None:
            for p in summands(self.canonical(new)):
                bisect.insort(rest, p, key=sort_key)
        return _mark(sum_of(rest), rest)

    def _at(self, t: Term) -> tuple[Term, str] | None:
        if isinstance(t, Choice):
            parts = summands(t)
            for r in self._ac:
                hit = self._try_ac(r, parts)
                if hit is not None:
                    return self._insert(hit[1], hit[0]), r.id
        key = (type(t), type(t.left) if isinstance(t, Binary) else None)
        rules = self._index.get(key)
        if rules is None:
            rules = self._index[key] = [
                r for r in self._plain if type(r.lhs) is key[0] and (
                    key[1] is None or _left_kind(r.lhs.left) in (None, key[1]))]
        for r in rules:
            new = self._try(r, t)
            if new is not None:
                return self.canonical(new), r.id
        return None

    def _step(self, t: Term) -> tuple[Term, str] | None:
        # t is AC-canonical and so is the returned term
        if t in self._normal:
            return None
        hit = self._at(t)
        if hit is None:
            if isinstance(t, Choice):
                parts = summands(t)
                for k, p in enumerate(parts):
                    sub = self._step(p)
                    if sub is not None:
                        return self._insert(parts[:k] + parts[k + 1:], sub[0]), sub[1]
            else:
                ch = t.children()
                for k, c in enumerate(ch):
                    sub = self._step(c)
                    if sub is not None:
                        new = list(ch)
                        new[k] = sub[0]
                        return _mark(rebuild(t, tuple(new))), sub[1]
        if hit is None:
            if len(self._normal) > self._CACHE_LIMIT:
                self._normal.clear()
            self._normal.add(t)
        return hit

    def rewrite_step(self, t: Term) -> tuple[Term, str] | None:
        """One leftmost-outermost step on the AC canonical form of ``t``;
        the result is again AC-canonical."""
        return self._step(self.canonical(t))

    def steps(self, t: Term) -> Iterator[tuple[Term, Term, str]]:
        """Yield (before, after, rule id) for each step to the normal form."""
        cur = self.canonical(t)
        for _ in range(self.max_steps):
            hit = self.rewrite_step(cur)
            if hit is None:
                return
            yield cur, hit[0], hit[1]
            cur = hit[0]
        raise RewriteError(f"no normal form within {self.max_steps} steps")

    def normal_form(self, t: Term) -> tuple[Term, list[str]]:
        cur, trace = self.canonical(t), []
        for _, after, rid in self.steps(t):
            cur = after
            trace.append(rid)
        return cur, trace


def rewrite_step(t: Term, gamma: CommunicationFunction | None = None) -> tuple[Term, str] | None:
    return Rewriter(gamma).rewrite_step(t)


def normal_form(t: Term, gamma: CommunicationFunction | None = None,
                max_steps: int = 100_000) -> tuple[Term, list[str]]:
    return Rewriter(gamma, max_steps=max_steps).normal_form(t)


# ---------------------------------------------------------------------------
# weights


def _weight(t: Term, attr: str, power: int) -> int:
    if isinstance(t, (Const, Deadlock, RecVar, Var, ShadowOf, Gamma)):
        return 2
    hit = t.__dict__.get(attr)
    if hit is not None:
        return hit
    if isinstance(t, (Encap, Abstract)):
        w = _weight(t.body, attr, power)
    else:
        ws, wt = _weight(t.left, attr, power), _weight(t.right, attr, power)
        if isinstance(t, Choice):
            w = ws + wt
        elif isinstance(t, Seq):
            w = ws * ws * wt
        elif isinstance(t, Merge):
            w = 4 * (ws * wt) ** power + 1
        else:
            w = (ws * wt) ** power
    object.__setattr__(t, attr, w)
    return w


def weight(t: Term) -> int:
    """Termination weight: 2 on constants, additive on +, ``w(s)^2 w(t)`` on
    sequencing, ``4 (w(s) w(t))^2 + 1`` on merge and ``(w(s) w(t))^2`` on the
    auxiliary merges."""
    return _weight(t, "_weight2", 2)


def cubic_weight(t: Term) -> int:
    """Variant with cubes on the merge operators; it does decrease on every
    rule of the table, including the left-merge prefix rule."""
    return _weight(t, "_weight3", 3)


__all__ = ["RULES", "RULES_BY_ID", "AXIOM_IDS", "RewriteError", "RewriteRule", "Rewriter",
           "ac_canonical", "ac_equal", "cubic_weight", "instantiate", "match", "normal_form",
           "rewrite_step", "weight"]
