"""Strong, branching and rooted branching bisimilarity of quantum LTSs.

All three checks run signature-based partition refinement on a single graph.
Nodes start out split by termination and, when ``compare_states`` is set, by
their quantum state (clustered within the tolerance), so configurations with
different states never share a block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum import TOL, DensityMatrix, states_equal
from .sos import Lts, Transition

RELATED = "RELATED"
NOT_RELATED = "NOT-RELATED"
INCOMPARABLE = "INCOMPARABLE"

STRONG, BRANCHING, ROOTED = "strong", "branching", "rooted"
MODES = (STRONG, BRANCHING, ROOTED)


class BisimError(ValueError):
    pass


@dataclass
class EquivalenceResult:
    verdict: str
    partition: list[int] | None = None     # block of every node of the union graph
    trace: tuple[str, ...] = ()
    reason: str = ""
    offset: int = 0                        # node ids of the second LTS start here

    @property
    def related(self) -> bool:
        return self.verdict == RELATED

    @property
    def exit_code(self) -> int:
        return {RELATED: 0, NOT_RELATED: 1, INCOMPARABLE: 2}[self.verdict]

    def __bool__(self):
        return self.related

    def __str__(self):
        if self.verdict == NOT_RELATED:
            return f"{NOT_RELATED} {'.'.join(self.trace) if self.trace else '<root>'}"
        return self.verdict


# ---------------------------------------------------------------------------
# graph plumbing


def union(a: Lts, b: Lts) -> tuple[Lts, int, int]:
    """Disjoint union; returns the graph and the two root ids."""
    n = len(a.configurations)
    u = Lts(list(a.configurations) + list(b.configurations),
            list(a.transitions) + [Transition(t.source + n, t.label, t.target + n) for t in b.transitions],
            a.root, a.truncated or b.truncated)
    return u, a.root, b.root + n


class StateClasses:
    """Assigns a class id per state; states within ``tol`` share a class.

    Clustering is greedy against the first member of each class, which is
    exact whenever distinct states are further apart than twice ``tol``.
    """

    def __init__(self, tol: float = TOL):
        self.tol = tol
        self.reps: list[DensityMatrix] = []
        self._buckets: dict[tuple, list[int]] = {}

    def _bucket(self, s: DensityMatrix) -> tuple:
        # coarse bucket on the rounded diagonal; neighbours are probed too
        d = np.real(np.diag(s.matrix))
        scale = max(self.tol * 1e3, 1e-6)
        return (s.qubits, tuple(np.floor(d / scale).astype(int)))

    def of(self, s: DensityMatrix) -> int:
        key = self._bucket(s)
        cands = self._buckets.get(key, [])
        for c in cands:
            if states_equal(self.reps[c], s, self.tol):
                return c
        # rare: a neighbouring bucket (value straddling a bucket edge)
        for k, ids in self._buckets.items():
            if k[0] != s.qubits or k == key:
                continue
            if all(abs(x - y) <= 1 for x, y in zip(k[1], key[1])):
                for c in ids:
                    if states_equal(self.reps[c], s, self.tol):
                        return c
        c = len(self.reps)
        self.reps.append(s)
        self._buckets.setdefault(key, []).append(c)
        return c


class _Graph:
    def __init__(self, lts: Lts, compare_states: bool, tol: float):
        if lts.truncated:
            raise BisimError("LTS is truncated; bisimilarity needs an exhaustive exploration")
        self.lts = lts
        n = len(lts.configurations)
        self.n = n
        self.out: list[list[tuple[str, int]]] = [[] for _ in range(n)]
        for t in lts.transitions:
            self.out[t.source].append((t.label.key, t.target))
        for o in self.out:
            o.sort()
        self.classes = StateClasses(tol)
        self.initial = [
            (c.term is None, self.classes.of(c.state) if compare_states else 0)
            for c in lts.configurations
        ]


def _number(keys: Sequence) -> list[int]:
    """Deterministic block numbering: first occurrence order."""
    ids: dict = {}
    return [ids.setdefault(k, len(ids)) for k in keys]


def _strong_sig(g: _Graph, block: list[int], s: int):
    return {(a, block[t]): ((a,), t) for a, t in g.out[s]}


def _branching_sig(g: _Graph, block: list[int], s: int):
    """Observations reachable through block-internal (inert) tau steps."""
    b = block[s]
    sig: dict = {}
    seen = {s}
    stack = [(s, ())]
    while stack:
        u, path = stack.pop()
        for a, t in g.out[u]:
            if a == "tau" and block[t] == b:
                if t not in seen:
                    seen.add(t)
                    stack.append((t, path + ("tau",)))
                continue
            key = (a, block[t])
            if key not in sig or len(path) + 1 < len(sig[key][0]):
                sig[key] = (path + (a,), t)
    return sig


_SIGS = {STRONG: _strong_sig, BRANCHING: _branching_sig}


def refine(g: _Graph, kind: str) -> list[list[int]]:
    """Partition refinement; returns the block arrays of every round."""
    sig_of = _SIGS[kind]
    block = _number(g.initial)
    history = [block]
    while True:
        keys = [(block[s], frozenset(sig_of(g, block, s))) for s in range(g.n)]
        new = _number(keys)
        if max(new, default=-1) == max(block, default=-1):
            return history
        block = new
        history.append(block)


# ---------------------------------------------------------------------------
# distinguishing traces


def _explain(g: _Graph, kind: str, history: list[list[int]], s: int, t: int) -> tuple[tuple[str, ...], str]:
    trace: tuple[str, ...] = ()
    sig_of = _SIGS[kind]
    while True:
        k = next(i for i, blk in enumerate(history) if blk[s] != blk[t])
        if k == 0:
            ts, tt = g.initial[s][0], g.initial[t][0]
            if ts != tt:
                return trace, "one side terminates, the other does not"
            return trace, "quantum states differ"
        prev = history[k - 1]
        ss, st = sig_of(g, prev, s), sig_of(g, prev, t)
        only = sorted(set(ss) - set(st))
        if only:
            u, su, so = s, ss, st
        else:
            only = sorted(set(st) - set(ss))
            u, su, so = t, st, ss
        key = only[0]
        path, target = su[key]
        label = key[0]
        rivals = sorted(v for (a, _), (_, v) in so.items() if a == label)
        trace += path
        if not rivals:
            side = "first" if u == s else "second"
            return trace, f"only the {side} side can do {label}"
        s, t = (target, rivals[0]) if u == s else (rivals[0], target)


# ---------------------------------------------------------------------------
# public API


def _roots_comparable(lts: Lts, r1: int, r2: int, tol: float) -> bool:
    return states_equal(lts.configurations[r1].state, lts.configurations[r2].state, tol)


def compare(a: Lts, b: Lts, mode: str = STRONG, compare_states: bool = True,
            tol: float = TOL) -> EquivalenceResult:
    """Decide whether the roots of ``a`` and ``b`` are related under ``mode``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    u, r1, r2 = union(a, b)
    return compare_nodes(u, r1, r2, mode, compare_states, tol, offset=len(a.configurations))


def compare_nodes(lts: Lts, r1: int, r2: int, mode: str = STRONG, compare_states: bool = True,
                  tol: float = TOL, offset: int = 0) -> EquivalenceResult:
    """As :func:`compare`, for two nodes of one graph."""
    g = _Graph(lts, compare_states, tol)
    if compare_states and not _roots_comparable(lts, r1, r2, tol):
        return EquivalenceResult(INCOMPARABLE, reason="root quantum states differ", offset=offset)
    kind = STRONG if mode == STRONG else BRANCHING
    history = refine(g, kind)
    block = history[-1]
    if mode == ROOTED:
        return _rooted(g, history, r1, r2, offset)
    if block[r1] == block[r2]:
        return EquivalenceResult(RELATED, partition=block, offset=offset)
    trace, why = _explain(g, kind, history, r1, r2)
    return EquivalenceResult(NOT_RELATED, trace=trace, reason=why, offset=offset)


def _rooted(g: _Graph, history, r1: int, r2: int, offset: int) -> EquivalenceResult:
    block = history[-1]
    if g.initial[r1] != g.initial[r2]:
        trace, why = _explain(g, BRANCHING, history, r1, r2)
        return EquivalenceResult(NOT_RELATED, trace=trace, reason=why, offset=offset)
    for x, y, name in ((r1, r2, "first"), (r2, r1, "second")):
        for a, t in g.out[x]:
            if any(b == a and block[v] == block[t] for b, v in g.out[y]):
                continue
            rivals = sorted(v for b, v in g.out[y] if b == a)
            if not rivals:
                return EquivalenceResult(NOT_RELATED, trace=(a,), offset=offset,
                                         reason=f"only the {name} side can do {a} initially")
            s, t2 = (t, rivals[0]) if x == r1 else (rivals[0], t)
            rest, why = _explain(g, BRANCHING, history, s, t2)
            return EquivalenceResult(NOT_RELATED, trace=(a,) + rest, reason=why, offset=offset)
    return EquivalenceResult(RELATED, partition=block, offset=offset)


def strong_bisim(a: Lts, b: Lts, compare_states: bool = True, tol: float = TOL) -> EquivalenceResult:
    return compare(a, b, STRONG, compare_states, tol)


def branching_bisim(a: Lts, b: Lts, compare_states: bool = True, tol: float = TOL) -> EquivalenceResult:
    return compare(a, b, BRANCHING, compare_states, tol)


def rooted_branching_bisim(a: Lts, b: Lts, compare_states: bool = True,
                           tol: float = TOL) -> EquivalenceResult:
    return compare(a, b, ROOTED, compare_states, tol)


def classes(lts: Lts, mode: str = STRONG, compare_states: bool = True, tol: float = TOL) -> list[int]:
    """Final block of every node of ``lts`` (strong or branching)."""
    g = _Graph(lts, compare_states, tol)
    return refine(g, STRONG if mode == STRONG else BRANCHING)[-1]


def replay(lts: Lts, trace: Sequence[str], start: int | None = None) -> list[set[int]]:
    """Node sets reached after each prefix of ``trace`` (labels by key)."""
    cur = {lts.root if start is None else start}
    out = [cur]
    for a in trace:
        cur = {t.target for s in cur for t in lts.out(s) if t.label.key == a}
        out.append(cur)
    return out


__all__ = ["BisimError", "EquivalenceResult", "RELATED", "NOT_RELATED", "INCOMPARABLE",
           "STRONG", "BRANCHING", "ROOTED", "MODES", "StateClasses", "branching_bisim", "classes",
           "compare", "compare_nodes", "refine", "replay", "rooted_branching_bisim",
           "strong_bisim", "union"]
