"""Structural operational semantics over configurations <term, rho>.

``step`` derives the one-step transitions of a configuration; ``build_lts``
closes a root configuration under ``step`` into a finite graph.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .model import Model, ModelError
from .quantum import TOL, DensityMatrix, apply_operation, states_equal
from .terms import (
    QUANTUM, SHADOW, TAU_LABEL, Abstract, ActionLabel, Choice, CommMerge, Const,
    Deadlock, Encap, EntMerge, LeftMerge, Merge, RecVar, Seq, Term, label_matches, render,
)

log = logging.getLogger(__name__)


class SOSError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Configuration:
    """A pair <term, state>; ``term`` is None for the terminated process."""

    term: Term | None
    state: DensityMatrix

    @property
    def terminated(self) -> bool:
        return self.term is None

    def __repr__(self):
        t = "√" if self.term is None else render(self.term)
        return f"<{t}, {self.state.digest()}>"


@dataclass(frozen=True)
class Step:
    label: ActionLabel
    target: Term | None
    state: DensityMatrix = field(compare=False)


def _join(x: Term | None, y: Term | None) -> Term | None:
    if x is None:
        return y
    if y is None:
        return x
    return Merge(x, y)


class Semantics:
    """Transition rules for a model (its definitions, gamma and operations)."""

    def __init__(self, model: Model | None = None):
        self.model = model or Model()
        self._cache: dict = {}

    def apply(self, label: ActionLabel, rho: DensityMatrix) -> DensityMatrix:
        if label.kind != QUANTUM:
            return rho
        try:
            op = self.model.op(label.name)
        except ModelError as e:
            raise SOSError(str(e)) from None
        return apply_operation(op, rho, label.qubits)

    def steps(self, t: Term, rho: DensityMatrix) -> list[Step]:
        key = (t, rho.matrix.tobytes(), rho.qubits)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = list(self._derive(t, rho, ()))
        return hit

    def _derive(self, t: Term, rho: DensityMatrix, unfolding: tuple) -> Iterator[Step]:
        if isinstance(t, Const):
            yield Step(t.label, None, self.apply(t.label, rho))
        elif isinstance(t, Deadlock):
            return
        elif isinstance(t, Choice):
            yield from self._sub(t.left, rho, unfolding)
            yield from self._sub(t.right, rho, unfolding)
        elif isinstance(t, Seq):
            for s in self._sub(t.left, rho, unfolding):
                nxt = t.right if s.target is None else Seq(s.target, t.right)
                yield Step(s.label, nxt, s.state)
        elif isinstance(t, Merge):
            sx = self._sub(t.left, rho, unfolding)
            sy = self._sub(t.right, rho, unfolding)
            for s in sx:
                yield Step(s.label, _join(s.target, t.right), s.state)
            for s in sy:
                yield Step(s.label, _join(t.left, s.target), s.state)
            yield from self._communicate(sx, sy)
            yield from self._entangle(sx, sy)
        elif isinstance(t, LeftMerge):
            for s in self._sub(t.left, rho, unfolding):
                yield Step(s.label, _join(s.target, t.right), s.state)
        elif isinstance(t, CommMerge):
            yield from self._communicate(self._sub(t.left, rho, unfolding),
                                         self._sub(t.right, rho, unfolding))
        elif isinstance(t, EntMerge):
            yield from self._entangle(self._sub(t.left, rho, unfolding),
                                      self._sub(t.right, rho, unfolding))
        elif isinstance(t, Encap):
            for s in self._sub(t.body, rho, unfolding):
                # synchronised entanglement steps are exempt from blocking
                if label_matches(s.label, t.names) and not s.label.sync:
                    continue
                yield Step(s.label, None if s.target is None else Encap(t.names, s.target), s.state)
        elif isinstance(t, Abstract):
            for s in self._sub(t.body, rho, unfolding):
                lab = TAU_LABEL if label_matches(s.label, t.names) else s.label
                yield Step(lab, None if s.target is None else Abstract(t.names, s.target), s.state)
        elif isinstance(t, RecVar):
            if t.name in unfolding:
                raise SOSError(f"unguarded recursion through {t.name}")
            try:
                body = self.model.definition(t.name)
            except ModelError as e:
                raise SOSError(str(e)) from None
            yield from self._derive(body, rho, unfolding + (t.name,))
        else:
            raise SOSError(f"cannot step open term {render(t)}")

    def _sub(self, t: Term, rho: DensityMatrix, unfolding: tuple) -> list[Step]:
        # inside an unfolding every operand position is unguarded, so the
        # set of variables being unfolded must travel with the derivation
        if unfolding:
            return list(self._derive(t, rho, unfolding))
        return self.steps(t, rho)

    def _communicate(self, sx: list[Step], sy: list[Step]) -> Iterator[Step]:
        gamma = self.model.gamma
        for a in sx:
            if not a.label.is_classical:
                continue
            for b in sy:
                c = gamma(a.label, b.label)
                if c is not None:
                    yield Step(c, _join(a.target, b.target), a.state)

    def _entangle(self, sx: list[Step], sy: list[Step]) -> Iterator[Step]:
        for a in sx:
            for b in sy:
                if a.label.kind == QUANTUM and b.label.kind == SHADOW and b.label.shadow_of == a.label.name:
                    op = a
                elif a.label.kind == SHADOW and b.label.kind == QUANTUM and a.label.shadow_of == b.label.name:
                    op = b
                else:
                    continue
                # the operation takes effect once; the shadow contributes no change
                yield Step(op.label.with_sync(True), _join(a.target, b.target), op.state)


def step(c: Configuration, model: Model | None = None, semantics: Semantics | None = None) -> list[Step]:
    """All transitions derivable from ``c`` in one rule application."""
    if c.term is None:
        return []
    sem = semantics or Semantics(model)
    return list(sem.steps(c.term, c.state))


# ---------------------------------------------------------------------------
# LTS


@dataclass
class Transition:
    source: int
    label: ActionLabel
    target: int


@dataclass
class Lts:
    configurations: list[Configuration] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    root: int = 0
    truncated: bool = False

    def __len__(self):
        return len(self.configurations)

    def out(self, i: int) -> list[Transition]:
        shape = (len(self.configurations), len(self.transitions))
        if getattr(self, "_out_shape", None) != shape:
            self._out = [[] for _ in self.configurations]
            for tr in self.transitions:
                self._out[tr.source].append(tr)
            self._out_shape = shape
        return self._out[i]

    def terminal(self, i: int) -> bool:
        return self.configurations[i].term is None

    def labels(self) -> set[str]:
        return {tr.label.key for tr in self.transitions}


class _NodeTable:
    """Configuration identity: equal term and state equal within ``tol``."""

    def __init__(self, tol: float):
        self.tol = tol
        self.by_term: dict = {}

    def find(self, term, state) -> int | None:
        for s, i in self.by_term.get(term, ()):
            if states_equal(s, state, self.tol):
                return i
        return None

    def add(self, term, state, i: int) -> None:
        self.by_term.setdefault(term, []).append((state, i))


class LtsBuilder:
    """Incremental breadth-first explorer; several roots may share one graph."""

    def __init__(self, model: Model | None = None, max_configs: int = 100_000,
                 max_depth: int | None = None, tol: float = TOL,
                 semantics: Semantics | None = None):
        if max_configs <= 0 or (max_depth is not None and max_depth <= 0):
            raise ValueError("limits must be positive")
        self.sem = semantics or Semantics(model)
        self.max_configs = max_configs
        self.max_depth = max_depth
        self.lts = Lts()
        self.table = _NodeTable(tol)

    def _node(self, term, state) -> int | None:
        j = self.table.find(term, state)
        if j is None:
            if len(self.lts.configurations) >= self.max_configs:
                self.lts.truncated = True
                return None
            j = len(self.lts.configurations)
            self.lts.configurations.append(Configuration(term, state))
            self.table.add(term, state, j)
            self._queue.append((j, self._depth))
        return j

    def add(self, root: Configuration) -> int:
        """Explore from ``root`` and return its node id."""
        lts = self.lts
        self._queue = deque()
        self._depth = 0
        r = self._node(root.term, root.state)
        if r is None:
            raise SOSError("configuration limit reached before the root was added")
        while self._queue:
            i, d = self._queue.popleft()
            conf = lts.configurations[i]
            if conf.term is None:
                continue
            if self.max_depth is not None and d >= self.max_depth:
                lts.truncated = True
                continue
            self._depth = d + 1
            seen = set()
            for s in self.sem.steps(conf.term, conf.state):
                j = self._node(s.target, s.state)
                if j is not None and (s.label, s.label.sync, j) not in seen:
                    seen.add((s.label, s.label.sync, j))
                    lts.transitions.append(Transition(i, s.label, j))
        return r


def build_lts(root: Configuration, model: Model | None = None, max_configs: int = 100_000,
              max_depth: int | None = None, tol: float = TOL,
              semantics: Semantics | None = None) -> Lts:
    """Breadth-first closure of ``root`` under ``step``.

    Exploration stops at ``max_configs`` nodes or ``max_depth`` levels; the
    LTS is then marked truncated rather than raising.
    """
    b = LtsBuilder(model, max_configs, max_depth, tol, semantics)
    b.lts.root = b.add(root)
    if b.lts.truncated:
        log.warning("LTS exploration truncated at %d configurations", len(b.lts))
    return b.lts


def lts_of(term: Term, state: DensityMatrix, model: Model | None = None, **kw) -> Lts:
    return build_lts(Configuration(term, state), model, **kw)


# ---------------------------------------------------------------------------
# export


def dump_lts(lts: Lts, states: bool = False) -> str:
    """``src -label-> dst`` records followed by the node/state table."""
    lines = [f"# root {lts.root}" + (" (truncated)" if lts.truncated else "")]
    for tr in lts.transitions:
        lines.append(f"{tr.source} -{tr.label.key}-> {tr.target}")
    lines.append("# states")
    for i, c in enumerate(lts.configurations):
        term = "√" if c.term is None else render(c.term)
        lines.append(f"{i} {c.state.digest()} {term}")
        if states:
            for row in c.state.matrix:
                lines.append("    " + " ".join(f"{z.real:+.6f}{z.imag:+.6f}i" for z in row))
    return "\n".join(lines) + "\n"


def to_dot(lts: Lts) -> str:
    out = ["digraph lts {", "  rankdir=LR;"]
    for i, c in enumerate(lts.configurations):
        shape = "doublecircle" if c.term is None else "circle"
        style = ', style=bold' if i == lts.root else ""
        out.append(f'  n{i} [label="{i}", shape={shape}{style}];')
    for tr in lts.transitions:
        lab = tr.label.key.replace('"', r'\"')
        out.append(f'  n{tr.source} -> n{tr.target} [label="{lab}"];')
    out.append("}")
    return "\n".join(out) + "\n"


__all__ = ["Configuration", "Lts", "LtsBuilder", "Semantics", "Step", "Transition", "SOSError",
           "build_lts", "dump_lts", "lts_of", "step", "to_dot"]
