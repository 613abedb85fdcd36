"""A loaded specification: definitions, recursion, gamma, operations, register."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .quantum import DensityMatrix, QuantumOperationDef, basis_state, bell_state, tensor
from .terms import (
    COMM, ActionLabel, Const, RecVar, Seq, Term, TermError, subterms, summands,
)


class ModelError(ValueError):
    pass


class CommunicationFunction:
    """Symmetric partial map from pairs of classical labels to a result label."""

    def __init__(self, pairs: Iterable[tuple[ActionLabel, ActionLabel, ActionLabel]] = ()):
        self._table: dict[tuple[str, str], ActionLabel] = {}
        self._decls: list[tuple[ActionLabel, ActionLabel, ActionLabel]] = []
        for a, b, c in pairs:
            self.define(a, b, c)

    def define(self, a: ActionLabel, b: ActionLabel, result: ActionLabel) -> None:
        for lab in (a, b, result):
            if not lab.is_classical:
                raise ModelError(f"gamma is defined on classical actions only, got {lab.key}")
        if (a.key, b.key) in self._table:
            raise ModelError(f"gamma({a.key}, {b.key}) defined twice")
        res = ActionLabel(COMM, result.name, result.args)
        self._table[(a.key, b.key)] = res
        self._table[(b.key, a.key)] = res
        self._decls.append((a, b, result))

    def __call__(self, a: ActionLabel, b: ActionLabel) -> ActionLabel | None:
        if not (a.is_classical and b.is_classical):
            return None
        return self._table.get((a.key, b.key))

    def defined(self, a: ActionLabel, b: ActionLabel) -> bool:
        return self(a, b) is not None

    @property
    def declarations(self):
        return list(self._decls)

    def __eq__(self, other):
        return isinstance(other, CommunicationFunction) and self._table == other._table

    def __len__(self):
        return len(self._decls)


@dataclass
class RecursionSpec:
    """Guarded linear recursion: each body is a sum of ``a`` or ``a . X``."""

    equations: dict[str, Term]

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name, body in self.equations.items():
            check_linear(name, body)
            for s in subterms(body):
                if isinstance(s, RecVar) and s.name not in self.equations:
                    raise ModelError(f"{name}: variable {s.name} is not defined in its recursion specification")

    def __contains__(self, name):
        return name in self.equations

    def __len__(self):
        return len(self.equations)


def check_linear(name: str, body: Term) -> None:
    for s in summands(body):
        ok = isinstance(s, Const) or (
            isinstance(s, Seq) and isinstance(s.left, Const) and isinstance(s.right, RecVar))
        if not ok:
            raise ModelError(f"recursion body of {name} is not guarded linear: summand {s}")


@dataclass
class StateDecl:
    kind: str           # bell1..bell4, ket
    qubits: tuple[str, ...]
    bits: str = ""

    def render(self) -> str:
        if self.kind == "ket":
            return f"state ket({self.bits}; {', '.join(self.qubits)})"
        return f"state {self.kind}({', '.join(self.qubits)})"


@dataclass
class Model:
    definitions: dict[str, Term] = field(default_factory=dict)
    recursion: list[RecursionSpec] = field(default_factory=list)
    gamma: CommunicationFunction = field(default_factory=CommunicationFunction)
    ops: dict[str, QuantumOperationDef] = field(default_factory=dict)
    qubits: tuple[str, ...] = ()
    domains: dict[str, tuple[str, ...]] = field(default_factory=dict)
    sets: dict[str, frozenset] = field(default_factory=dict)
    states: list[StateDecl] = field(default_factory=list)

    @property
    def terms(self) -> dict[str, Term]:
        return self.definitions

    def definition(self, name: str) -> Term:
        try:
            return self.definitions[name]
        except KeyError:
            raise ModelError(f"unresolvable recursion variable {name}") from None

    def op(self, name: str) -> QuantumOperationDef:
        try:
            return self.ops[name]
        except KeyError:
            raise ModelError(f"quantum operation {name} is not defined") from None

    def initial_state(self) -> DensityMatrix:
        """Tensor product of the declared states, |0> on every other qubit,
        in the register's declared order."""
        if not self.qubits:
            return DensityMatrix(np.array([[1.0]]), ())
        parts, used = [], set()
        for d in self.states:
            if d.kind == "ket":
                parts.append(basis_state(d.bits, d.qubits))
            else:
                parts.append(bell_state(int(d.kind[-1]), d.qubits))
            used.update(d.qubits)
        for q in self.qubits:
            if q not in used:
                parts.append(basis_state("0", (q,)))
        return tensor(*parts).reorder(self.qubits)

    def recursion_spec_of(self, name: str) -> RecursionSpec | None:
        for spec in self.recursion:
            if name in spec:
                return spec
        return None

    def structurally_equal(self, other: "Model") -> bool:
        if (self.definitions != other.definitions or self.gamma != other.gamma
                or self.qubits != other.qubits or self.domains != other.domains
                or self.sets != other.sets or self.states != other.states):
            return False
        if [s.equations for s in self.recursion] != [s.equations for s in other.recursion]:
            return False
        if self.ops.keys() != other.ops.keys():
            return False
        for k, a in self.ops.items():
            b = other.ops[k]
            if a.qubits != b.qubits or len(a.kraus) != len(b.kraus):
                return False
            if not all(np.allclose(x, y, atol=1e-12) for x, y in zip(a.kraus, b.kraus)):
                return False
        return True


def find_recursion(definitions: Mapping[str, Term]) -> list[RecursionSpec]:
    """Group the definitions that lie on a reference cycle into recursion
    specifications (one per connected group)."""
    refs = {n: {s.name for s in subterms(b) if isinstance(s, RecVar)} for n, b in definitions.items()}
    on_cycle = {n for n in definitions if _reaches(n, n, refs)}
    groups: list[set[str]] = []
    for n in definitions:
        if n not in on_cycle or any(n in g for g in groups):
            continue
        group, todo = set(), [n]
        while todo:
            m = todo.pop()
            if m in group:
                continue
            group.add(m)
            todo.extend(r for r in refs[m] if r in on_cycle)
            todo.extend(k for k in on_cycle if m in refs[k])
        groups.append(group)
    specs = []
    for g in groups:
        eqs = {n: definitions[n] for n in definitions if n in g}
        try:
            specs.append(RecursionSpec(eqs))
        except TermError as e:  # pragma: no cover - defensive
            raise ModelError(str(e)) from e
    return specs


def _reaches(src: str, dst: str, refs) -> bool:
    seen, todo = set(), list(refs.get(src, ()))
    while todo:
        m = todo.pop()
        if m == dst:
            return True
        if m in seen:
            continue
        seen.add(m)
        todo.extend(refs.get(m, ()))
    return False

