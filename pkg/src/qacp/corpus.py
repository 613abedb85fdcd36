"""Term corpora: enumeration, random generation and small randomized models.

Used by the property tests, the acceptance sweeps and the demo scripts.
"""

from __future__ import annotations

import gc
from contextlib import contextmanager
from typing import Iterator, Sequence

import numpy as np

from .model import CommunicationFunction, Model
from .quantum import QuantumOperationDef, measure_all, random_density_matrix, random_unitary
from .rewrite import RULES, RewriteRule, instantiate, match
from .terms import (
    BINARY_OPS, DELTA_TERM, Choice, Const, Merge, Seq, Term, Var, action, qop, rebuild, shadow,
    subterms, summands,
)

ALL_OPS = BINARY_OPS               # + . || |_ | ><
BASIC_OPS = (Choice, Seq)


def enumerate_terms(leaves: Sequence[Term], ops=ALL_OPS, depth: int = 3) -> list[Term]:
    """Every term of depth <= ``depth``, each exactly once."""
    by_depth = [list(leaves)]              # terms of exactly depth d+1
    upto = list(leaves)                    # terms of depth <= d+1
    for _ in range(depth - 1):
        fresh = []
        exact = by_depth[-1]
        exact_set = set(exact)
        for op in ops:
            for l in upto:
                for r in upto:
                    if l in exact_set or r in exact_set:
                        fresh.append(op(l, r))
        by_depth.append(fresh)
        upto = upto + fresh
    return upto


def random_term(rng: np.random.Generator, leaves: Sequence[Term], ops=ALL_OPS,
                depth: int = 4, leaf_p: float = 0.3) -> Term:
    """A random term of depth <= ``depth``; each inner position becomes a leaf
    with probability ``leaf_p``."""
    if depth <= 1 or rng.random() < leaf_p:
        return leaves[rng.integers(len(leaves))]
    op = ops[rng.integers(len(ops))]
    return op(random_term(rng, leaves, ops, depth - 1, leaf_p),
              random_term(rng, leaves, ops, depth - 1, leaf_p))


def reparenthesize(t: Term, rng: np.random.Generator) -> Term:
    """Shuffle and re-bracket every +-spine (an AC-equal term)."""
    if isinstance(t, Choice):
        parts = [reparenthesize(s, rng) for s in summands(t)]
        rng.shuffle(parts)
        while len(parts) > 1:
            i = int(rng.integers(len(parts) - 1))
            parts[i:i + 2] = [Choice(parts[i], parts[i + 1])]
        return parts[0]
    ch = t.children()
    if not ch:
        return t
    return rebuild(t, tuple(reparenthesize(c, rng) for c in ch))


@contextmanager
def gc_paused():
    """Suspend the cyclic garbage collector. Term nodes never form cycles, and
    large sweeps otherwise spend much of their time in collector passes."""
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


# ---------------------------------------------------------------------------
# randomized models


def random_model(rng: np.random.Generator, qubits=("q0", "q1")) -> Model:
    """Two qubits; a random 1-qubit unitary U, a random 2-qubit unitary V,
    a measurement M; classical a, b, c, d with gamma(a,b)=c and gamma(c,c)=d."""
    ops = {
        "U": QuantumOperationDef("U", (random_unitary(1, rng),), (qubits[0],)),
        "V": QuantumOperationDef("V", (random_unitary(2, rng),), tuple(qubits)),
        "M": measure_all("M", (qubits[1],)),
    }
    gamma = CommunicationFunction([
        (action("a"), action("b"), action("c")),
        (action("c"), action("c"), action("d")),
    ])
    return Model(gamma=gamma, ops=ops, qubits=tuple(qubits))


def model_atoms(m: Model) -> dict[str, list[Const]]:
    q = [Const(qop(n, op.qubits)) for n, op in m.ops.items()]
    c = [Const(action(n)) for n in ("a", "b", "c", "d")]
    return {"qop": q, "comm": c, "atom": q + c}


def random_basic(rng: np.random.Generator, atoms: Sequence[Term], depth: int = 2,
                 leaf_p: float = 0.4) -> Term:
    """Random closed basic term (+, . over the given shadow-free atoms)."""
    return random_term(rng, atoms, BASIC_OPS, depth, leaf_p)


def random_instance(rule: RewriteRule, m: Model, rng: np.random.Generator,
                    depth: int = 2, tries: int = 200) -> tuple[Term, Term] | None:
    """Closed instance (lhs, rhs) of ``rule``: term variables get random basic
    terms, sorted variables random atoms, respecting the rule's condition."""
    atoms = model_atoms(m)
    names = {}
    for s in subterms(rule.lhs):
        if isinstance(s, Var):
            names[s.name] = s.sort
    for _ in range(tries):
        sub = {}
        for n, sort in names.items():
            if sort == "term":
                sub[n] = random_basic(rng, atoms["atom"], depth)
            else:
                pool = atoms[sort]
                sub[n] = pool[rng.integers(len(pool))]
        if rule.id in ("SC1", "SC2", "SC3"):
            u = atoms["qop"][rng.integers(len(atoms["qop"]))]
            sub["s"] = Const(shadow(u.label.name))
        if rule.condition and not rule.condition(sub, m.gamma):
            continue
        return instantiate(rule.lhs, sub, m.gamma), instantiate(rule.rhs, sub, m.gamma)
    return None


def random_state(rng: np.random.Generator, m: Model):
    """Random mixed state on the model's register, sometimes pure."""
    rank = 1 if rng.random() < 0.3 else None
    return random_density_matrix(m.qubits, rng, rank)


# ---------------------------------------------------------------------------
# sound perturbations (used for congruence checks)

SOUND_RULES = tuple(r for r in RULES if r.id not in ("SC1", "SC2", "SC3"))


def positions(t: Term, path=()) -> Iterator[tuple[tuple[int, ...], Term]]:
    yield path, t
    for i, c in enumerate(t.children()):
        yield from positions(c, path + (i,))


def replace_at(t: Term, path: tuple[int, ...], new: Term) -> Term:
    if not path:
        return new
    ch = list(t.children())
    ch[path[0]] = replace_at(ch[path[0]], path[1:], new)
    return rebuild(t, tuple(ch))


def perturb(t: Term, rng: np.random.Generator, gamma: CommunicationFunction, steps: int = 3) -> Term:
    """Apply random bisimilarity-preserving transformations at random positions:
    sound directed rules, commutativity of + and ||, and the inverses
    x -> x + x and x -> x + delta."""
    for _ in range(steps):
        pos = list(positions(t))
        path, sub = pos[rng.integers(len(pos))]
        choice = rng.integers(4)
        if choice == 0:
            new = Choice(sub, sub)
        elif choice == 1:
            new = Choice(sub, DELTA_TERM) if rng.random() < 0.5 else Choice(DELTA_TERM, sub)
        elif choice == 2 and isinstance(sub, (Choice, Merge)):
            new = type(sub)(sub.right, sub.left)
        else:
            new = None
            for r in rng.permutation(len(SOUND_RULES)):
                rule = SOUND_RULES[r]
                if rule.ac:
                    continue
                s = match(rule.lhs, sub)
                if s is not None and (rule.condition is None or rule.condition(s, gamma)):
                    new = instantiate(rule.rhs, s, gamma)
                    break
            if new is None:
                new = Choice(sub, sub)
        t = replace_at(t, path, new)
    return t


__all__ = ["ALL_OPS", "BASIC_OPS", "SOUND_RULES", "enumerate_terms", "gc_paused", "model_atoms", "perturb",
           "random_basic", "random_instance", "random_model", "random_state", "random_term",
           "reparenthesize", "replace_at", "positions"]
