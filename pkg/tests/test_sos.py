import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qacp.bisim import compare
from qacp.corpus import ALL_OPS, model_atoms, random_model, random_state, random_term
from qacp.model import Model
from qacp.parser import parse_spec, parse_term
from qacp.quantum import apply_operation, basis_state, states_equal
from qacp.sos import Configuration, LtsBuilder, SOSError, build_lts, dump_lts, lts_of, step, to_dot
from qacp.terms import (
    DELTA_TERM, TAU_TERM, Choice, CommMerge, Const, Deadlock, EntMerge, LeftMerge, Merge, RecVar, Seq,
    action, contains_shadow, qop, shadow,
)

MODEL = """\
qubits q0, q1
state bell1(q0, q1)
kraus M = MeasZ on q0
kraus U = H on q1
kraus X = X on q1
gamma(a, b) = c
"""


@pytest.fixture
def m():
    return parse_spec(MODEL)


def term(text, m):
    return parse_term(text, m)


def test_shadow_step_keeps_state(m):
    rho = m.initial_state()
    (s,) = step(Configuration(term("shadow[M]", m), rho), m)
    assert s.label == shadow("M") and s.target is None
    assert states_equal(s.state, rho)


def test_matched_entanglement_measures_once(m):
    rho = m.initial_state()
    (s,) = step(Configuration(term("M >< shadow[M]", m), rho), m)
    assert s.label.name == "M" and s.label.sync and s.target is None
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    assert np.max(np.abs(s.state.matrix - expected)) <= 1e-9


def test_mismatched_entanglement_is_stuck(m):
    rho = m.initial_state()
    assert step(Configuration(term("M >< U", m), rho), m) == []
    assert step(Configuration(term("M >< shadow[U]", m), rho), m) == []
    assert step(Configuration(term("a >< shadow[M]", m), rho), m) == []


def test_sequence_chain(m):
    rho = m.initial_state()
    lts = lts_of(term("U . X", m), rho, m)
    assert len(lts) == 3 and len(lts.transitions) == 2
    final = [c for c in lts.configurations if c.term is None][0]
    want = apply_operation(m.ops["X"], apply_operation(m.ops["U"], rho))
    assert states_equal(final.state, want)


def test_deadlock_has_no_transitions(m):
    lts = lts_of(DELTA_TERM, m.initial_state(), m)
    assert len(lts) == 1 and not lts.transitions


def test_encapsulation_exempts_synchronised_steps(m):
    rho = m.initial_state()
    blocked = step(Configuration(term("encap{M, shadow[M]}(M)", m), rho), m)
    assert blocked == []
    assert step(Configuration(term("encap{M, shadow[M]}(shadow[M])", m), rho), m) == []
    (s,) = step(Configuration(term("encap{M, shadow[M]}(M >< shadow[M])", m), rho), m)
    assert s.label.name == "M" and s.label.sync


def test_encapsulation_forces_communication(m):
    rho = m.initial_state()
    labels = {s.label.key for s in step(Configuration(term("encap{a, b}(a || b)", m), rho), m)}
    assert labels == {"c"}


def test_abstraction_keeps_state_change(m):
    rho = m.initial_state()
    (s,) = step(Configuration(term("abstract{M}(M)", m), rho), m)
    assert s.label.key == "tau"
    assert states_equal(s.state, apply_operation(m.ops["M"], rho))


def test_recursion_unfolds(m):
    m2 = parse_spec(MODEL + "P = a . Q\nQ = b . P\n")
    lts = lts_of(RecVar("P"), m2.initial_state(), m2)
    assert len(lts) == 2 and not lts.truncated
    assert sorted(t.label.key for t in lts.transitions) == ["a", "b"]


def test_unresolvable_variable(m):
    with pytest.raises(SOSError):
        step(Configuration(RecVar("Nope"), m.initial_state()), m)


def test_undefined_operation(m):
    with pytest.raises(SOSError):
        step(Configuration(Const(qop("Q", ("q0",))), m.initial_state()), m)


def test_unguarded_recursion_detected():
    model = Model(definitions={"X": Choice(RecVar("X"), Const(action("a")))})
    with pytest.raises(SOSError, match="unguarded"):
        step(Configuration(RecVar("X"), basis_state("", [])), model)


def test_truncation_is_reported(m):
    lts = build_lts(Configuration(term("a . a . a . a", m), m.initial_state()), m, max_configs=3)
    assert lts.truncated and len(lts) == 3
    lts = build_lts(Configuration(term("a . a . a . a", m), m.initial_state()), m, max_depth=2)
    assert lts.truncated


def test_nodes_shared_across_roots(m):
    b = LtsBuilder(m)
    rho = m.initial_state()
    r1 = b.add(Configuration(term("a . b", m), rho))
    r2 = b.add(Configuration(term("c . b", m), rho))
    assert r1 != r2
    assert len(b.lts) == 4    # a.b, c.b, b, and the terminated node


def test_states_equal_within_tolerance_share_a_node(m):
    b = LtsBuilder(m, tol=1e-6)
    rho = m.initial_state()
    noisy = type(rho)(rho.matrix + 1e-9 * np.eye(4) - 1e-9 * np.diag([1, 0, 0, 3]), rho.qubits)
    assert b.add(Configuration(term("a", m), rho)) == b.add(Configuration(term("a", m), noisy))


def test_dump_and_dot(m):
    lts = lts_of(term("U . a", m), m.initial_state(), m)
    text = dump_lts(lts)
    assert "0 -U[q1]-> 1" in text and "1 -a-> 2" in text and "# states" in text
    assert "√" in text
    assert len(dump_lts(lts, states=True).splitlines()) > len(text.splitlines())
    dot = to_dot(lts)
    assert dot.startswith("digraph") and 'label="U[q1]"' in dot


# ---------------------------------------------------------------------------
# reference stepper for the shadow-free fragment


def reference_steps(t, rho, model):
    """(label key, target, state) triples using the plain ACP rules; quantum
    constants apply their channel, everything else leaves rho alone."""
    def fire(lab):
        if lab.kind == "quantum":
            return apply_operation(model.ops[lab.name], rho, lab.qubits)
        return rho

    def go(t):
        if isinstance(t, Const):
            return [(t.label, None, fire(t.label))]
        if isinstance(t, Deadlock):
            return []
        if isinstance(t, Choice):
            return go(t.left) + go(t.right)
        if isinstance(t, Seq):
            return [(l, t.right if x is None else Seq(x, t.right), r) for l, x, r in go(t.left)]
        if isinstance(t, (Merge, LeftMerge)):
            out = [(l, t.right if x is None else Merge(x, t.right), r) for l, x, r in go(t.left)]
            if isinstance(t, Merge):
                out += [(l, t.left if y is None else Merge(t.left, y), r) for l, y, r in go(t.right)]
                out += comm(t)
            return out
        if isinstance(t, CommMerge):
            return comm(t)
        if isinstance(t, EntMerge):
            return []     # no shadows, so nothing can ever match
        raise AssertionError(t)

    def comm(t):
        out = []
        for l1, x, r1 in go(t.left):
            for l2, y, _ in go(t.right):
                c = model.gamma(l1, l2)
                if c is None:
                    continue
                if x is None or y is None:
                    nxt = y if x is None else x
                else:
                    nxt = Merge(x, y)
                out.append((c, nxt, r1))
        return out

    return go(t)


def _normalise(steps):
    return sorted((l.key, repr(x), s.digest()) for l, x, s in steps)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_conservative_on_shadow_free_terms(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    leaves = model_atoms(model)["atom"] + [DELTA_TERM]
    t = random_term(rng, leaves, ALL_OPS, depth=3)
    assert not contains_shadow(t)
    rho = random_state(rng, model)
    got = [(s.label, s.target, s.state) for s in step(Configuration(t, rho), model)]
    assert _normalise(got) == _normalise(reference_steps(t, rho, model))


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_merge_expansion_coherent(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    leaves = model_atoms(model)["atom"] + [Const(shadow(n)) for n in model.ops]
    s = random_term(rng, leaves, ALL_OPS, depth=2)
    t = random_term(rng, leaves, ALL_OPS, depth=2)
    rho = random_state(rng, model)
    lhs = Merge(s, t)
    rhs = Choice(Choice(Choice(LeftMerge(s, t), LeftMerge(t, s)), CommMerge(s, t)), EntMerge(s, t))
    assert compare(lts_of(lhs, rho, model), lts_of(rhs, rho, model)).related


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_classical_steps_keep_state_and_sync_steps_apply_once(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    leaves = model_atoms(model)["atom"] + [Const(shadow(n)) for n in model.ops] + [TAU_TERM]
    t = random_term(rng, leaves, ALL_OPS, depth=3)
    lts = lts_of(t, random_state(rng, model), model)
    for tr in lts.transitions:
        before = lts.configurations[tr.source].state
        after = lts.configurations[tr.target].state
        if tr.label.kind != "quantum":
            assert np.array_equal(before.matrix, after.matrix)
        else:
            want = apply_operation(model.ops[tr.label.name], before, tr.label.qubits)
            assert states_equal(after, want)
