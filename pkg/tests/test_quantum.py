import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qacp.quantum import (
    DensityMatrix, QuantumOperationDef, QuantumStateError, apply_kraus, apply_operation,
    basis_state, bell_state, builtin, measure_all, pure_state, random_density_matrix,
    random_unitary, states_equal, tensor,
)


def kron_oracle(kraus, targets, rho):
    """Embed each Kraus matrix with explicit kron products and permutations."""
    qs = list(rho.qubits)
    rest = [q for q in qs if q not in targets]
    order = list(targets) + rest
    r = rho.reorder(order).matrix
    out = np.zeros_like(r)
    for k in kraus:
        full = np.kron(k, np.eye(2 ** len(rest)))
        out += full @ r @ full.conj().T
    return DensityMatrix(out, order).reorder(qs)


def test_bit_flip():
    x = builtin("X", qubits=("q",))
    out = apply_operation(x, basis_state("0", ["q"]))
    assert states_equal(out, basis_state("1", ["q"]))


def test_identity_is_exact():
    rho = random_density_matrix(["a", "b"], np.random.default_rng(0))
    out = apply_operation(builtin("I", qubits=("b",)), rho)
    assert np.array_equal(out.matrix, rho.matrix)


def test_measurement_of_bell_pair():
    out = apply_operation(measure_all("M", ["q0"]), bell_state(1))
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    assert np.max(np.abs(out.matrix - expected)) <= 1e-12


def test_bell_states_entries():
    b1 = bell_state(1).matrix
    for i, j in [(0, 0), (0, 3), (3, 0), (3, 3)]:
        assert b1[i, j] == pytest.approx(0.5)
    assert np.count_nonzero(np.abs(b1) > 1e-12) == 4
    b4 = bell_state(4).matrix
    assert b4[1, 1] == pytest.approx(0.5) and b4[2, 2] == pytest.approx(0.5)
    assert b4[1, 2] == pytest.approx(-0.5) and b4[2, 1] == pytest.approx(-0.5)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_bell_states_pure(k):
    b = bell_state(k)
    assert b.trace() == pytest.approx(1)
    assert b.purity() == pytest.approx(1)


def test_bell_state_range():
    with pytest.raises(QuantumStateError):
        bell_state(5)


def test_states_equal_examples():
    assert not states_equal(basis_state("0", ["q"]), basis_state("1", ["q"]))
    assert not states_equal(bell_state(1), bell_state(2))
    with pytest.raises(QuantumStateError):
        states_equal(basis_state("0", ["q"]), basis_state("0", ["r"]))


def test_states_equal_aligns_registers():
    rho = tensor(basis_state("0", ["a"]), basis_state("1", ["b"]))
    assert states_equal(rho, rho.reorder(["b", "a"]))


def test_incomplete_kraus_rejected():
    with pytest.raises(QuantumStateError):
        QuantumOperationDef("bad", (np.array([[1, 0], [0, 0]]),))


def test_unknown_qubit():
    with pytest.raises(QuantumStateError):
        apply_kraus([np.eye(2)], ["z"], basis_state("0", ["q"]))


def test_partial_trace_of_bell_pair_is_maximally_mixed():
    red = bell_state(1).partial_trace(["q0"])
    assert np.allclose(red.matrix, np.eye(2) / 2)


def test_tensor_inner_products():
    rng = np.random.default_rng(3)
    for _ in range(20):
        vs = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(4)]
        phi = np.kron(vs[0], vs[1])
        psi = np.kron(vs[2], vs[3])
        direct = np.vdot(phi, psi)
        factored = np.vdot(vs[0], vs[2]) * np.vdot(vs[1], vs[3])
        assert direct == pytest.approx(factored)


def test_pure_state_normalises():
    rho = pure_state([1, 1], ["q"])
    assert np.allclose(rho.matrix, np.full((2, 2), 0.5))


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3))
def test_kraus_matches_kron_oracle(seed, n):
    rng = np.random.default_rng(seed)
    qs = [f"q{i}" for i in range(n)]
    rho = random_density_matrix(qs, rng)
    k = int(rng.integers(1, n + 1))
    targets = list(rng.permutation(qs)[:k])
    u = random_unitary(k, rng)
    # a two-element channel: sqrt(p) U and sqrt(1-p) I
    p = rng.random()
    kraus = [np.sqrt(p) * u, np.sqrt(1 - p) * np.eye(2**k)]
    got = apply_kraus(kraus, targets, rho)
    assert states_equal(got, kron_oracle(kraus, targets, rho), 1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3))
def test_channels_preserve_validity(seed, n):
    rng = np.random.default_rng(seed)
    qs = [f"q{i}" for i in range(n)]
    rho = random_density_matrix(qs, rng)
    q = qs[int(rng.integers(n))]
    for op in (measure_all("M", [q]), QuantumOperationDef("U", (random_unitary(1, rng),), (q,))):
        out = apply_operation(op, rho)
        assert abs(out.trace() - 1) <= 1e-9
        assert np.min(np.linalg.eigvalsh(out.matrix)) >= -1e-9
        assert np.max(np.abs(out.matrix - out.matrix.conj().T)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_unitary_then_adjoint_is_identity(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(["a", "b"], rng)
    u = QuantumOperationDef("U", (random_unitary(2, rng),), ("a", "b"))
    back = apply_operation(u.adjoint(), apply_operation(u, rho))
    assert states_equal(back, rho)
