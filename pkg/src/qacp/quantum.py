"""Density matrices on named qubit registers and Kraus-form quantum operations."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOL = 1e-9
MAX_QUBITS = 12


class QuantumStateError(ValueError):
    pass


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A positive, unit-trace matrix over an ordered register of named qubits.

    Qubit ``qubits[0]`` is the most significant tensor factor.
    """

    matrix: np.ndarray
    qubits: tuple[str, ...]

    def __post_init__(self):
        m = _freeze(self.matrix)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "qubits", tuple(self.qubits))
        n = len(self.qubits)
        if n > MAX_QUBITS:
            raise QuantumStateError(f"register of {n} qubits exceeds cap of {MAX_QUBITS}")
        if len(set(self.qubits)) != n:
            raise QuantumStateError(f"duplicate qubit names in {self.qubits}")
        if m.shape != (2**n, 2**n):
            raise QuantumStateError(f"matrix shape {m.shape} does not match {n} qubits")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def check(self, tol: float = TOL) -> None:
        """Raise if the density-matrix invariants do not hold within ``tol``."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise QuantumStateError("matrix is not Hermitian")
        if abs(self.trace() - 1) > tol:
            raise QuantumStateError(f"trace {self.trace()} is not 1")
        lo = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
        if lo < -tol:
            raise QuantumStateError(f"negative eigenvalue {lo}")

    def is_valid(self, tol: float = TOL) -> bool:
        try:
            self.check(tol)
        except QuantumStateError:
            return False
        return True

    def reorder(self, order: Sequence[str]) -> "DensityMatrix":
        """Permute tensor factors so that the register reads ``order``."""
        order = tuple(order)
        if sorted(order) != sorted(self.qubits):
            raise QuantumStateError(f"register mismatch: {self.qubits} vs {order}")
        if order == self.qubits:
            return self
        n = len(order)
        perm = [self.qubits.index(q) for q in order]
        t = self.matrix.reshape((2,) * (2 * n))
        t = t.transpose(perm + [p + n for p in perm])
        return DensityMatrix(t.reshape(self.dim, self.dim), order)

    def partial_trace(self, keep: Sequence[str]) -> "DensityMatrix":
        """Reduced state on the qubits in ``keep`` (in that order)."""
        keep = tuple(keep)
        drop = [q for q in self.qubits if q not in keep]
        rho = self.reorder(keep + tuple(drop))
        k, d = 2 ** len(keep), 2 ** len(drop)
        t = rho.matrix.reshape(k, d, k, d)
        return DensityMatrix(np.einsum("ajbj->ab", t), keep)

    def digest(self, decimals: int = 6) -> str:
        """Short hash of the rounded entries; equal states get equal digests
        except at rounding boundaries."""
        r = np.round(self.matrix, decimals) + 0.0  # drop negative zeros
        h = hashlib.sha1(r.tobytes())
        h.update(",".join(self.qubits).encode())
        return h.hexdigest()[:12]

    def __repr__(self):
        return f"DensityMatrix(qubits={self.qubits}, digest={self.digest()})"


def tensor(*states: DensityMatrix) -> DensityMatrix:
    m = np.array([[1.0 + 0j]])
    qubits: tuple[str, ...] = ()
    for s in states:
        m = np.kron(m, s.matrix)
        qubits += s.qubits
    return DensityMatrix(m, qubits)


def basis_state(bits: str, qubits: Sequence[str]) -> DensityMatrix:
    """|bits><bits| on ``qubits``."""
    if len(bits) != len(qubits):
        raise QuantumStateError("bit string and register differ in length")
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2) if bits else 0] = 1
    return DensityMatrix(np.outer(v, v.conj()), qubits)


def pure_state(vector: Sequence[complex], qubits: Sequence[str]) -> DensityMatrix:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()), qubits)


_S = 1 / np.sqrt(2)
BELL_VECTORS = {
    1: np.array([_S, 0, 0, _S]),
    2: np.array([_S, 0, 0, -_S]),
    3: np.array([0, _S, _S, 0]),
    4: np.array([0, _S, -_S, 0]),
}


def bell_state(k: int, qubits: Sequence[str] = ("q0", "q1")) -> DensityMatrix:
    """|beta_k><beta_k| for k in 1..4 on a two-qubit register."""
    if k not in BELL_VECTORS:
        raise QuantumStateError(f"Bell index must be 1..4, got {k}")
    if len(qubits) != 2:
        raise QuantumStateError("a Bell state needs exactly two qubits")
    return pure_state(BELL_VECTORS[k], qubits)


def states_equal(a: DensityMatrix, b: DensityMatrix, tol: float = TOL) -> bool:
    """Entrywise max-norm comparison after aligning ``b`` to ``a``'s register."""
    if a is b:
        return True
    b = b.reorder(a.qubits)
    return bool(np.max(np.abs(a.matrix - b.matrix)) <= tol)


# ---------------------------------------------------------------------------
# quantum operations

_I = np.eye(2)
_X = np.array([[0, 1], [1, 0]])
_Z = np.array([[1, 0], [0, -1]])
_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
_P0 = np.array([[1, 0], [0, 0]])
_P1 = np.array([[0, 0], [0, 1]])

BUILTIN_GATES: dict[str, tuple[list[np.ndarray], int]] = {
    "I": ([_I], 1),
    "X": ([_X], 1),
    "Z": ([_Z], 1),
    "H": ([_H], 1),
    "CNOT": ([_CNOT], 2),
    "MeasZ": ([_P0, _P1], 1),
}


@dataclass(frozen=True, eq=False)
class QuantumOperationDef:
    """A named trace-preserving superoperator given by Kraus matrices.

    ``qubits`` is the default target register; a use site may name other
    qubits of the same arity.
    """

    name: str
    kraus: tuple[np.ndarray, ...]
    qubits: tuple[str, ...] = ()
    source: str = field(default="", compare=False)

    def __post_init__(self):
        ks = tuple(_freeze(k) for k in self.kraus)
        if not ks:
            raise QuantumStateError(f"{self.name}: empty Kraus family")
        d = ks[0].shape[0]
        if d & (d - 1) or any(k.shape != (d, d) for k in ks):
            raise QuantumStateError(f"{self.name}: Kraus matrices must be square 2^k x 2^k")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.qubits and len(self.qubits) != self.arity:
            raise QuantumStateError(f"{self.name}: acts on {self.arity} qubits, got {self.qubits}")
        total = sum(k.conj().T @ k for k in ks)
        if np.max(np.abs(total - np.eye(d))) > TOL:
            raise QuantumStateError(f"{self.name}: Kraus completeness sum K^dag K = I violated")

    @property
    def arity(self) -> int:
        return self.kraus[0].shape[0].bit_length() - 1

    def is_unitary(self) -> bool:
        return len(self.kraus) == 1

    def adjoint(self) -> "QuantumOperationDef":
        if not self.is_unitary():
            raise QuantumStateError(f"{self.name} is not unitary")
        return QuantumOperationDef(self.name + "_dag", (self.kraus[0].conj().T,), self.qubits)


def builtin(gate: str, name: str | None = None, qubits: Sequence[str] = ()) -> QuantumOperationDef:
    kraus, _ = BUILTIN_GATES[gate]
    return QuantumOperationDef(name or gate, tuple(kraus), tuple(qubits), source=gate)


def measure_all(name: str, qubits: Sequence[str]) -> QuantumOperationDef:
    """Outcome-summed computational-basis measurement of every qubit in ``qubits``."""
    ks = []
    for proj in itertools.product((_P0, _P1), repeat=len(qubits)):
        k = np.array([[1.0]])
        for p in proj:
            k = np.kron(k, p)
        ks.append(k)
    return QuantumOperationDef(name, tuple(ks), tuple(qubits), source="MeasZ")


def _apply_left(t: np.ndarray, k: np.ndarray, axes: list[int], n: int) -> np.ndarray:
    # t has 2n axes; contract k's input legs with ``axes`` of t
    m = len(axes)
    kt = k.reshape((2,) * (2 * m))
    out = np.tensordot(kt, t, axes=(list(range(m, 2 * m)), axes))
    # tensordot puts k's output legs first; move them back into place
    rest = [i for i in range(2 * n) if i not in axes]
    order = [0] * (2 * n)
    for j, ax in enumerate(axes):
        order[ax] = j
    for j, ax in enumerate(rest):
        order[ax] = m + j
    return out.transpose(order)


def apply_kraus(kraus: Sequence[np.ndarray], targets: Sequence[str], rho: DensityMatrix) -> DensityMatrix:
    """sum_m (K_m (x) I) rho (K_m (x) I)^dag with K_m acting on ``targets``."""
    missing = [q for q in targets if q not in rho.qubits]
    if missing:
        raise QuantumStateError(f"unknown qubit(s) {missing} in register {rho.qubits}")
    n = len(rho.qubits)
    axes = [rho.qubits.index(q) for q in targets]
    t = rho.matrix.reshape((2,) * (2 * n))
    acc = np.zeros_like(t)
    for k in kraus:
        left = _apply_left(t, k, axes, n)
        # right multiplication by K^dag == conj of left-multiplying the conjugate
        both = _apply_left(left.conj(), k, [a + n for a in axes], n).conj()
        acc += both
    return DensityMatrix(acc.reshape(rho.dim, rho.dim), rho.qubits)


def apply_operation(op: QuantumOperationDef, rho: DensityMatrix,
                    qubits: Sequence[str] | None = None) -> DensityMatrix:
    targets = tuple(qubits) if qubits else op.qubits
    if len(targets) != op.arity:
        raise QuantumStateError(f"{op.name} acts on {op.arity} qubit(s), got {targets}")
    return apply_kraus(op.kraus, targets, rho)


def random_density_matrix(qubits: Sequence[str], rng: np.random.Generator,
                          rank: int | None = None) -> DensityMatrix:
    d = 2 ** len(qubits)
    r = rank or d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m), qubits)


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    d = 2**k
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
