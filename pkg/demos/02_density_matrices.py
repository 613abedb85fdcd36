"""Density matrices and Kraus channels on named qubits.

Run: python3 demos/02_density_matrices.py
"""
import numpy as np

from qacp.quantum import apply_operation, bell_state, builtin, measure_all, states_equal

np.set_printoptions(precision=3, suppress=True)

rho = bell_state(1)                      # (|00> + |11>)/sqrt(2) on q0, q1
print("Bell pair:\n", rho.matrix.real)

measured = apply_operation(measure_all("M", ["q0"]), rho)
print("\nafter measuring q0 (outcomes summed):\n", measured.matrix.real)
print("purity before/after:", round(rho.purity(), 3), round(measured.purity(), 3))

# a Hadamard on one half leaves the other half maximally mixed
h = builtin("H", qubits=("q1",))
print("\nreduced state of q0 after H on q1:\n", apply_operation(h, rho).partial_trace(["q0"]).matrix.real)

# equality is up to register order and a tolerance
print("\nreordered equal:", states_equal(rho, rho.reorder(["q1", "q0"])))
print("beta1 == beta2:", states_equal(bell_state(1), bell_state(2)))
