"""Build the transition system of a process with an entanglement merge.

Run: python3 demos/03_transition_systems.py
"""
from qacp.parser import parse_spec
from qacp.sos import Configuration, build_lts, dump_lts, to_dot
from qacp.terms import RecVar

model = parse_spec("""\
qubits q0, q1
state bell1(q0, q1)
kraus M = MeasZ on q0
P = (M . a) >< (shadow[M] . b)
""")

lts = build_lts(Configuration(RecVar("P"), model.initial_state()), model)
# the measurement fires once, as one synchronised step of both sides
print(dump_lts(lts, states=True))

# a lone measurement under encapsulation is blocked; the synchronised one is not
blocked = parse_spec("""\
qubits q0
kraus M = MeasZ on q0
set H = {M, shadow[M]}
P = encap{H}(M . a)
Q = encap{H}((M . a) >< (shadow[M] . b))
""")
for name in ("P", "Q"):
    g = build_lts(Configuration(RecVar(name), blocked.initial_state()), blocked)
    print(f"{name}: {len(g)} configurations, labels {sorted(g.labels())}")

print("\nGraphviz output for P:")
print(to_dot(lts))
