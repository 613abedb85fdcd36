"""Compare processes up to strong, branching and rooted branching bisimilarity.

Run: python3 demos/04_bisimulation.py
"""
from qacp.bisim import branching_bisim, rooted_branching_bisim, strong_bisim
from qacp.parser import parse_spec, parse_term
from qacp.sos import lts_of

model = parse_spec("""\
qubits q0
kraus U = H on q0
""")


def lts(text):
    return lts_of(parse_term(text, model), model.initial_state(), model)


pairs = [
    ("U . (a + b)", "U . a + U . b"),       # the choice point moves
    ("U . tau . a", "U . a"),               # an inert silent step
    ("tau . a + a", "a"),                   # a silent step at the root
]
for left, right in pairs:
    a, b = lts(left), lts(right)
    print(f"{left:>14}  vs  {right:<14}")
    for name, check in (("strong", strong_bisim), ("branching", branching_bisim),
                        ("rooted", rooted_branching_bisim)):
        print(f"    {name:<11} {check(a, b)}")
    print(f"    {'labels only':<11} {strong_bisim(a, b, compare_states=False)}")

# the same name bound to different channels: labels agree, states do not
h = parse_spec("qubits q0\nkraus U = H on q0\nP = U . a")
x = parse_spec("qubits q0\nkraus U = X on q0\nP = U . a")
a = lts_of(h.definitions["P"], h.initial_state(), h)
b = lts_of(x.definitions["P"], x.initial_state(), x)
print("\nU = H vs U = X")
print(f"    {'strong':<11} {strong_bisim(a, b)}")
print(f"    {'labels only':<11} {strong_bisim(a, b, compare_states=False)}")
