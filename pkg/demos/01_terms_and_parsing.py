"""Write a small specification, parse it, and print it back.

Run: python3 demos/01_terms_and_parsing.py
"""
from qacp.parser import ParseError, format_spec, parse_spec, parse_term
from qacp.terms import render

SOURCE = """\
qubits q0, q1
state bell1(q0, q1)
kraus M = MeasZ on q0
kraus U = H on q1
gamma(send, recv) = comm
P = M . P1
P1 = send . P
Q = shadow[M] . Q1
Q1 = recv . Q2
Q2 = U . Q
S = P >< Q
"""

model = parse_spec(SOURCE)
print("definitions:")
for name, body in model.definitions.items():
    print(f"  {name} = {render(body)}")

# a shadow names an operation; the bare name U means U on its declared qubits
t = parse_term("(U . a) >< (shadow[U] . b)", model)
print("\nterm tree:", repr(t))

print("recursive specifications:", [list(r.equations) for r in model.recursion])

print("\nformatted back to source:")
print(format_spec(model))

# errors carry a line and column
try:
    parse_spec("qubits q\n\nP = x |_")
except ParseError as e:
    print(f"parse error at {e.line}:{e.col}: {e.msg}")
