"""Normalise terms with the directed axioms, modulo AC of +.

Run: python3 demos/05_rewriting.py
"""
from qacp.parser import parse_spec, parse_term
from qacp.rewrite import Rewriter, cubic_weight, weight
from qacp.terms import is_basic, render

model = parse_spec("""\
qubits q0
kraus U = H on q0
gamma(a, b) = c
""")
rw = Rewriter(model.gamma)

for text in ["a || b", "(U . a) >< (shadow[U] . b)", "shadow[U] . a", "(a + delta) + a",
             "(a . b) |_ U", "shadow[U]"]:
    t = parse_term(text, model)
    nf, trace = rw.normal_form(t)
    print(f"{text}\n    -> {render(nf)}   basic={is_basic(nf)}")
    print(f"    rules: {' '.join(trace) or '-'}")

# the squared merge weight goes up on a left-merge prefix step; cubes go down
t = parse_term("(a . b) |_ U", model)
after, rule = rw.rewrite_step(t)
print(f"\n{rule}: weight {weight(t)} -> {weight(after)}, cubic weight {cubic_weight(t)} -> {cubic_weight(after)}")
